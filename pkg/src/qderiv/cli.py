"""Command-line interface.

Units: bond lengths in angstrom, energies in hartree, gradients in
hartree/A, Hessians in hartree/A^2, fields and polarizabilities in atomic
units.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

DEFAULT_GRID = "0.3:1.5:11"

# per-command defaults; a JSON config may override them and flags override both
DEFAULTS: dict[str, dict[str, Any]] = {
    "scan": {"grid": DEFAULT_GRID, "shots": 0, "seed": None, "excitations": None, "out": None},
    "optimize": {"start": 1.5, "method": "newton", "hessian": "eta", "tol": 1e-3, "shots": 0,
                 "seed": None, "excitations": None, "max_iter": 100, "out": None},
    "ppe-demo": {"lambda_x": [0.2, 0.5, 1.0, 2.0], "t": None, "k_max": 7, "shots": 0, "seed": None,
                 "out": None},
    "prony": {"input": None, "n_tones": None, "t": 1.0, "out": None},
    "polarizability": {"grid": DEFAULT_GRID, "space": "both", "excitations": None, "out": None},
    "hamiltonian": {"bond_length": 0.7414, "field": 0.0, "space": 2, "out": None},
    "qse": {"bond_length": 0.7414, "space": 2, "excitations": None, "shots": 0, "seed": None, "out": None},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved parameters of one command."""

    command: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in DEFAULTS:
            raise ConfigError(f"unknown command {self.command!r}")
        unknown = set(self.params) - set(DEFAULTS[self.command])
        if unknown:
            raise ConfigError(f"unknown keys for {self.command}: {sorted(unknown)}")

    @classmethod
    def resolve(cls, command: str, file_values: dict | None = None, flags: dict | None = None) -> "RunConfig":
        merged = dict(DEFAULTS.get(command, {}))
        for layer in (file_values or {}, flags or {}):
            unknown = set(layer) - set(merged)
            if unknown:
                raise ConfigError(f"unknown keys for {command}: {sorted(unknown)}")
            merged.update(layer)
        return cls(command, merged)

    def to_json(self) -> str:
        return json.dumps({"command": self.command, **self.params}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        command = data.pop("command", None)
        if command is None:
            raise ConfigError("config needs a 'command' key")
        return cls.resolve(command, data)

    def __getitem__(self, key: str):
        return self.params[key]


def parse_grid(text: str | Sequence[float]) -> list[float]:
    """``"a:b:n"`` (n evenly spaced points) or a comma list."""
    if not isinstance(text, str):
        grid = [float(x) for x in text]
    elif ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad grid {text!r}; expected start:stop:count")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ConfigError("grid needs at least one point")
        grid = list(np.linspace(a, b, n))
    else:
        grid = [float(x) for x in text.split(",") if x.strip()]
    if not grid:
        raise ConfigError("empty grid")
    return [float(x) for x in grid]


def _words(value) -> list[str] | None:
    if value is None:
        return None
    words = value.split(",") if isinstance(value, str) else list(value)
    words = [w.strip().upper() for w in words if w.strip()]
    if not words:
        raise ConfigError("empty excitation list")
    return words


def _shots(cfg: RunConfig):
    from qderiv.simulator import ShotConfig

    n = int(cfg["shots"] or 0)
    return ShotConfig(n, cfg["seed"]) if n > 0 else None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- commands


def cmd_scan(cfg: RunConfig) -> int:
    from qderiv.gradients import scan, scan_to_csv

    rows = scan(parse_grid(cfg["grid"]), _shots(cfg), _words(cfg["excitations"]))
    _emit(scan_to_csv(rows), cfg["out"])
    return 0


def cmd_optimize(cfg: RunConfig) -> int:
    from qderiv.gradients import optimize_geometry

    trace = optimize_geometry(cfg["method"], cfg["hessian"], float(cfg["start"]), float(cfg["tol"]),
                              _shots(cfg), int(cfg["max_iter"]), excitations=_words(cfg["excitations"]))
    _emit(trace.to_csv(), cfg["out"])
    f = trace.final
    print(f"status={trace.status} R={f.R:.6f} E={f.E:.10f} iterations={trace.n_iter} "
          f"n_fev={trace.n_fev} n_grad={trace.n_gradient} n_hess={trace.n_hessian}",
          file=sys.stderr if not cfg["out"] else sys.stdout)
    for note in trace.notes:
        print(note, file=sys.stderr)
    return 0 if trace.success else 1


def cmd_ppe_demo(cfg: RunConfig) -> int:
    from qderiv.ppe import PPEConfig, toy_table

    lambdas = cfg["lambda_x"]
    lambdas = [lambdas] if isinstance(lambdas, (int, float)) else [float(x) for x in lambdas]
    k = int(cfg["k_max"])
    t = cfg["t"]
    shots = int(cfg["shots"] or 0)
    rows = []
    for lx in lambdas:
        if t is not None and float(t) * abs(lx) >= np.pi / 2:
            raise ConfigError(f"t * lambda_x = {float(t) * abs(lx):.3f} >= pi/2 wraps the phase")
        exact = toy_table(lx, PPEConfig(t=t, k0_max=k, k1_max=k))
        rows.append([lx, "analytic", exact["zz"], exact["xz"], exact["xx"]])
        if shots:
            s = toy_table(lx, PPEConfig(t=t, k0_max=k, k1_max=k, n_meas=shots, seed=cfg["seed"]))
            rows.append([lx, "sampled", s["zz"], s["xz"], s["xx"]])
    _emit(_csv(["lambda_x", "mode", "d2E_dlz2", "d2E_dlxdlz", "d2E_dlx2"], rows), cfg["out"])
    return 0


def cmd_prony(cfg: RunConfig) -> int:
    from qderiv.spectral import PhaseSignal, prony

    if not cfg["input"]:
        raise ConfigError("prony needs --input")
    text = Path(cfg["input"]).read_text()
    sig = PhaseSignal.from_csv(text, t=float(cfg["t"]))
    n = None if cfg["n_tones"] is None else int(cfg["n_tones"])
    _emit(prony(sig, n_tones=n).to_csv(), cfg["out"])
    return 0


def cmd_polarizability(cfg: RunConfig) -> int:
    from qderiv.gradients import polarizability_zz

    space = str(cfg["space"])
    if space not in ("2", "4", "both"):
        raise ConfigError("space must be 2, 4 or both")
    ex = _words(cfg["excitations"])
    rows = []
    for r in parse_grid(cfg["grid"]):
        a2 = polarizability_zz(r, "eta", 2, ex) if space in ("2", "both") else np.nan
        a4 = polarizability_zz(r, "eta", 4, ex) if space in ("4", "both") else np.nan
        fd = polarizability_zz(r, "fd", 2 if space == "2" else 4)
        rows.append([r, a2, a4, fd])
    _emit(_csv(["R", "alpha_2q", "alpha_4q", "alpha_fd"], rows), cfg["out"])
    return 0


def cmd_hamiltonian(cfg: RunConfig) -> int:
    from qderiv.chem.family import h2_qubit_hamiltonian

    op = h2_qubit_hamiltonian(float(cfg["bond_length"]), float(cfg["field"]), int(cfg["space"]))
    _emit(op.to_json() + "\n", cfg["out"])
    return 0


def cmd_qse(cfg: RunConfig) -> int:
    from qderiv.chem.family import h2_qubit_hamiltonian
    from qderiv.response import DEFAULT_EXCITATIONS_2Q, QSEBasis, complete_basis, qse_matrices
    from qderiv.simulator import diagonalize, prepare_state

    space = int(cfg["space"])
    H = h2_qubit_hamiltonian(float(cfg["bond_length"]), 0.0, space)
    ex = _words(cfg["excitations"]) or (list(DEFAULT_EXCITATIONS_2Q) if space == 2 else complete_basis(space))
    state = prepare_state(diagonalize(H))
    res = qse_matrices(QSEBasis.build(ex, state), H, _shots(cfg))
    labels = [next(iter(e.terms)) if len(e) == 1 else str(i) for i, e in enumerate(res.basis.excitations)]
    rows = []
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            rows.append([a, b, res.S[i, j].real, res.S[i, j].imag, res.H[i, j].real, res.H[i, j].imag])
    _emit(_csv(["row", "col", "S_re", "S_im", "H_re", "H_im"], rows), cfg["out"])
    print("qse energies: " + " ".join(f"{e:.10f}" for e in res.energies), file=sys.stderr)
    return 0


COMMANDS = {
    "scan": cmd_scan,
    "optimize": cmd_optimize,
    "ppe-demo": cmd_ppe_demo,
    "prony": cmd_prony,
    "polarizability": cmd_polarizability,
    "hamiltonian": cmd_hamiltonian,
    "qse": cmd_qse,
}


def _lambda_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qderiv",
        description="Energy derivatives of H2/STO-3G from simulated quantum measurements.",
        epilog="Lengths in angstrom; energies in hartree; fields and polarizabilities in atomic units.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file with defaults for this command (flags win)")
        p.add_argument("--out", help="write output here instead of stdout")
        return p

    p = add("scan", "energies, gradient and Hessians along a bond-length grid")
    p.add_argument("--grid", help=f"start:stop:count or comma list (default {DEFAULT_GRID})")
    p.add_argument("--shots", type=int, help="measurements per Pauli term (0 = exact)")
    p.add_argument("--seed", type=int)
    p.add_argument("--excitations", help="comma-separated Pauli words for the ETA Hessian")

    p = add("optimize", "bond-length optimization; writes the trace")
    p.add_argument("--start", type=float, help="initial bond length (default 1.5)")
    p.add_argument("--method", choices=["newton", "cg", "nelder-mead"])
    p.add_argument("--hessian", choices=["eta", "hf", "fd"], help="Hessian source for Newton")
    p.add_argument("--tol", type=float, help="gradient tolerance in hartree/A (default 1e-3)")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--excitations")
    p.add_argument("--max-iter", dest="max_iter", type=int)

    p = add("ppe-demo", "second derivatives of the one-qubit toy model")
    p.add_argument("--lambda-x", dest="lambda_x", type=_lambda_list, help="comma list (default 0.2,0.5,1,2)")
    p.add_argument("--t", type=float, help="evolution unit; needs t * lambda_x < pi/2")
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)

    p = add("prony", "fit tones to a k,re,im signal CSV")
    p.add_argument("--input", help="signal CSV")
    p.add_argument("--n-tones", dest="n_tones", type=int, help="default: estimated from the data")
    p.add_argument("--t", type=float, help="sample spacing (default 1)")

    p = add("polarizability", "zz polarizability along a bond-length grid")
    p.add_argument("--grid")
    p.add_argument("--space", choices=["2", "4", "both"])
    p.add_argument("--excitations")

    p = add("hamiltonian", "dump the qubit Hamiltonian as JSON")
    p.add_argument("--bond-length", dest="bond_length", type=float)
    p.add_argument("--field", type=float)
    p.add_argument("--space", type=int, choices=[2, 4])

    p = add("qse", "subspace-expansion matrices as CSV")
    p.add_argument("--bond-length", dest="bond_length", type=float)
    p.add_argument("--space", type=int, choices=[2, 4])
    p.add_argument("--excitations")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    return parser


def config_from_args(argv: Sequence[str] | None = None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    path = ns.pop("config", None)
    file_values = {}
    if path:
        file_values = json.loads(Path(path).read_text())
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
        file_values.pop("command", None)
    return RunConfig.resolve(command, file_values, ns)


def main(argv: Sequence[str] | None = None) -> int:
    from qderiv.spectral import SpectralError

    try:
        cfg = config_from_args(argv)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, SpectralError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
