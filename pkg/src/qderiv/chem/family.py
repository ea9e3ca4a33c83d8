"""Parametrized operator families and their finite-difference derivatives."""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

from qderiv.chem.hamiltonian import fermion_hamiltonian, jordan_wigner, project_two_qubit
from qderiv.chem.integrals import sto3g_h2_integrals
from qderiv.chem.scf import rhf
from qderiv.operators import QubitOperator

DEFAULT_STEP = 1e-3

# one-dimensional central stencils, fourth-order accurate: offsets in units
# of the step, and weights to be divided by step**order
_STENCILS = {
    1: ((2.0, -1 / 12), (1.0, 8 / 12), (-1.0, -8 / 12), (-2.0, 1 / 12)),
    2: ((2.0, -1 / 12), (1.0, 16 / 12), (0.0, -30 / 12), (-1.0, 16 / 12), (-2.0, -1 / 12)),
    3: ((3.0, -1 / 8), (2.0, 1.0), (1.0, -13 / 8), (-1.0, 13 / 8), (-2.0, -1.0), (-3.0, 1 / 8)),
}


class FamilyEvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OperatorFamily:
    """Deterministic map from a parameter point to a Hermitian qubit operator.

    Attributes:
        name: label used by the CLI and in JSON dumps.
        params: parameter names, in canonical order.
        evaluator: callable taking a full ``{name: value}`` mapping.
        n_qubits: qubit count of every emitted operator.
        fd_steps: finite-difference step per parameter.
        units: unit label per parameter.
        defaults: values used for parameters not given at evaluation time.
        analytic_derivative: optional exact derivative, called as
            ``fn(point, multi_index)``; used by ``derivative`` instead of
            finite differences when present.
    """

    name: str
    params: tuple[str, ...]
    evaluator: Callable[[Mapping[str, float]], QubitOperator]
    n_qubits: int
    fd_steps: Mapping[str, float] = field(default_factory=dict)
    units: Mapping[str, str] = field(default_factory=dict)
    defaults: Mapping[str, float] = field(default_factory=dict)
    analytic_derivative: Callable[[Mapping[str, float], tuple[str, ...]], QubitOperator] | None = None

    def point(self, at: Mapping[str, float] | None = None, **kwargs) -> dict[str, float]:
        merged = dict(self.defaults)
        merged.update(at or {})
        merged.update(kwargs)
        unknown = set(merged) - set(self.params)
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)} for family {self.name!r}")
        missing = [p for p in self.params if p not in merged]
        if missing:
            raise KeyError(f"missing values for {missing}")
        return {p: float(merged[p]) for p in self.params}

    def step(self, name: str) -> float:
        return float(self.fd_steps.get(name, DEFAULT_STEP))

    def __call__(self, at: Mapping[str, float] | None = None, **kwargs) -> QubitOperator:
        pt = self.point(at, **kwargs)
        try:
            op = self.evaluator(pt)
        except Exception as exc:  # surface the point that failed
            raise FamilyEvaluationError(f"{self.name} failed at {pt}: {exc}") from exc
        if not op.is_hermitian:
            raise FamilyEvaluationError(f"{self.name} produced a non-Hermitian operator at {pt}")
        return op

    def derivative(self, at: Mapping[str, float] | None, which: str | Sequence[str]) -> QubitOperator:
        """Derivative operator for a multi-index such as ``("R", "R")``."""
        index = (which,) if isinstance(which, str) else tuple(which)
        if self.analytic_derivative is not None:
            return self.analytic_derivative(self.point(at), index)
        return fd_multi_derivative(self, at, index)


def fd_multi_derivative(
    family: OperatorFamily, at: Mapping[str, float] | None, index: Sequence[str]
) -> QubitOperator:
    """Tensor-product central differences; per-parameter order up to 3."""
    base = family.point(at)
    counts = Counter(index)
    if not counts:
        return family(base)
    stencils = []
    for name, order in counts.items():
        if name not in family.params:
            raise KeyError(f"unknown parameter {name!r}")
        if order not in _STENCILS:
            raise ValueError(f"finite-difference order {order} not supported")
        h = family.step(name)
        stencils.append([(name, off * h, w / h**order) for off, w in _STENCILS[order]])
    acc = QubitOperator.zero(family.n_qubits)
    for combo in itertools.product(*stencils):
        pt = dict(base)
        weight = 1.0
        for name, shift, w in combo:
            pt[name] = base[name] + shift
            weight *= w
        acc = acc + weight * family(pt)
    # real weights on Hermitian operators; drop imaginary round-off
    return QubitOperator(family.n_qubits, {w: v.real for w, v in acc.terms.items()})


def fd_operator_derivative(
    family: OperatorFamily, at: Mapping[str, float] | None, which: str, order: int = 1
) -> QubitOperator:
    """Central finite difference of ``family`` in a single parameter.

    Both orders use five-point stencils with fourth-order accuracy.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return fd_multi_derivative(family, at, (which,) * order)


def combine(families: Sequence[OperatorFamily], coeffs: Sequence[float], name: str = "combined") -> OperatorFamily:
    """Linear combination of families sharing one parameter set."""
    first = families[0]
    coeffs = [float(c) for c in coeffs]

    def evaluator(pt):
        acc = QubitOperator.zero(first.n_qubits)
        for fam, c in zip(families, coeffs):
            acc = acc + c * fam.evaluator(pt)
        return acc

    return OperatorFamily(name, first.params, evaluator, first.n_qubits, first.fd_steps, first.units, first.defaults)


# ---------------------------------------------------------------- H2 family


@lru_cache(maxsize=8192)
def h2_qubit_hamiltonian(bond_length: float, field: float = 0.0, space: int = 2) -> QubitOperator:
    """H2/STO-3G qubit Hamiltonian with a static z field ``H + F * mu_z``.

    Orbitals come from an RHF calculation that includes the field, so the
    4-qubit operator is exact for every ``F``. The 2-qubit operator keeps
    only the pair block; that is exact at ``F = 0`` and an approximation
    otherwise, because the field mixes in open-shell configurations.

    Args:
        bond_length: H-H distance in angstrom.
        field: field strength in atomic units.
        space: 4 for the full JW operator, 2 for the pair-block reduction.
    """
    if space not in (2, 4):
        raise ValueError("space must be 2 or 4")
    ints = sto3g_h2_integrals(bond_length)
    h_field = ints.h_core - field * ints.z_ints
    mos = rhf(ints, h_core=h_field)
    op4 = jordan_wigner(fermion_hamiltonian(ints, mos))
    return op4 if space == 4 else project_two_qubit(op4)


def h2_family(space: int = 2, r_step: float = DEFAULT_STEP, f_step: float = DEFAULT_STEP) -> OperatorFamily:
    """Family over bond length ``R`` (angstrom) and field ``F`` (a.u.)."""
    if space not in (2, 4):
        raise ValueError("space must be 2 or 4")
    return OperatorFamily(
        name=f"h2-{space}q",
        params=("R", "F"),
        evaluator=lambda pt: h2_qubit_hamiltonian(pt["R"], pt["F"], space),
        n_qubits=space,
        fd_steps={"R": r_step, "F": f_step},
        units={"R": "angstrom", "F": "a.u."},
        defaults={"R": 0.7414, "F": 0.0},
    )


# ---------------------------------------------------------------- toy family


def _toy_derivative(pt: Mapping[str, float], index: tuple[str, ...]) -> QubitOperator:
    if len(index) == 1:
        return QubitOperator(1, {"X" if index[0] == "lx" else "Z": 1.0})
    return QubitOperator.zero(1)


def toy_family() -> OperatorFamily:
    """One-qubit family ``lx * X + lz * Z`` with exact derivatives."""
    return OperatorFamily(
        name="toy",
        params=("lx", "lz"),
        evaluator=lambda pt: QubitOperator(1, {"X": pt["lx"], "Z": pt["lz"]}),
        n_qubits=1,
        fd_steps={"lx": DEFAULT_STEP, "lz": DEFAULT_STEP},
        units={"lx": "a.u.", "lz": "a.u."},
        defaults={"lx": 1.0, "lz": 0.0},
        analytic_derivative=_toy_derivative,
    )


def family_samples(family: OperatorFamily, points: Sequence[Mapping[str, float]]) -> list[dict]:
    """JSON-ready dump of a family at several points."""
    return [{"point": family.point(p), "operator": family(p).to_dict()} for p in points]

