"""Energy gradients, Hessians, geometry optimization and polarizabilities for H2."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from qderiv.chem.family import OperatorFamily, h2_family, h2_qubit_hamiltonian
from qderiv.chem.integrals import sto3g_h2_integrals
from qderiv.chem.scf import rhf
from qderiv.ppe import PPEConfig, ppe_second_derivative
from qderiv.response import complete_basis, eta_second_derivative
from qderiv.simulator import (
    PreparedState,
    ShotConfig,
    diagonalize,
    expectation,
    prepare_state,
    sample_expectation,
)

R_MIN = 0.3
R_MAX = 3.0
FD_STEPS = {1: 5e-5, 2: 1e-4}
FIELD_FD_STEP = 1e-4
NEWTON_MAX_STEP = 0.5
HESSIAN_FLOOR = 1e-8
METHODS = ("hellmann-feynman", "eta", "ppe", "direct-fd")


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = 0.0


def _ground(family: OperatorFamily, at, subspace=None) -> PreparedState:
    return prepare_state(diagonalize(family(at), subspace))


def hellmann_feynman_gradient(
    family: OperatorFamily,
    at: Mapping[str, float] | None,
    which: str,
    state: PreparedState | None = None,
    shots: ShotConfig | None = None,
    rng: np.random.Generator | None = None,
) -> Estimate:
    """``<Psi_0| dH/dlambda |Psi_0>`` exactly or from sampled Pauli means."""
    state = _ground(family, at) if state is None else state
    d = family.derivative(at, (which,))
    if shots is None:
        return Estimate(expectation(state, d))
    s = sample_expectation(state, d, shots, rng)
    return Estimate(s.mean, s.stderr)


# second-order central stencils on a uniform grid: (offset, weight)
_FD_STENCILS = {
    1: ((1, 0.5), (-1, -0.5)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
}


@dataclass(frozen=True)
class FDResult:
    value: float
    step: float
    noise_amplification: float  # 1/step**order
    stderr: float = 0.0


def fd_stencil(energy: Callable[[float], Estimate | float], x: float, order: int, step: float) -> FDResult:
    """Central difference of a scalar function with second-order accuracy.

    Raises:
        ValueError: non-positive step or unsupported order.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if order not in _FD_STENCILS:
        raise ValueError("order must be 1 or 2")
    value = var = 0.0
    for off, w in _FD_STENCILS[order]:
        e = energy(x + off * step)
        e = e if isinstance(e, Estimate) else Estimate(float(e))
        value += w * e.value
        var += (w * e.stderr) ** 2
    scale = step**-order
    return FDResult(value * scale, step, scale, float(np.sqrt(var)) * scale)


def ground_energy_source(
    family: OperatorFamily,
    at: Mapping[str, float] | None,
    which: str,
    shots: ShotConfig | None = None,
    rng: np.random.Generator | None = None,
) -> Callable[[float], Estimate]:
    """Exact ground energy along one parameter, or a shot-sampled ``<H>`` in that ground state."""
    base = family.point(at)
    if shots is not None and rng is None:
        rng = shots.rng()

    def energy(x: float) -> Estimate:
        pt = dict(base, **{which: x})
        H = family(pt)
        eig = diagonalize(H)
        if shots is None:
            return Estimate(eig.ground_energy)
        s = sample_expectation(prepare_state(eig), H, shots, rng)
        return Estimate(s.mean, s.stderr)

    return energy


def direct_fd_derivative(
    family: OperatorFamily,
    at: Mapping[str, float] | None,
    which: str,
    order: int = 1,
    step: float | None = None,
    energy_source: Callable[[float], Estimate | float] | None = None,
    shots: ShotConfig | None = None,
) -> FDResult:
    """Finite difference of the ground energy in one parameter.

    Args:
        step: defaults to 5e-5 (first order) or 1e-4 (second order).
        energy_source: scalar function of the parameter; defaults to the exact
            (or, with ``shots``, sampled) ground energy of ``family``.
    """
    x = family.point(at)[which]
    source = energy_source or ground_energy_source(family, at, which, shots)
    return fd_stencil(source, x, order, FD_STEPS.get(order, 0.0) if step is None else step)


def hf_energy(bond_length: float) -> float:
    return rhf(sto3g_h2_integrals(bond_length)).e_hf


def hf_hessian(bond_length: float, step: float = FD_STEPS[2]) -> float:
    """Curvature of the Hartree-Fock energy curve (hartree/A^2)."""
    return fd_stencil(hf_energy, bond_length, 2, step).value


def fci_energy(bond_length: float, space: int = 2) -> float:
    return diagonalize(h2_qubit_hamiltonian(bond_length, 0.0, space)).ground_energy


@dataclass(frozen=True)
class DerivativeRequest:
    """One energy derivative of ``family`` at ``at``.

    ``index`` lists parameter names with repetition, e.g. ``("R", "R")``.
    """

    family: OperatorFamily
    at: Mapping[str, float]
    index: tuple[str, ...]
    method: str = "hellmann-feynman"
    shots: ShotConfig | None = None
    excitations: Sequence | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if len(self.index) not in (1, 2):
            raise ValueError("total derivative order must be 1 or 2")
        if self.method == "hellmann-feynman" and len(self.index) != 1:
            raise ValueError("Hellmann-Feynman gives first derivatives only")
        if self.method in ("eta", "ppe") and len(self.index) != 2:
            raise ValueError(f"{self.method} gives second derivatives only")
        if self.method == "direct-fd" and len(set(self.index)) != 1:
            raise ValueError("direct-fd supports a single parameter")

    def evaluate(self) -> Estimate:
        if self.method == "hellmann-feynman":
            return hellmann_feynman_gradient(self.family, self.at, self.index[0], shots=self.shots)
        if self.method == "direct-fd":
            r = direct_fd_derivative(self.family, self.at, self.index[0], len(self.index), shots=self.shots)
            return Estimate(r.value, r.stderr)
        pair = (self.index[0], self.index[1])
        if self.method == "eta":
            return Estimate(eta_second_derivative(self.family, self.at, pair, self.excitations, self.shots).value)
        cfg = PPEConfig() if self.shots is None else PPEConfig(n_meas=self.shots.n_meas, seed=self.shots.seed)
        return Estimate(ppe_second_derivative(self.family, self.at, pair, cfg).value)


class PESModel:
    """Bond-length energy surface of two-qubit H2 with evaluation counters.

    Args:
        hessian_source: ``"eta"`` (subspace response), ``"hf"`` (Hartree-Fock
            curvature) or ``"fd"`` (finite difference of exact energies).
        shots: sample energies, gradients and the ETA Hessian when given.
        excitations: ETA excitation set; ``XY`` by default.
    """

    def __init__(self, hessian_source: str = "eta", shots: ShotConfig | None = None,
                 excitations: Sequence | None = None):
        if hessian_source not in ("eta", "hf", "fd"):
            raise ValueError(f"unknown Hessian source {hessian_source!r}")
        self.family = h2_family(2)
        self.hessian_source = hessian_source
        self.shots = shots
        self.excitations = excitations
        self.rng = shots.rng() if shots is not None else None
        self.n_energy = self.n_gradient = self.n_hessian = 0
        self.energy_log: dict[float, float] = {}

    def _at(self, r: float) -> dict:
        return {"R": float(r), "F": 0.0}

    def _sub_shots(self) -> ShotConfig | None:
        if self.shots is None:
            return None
        return ShotConfig(self.shots.n_meas, int(self.rng.integers(2**31)))

    def energy(self, r: float) -> float:
        self.n_energy += 1
        H = self.family(self._at(r))
        state = _ground(self.family, self._at(r))
        e = expectation(state, H) if self.shots is None else \
            sample_expectation(state, H, self.shots, self.rng).mean
        self.energy_log[float(r)] = e
        return e

    def gradient(self, r: float) -> float:
        self.n_gradient += 1
        return hellmann_feynman_gradient(self.family, self._at(r), "R", shots=self.shots, rng=self.rng).value

    def hessian(self, r: float) -> float:
        self.n_hessian += 1
        if self.hessian_source == "hf":
            return hf_hessian(r)
        if self.hessian_source == "fd":
            return direct_fd_derivative(self.family, self._at(r), "R", 2).value
        return eta_second_derivative(self.family, self._at(r), ("R", "R"), self.excitations,
                                     self._sub_shots()).value

    @property
    def n_fev(self) -> int:
        return self.n_energy


@dataclass(frozen=True)
class OptStep:
    iteration: int
    R: float
    E: float
    J: float  # dE/dR
    K: float  # d2E/dR2 (nan when not evaluated)
    n_fev: int  # energy evaluations so far


@dataclass
class OptTrace:
    method: str
    hessian_source: str
    steps: list[OptStep] = field(default_factory=list)
    status: str = "running"
    n_energy: int = 0
    n_gradient: int = 0
    n_hessian: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def n_fev(self) -> int:
        """Energy evaluations; gradients and Hessians are counted separately."""
        return self.n_energy

    @property
    def n_total(self) -> int:
        return self.n_energy + self.n_gradient + self.n_hessian

    @property
    def success(self) -> bool:
        return self.status == "converged"

    @property
    def final(self) -> OptStep:
        return self.steps[-1]

    @property
    def n_iter(self) -> int:
        return self.steps[-1].iteration

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "R", "E", "J", "K", "n_fev"])
        for s in self.steps:
            w.writerow([s.iteration, repr(s.R), repr(s.E), repr(s.J), repr(s.K), s.n_fev])
        return buf.getvalue()


def _clamp(r_old: float, r_new: float, r_min: float) -> float:
    # stop halfway to the bound rather than crossing it
    return r_new if r_new > r_min else 0.5 * (r_old + r_min)


def _newton(model: PESModel, trace: OptTrace, r: float, tol: float, max_iter: int, r_min: float) -> None:
    for it in range(max_iter + 1):
        e, j = model.energy(r), model.gradient(r)
        if abs(j) < tol:
            trace.steps.append(OptStep(it, r, e, j, np.nan, model.n_fev))
            trace.status = "converged"
            return
        if it == max_iter:
            trace.steps.append(OptStep(it, r, e, j, np.nan, model.n_fev))
            break
        k = model.hessian(r)
        trace.steps.append(OptStep(it, r, e, j, k, model.n_fev))
        if abs(k) < HESSIAN_FLOOR:
            trace.notes.append(f"iteration {it}: Hessian {k:.2e} below floor, gradient step used")
            step = -j
        else:
            step = -j / abs(k)
        step = float(np.clip(step, -NEWTON_MAX_STEP, NEWTON_MAX_STEP))
        r = _clamp(r, r + step, r_min)
    trace.status = "max_iter"


def _cg(model: PESModel, trace: OptTrace, r: float, tol: float, max_iter: int, r_min: float,
        armijo: float = 1e-4, shrink: float = 0.5) -> None:
    """Polak-Ribiere conjugate gradient with Armijo backtracking.

    The first trial step of each line search is the secant (Barzilai-Borwein)
    length from the previous iterate when the curvature estimate is positive.
    """
    e, g = model.energy(r), model.gradient(r)
    d, alpha, g_prev, r_prev = -g, 1.0, None, None
    for it in range(max_iter + 1):
        trace.steps.append(OptStep(it, r, e, g, np.nan, model.n_fev))
        if abs(g) < tol:
            trace.status = "converged"
            return
        if it == max_iter:
            break
        if g_prev is not None:
            beta = max(0.0, g * (g - g_prev) / g_prev**2)
            d = -g + beta * d
            if d * g >= 0:  # not a descent direction: restart
                d = -g
        a = alpha
        if g_prev is not None and (g - g_prev) * (r - r_prev) > 0:
            a = abs((r - r_prev) / (g - g_prev)) * abs(g / d)
        for _ in range(60):
            r_try = r + a * d
            if r_try > r_min and r_try <= R_MAX:
                e_try = model.energy(r_try)
                if e_try <= e + armijo * a * d * g:
                    break
            a *= shrink
        else:
            trace.status = "line_search_failed"
            return
        r_prev, r, e, g_prev = r, r_try, e_try, g
        g = model.gradient(r)
        alpha = min(2.0 * a, 10.0)
    trace.status = "max_iter"


def _nelder_mead(model: PESModel, trace: OptTrace, r: float, tol: float, max_iter: int, r_min: float) -> None:
    it = [0]

    def record(xk):
        it[0] += 1
        x = float(np.ravel(xk)[0])
        trace.steps.append(OptStep(it[0], x, model.energy_log.get(x, np.nan), np.nan, np.nan, model.n_fev))

    e0 = model.energy(r)
    trace.steps.append(OptStep(0, r, e0, np.nan, np.nan, model.n_fev))
    res = minimize(
        lambda x: model.energy(float(x[0])), [r], method="Nelder-Mead",
        bounds=[(r_min, R_MAX)], callback=record,
        options={"initial_simplex": [[r], [r + 0.1 if r + 0.1 <= R_MAX else r - 0.1]],
                 "xatol": 1e-6, "fatol": 1e-10, "maxiter": max_iter},
    )
    x = float(res.x[0])
    j = model.gradient(x)
    trace.steps.append(OptStep(it[0] + 1, x, float(res.fun), j, np.nan, model.n_fev))
    trace.status = "converged" if abs(j) < tol else ("max_iter" if res.nit >= max_iter else "not_converged")


_OPTIMIZERS = {"newton": _newton, "cg": _cg, "nelder-mead": _nelder_mead}


def optimize_geometry(
    method: str = "newton",
    hessian_source: str = "eta",
    start: float = 1.5,
    tol: float = 1e-3,
    shots: ShotConfig | None = None,
    max_iter: int = 100,
    r_min: float = R_MIN,
    excitations: Sequence | None = None,
) -> OptTrace:
    """Minimize the two-qubit H2 ground energy over the bond length (A).

    Newton steps use ``-J/|K|`` capped at 0.5 A. Convergence means
    ``|dE/dR| < tol`` (hartree/A). Iterates stay above ``r_min``.

    Raises:
        ValueError: start outside ``[r_min, 3.0]`` or unknown method.
    """
    if method not in _OPTIMIZERS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(_OPTIMIZERS)}")
    if not r_min <= start <= R_MAX:
        raise ValueError(f"start {start} outside [{r_min}, {R_MAX}] A")
    model = PESModel(hessian_source, shots, excitations)
    trace = OptTrace(method, hessian_source if method == "newton" else "none")
    _OPTIMIZERS[method](model, trace, float(start), tol, max_iter, r_min)
    trace.n_energy, trace.n_gradient, trace.n_hessian = model.n_energy, model.n_gradient, model.n_hessian
    return trace


def polarizability_zz(
    bond_length: float,
    method: str = "eta",
    qubit_space: int = 4,
    excitations: Sequence | None = None,
    step: float = FIELD_FD_STEP,
) -> float:
    """Static polarizability along the bond, ``-d2E/dF^2`` at zero field (a.u.).

    Args:
        method: ``"eta"`` (subspace response; complete basis by default) or
            ``"fd"`` (finite difference of exact energies in the field).
        qubit_space: 2 (pair-sector projected) or 4 (full spin-orbital register).
    """
    if qubit_space not in (2, 4):
        raise ValueError("qubit_space must be 2 or 4")
    fam = h2_family(qubit_space)
    at = {"R": float(bond_length), "F": 0.0}
    if method == "eta":
        ex = complete_basis(qubit_space) if excitations is None else excitations
        return -eta_second_derivative(fam, at, ("F", "F"), ex).value
    if method == "fd":
        return -direct_fd_derivative(fam, at, "F", 2, step).value
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class ScanRow:
    R: float
    E_fci: float
    E_hf: float
    dE_dR: float
    d2E_dR2_eta: float
    d2E_dR2_hf: float


SCAN_COLUMNS = ("R", "E_fci", "E_hf", "dE/dR", "d2E/dR2_eta", "d2E/dR2_hf")


def scan(grid: Sequence[float], shots: ShotConfig | None = None, excitations: Sequence | None = None) -> list[ScanRow]:
    """Energies, Hellmann-Feynman gradient and both Hessians along ``grid`` (A)."""
    if len(grid) == 0:
        raise ValueError("empty grid")
    fam = h2_family(2)
    rng = shots.rng() if shots is not None else None
    rows = []
    for r in grid:
        at = {"R": float(r), "F": 0.0}
        sub = None if shots is None else ShotConfig(shots.n_meas, int(rng.integers(2**31)))
        state = _ground(fam, at)
        grad = hellmann_feynman_gradient(fam, at, "R", state, sub)
        eta = eta_second_derivative(fam, at, ("R", "R"), excitations, sub, state=state)
        rows.append(ScanRow(float(r), state.eig.ground_energy, hf_energy(r), grad.value, eta.value, hf_hessian(r)))
    return rows


def scan_to_csv(rows: Sequence[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for row in rows:
        w.writerow([repr(v) for v in (row.R, row.E_fci, row.E_hf, row.dE_dR, row.d2E_dR2_eta, row.d2E_dR2_hf)])
    return buf.getvalue()


def fd_step_sweep(
    family: OperatorFamily,
    at: Mapping[str, float],
    which: str,
    steps: Sequence[float],
    shots: ShotConfig,
    n_seeds: int = 50,
    order: int = 2,
    reference: float | None = None,
) -> np.ndarray:
    """Root-mean-square error of sampled finite differences for each step."""
    if reference is None:
        reference = direct_fd_derivative(family, at, which, order, None).value
    rng = shots.rng()
    out = []
    for h in steps:
        errs = []
        for _ in range(n_seeds):
            src = ground_energy_source(family, at, which, shots, rng)
            errs.append(direct_fd_derivative(family, at, which, order, h, src).value - reference)
        out.append(np.sqrt(np.mean(np.square(errs))))
    return np.array(out)
