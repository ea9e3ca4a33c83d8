"""Exact eigenbasis simulator with shot-noise measurement models."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qderiv.operators import MAX_DENSE_QUBITS, OperatorError, QubitOperator, decompose_hermitian

DEGENERACY_TOL = 1e-10


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a Hermitian operator, ascending in energy.

    ``states`` holds full-register column vectors even when only a subspace
    was diagonalized.
    """

    energies: np.ndarray
    states: np.ndarray
    matrix: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.energies)

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0]) if self.n_states > 1 else np.inf

    @property
    def spectral_norm(self) -> float:
        return float(np.max(np.abs(self.energies)))

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.states[:, 0]

    def matrix_elements(self, op: QubitOperator | np.ndarray) -> np.ndarray:
        """``<Psi_i|O|Psi_j>`` for all eigenstates."""
        m = op.to_matrix() if isinstance(op, QubitOperator) else np.asarray(op)
        return self.states.conj().T @ m @ self.states

    def residual(self) -> float:
        r = self.matrix @ self.states - self.states * self.energies
        return float(np.max(np.linalg.norm(r, axis=0), initial=0.0))


def _canonical_block(vecs: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis for the span of ``vecs``."""
    dim, k = vecs.shape
    proj = vecs @ vecs.conj().T
    out = []
    for col in range(dim):
        v = proj[:, col].copy()
        for u in out:
            v -= u * (u.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            out.append(v / nrm)
            if len(out) == k:
                break
    return np.column_stack(out)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(v) > 1e-8))
    return v * (abs(v[idx]) / v[idx])


def sector_basis(n_qubits: int, n_particles: int) -> np.ndarray:
    """Isometry onto computational states with ``n_particles`` ones."""
    idx = [x for x in range(2**n_qubits) if bin(x).count("1") == n_particles]
    basis = np.zeros((2**n_qubits, len(idx)))
    basis[idx, np.arange(len(idx))] = 1.0
    return basis


def diagonalize(op: QubitOperator | np.ndarray, subspace: np.ndarray | None = None) -> EigenDecomposition:
    """Dense diagonalization, optionally inside an invariant subspace.

    Args:
        op: Hermitian operator or its dense matrix.
        subspace: isometry (columns orthonormal) spanning an invariant
            subspace, e.g. from ``sector_basis``.

    Raises:
        SimulationError: register too large or non-Hermitian input.
    """
    if isinstance(op, QubitOperator):
        if op.n_qubits > MAX_DENSE_QUBITS:
            raise SimulationError(f"{op.n_qubits} qubits exceeds the dense limit {MAX_DENSE_QUBITS}")
        if not op.is_hermitian:
            raise SimulationError("diagonalize needs a Hermitian operator")
        mat = op.to_matrix()
    else:
        mat = np.asarray(op, dtype=complex)
        if not np.allclose(mat, mat.conj().T, atol=1e-12):
            raise SimulationError("diagonalize needs a Hermitian matrix")
    iso = np.eye(mat.shape[0]) if subspace is None else np.asarray(subspace)
    small = iso.conj().T @ mat @ iso
    energies, vecs = np.linalg.eigh(0.5 * (small + small.conj().T))
    vecs = iso @ vecs
    start = 0
    while start < len(energies):
        stop = start + 1
        while stop < len(energies) and energies[stop] - energies[start] < DEGENERACY_TOL:
            stop += 1
        block = _canonical_block(vecs[:, start:stop])
        vecs[:, start:stop] = np.column_stack([_fix_phase(block[:, j]) for j in range(block.shape[1])])
        start = stop
    return EigenDecomposition(energies, vecs, mat)


def default_time(eig: EigenDecomposition, fraction: float = 0.5) -> float:
    """``fraction * pi / ||H||``; the default keeps every ``E_j t`` inside (-pi/2, pi/2)."""
    norm = eig.spectral_norm
    if norm == 0.0:
        raise SimulationError("zero operator has no natural time scale")
    return fraction * np.pi / norm


@dataclass(frozen=True)
class PreparedState:
    """State expanded in the eigenbasis of ``eig``."""

    amplitudes: np.ndarray
    eig: EigenDecomposition = field(repr=False)
    kind: str = "exact"

    def __post_init__(self):
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > 1e-12:
            raise SimulationError(f"state norm {norm} differs from 1")

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def vector(self) -> np.ndarray:
        return self.eig.states @ self.amplitudes

    @property
    def energy(self) -> float:
        return float(np.sum(self.populations * self.eig.energies))


def prepare_state(
    eig: EigenDecomposition,
    kind: str = "exact",
    depletion: float = 0.0,
    seed: int | None = None,
    support: Sequence[int] | None = None,
) -> PreparedState:
    """Ground state, or an approximate ground state with weight removed from it.

    The depleted state keeps ``|a_0|^2 = 1 - depletion``. The removed weight
    goes to ``support`` (default: the next three eigenstates) with weights
    halving from one state to the next and seed-chosen signs.
    """
    if kind not in ("exact", "depleted"):
        raise SimulationError(f"unknown preparation kind {kind!r}")
    if not 0.0 <= depletion < 1.0:
        raise SimulationError("depletion must lie in [0, 1)")
    amps = np.zeros(eig.n_states, dtype=complex)
    if kind == "exact" or depletion == 0.0:
        amps[0] = 1.0
        return PreparedState(amps, eig, kind)
    support = list(range(1, min(4, eig.n_states))) if support is None else list(support)
    if not support or 0 in support:
        raise SimulationError("depleted state needs excited support states")
    weights = 0.5 ** np.arange(1, len(support) + 1)
    weights = depletion * weights / weights.sum()
    signs = np.random.default_rng(seed).choice([-1.0, 1.0], size=len(support))
    amps[0] = np.sqrt(1.0 - depletion)
    amps[support] = signs * np.sqrt(weights)
    return PreparedState(amps / np.linalg.norm(amps), eig, kind)


def state_from_vector(eig: EigenDecomposition, vec: np.ndarray, kind: str = "custom") -> PreparedState:
    amps = eig.states.conj().T @ np.asarray(vec, dtype=complex)
    return PreparedState(amps / np.linalg.norm(amps), eig, kind)


def expectation(state: PreparedState, op: QubitOperator) -> float:
    if not op.is_hermitian:
        raise SimulationError("expectation needs a Hermitian operator")
    v = state.vector
    return float(np.real(np.vdot(v, op.apply(v))))


def evolve(amplitudes: np.ndarray, eig: EigenDecomposition, t: float) -> np.ndarray:
    """Apply ``exp(iHt)`` in the eigenbasis (phases ``e^{i E_j t}``)."""
    if not np.isfinite(t):
        raise SimulationError("evolution time must be finite")
    return np.asarray(amplitudes) * np.exp(1j * eig.energies * t)


@dataclass(frozen=True)
class ShotConfig:
    n_meas: int
    seed: int | None = None

    def __post_init__(self):
        if int(self.n_meas) < 1:
            raise SimulationError("n_meas must be at least 1")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class SampledValue:
    mean: float
    stderr: float
    n_meas: int


def sample_expectation(
    state: PreparedState,
    op: QubitOperator,
    cfg: ShotConfig,
    rng: np.random.Generator | None = None,
) -> SampledValue:
    """Estimate ``<O>`` measuring each Pauli part ``n_meas`` times."""
    try:
        dec = decompose_hermitian(op)
    except OperatorError as exc:
        raise SimulationError(str(exc)) from exc
    rng = cfg.rng() if rng is None else rng
    v = state.vector
    const = 0.0
    coeffs, means = [], []
    for part in dec.parts:
        word, c = next(iter(part.terms.items()))
        if set(word) == {"I"}:
            const += c.real
            continue
        coeffs.append(c.real)
        means.append(np.real(np.vdot(v, part.apply(v)) / c))
    if not coeffs:
        return SampledValue(const, 0.0, cfg.n_meas)
    coeffs = np.array(coeffs)
    p_plus = np.clip((1.0 + np.array(means)) / 2.0, 0.0, 1.0)
    m_hat = 2.0 * rng.binomial(cfg.n_meas, p_plus) / cfg.n_meas - 1.0
    mean = const + float(coeffs @ m_hat)
    stderr = float(np.sqrt(np.sum(coeffs**2 * (1.0 - m_hat**2)) / cfg.n_meas))
    return SampledValue(mean, stderr, cfg.n_meas)


@dataclass(frozen=True)
class MTOutcome:
    """Estimate of the ancilla off-diagonal ``2 p_+ e^{i phi}``."""

    estimate: np.ndarray
    stderr: np.ndarray  # complex: real part for X basis, imaginary for the R_z basis
    counts_identity: np.ndarray  # outcome-0 counts without pre-rotation
    counts_rz: np.ndarray  # outcome-0 counts with the R_z pre-rotation
    n_meas: int


def mt_tomography(
    offdiag, cfg: ShotConfig, rng: np.random.Generator | None = None
) -> MTOutcome:
    """Simulate the two-basis ancilla readout of a complex off-diagonal element.

    ``P(m=0 | I) = (1 + Re g) / 2`` and ``P(m=0 | R_z) = (1 + Im g) / 2``.
    Accepts scalars or arrays.
    """
    g = np.asarray(offdiag, dtype=complex)
    if np.any(np.abs(g) > 1.0 + 1e-12):
        raise SimulationError("off-diagonal magnitude exceeds 1")
    rng = cfg.rng() if rng is None else rng
    n = cfg.n_meas
    p_re = np.clip((1.0 + g.real) / 2.0, 0.0, 1.0)
    p_im = np.clip((1.0 + g.imag) / 2.0, 0.0, 1.0)
    k_re = rng.binomial(n, p_re)
    k_im = rng.binomial(n, p_im)
    x = 2.0 * k_re / n - 1.0
    y = 2.0 * k_im / n - 1.0
    err = np.sqrt((1.0 - x**2) / n) + 1j * np.sqrt((1.0 - y**2) / n)
    return MTOutcome(x + 1j * y, err, k_re, k_im, n)


def ground_energy(op: QubitOperator, subspace: np.ndarray | None = None) -> float:
    return diagonalize(op, subspace).ground_energy
