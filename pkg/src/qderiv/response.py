"""Linear response in a truncated eigenbasis built by quantum subspace expansion."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import eigh

from qderiv.chem.family import OperatorFamily
from qderiv.operators import QubitOperator, all_pauli_words
from qderiv.simulator import (
    EigenDecomposition,
    PreparedState,
    ShotConfig,
    diagonalize,
    prepare_state,
    sample_expectation,
)

S_THRESHOLD = 1e-8
GROUND_OVERLAP = 0.5


class ResponseError(ValueError):
    pass


class DegenerateBasisError(ResponseError):
    """Every overlap-matrix eigenvalue fell below the threshold."""


class DegenerateResponseError(ResponseError):
    pass


def _as_operator(n_qubits: int, e) -> QubitOperator:
    if isinstance(e, QubitOperator):
        return e
    return QubitOperator(n_qubits, {str(e): 1.0})


@dataclass(frozen=True)
class QSEBasis:
    """Excitations ``E_j`` acting on a reference state ``|Psi_0>``."""

    excitations: tuple[QubitOperator, ...]
    ground: PreparedState

    @classmethod
    def build(cls, excitations: Sequence, ground: PreparedState) -> "QSEBasis":
        n = int(round(np.log2(ground.vector.size)))
        ops, seen = [], set()
        for e in excitations:
            op = _as_operator(n, e)
            if len(op) == 0:
                raise ResponseError("excitation operators must be nonzero")
            key = tuple(sorted(op.terms.items()))
            if key not in seen:
                seen.add(key)
                ops.append(op)
        if not ops:
            raise ResponseError("empty excitation set")
        return cls(tuple(ops), ground)

    @property
    def n_qubits(self) -> int:
        return self.excitations[0].n_qubits

    def __len__(self) -> int:
        return len(self.excitations)

    def vectors(self) -> np.ndarray:
        """Columns ``|chi_j> = E_j |Psi_0>``."""
        v = self.ground.vector
        return np.column_stack([e.apply(v) for e in self.excitations])


def complete_basis(n_qubits: int) -> list[str]:
    """All Pauli words; applied to any state they span the full register."""
    return all_pauli_words(n_qubits)


def _measure(state: PreparedState, op: QubitOperator, shots: ShotConfig | None, rng) -> complex:
    """``<Psi|O|Psi>`` for any operator; sampled via its Hermitian and anti-Hermitian parts."""
    if shots is None:
        v = state.vector
        return complex(np.vdot(v, op.apply(v)))
    adj = op.adjoint()
    herm = 0.5 * (op + adj)
    anti = (-0.5j) * (op - adj)
    re = sample_expectation(state, herm, shots, rng).mean if len(herm) else 0.0
    im = sample_expectation(state, anti, shots, rng).mean if len(anti) else 0.0
    return complex(re, im)


def projected_matrix(
    basis: QSEBasis, op: QubitOperator | None, shots: ShotConfig | None = None, rng=None
) -> np.ndarray:
    """``M_ij = <Psi_0| E_i^dag O E_j |Psi_0>`` (``O = I`` when ``op`` is None)."""
    if shots is None:
        X = basis.vectors()
        OX = X if op is None else np.column_stack([op.apply(x) for x in X.T])
        return X.conj().T @ OX
    rng = shots.rng() if rng is None else rng
    n = len(basis)
    M = np.zeros((n, n), dtype=complex)
    for i in range(n):
        left = basis.excitations[i].adjoint()
        for j in range(i, n):
            prod = left * basis.excitations[j] if op is None else left * op * basis.excitations[j]
            M[i, j] = _measure(basis.ground, prod, shots, rng)
            if i == j:
                M[i, i] = M[i, i].real
            else:
                M[j, i] = np.conj(M[i, j])
    return M


def ground_row(basis: QSEBasis, op: QubitOperator | None, shots: ShotConfig | None = None, rng=None) -> np.ndarray:
    """``b_l = <Psi_0| O E_l |Psi_0>``."""
    if shots is None:
        v = basis.ground.vector
        left = v if op is None else op.apply(v)
        return basis.vectors().T @ left.conj()
    rng = shots.rng() if rng is None else rng
    return np.array([
        _measure(basis.ground, e if op is None else op * e, shots, rng) for e in basis.excitations
    ])


@dataclass(frozen=True)
class QSEResult:
    """Solved subspace problem.

    ``vectors[:, j]`` holds the coefficients of approximate eigenstate ``j``
    over ``|chi_l>``; the columns are S-orthonormal.
    """

    S: np.ndarray
    H: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    basis: QSEBasis
    hamiltonian: QubitOperator

    @property
    def kept(self) -> int:
        return len(self.energies)

    def states(self) -> np.ndarray:
        """Dense approximate eigenstates (exact reference state required)."""
        return self.basis.vectors() @ self.vectors


def solve_gen_eig(S: np.ndarray, H: np.ndarray, threshold: float = S_THRESHOLD):
    """Canonical orthogonalization then an ordinary Hermitian eigenproblem.

    Returns:
        ``(energies, vectors)`` with S-orthonormal columns, energies ascending.

    Raises:
        DegenerateBasisError: all S eigenvalues below ``threshold``.
    """
    S = 0.5 * (S + S.conj().T)
    H = 0.5 * (H + H.conj().T)
    s, U = eigh(S)
    keep = s > threshold
    if not keep.any():
        raise DegenerateBasisError("overlap matrix has no eigenvalue above the threshold")
    X = U[:, keep] / np.sqrt(s[keep])
    e, W = eigh(X.conj().T @ H @ X)
    return e, X @ W


def qse_matrices(
    basis: QSEBasis,
    H: QubitOperator,
    shots: ShotConfig | None = None,
    threshold: float = S_THRESHOLD,
    rng=None,
) -> QSEResult:
    """Overlap and projected Hamiltonian matrices and their generalized eigenpairs.

    Args:
        shots: ``None`` for exact dense algebra, otherwise each matrix element
            is estimated independently with shot noise.
    """
    rng = shots.rng() if (shots is not None and rng is None) else rng
    S = projected_matrix(basis, None, shots, rng)
    Hq = projected_matrix(basis, H, shots, rng)
    e, V = solve_gen_eig(S, Hq, threshold)
    return QSEResult(S, Hq, e, V, basis, H)


@dataclass(frozen=True)
class ProjectedOperator:
    chi: np.ndarray  # <chi_i|O|chi_j>
    psi: np.ndarray  # <Psi~_i|O|Psi~_j>


def project_operator(result: QSEResult, op: QubitOperator, shots: ShotConfig | None = None, rng=None) -> ProjectedOperator:
    chi = projected_matrix(result.basis, op, shots, rng)
    V = result.vectors
    return ProjectedOperator(chi, V.conj().T @ chi @ V)


@dataclass(frozen=True)
class TruncationDiagnostics:
    projection_ratio: float  # ||Pi p|| / ||p||
    variances: np.ndarray  # sigma^2 of each approximate eigenstate


def truncation_diagnostics(result: QSEResult, perturbation: QubitOperator) -> TruncationDiagnostics:
    """Projection completeness of ``P|Psi_0>`` and energy variances of the approximate states."""
    basis = result.basis
    V = result.vectors
    # <Psi~_j|P|Psi_0> = sum_l conj(V_lj) <Psi_0|E_l^dag P|Psi_0>
    v = basis.ground.vector
    p = perturbation.apply(v)
    overlaps = V.conj().T @ (basis.vectors().conj().T @ p)
    ratio = float(np.sqrt(np.sum(np.abs(overlaps) ** 2)) / np.linalg.norm(p)) if np.linalg.norm(p) else 1.0
    H = result.hamiltonian
    H2 = projected_matrix(basis, H * H)
    var = np.real(np.einsum("ij,ik,kj->j", V.conj(), H2, V)) - result.energies**2
    return TruncationDiagnostics(ratio, var)


DEFAULT_EXCITATIONS_2Q = ("XY",)


@dataclass(frozen=True)
class ETAResult:
    """Second derivative from a truncated approximate eigenbasis."""

    value: float
    second_order_term: float
    response_term: float
    e0: float
    energies: np.ndarray  # approximate eigenenergies
    included: np.ndarray  # bool mask over ``energies`` used in the response sum
    ground_overlaps: np.ndarray  # |<Psi~_j|Psi_0>|^2


def eta_from_operators(
    result: QSEResult,
    H: QubitOperator,
    d_ops: tuple[QubitOperator, QubitOperator],
    d2_op: QubitOperator,
    shots: ShotConfig | None = None,
    overlap_threshold: float = GROUND_OVERLAP,
    degeneracy_tol: float = 1e-9,
    rng=None,
) -> ETAResult:
    """Assemble the second derivative from derivative operators and a solved subspace.

    Raises:
        DegenerateResponseError: an included approximate state sits on ``E_0``.
    """
    rng = shots.rng() if (shots is not None and rng is None) else rng
    basis = result.basis
    state = basis.ground
    e0 = _measure(state, H, shots, rng).real
    second = _measure(state, d2_op, shots, rng).real
    V = result.vectors
    c = ground_row(basis, None, shots, rng)
    overlaps = np.abs(c @ V) ** 2
    included = overlaps <= overlap_threshold
    # <Psi_0|dH|Psi~_j> = sum_l V_lj <Psi_0|dH E_l|Psi_0>
    b_i = ground_row(basis, d_ops[0], shots, rng) @ V
    b_j = b_i if d_ops[1] is d_ops[0] else ground_row(basis, d_ops[1], shots, rng) @ V
    gaps = e0 - result.energies
    if np.any(included & (np.abs(gaps) < degeneracy_tol)):
        raise DegenerateResponseError("an approximate excited state is degenerate with the ground state")
    terms = 2.0 * np.real(b_i * np.conj(b_j))
    response = float(np.sum(terms[included] / gaps[included]))
    return ETAResult(second + response, second, response, e0, result.energies, included, overlaps)


def eta_second_derivative(
    family: OperatorFamily,
    at: Mapping[str, float],
    params: tuple[str, str],
    excitations: Sequence | None = None,
    shots: ShotConfig | None = None,
    state: PreparedState | None = None,
    subspace: np.ndarray | None = None,
    threshold: float = S_THRESHOLD,
    overlap_threshold: float = GROUND_OVERLAP,
) -> ETAResult:
    """Second derivative of the ground energy of ``family`` at ``at``.

    Args:
        excitations: Pauli words or operators. Defaults to ``XY`` on two
            qubits and to every Pauli word otherwise.
        state: reference state; defaults to the exact ground state
            (inside ``subspace`` when given).
    """
    H = family(at)
    if state is None:
        state = prepare_state(diagonalize(H, subspace))
    if excitations is None:
        excitations = DEFAULT_EXCITATIONS_2Q if family.n_qubits == 2 else complete_basis(family.n_qubits)
    rng = shots.rng() if shots is not None else None
    result = qse_matrices(QSEBasis.build(excitations, state), H, shots, threshold, rng)
    d_i = family.derivative(at, (params[0],))
    d_j = d_i if params[1] == params[0] else family.derivative(at, (params[1],))
    d_ij = family.derivative(at, tuple(params))
    return eta_from_operators(result, H, (d_i, d_j), d_ij, shots, overlap_threshold, rng=rng)


def sum_over_states(
    eig: EigenDecomposition,
    d_i: QubitOperator,
    d_j: QubitOperator,
    d_ij: QubitOperator,
    degeneracy_tol: float = 1e-9,
) -> float:
    """Exact second-order perturbation theory over all eigenstates.

    States degenerate with the ground state are left out of the sum.
    """
    mi = eig.matrix_elements(d_i)
    mj = mi if d_j is d_i else eig.matrix_elements(d_j)
    e0 = eig.energies[0]
    gaps = e0 - eig.energies
    keep = np.abs(gaps) > degeneracy_tol
    second = float(np.real(eig.matrix_elements(d_ij)[0, 0]))
    terms = 2.0 * np.real(mi[0, :] * mj[:, 0])
    return second + float(np.sum(terms[keep] / gaps[keep]))
