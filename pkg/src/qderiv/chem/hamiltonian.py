"""Second-quantized Hamiltonians, Jordan-Wigner mapping and the 2-qubit reduction.

Spin-orbitals are interleaved: spin-orbital ``2p`` is spatial MO ``p`` with
spin up and ``2p + 1`` the same MO with spin down. For H2 this gives
``0 = g up, 1 = g down, 2 = u up, 3 = u down``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from qderiv.chem.integrals import MolecularIntegrals, sto3g_h2_integrals
from qderiv.chem.scf import RHFResult, rhf
from qderiv.operators import QubitOperator

# 4-qubit basis indices of the pair sector (Z0Z1 = Z2Z3 = +1), listed in the
# order of the 2-qubit basis |00>, |01> (u pair), |10> (g pair), |11>.
PAIR_SECTOR = (0b0000, 0b0011, 0b1100, 0b1111)
REDUCTION_TOL = 1e-10


class ReductionError(ValueError):
    """Operator couples the kept pair sector to the rest of Fock space."""


class ProjectionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SecondQuantized:
    """``H = constant + sum h_pq a+_p a_q + 1/2 sum (pq|rs) a+_p a+_r a_s a_q``."""

    one_body: np.ndarray  # spin-orbital h_pq
    two_body: np.ndarray  # spin-orbital (pq|rs), chemist notation
    constant: float = 0.0

    @property
    def n_spin_orbitals(self) -> int:
        return self.one_body.shape[0]

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        h, g = self.one_body, self.two_body
        return bool(
            np.allclose(h, h.conj().T, atol=atol)
            and np.allclose(g, g.transpose(1, 0, 3, 2).conj(), atol=atol)
            and np.allclose(g, g.transpose(2, 3, 0, 1), atol=atol)
        )


def spatial_to_spin(h_mo: np.ndarray, g_mo: np.ndarray | None = None):
    """Expand spatial MO tensors onto interleaved spin-orbitals."""
    n = h_mo.shape[0]
    spin = np.arange(2 * n) % 2
    space = np.arange(2 * n) // 2
    same = spin[:, None] == spin[None, :]
    h = np.where(same, h_mo[np.ix_(space, space)], 0.0)
    if g_mo is None:
        return h
    g = g_mo[np.ix_(space, space, space, space)]
    g = g * same[:, :, None, None] * same[None, None, :, :]
    return h, g


def transform_one_body(mat_ao: np.ndarray, c: np.ndarray) -> np.ndarray:
    return c.T @ mat_ao @ c


def transform_two_body(eri_ao: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.einsum("mnls,mp,nq,lr,st->pqrt", eri_ao, c, c, c, c, optimize=True)


def fermion_hamiltonian(
    ints: MolecularIntegrals, mos: RHFResult, h_core: np.ndarray | None = None
) -> SecondQuantized:
    """Molecular Hamiltonian in the spin-orbital MO basis.

    Args:
        ints: AO integrals (supply ``eri`` and ``e_nuc``).
        mos: converged orbitals.
        h_core: one-electron AO matrix; defaults to the one the SCF used,
            so a field folded into the SCF is carried over.
    """
    h_ao = mos.h_core if h_core is None else h_core
    c = mos.mo_coeffs
    h, g = spatial_to_spin(transform_one_body(h_ao, c), transform_two_body(ints.eri, c))
    return SecondQuantized(h, g, float(ints.e_nuc))


@lru_cache(maxsize=None)
def _ladder(n: int, p: int, dagger: bool) -> QubitOperator:
    z = "Z" * p
    tail = "I" * (n - p - 1)
    sign = -0.5j if dagger else 0.5j
    return QubitOperator(n, {z + "X" + tail: 0.5, z + "Y" + tail: sign})


@lru_cache(maxsize=None)
def _jw_product(n: int, ops: tuple[tuple[int, bool], ...]) -> QubitOperator:
    out = QubitOperator.identity(n)
    for p, dag in ops:
        out = out * _ladder(n, p, dag)
    return out


def ladder_operator(n_qubits: int, p: int, dagger: bool = False) -> QubitOperator:
    """Jordan-Wigner image of ``a_p`` (or ``a+_p``)."""
    if not 0 <= p < n_qubits:
        raise ValueError(f"mode {p} out of range for {n_qubits} qubits")
    return _ladder(n_qubits, p, dagger)


def jordan_wigner(table: SecondQuantized, tol: float = 1e-14) -> QubitOperator:
    n = table.n_spin_orbitals
    acc: dict[str, complex] = {"I" * n: table.constant}

    def add(op: QubitOperator, c: complex):
        for w, v in op.terms.items():
            acc[w] = acc.get(w, 0.0) + c * v

    h, g = table.one_body, table.two_body
    for p, q in zip(*np.nonzero(np.abs(h) > tol)):
        add(_jw_product(n, ((int(p), True), (int(q), False))), h[p, q])
    for p, q, r, s in zip(*np.nonzero(np.abs(g) > tol)):
        if p == r or q == s:
            continue  # a+_p a+_p = 0
        ops = ((int(p), True), (int(r), True), (int(s), False), (int(q), False))
        add(_jw_product(n, ops), 0.5 * g[p, q, r, s])
    op = QubitOperator(n, acc)
    if table.is_hermitian():
        # kill round-off imaginary parts so the result is flagged Hermitian
        op = QubitOperator(n, {w: v.real for w, v in op.terms.items()})
    return op


def number_operator(n_qubits: int) -> QubitOperator:
    acc = QubitOperator.zero(n_qubits)
    for p in range(n_qubits):
        acc = acc + _jw_product(n_qubits, ((p, True), (p, False)))
    return acc


def spin_z_operator(n_qubits: int) -> QubitOperator:
    acc = QubitOperator.zero(n_qubits)
    for p in range(n_qubits):
        sign = 0.5 if p % 2 == 0 else -0.5
        acc = acc + sign * _jw_product(n_qubits, ((p, True), (p, False)))
    return acc


def project_two_qubit(op4: QubitOperator) -> QubitOperator:
    """Compress onto the pair sector without checking what is discarded."""
    if op4.n_qubits != 4:
        raise ValueError("pair-sector reduction needs a 4-qubit operator")
    m = op4.to_matrix()
    idx = np.array(PAIR_SECTOR)
    return QubitOperator.from_matrix(m[np.ix_(idx, idx)])


def leakage(op4: QubitOperator) -> float:
    """Largest matrix element between the pair sector and its complement."""
    m = op4.to_matrix()
    keep = np.zeros(16, dtype=bool)
    keep[list(PAIR_SECTOR)] = True
    if not keep.all():
        return float(np.max(np.abs(m[np.ix_(keep, ~keep)]), initial=0.0))
    return 0.0


def reduce_two_qubit(op4: QubitOperator, force: bool = False) -> QubitOperator:
    """Exact block reduction of an H2 operator to two qubits.

    The kept block holds the closed-shell pair configurations, which contain
    the singlet ground state of H2. Operators that leave the block invariant
    reduce exactly.

    Args:
        op4: 4-qubit operator in the interleaved JW ordering.
        force: project anyway when the block is not invariant, emitting a
            ``ProjectionWarning`` instead of raising.

    Raises:
        ReductionError: block coupling above ``REDUCTION_TOL`` and ``force`` is false.
    """
    leak = leakage(op4)
    if leak > REDUCTION_TOL:
        if not force:
            raise ReductionError(
                f"operator couples the pair sector to other states (max element {leak:.3e})"
            )
        warnings.warn(
            f"projecting an operator with sector leakage {leak:.3e}; the result is not exact",
            ProjectionWarning,
            stacklevel=2,
        )
    return project_two_qubit(op4)


def dipole_table(ints: MolecularIntegrals, mos: RHFResult) -> SecondQuantized:
    """Electronic z-dipole ``-sum z_pq a+_p a_q`` (nuclear part vanishes at the midpoint)."""
    z_mo = transform_one_body(ints.z_ints, mos.mo_coeffs)
    n = 2 * z_mo.shape[0]
    return SecondQuantized(-spatial_to_spin(z_mo), np.zeros((n, n, n, n)), 0.0)


def dipole_operator(bond_length: float, mos: RHFResult | None = None) -> QubitOperator:
    """z-component of the dipole operator on 4 qubits, in atomic units.

    Args:
        bond_length: H-H distance in angstrom.
        mos: orbitals defining the qubit basis; the field-free RHF orbitals
            at ``bond_length`` by default.
    """
    ints = sto3g_h2_integrals(bond_length)
    mos = rhf(ints) if mos is None else mos
    return jordan_wigner(dipole_table(ints, mos))
