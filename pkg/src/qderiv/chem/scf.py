"""Closed-shell restricted Hartree-Fock for two-electron systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from qderiv.chem.integrals import MolecularIntegrals


class SCFConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RHFResult:
    mo_coeffs: np.ndarray  # AO x MO
    mo_energies: np.ndarray
    e_hf: float
    n_iter: int
    converged: bool
    h_core: np.ndarray  # the one-electron matrix actually used (field included)

    @property
    def density(self) -> np.ndarray:
        c = self.mo_coeffs[:, :1]
        return c @ c.T


def _fix_signs(c: np.ndarray) -> np.ndarray:
    # first significant AO component of every MO is made positive, so
    # coefficients vary smoothly along a geometry or field scan
    c = c.copy()
    for p in range(c.shape[1]):
        col = c[:, p]
        idx = int(np.argmax(np.abs(col) > 1e-8 * np.abs(col).max()))
        if col[idx] < 0:
            c[:, p] = -col
    return c


def _fock(h: np.ndarray, eri: np.ndarray, dens: np.ndarray) -> np.ndarray:
    coul = np.einsum("mnls,ls->mn", eri, dens)
    exch = np.einsum("mlns,ls->mn", eri, dens)
    return h + 2.0 * coul - exch


def _iterate(h, S, eri, e_nuc, shift, e_tol, d_tol, max_iter):
    eps, c = eigh(h, S)
    c = _fix_signs(c)
    dens = c[:, :1] @ c[:, :1].T
    energy = np.inf
    e_change = np.inf
    for it in range(1, max_iter + 1):
        F = _fock(h, eri, dens)
        if shift:
            # raise the virtual space: F + shift * S (S^-1 - D) S
            F = F + shift * (S - S @ dens @ S)
        eps, c = eigh(F, S)
        c = _fix_signs(c)
        new_dens = c[:, :1] @ c[:, :1].T
        new_energy = float(np.sum(new_dens * (h + _fock(h, eri, new_dens)))) + e_nuc
        d_change = float(np.max(np.abs(new_dens - dens)))
        e_change = abs(new_energy - energy)
        dens, energy = new_dens, new_energy
        if e_change < e_tol and d_change < d_tol:
            return dens, energy, it
    return None, e_change, max_iter


def rhf(
    ints: MolecularIntegrals,
    h_core: np.ndarray | None = None,
    e_tol: float = 1e-12,
    d_tol: float = 1e-12,
    max_iter: int = 500,
) -> RHFResult:
    """Solve the Roothaan equations for one doubly occupied orbital.

    Plain Roothaan iteration is tried first. Stretched bonds in a field make
    it oscillate, so it falls back to increasing virtual level shifts.

    Args:
        ints: AO integrals.
        h_core: optional replacement one-electron matrix, e.g. with an
            external field folded in. Defaults to ``ints.h_core``.
        e_tol: energy convergence threshold (hartree).
        d_tol: max-abs density change threshold.
        max_iter: iteration cap per attempt.

    Raises:
        SCFConvergenceError: if no attempt meets the thresholds.
    """
    h = ints.h_core if h_core is None else np.asarray(h_core, dtype=float)
    S = ints.overlap
    total = 0
    for shift in (0.0, 0.5, 2.0):
        dens, energy, n_iter = _iterate(h, S, ints.eri, ints.e_nuc, shift, e_tol, d_tol, max_iter)
        total += n_iter
        if dens is not None:
            eps, c = eigh(_fock(h, ints.eri, dens), S)
            return RHFResult(_fix_signs(c), eps, energy, total, True, h)
    raise SCFConvergenceError(f"RHF did not converge in {total} iterations (last dE={energy:.2e})")
