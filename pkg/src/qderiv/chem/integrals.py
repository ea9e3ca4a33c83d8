"""Closed-form integrals over contracted s-type Gaussians (H2 in STO-3G)."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.special import erf

BOHR_ANGSTROM = 0.52917721092  # CODATA 2010, same constant as the fixture generator


class IntegralError(ValueError):
    pass


@dataclass(frozen=True)
class ContractedS:
    """Contracted s function; ``norm_coeffs`` already include primitive norms."""

    center: tuple[float, float, float]  # bohr
    exponents: tuple[float, ...]
    norm_coeffs: tuple[float, ...]


@dataclass(frozen=True)
class MolecularIntegrals:
    """AO-basis integrals in hartree; lengths in bohr unless noted."""

    overlap: np.ndarray
    kinetic: np.ndarray
    nuclear: np.ndarray
    eri: np.ndarray  # chemist notation (mu nu|la si)
    z_ints: np.ndarray  # <mu|z|nu>, origin at the bond midpoint
    e_nuc: float
    bond_length: float  # angstrom
    basis: tuple[ContractedS, ...] = field(repr=False)

    @property
    def h_core(self) -> np.ndarray:
        return self.kinetic + self.nuclear

    @property
    def n_ao(self) -> int:
        return self.overlap.shape[0]


@lru_cache(maxsize=None)
def load_basis(element: str = "H") -> dict:
    if element != "H":
        raise IntegralError("only hydrogen STO-3G is bundled")
    text = resources.files("qderiv.chem.data").joinpath("sto3g_h.json").read_text()
    return json.loads(text)


def boys0(x):
    """Boys function F0; series branch below 1e-6 avoids 0/0."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-6
    safe = np.where(small, 1.0, x)
    big = 0.5 * np.sqrt(np.pi / safe) * erf(np.sqrt(safe))
    series = 1.0 - x / 3.0 + x * x / 10.0
    out = np.where(small, series, big)
    return float(out) if out.ndim == 0 else out


def _prim_overlap(a, b, ra, rb):
    p = a + b
    return (math.pi / p) ** 1.5 * math.exp(-a * b / p * _dist2(ra, rb))


def _dist2(u, v):
    return sum((x - y) ** 2 for x, y in zip(u, v))


def _gauss_center(a, ra, b, rb):
    p = a + b
    return tuple((a * x + b * y) / p for x, y in zip(ra, rb))


def contracted_s(center, exponents, coeffs) -> ContractedS:
    """Build a unit-norm contracted s function from normalized-primitive coefficients."""
    prim = [c * (2.0 * a / math.pi) ** 0.75 for a, c in zip(exponents, coeffs)]
    self_ovlp = sum(
        ci * cj * _prim_overlap(ai, aj, center, center)
        for ai, ci in zip(exponents, prim)
        for aj, cj in zip(exponents, prim)
    )
    scale = 1.0 / math.sqrt(self_ovlp)
    return ContractedS(tuple(center), tuple(exponents), tuple(c * scale for c in prim))


def _pairs(f: ContractedS, g: ContractedS):
    for a, ca in zip(f.exponents, f.norm_coeffs):
        for b, cb in zip(g.exponents, g.norm_coeffs):
            yield a, ca, b, cb


def overlap(f: ContractedS, g: ContractedS) -> float:
    return sum(ca * cb * _prim_overlap(a, b, f.center, g.center) for a, ca, b, cb in _pairs(f, g))


def kinetic(f: ContractedS, g: ContractedS) -> float:
    total = 0.0
    r2 = _dist2(f.center, g.center)
    for a, ca, b, cb in _pairs(f, g):
        mu = a * b / (a + b)
        total += ca * cb * mu * (3.0 - 2.0 * mu * r2) * _prim_overlap(a, b, f.center, g.center)
    return total


def nuclear_attraction(f: ContractedS, g: ContractedS, charge: float, rc) -> float:
    total = 0.0
    r2 = _dist2(f.center, g.center)
    for a, ca, b, cb in _pairs(f, g):
        p = a + b
        rp = _gauss_center(a, f.center, b, g.center)
        total += ca * cb * (-2.0 * math.pi / p * charge * math.exp(-a * b / p * r2) * boys0(p * _dist2(rp, rc)))
    return total


def dipole_z(f: ContractedS, g: ContractedS) -> float:
    total = 0.0
    for a, ca, b, cb in _pairs(f, g):
        rp = _gauss_center(a, f.center, b, g.center)
        total += ca * cb * rp[2] * _prim_overlap(a, b, f.center, g.center)
    return total


def electron_repulsion(f, g, h, k) -> float:
    """(fg|hk) in chemist notation."""
    total = 0.0
    rfg = _dist2(f.center, g.center)
    rhk = _dist2(h.center, k.center)
    for a, ca, b, cb in _pairs(f, g):
        p = a + b
        rp = _gauss_center(a, f.center, b, g.center)
        kab = math.exp(-a * b / p * rfg)
        for c, cc, d, cd in _pairs(h, k):
            q = c + d
            rq = _gauss_center(c, h.center, d, k.center)
            kcd = math.exp(-c * d / q * rhk)
            pref = 2.0 * math.pi**2.5 / (p * q * math.sqrt(p + q))
            total += ca * cb * cc * cd * pref * kab * kcd * boys0(p * q / (p + q) * _dist2(rp, rq))
    return total


def sto3g_h2_integrals(bond_length: float) -> MolecularIntegrals:
    """All AO integrals for H2 along z, nuclei at ``-R/2`` and ``+R/2``.

    Args:
        bond_length: H-H distance in angstrom.

    Returns:
        MolecularIntegrals with the two contracted 1s functions (A then B).
    """
    if not (bond_length > 0.0) or not math.isfinite(bond_length):
        raise IntegralError(f"bond length must be positive, got {bond_length}")
    data = load_basis("H")
    r = bond_length / BOHR_ANGSTROM
    centers = [(0.0, 0.0, -r / 2.0), (0.0, 0.0, r / 2.0)]
    basis = tuple(contracted_s(c, data["exponents"], data["coefficients"]) for c in centers)
    n = len(basis)
    S = np.empty((n, n))
    T = np.empty((n, n))
    V = np.zeros((n, n))
    Z = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            S[i, j] = overlap(basis[i], basis[j])
            T[i, j] = kinetic(basis[i], basis[j])
            Z[i, j] = dipole_z(basis[i], basis[j])
            for c in centers:
                V[i, j] += nuclear_attraction(basis[i], basis[j], 1.0, c)
    eri = np.empty((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for m in range(n):
                    eri[i, j, k, m] = electron_repulsion(basis[i], basis[j], basis[k], basis[m])
    return MolecularIntegrals(
        overlap=S, kinetic=T, nuclear=V, eri=eri, z_ints=Z,
        e_nuc=1.0 / r, bond_length=float(bond_length), basis=basis,
    )
