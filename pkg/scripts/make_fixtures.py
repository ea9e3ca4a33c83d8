"""Generate the H2/STO-3G reference fixtures with PySCF.

Run once; the output is committed under tests/fixtures/. PySCF is not a
runtime dependency of qderiv.

    python scripts/make_fixtures.py tests/fixtures/h2_sto3g_pyscf.json
"""
import json
import sys

import numpy as np
from pyscf import fci, gto, scf
from pyscf.data import nist

BOND_LENGTHS = [0.5, 0.7414, 1.0, 1.5]


def reference(r_ang):
    mol = gto.M(
        atom=f"H 0 0 {-r_ang / 2!r}; H 0 0 {r_ang / 2!r}",
        basis="sto-3g",
        unit="Angstrom",
        verbose=0,
    )
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-13
    e_hf = mf.kernel()
    e_fci, _ = fci.FCI(mf).kernel()
    with mol.with_common_orig((0.0, 0.0, 0.0)):
        dip = mol.intor("int1e_r")
    return {
        "bond_length": r_ang,
        "overlap": mol.intor("int1e_ovlp").tolist(),
        "kinetic": mol.intor("int1e_kin").tolist(),
        "nuclear": mol.intor("int1e_nuc").tolist(),
        "h_core": (mol.intor("int1e_kin") + mol.intor("int1e_nuc")).tolist(),
        "eri": mol.intor("int2e").tolist(),
        "z_ints": dip[2].tolist(),
        "e_nuc": mol.energy_nuc(),
        "e_hf": e_hf,
        "e_fci": e_fci,
        "mo_energy": mf.mo_energy.tolist(),
    }


def main(path):
    data = {
        "generator": "pyscf",
        "bohr_angstrom": nist.BOHR,
        "geometry": "H at z = -R/2 and z = +R/2, origin at bond midpoint",
        "points": [reference(r) for r in BOND_LENGTHS],
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)


if __name__ == "__main__":
    main(sys.argv[1])
