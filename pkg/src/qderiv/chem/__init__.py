"""H2/STO-3G electronic-structure front end."""
from qderiv.chem.family import (
    OperatorFamily,
    combine,
    fd_multi_derivative,
    fd_operator_derivative,
    h2_family,
    h2_qubit_hamiltonian,
    toy_family,
)
from qderiv.chem.hamiltonian import (
    PAIR_SECTOR,
    ProjectionWarning,
    ReductionError,
    SecondQuantized,
    dipole_operator,
    fermion_hamiltonian,
    jordan_wigner,
    number_operator,
    reduce_two_qubit,
    spin_z_operator,
)
from qderiv.chem.integrals import BOHR_ANGSTROM, MolecularIntegrals, sto3g_h2_integrals
from qderiv.chem.scf import RHFResult, SCFConvergenceError, rhf

__all__ = [
    "BOHR_ANGSTROM", "MolecularIntegrals", "OperatorFamily", "PAIR_SECTOR", "ProjectionWarning",
    "RHFResult", "ReductionError", "SCFConvergenceError", "SecondQuantized", "combine",
    "dipole_operator", "fd_multi_derivative", "fd_operator_derivative", "fermion_hamiltonian",
    "h2_family", "h2_qubit_hamiltonian", "jordan_wigner", "number_operator", "reduce_two_qubit",
    "rhf", "spin_z_operator", "sto3g_h2_integrals", "toy_family",
]
