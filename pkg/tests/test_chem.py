import numpy as np
import pytest

from qderiv.chem.family import (
    FamilyEvaluationError,
    OperatorFamily,
    fd_operator_derivative,
    h2_family,
    h2_qubit_hamiltonian,
    toy_family,
)
from qderiv.chem.hamiltonian import (
    PAIR_SECTOR,
    ProjectionWarning,
    ReductionError,
    dipole_operator,
    fermion_hamiltonian,
    jordan_wigner,
    ladder_operator,
    leakage,
    number_operator,
    reduce_two_qubit,
    spin_z_operator,
)
from qderiv.chem.integrals import IntegralError, boys0, load_basis, sto3g_h2_integrals
from qderiv.chem.scf import rhf
from qderiv.operators import QubitOperator
from qderiv.simulator import diagonalize, sector_basis


@pytest.mark.parametrize("key", ["overlap", "kinetic", "nuclear", "eri", "z_ints"])
def test_integrals_match_fixture(pyscf_points, key):
    for pt in pyscf_points:
        ints = sto3g_h2_integrals(pt["bond_length"])
        assert np.allclose(getattr(ints, key), np.array(pt[key]), atol=1e-10), key


def test_core_and_nuclear_repulsion(pyscf_points):
    for pt in pyscf_points:
        ints = sto3g_h2_integrals(pt["bond_length"])
        assert np.allclose(ints.h_core, pt["h_core"], atol=1e-10)
        assert ints.e_nuc == pytest.approx(pt["e_nuc"], abs=1e-12)


def test_orbital_energies_match_fixture(pyscf_points):
    for pt in pyscf_points:
        res = rhf(sto3g_h2_integrals(pt["bond_length"]))
        assert res.converged
        assert np.allclose(res.mo_energies, pt["mo_energy"], atol=1e-8)


def test_boys_function_limits():
    assert boys0(0.0) == pytest.approx(1.0)
    assert boys0(1e-9) == pytest.approx(1.0 - 1e-9 / 3, rel=1e-14)
    x = 30.0
    assert boys0(x) == pytest.approx(0.5 * np.sqrt(np.pi / x), rel=1e-10)


def test_basis_data_loads():
    data = load_basis("H")
    assert len(data["exponents"]) == 3


@pytest.mark.parametrize("r", [0.0, -1.0, np.inf])
def test_bad_bond_length(r):
    with pytest.raises(IntegralError):
        sto3g_h2_integrals(r)


def test_overlap_self_normalized():
    ints = sto3g_h2_integrals(1.0)
    assert np.allclose(np.diag(ints.overlap), 1.0)


def test_rhf_density_idempotent_in_metric():
    ints = sto3g_h2_integrals(0.7414)
    res = rhf(ints)
    P, S = res.density, ints.overlap
    assert np.allclose(P @ S @ P, P, atol=1e-12)
    c = res.mo_coeffs
    assert np.allclose(c.T @ S @ c, np.eye(2), atol=1e-12)


def test_rhf_converges_stretched_in_field():
    ints = sto3g_h2_integrals(2.5)
    res = rhf(ints, h_core=ints.h_core - 0.01 * ints.z_ints)
    assert res.converged


def test_ladder_anticommutation():
    n = 4
    for p in range(n):
        for q in range(n):
            a_p, ad_q = ladder_operator(n, p), ladder_operator(n, q, dagger=True)
            anti = a_p * ad_q + ad_q * a_p
            expect = QubitOperator.identity(n) if p == q else QubitOperator.zero(n)
            assert anti.allclose(expect)
            assert (a_p * ladder_operator(n, q) + ladder_operator(n, q) * a_p).allclose(QubitOperator.zero(n))


def test_jordan_wigner_hermitian_and_symmetries():
    ints = sto3g_h2_integrals(0.7414)
    H = jordan_wigner(fermion_hamiltonian(ints, rhf(ints)))
    assert H.is_hermitian and H.n_qubits == 4
    Hm = H.to_matrix()
    for sym in (number_operator(4), spin_z_operator(4)):
        S = sym.to_matrix()
        assert np.allclose(Hm @ S, S @ Hm, atol=1e-12)


def test_two_electron_ground_is_global():
    H = h2_qubit_hamiltonian(0.7414, 0.0, 4)
    assert diagonalize(H).ground_energy == pytest.approx(diagonalize(H, sector_basis(4, 2)).ground_energy, abs=1e-12)


@pytest.mark.parametrize("r", [0.5, 0.7414, 1.0, 1.5, 2.5])
def test_two_qubit_reduction_exact_without_field(r):
    H4 = h2_qubit_hamiltonian(r, 0.0, 4)
    assert leakage(H4) < 1e-10
    H2 = reduce_two_qubit(H4)
    e2 = np.linalg.eigvalsh(H2.to_matrix())
    e4 = np.linalg.eigvalsh(H4.to_matrix()[np.ix_(PAIR_SECTOR, PAIR_SECTOR)])
    assert np.allclose(e2, e4, atol=1e-12)
    assert e2[0] == pytest.approx(diagonalize(H4).ground_energy, abs=1e-12)


def test_two_qubit_h2_has_known_word_structure():
    H2 = h2_qubit_hamiltonian(0.7414)
    assert set(H2.terms) <= {"II", "IZ", "ZI", "ZZ", "XX", "YY"}
    assert H2.coefficient("XX") == pytest.approx(H2.coefficient("YY"))


def test_dipole_leaks_out_of_pair_sector():
    mu = dipole_operator(0.7414)
    assert leakage(mu) > 1e-3
    with pytest.raises(ReductionError):
        reduce_two_qubit(mu)
    with pytest.warns(ProjectionWarning):
        reduce_two_qubit(mu, force=True)


def test_dipole_zero_expectation_at_zero_field():
    H4 = h2_qubit_hamiltonian(0.7414, 0.0, 4)
    g = diagonalize(H4).ground_state
    mu = dipole_operator(0.7414).to_matrix()
    assert abs(np.vdot(g, mu @ g)) < 1e-12


def test_field_term_matches_dipole_to_first_order():
    # dH/dF at F = 0 equals the dipole operator up to orbital-rotation terms,
    # which vanish in expectation for the ground state (Brillouin)
    fam = h2_family(4)
    d = fd_operator_derivative(fam, {"R": 0.7414, "F": 0.0}, "F")
    g = diagonalize(fam({"R": 0.7414})).ground_state
    assert abs(np.vdot(g, d.apply(g))) < 1e-8


def test_toy_family_analytic_derivatives_match_fd():
    fam = toy_family()
    plain = OperatorFamily("toy-fd", fam.params, fam.evaluator, 1, defaults=fam.defaults)
    at = {"lx": 0.7, "lz": 0.2}
    for which in ("lx", "lz"):
        assert plain.derivative(at, which).allclose(fam.derivative(at, which), atol=1e-9)
    assert plain.derivative(at, ("lx", "lz")).allclose(QubitOperator.zero(1), atol=1e-6)


def test_fd_second_derivative_of_quadratic_family():
    fam = OperatorFamily("quad", ("a",), lambda pt: QubitOperator(1, {"Z": pt["a"] ** 2, "X": pt["a"] ** 4}), 1)
    d2 = fam.derivative({"a": 0.5}, ("a", "a"))
    assert d2.coefficient("Z") == pytest.approx(2.0, abs=1e-8)
    assert d2.coefficient("X") == pytest.approx(12 * 0.25, abs=1e-6)


def test_family_rejects_unknown_parameter():
    with pytest.raises(KeyError):
        h2_family(2)({"Q": 1.0})


def test_family_rejects_non_hermitian_output():
    fam = OperatorFamily("bad", ("a",), lambda pt: QubitOperator(1, {"X": 1j * pt["a"]}), 1)
    with pytest.raises(FamilyEvaluationError):
        fam({"a": 1.0})


def test_family_wraps_evaluation_errors():
    with pytest.raises(FamilyEvaluationError):
        h2_family(2)({"R": -1.0})


def test_h2_family_space_validation():
    with pytest.raises(ValueError):
        h2_family(3)
