import numpy as np
import pytest
from scipy.linalg import expm

from qderiv.chem.family import OperatorFamily, h2_family, toy_family
from qderiv.operators import QubitOperator
from qderiv.ppe import (
    DegenerateResponseError,
    PathAmplitudeSet,
    Bin,
    PPEConfig,
    PPEError,
    assemble_second_derivative,
    bin_amplitudes,
    ground_from_identity,
    nested_prony,
    post_selection_report,
    ppe_derivative_from_operators,
    ppe_second_derivative,
    ppe_signal,
    ppe_third_derivative,
    signal_to_csv,
    toy_table,
)
from qderiv.response import sum_over_states
from qderiv.simulator import diagonalize, prepare_state, state_from_vector

LX = 1.0
T = 0.3


@pytest.fixture
def toy():
    fam = toy_family()
    eig = diagonalize(fam({"lx": LX, "lz": 0.0}))
    return eig, state_from_vector(eig, np.array([1.0, 0.0]))


def grid(n):
    return np.meshgrid(np.arange(n), np.arange(n), indexing="ij")


def test_toy_zz_signal(toy):
    eig, st = toy
    g = ppe_signal(eig, st, ["Z", "Z"], PPEConfig(k0_max=4, k1_max=4), T)
    k0, k1 = grid(5)
    assert np.allclose(g, np.cos(2 * k0 * LX * T - k1 * LX * T))


def test_toy_xz_signal(toy):
    eig, st = toy
    g = ppe_signal(eig, st, ["X", "Z"], PPEConfig(k0_max=4, k1_max=4), T)
    k0, k1 = grid(5)
    assert np.allclose(g, 1j * np.sin(k1 * T * LX))


def test_toy_xx_signal(toy):
    # X is diagonal in the eigenbasis, so only the two direct paths survive
    eig, st = toy
    g = ppe_signal(eig, st, ["X", "X"], PPEConfig(k0_max=4, k1_max=4), T)
    k0, k1 = grid(5)
    assert np.allclose(g, np.cos(2 * k0 * LX * T + k1 * LX * T))


def test_signal_matches_time_evolution_oracle():
    H = QubitOperator(2, {"XX": 0.4, "ZI": -0.7, "IZ": 0.2, "YY": 0.1})
    eig = diagonalize(H)
    rng = np.random.default_rng(1)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    st = state_from_vector(eig, psi / np.linalg.norm(psi))
    P, Q = QubitOperator(2, {"XZ": 1.0}).to_matrix(), QubitOperator(2, {"YI": 1.0}).to_matrix()
    t = 0.25
    g = ppe_signal(eig, st, ["XZ", "YI"], PPEConfig(k0_max=3, k1_max=3), t)
    Hm = H.to_matrix()
    v = st.vector
    for k0 in range(4):
        U0 = expm(1j * Hm * k0 * t)
        for k1 in range(4):
            ref = np.vdot(v, U0 @ P @ expm(1j * Hm * k1 * t) @ Q @ U0 @ v)
            assert g[k0, k1] == pytest.approx(ref, abs=1e-12)


def test_identity_signal_single_eigenstate(toy):
    eig, _ = toy
    st = prepare_state(eig)
    cfg = PPEConfig(k0_max=5, k1_max=5)
    e0, a0 = ground_from_identity(eig, st, cfg, T)
    assert e0 == pytest.approx(eig.ground_energy, abs=1e-10)
    assert a0 == pytest.approx(1.0, abs=1e-10)
    g = ppe_signal(eig, st, ["I", "I"], cfg, T)
    assert np.allclose(np.abs(g), 1.0)


def test_toy_zz_bin(toy):
    eig, st = toy
    cfg = PPEConfig(k0_max=7, k1_max=7)
    e0, a0 = ground_from_identity(eig, st, cfg, T)
    assert a0 == pytest.approx(0.5)
    paths = nested_prony(ppe_signal(eig, st, ["Z", "Z"], cfg, T), T, e0, eig.spectral_norm, cfg)
    excited = paths.amps[paths.energies[:, 0] > 0]
    assert paths.energies[paths.energies[:, 0] > 0, 0] == pytest.approx([LX])
    assert excited[0] == pytest.approx(0.5)


def test_toy_xx_has_no_excited_path(toy):
    eig, st = toy
    cfg = PPEConfig(k0_max=7, k1_max=7)
    e0, _ = ground_from_identity(eig, st, cfg, T)
    paths = nested_prony(ppe_signal(eig, st, ["X", "X"], cfg, T), T, e0, eig.spectral_norm, cfg)
    assert np.allclose(paths.energies[:, 0], e0)


@pytest.mark.parametrize("lx", [0.2, 0.35, 0.5, 1.0, 1.7, 2.0])
def test_toy_table_exact(lx):
    out = toy_table(lx)
    assert out["zz"] == pytest.approx(-1.0 / lx, abs=1e-10)
    assert abs(out["xz"]) < 1e-10 and abs(out["xx"]) < 1e-10


def test_toy_table_sampled_within_five_sigma():
    vals = np.array([toy_table(1.0, PPEConfig(k0_max=7, k1_max=7, n_meas=10_000, seed=s))["zz"] for s in range(40)])
    sigma = vals.std(ddof=1)
    assert abs(vals.mean() + 1.0) < 5 * sigma / np.sqrt(len(vals))
    assert np.all(np.abs(vals + 1.0) < 5 * sigma)


def test_phase_wrap_rejected(toy):
    eig, st = toy
    with pytest.raises(PPEError):
        PPEConfig(t=2.0).time(eig)


def test_config_validation():
    with pytest.raises(PPEError):
        PPEConfig(delta=0.0)
    with pytest.raises(PPEError):
        PPEConfig(prep="other")
    with pytest.raises(PPEError):
        PPEConfig(k1_max=0)


def test_non_unitary_excitation_rejected(toy):
    eig, st = toy
    with pytest.raises(PPEError):
        ppe_signal(eig, st, [QubitOperator(1, {"X": 1.0, "Z": 1.0}), "Z"], PPEConfig(), T)


def test_binning_merges_close_tones():
    e, a = bin_amplitudes(np.array([0.5, 0.5 + 1e-9]), np.array([0.2, 0.3]), 0.01, 1.0)
    assert e.shape == (1, 1) and a[0] == pytest.approx(0.5)
    e, a = bin_amplitudes(np.array([0.5, 0.52]), np.array([0.2, 0.3]), 0.01, 1.0)
    assert len(a) == 2
    with pytest.raises(PPEError):
        bin_amplitudes(np.array([0.5]), np.array([1.0]), 0.0, 1.0)


def test_assembly_refuses_degenerate_bin():
    pset = PathAmplitudeSet((Bin((-1.0,), 0.1),), -1.0, 1.0)
    with pytest.raises(DegenerateResponseError):
        assemble_second_derivative([(1.0, pset)], 0.0, -1.0)


def test_h2_matches_sum_over_states():
    fam = h2_family(2)
    for r in (0.5, 0.75, 1.2):
        at = {"R": r}
        eig = diagonalize(fam(at))
        d, dd = fam.derivative(at, "R"), fam.derivative(at, ("R", "R"))
        res = ppe_second_derivative(fam, at, ("R", "R"))
        assert res.value == pytest.approx(sum_over_states(eig, d, d, dd), abs=1e-6)
        assert res.diagnostics.resolution_bound > 0


def test_mixed_derivative_on_four_qubits():
    fam = h2_family(4)
    at = {"R": 0.9, "F": 0.0}
    eig = diagonalize(fam(at))
    dr, df = fam.derivative(at, "R"), fam.derivative(at, "F")
    ref = sum_over_states(eig, dr, df, fam.derivative(at, ("R", "F")))
    assert ppe_second_derivative(fam, at, ("R", "F")).value == pytest.approx(ref, abs=1e-6)


def test_two_level_closed_form():
    fam = OperatorFamily("lin", ("a",), lambda pt: QubitOperator(1, {"Z": 1.0, "X": pt["a"]}), 1)
    at = {"a": 0.0}
    # d2E/da2 = 2 |<0|X|1>|^2 / (E0 - E1) = 2 / (-2)
    assert ppe_second_derivative(fam, at, ("a", "a")).value == pytest.approx(-1.0, abs=1e-8)


def test_commuting_perturbation_has_no_response():
    fam = OperatorFamily("z", ("a",), lambda pt: QubitOperator(1, {"Z": 1.0 + pt["a"] ** 2}), 1)
    res = ppe_second_derivative(fam, {"a": 0.3}, ("a", "a"))
    assert res.response_term == pytest.approx(0.0, abs=1e-10)
    assert res.value == pytest.approx(-2.0, abs=1e-6)


def test_depleted_qpe_state_still_exact():
    fam = h2_family(2)
    at = {"R": 0.75}
    eig = diagonalize(fam(at))
    st = prepare_state(eig, "depleted", depletion=0.2, seed=1)
    d, dd = fam.derivative(at, "R"), fam.derivative(at, ("R", "R"))
    res = ppe_derivative_from_operators(eig, (d, d), dd, PPEConfig(), st)
    assert res.diagnostics.a0 == pytest.approx(0.8, abs=1e-10)
    assert res.value == pytest.approx(sum_over_states(eig, d, d, dd), abs=1e-6)


def test_vqe_prep_exact_state():
    fam = h2_family(2)
    at = {"R": 0.75}
    qpe = ppe_second_derivative(fam, at, ("R", "R")).value
    vqe = ppe_second_derivative(fam, at, ("R", "R"), PPEConfig(prep="vqe")).value
    assert vqe == pytest.approx(qpe, abs=1e-8)


def test_post_selection_bookkeeping():
    fam = h2_family(2)
    at = {"R": 0.75}
    eig = diagonalize(fam(at))
    st = prepare_state(eig)
    g = ppe_signal(eig, st, ["XY", "XY"], PPEConfig(prep="vqe", k1_max=15))
    rep = post_selection_report(g, 0.0)
    assert np.all(rep["success_probability"] >= 0.5) and np.all(rep["success_probability"] <= 1.0)
    # the return probability is |alpha_00|^2 point by point
    assert np.allclose(rep["return_probability"], np.abs(g) ** 2)
    assert 0.0 <= rep["mean_return_probability"] <= 1.0


def test_halving_delta_never_hurts():
    fam = h2_family(2)
    for r in np.linspace(0.3, 1.5, 5):
        at = {"R": float(r)}
        eig = diagonalize(fam(at))
        d, dd = fam.derivative(at, "R"), fam.derivative(at, ("R", "R"))
        ref = sum_over_states(eig, d, d, dd)
        errs = [abs(ppe_second_derivative(fam, at, ("R", "R"), PPEConfig(delta=dl)).value - ref)
                for dl in (0.04, 0.02, 0.01, 0.005)]
        assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))


@pytest.mark.slow
def test_sampled_error_scaling():
    fam = h2_family(2)
    at = {"R": 0.75}
    eig = diagonalize(fam(at))
    d, dd = fam.derivative(at, "R"), fam.derivative(at, ("R", "R"))
    ref = sum_over_states(eig, d, d, dd)
    shots = [10_000, 30_000, 100_000, 300_000, 1_000_000]
    rms = []
    for n in shots:
        errs = [ppe_second_derivative(fam, at, ("R", "R"), PPEConfig(n_meas=n, seed=1000 + s)).value - ref
                for s in range(40)]
        rms.append(np.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log(shots), np.log(rms), 1)[0]
    assert abs(slope + 0.5) <= 0.15


def test_third_derivative_toy():
    fam = toy_family()
    lx, lz = 1.0, 0.3
    res = ppe_third_derivative(fam, {"lx": lx, "lz": lz}, "lz")
    r = np.hypot(lx, lz)
    assert res.value == pytest.approx(3 * lx**2 * lz / r**5, abs=1e-8)


def test_third_derivative_sampled_rejected():
    with pytest.raises(PPEError):
        ppe_third_derivative(toy_family(), {"lx": 1.0, "lz": 0.3}, "lz", PPEConfig(n_meas=100))


def test_signal_csv(toy):
    eig, st = toy
    g = ppe_signal(eig, st, ["Z", "Z"], PPEConfig(k0_max=1, k1_max=2), T)
    lines = signal_to_csv(g).splitlines()
    assert lines[0] == "k0,k1,re,im" and len(lines) == 1 + 2 * 3
