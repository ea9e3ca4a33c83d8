"""Derivatives from nested phase-estimation signals (propagator and phase estimation).

For unitary excitations ``P_1 .. P_X`` and a QPE-style prepared state the
ancilla signal is

    g(k0, k1, .., k_{X-1}) = sum a*_m a_n <m|P_1|j_1> .. <j_{X-1}|P_X|n>
                             e^{i k0 t (E_m + E_n)} e^{i k1 t E_{j_1}} ..

Prony along ``k0`` isolates the ``2 t E_0`` tone; further Prony stages along
``k1, k2, ..`` resolve the intermediate energies and the path amplitudes.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from qderiv.chem.family import OperatorFamily, toy_family
from qderiv.operators import PauliTerm, QubitOperator, decompose_unitary
from qderiv.simulator import (
    EigenDecomposition,
    PreparedState,
    ShotConfig,
    diagonalize,
    mt_tomography,
    prepare_state,
    state_from_vector,
)
from qderiv.spectral import prony_multi

DEFAULT_T_FRACTION = 0.25  # t = pi / (4 ||H||) keeps 2 E t inside (-pi/2, pi/2)
ANALYTIC_AMP_FLOOR = 1e-12


class PPEError(ValueError):
    pass


class DegenerateResponseError(PPEError):
    """A response bin sits on the ground energy."""


@dataclass(frozen=True)
class PPEConfig:
    """Signal and post-processing settings.

    Attributes:
        t: evolution unit; ``None`` picks ``pi / (4 ||H||)``.
        k0_max: last sample index of the state-preparation axis.
        k1_max: last sample index of every excitation axis.
        delta: bin width as a fraction of the spectral norm.
        n_meas: shots per signal point and tomography basis (0 = analytic).
        prep: ``"qpe"`` (two-index signals) or ``"vqe"`` (post-selected one-index signals).
        seed: RNG seed for sampled mode.
    """

    t: float | None = None
    k0_max: int = 31
    k1_max: int = 15
    delta: float = 0.01
    n_meas: int = 0
    prep: str = "qpe"
    seed: int | None = None

    def __post_init__(self):
        if self.delta <= 0:
            raise PPEError("delta must be positive")
        if self.prep not in ("qpe", "vqe"):
            raise PPEError("prep must be 'qpe' or 'vqe'")
        if self.n_meas < 0:
            raise PPEError("n_meas must be non-negative")
        if self.k0_max < 1 or self.k1_max < 1:
            raise PPEError("signals need at least two samples per axis")

    @property
    def sampled(self) -> bool:
        return self.n_meas > 0

    def time(self, eig: EigenDecomposition) -> float:
        if self.t is None:
            return DEFAULT_T_FRACTION * np.pi / eig.spectral_norm
        t = float(self.t)
        # the k0 axis carries phases 2 E t
        if not 0 < 2.0 * t * eig.spectral_norm < np.pi:
            raise PPEError("need 0 < 2 t ||H|| < pi so that 2 E t does not wrap")
        return t


# ------------------------------------------------------------------ signals


def _unitary_matrix(op) -> np.ndarray:
    if isinstance(op, str):
        op = PauliTerm(op, 1.0)
    if isinstance(op, PauliTerm):
        if abs(abs(op.coeff) - 1.0) > 1e-12:
            raise PPEError("excitation Pauli terms need unit-modulus coefficients")
        return op.to_matrix()
    m = op.to_matrix() if isinstance(op, QubitOperator) else np.asarray(op, dtype=complex)
    if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-10):
        raise PPEError("excitation operators must be unitary")
    return m


def path_tensor(eig: EigenDecomposition, excitations: Sequence, k_max: int, t: float) -> np.ndarray:
    """``R[m, k1, .., k_{X-1}, n]``: the excitation chain with intermediate propagators."""
    mats = [eig.states.conj().T @ _unitary_matrix(p) @ eig.states for p in excitations]
    ph = np.exp(1j * t * np.outer(np.arange(k_max + 1), eig.energies))  # (k, j)
    R = mats[0]
    for P in mats[1:]:
        R = (R[..., None, :] * ph) @ P
    return R


def ppe_signal(
    eig: EigenDecomposition,
    state: PreparedState,
    excitations: Sequence,
    cfg: PPEConfig,
    t: float | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Ancilla phase signal for a chain of unitary excitations.

    QPE preparation gives an array indexed ``[k0, k1, .., k_{X-1}]``. VQE
    preparation drops the ``k0`` axis: the value is the post-selected
    ``alpha_00(k1, ..)``.

    Args:
        eig: eigendecomposition of the Hamiltonian.
        state: prepared state in that eigenbasis.
        excitations: unitary Pauli words, terms or operators ``P_1 .. P_X``.
        cfg: signal configuration; ``n_meas > 0`` adds two-basis shot noise.
        t: overrides ``cfg.time(eig)``.
    """
    if not excitations:
        raise PPEError("need at least one excitation")
    t = cfg.time(eig) if t is None else t
    R = path_tensor(eig, excitations, cfg.k1_max, t)
    a = state.amplitudes
    if cfg.prep == "vqe":
        g = np.einsum("m,m...n,n->...", a.conj(), R, a)
    else:
        E = eig.energies
        k0 = np.arange(cfg.k0_max + 1)
        W = np.exp(1j * t * np.multiply.outer(k0, E[:, None] + E[None, :])) * np.outer(a.conj(), a)
        g = np.einsum("kmn,m...n->k...", W, R)
    if cfg.sampled:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        g = mt_tomography(g, ShotConfig(cfg.n_meas), rng).estimate
    return np.asarray(g)


def signal_to_csv(g: np.ndarray) -> str:
    """CSV dump with one index column per axis (``k0, k1, ..``) plus ``re, im``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"k{i}" for i in range(g.ndim)] + ["re", "im"])
    for idx in itertools.product(*(range(n) for n in g.shape)):
        v = g[idx]
        w.writerow(list(idx) + [repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


# ------------------------------------------------------------- nested Prony


@dataclass(frozen=True)
class PathAmplitudes:
    """Raw nested-Prony output: energy tuples of intermediate states and amplitudes."""

    energies: np.ndarray  # (n_paths, X - 1)
    amps: np.ndarray  # (n_paths,)

    def __len__(self) -> int:
        return len(self.amps)


@dataclass(frozen=True)
class Bin:
    energies: tuple[float, ...]
    amp: complex


@dataclass(frozen=True)
class PathAmplitudeSet:
    """Binned path amplitudes, normalized by the ground-state weight ``A0``."""

    bins: tuple[Bin, ...]
    e0: float
    a0: float

    def __len__(self) -> int:
        return len(self.bins)

    @property
    def weight(self) -> float:
        return float(sum(abs(b.amp) ** 2 for b in self.bins))


def _stage(samples: np.ndarray, t: float, scale: float, noise: float, amp_floor: float):
    """Prony along axis 0 with all remaining axes as channels sharing tones."""
    shape = samples.shape
    flat = samples.reshape(shape[0], -1)
    omegas, amps = prony_multi(flat, None, amp_threshold=amp_floor, noise_std=noise)
    return omegas / (scale * t), amps.reshape((len(omegas),) + shape[1:])


def _noise_levels(cfg: PPEConfig) -> tuple[float, float]:
    if not cfg.sampled:
        return 0.0, 0.0
    sigma = np.sqrt(2.0 / cfg.n_meas)
    return sigma, 3.0 * sigma


def ground_from_identity(eig: EigenDecomposition, state: PreparedState, cfg: PPEConfig, t: float | None = None,
                         rng: np.random.Generator | None = None) -> tuple[float, float]:
    """``(E0, A0)`` from the identity-excitation run.

    The lowest first-stage tone is taken as ``2 t E0``; the second stage
    refines ``E0`` and returns ``A0 = |a_0|^2``. With VQE preparation the
    lowest tone of the one-index signal gives ``E0`` and its weight ``A0``.
    """
    t = cfg.time(eig) if t is None else t
    n = int(round(np.log2(eig.states.shape[0])))
    ident = PauliTerm("I" * n, 1.0)
    g = ppe_signal(eig, state, [ident, ident], cfg, t, rng)
    noise, floor = _noise_levels(cfg)
    amp_floor = floor if cfg.sampled else ANALYTIC_AMP_FLOOR
    if cfg.prep == "vqe":
        energies, amps = _stage(g, t, 1.0, noise, amp_floor)
        if not len(energies):
            raise PPEError("identity signal has no tones")
        i = int(np.argmin(energies))
        return float(energies[i]), float(abs(amps[i]))
    e_stage1, a_stage1 = _stage(g, t, 2.0, noise, amp_floor)
    if not len(e_stage1):
        raise PPEError("identity signal has no tones")
    i = int(np.argmin(e_stage1))
    e2, a2 = _stage(a_stage1[i], t, 1.0, noise / np.sqrt(cfg.k0_max + 1), amp_floor)
    j = int(np.argmax(np.abs(a2)))
    return float(e2[j]), float(abs(a2[j]))


def nested_prony(
    g: np.ndarray, t: float, e0: float, norm: float, cfg: PPEConfig
) -> PathAmplitudes:
    """Resolve path energies and amplitudes of a QPE- or VQE-prepared signal.

    Args:
        g: signal from ``ppe_signal``.
        t: evolution unit used for ``g``.
        e0: ground energy (from ``ground_from_identity``).
        norm: spectral norm; sets the tolerance ``norm * delta`` for
            matching the first-stage tone to ``2 E0``.
        cfg: configuration used to generate ``g``.

    Returns:
        Unbinned paths. Mid-gap first-stage tones (scattering into other
        eigenstates) are discarded; an empty result means no tone at ``2 E0``.
    """
    noise, floor = _noise_levels(cfg)
    amp_floor = floor if cfg.sampled else ANALYTIC_AMP_FLOOR
    width = norm * cfg.delta
    if cfg.prep == "qpe":
        e1, a1 = _stage(g, t, 2.0, noise, amp_floor)
        hit = np.flatnonzero(np.abs(e1 - e0) < width)
        if hit.size == 0:
            return PathAmplitudes(np.zeros((0, g.ndim - 1)), np.zeros(0, dtype=complex))
        rest = a1[hit[np.argmin(np.abs(e1[hit] - e0))]]
        noise = noise / np.sqrt(cfg.k0_max + 1)
    else:
        rest = g
    # peel one axis per stage, carrying the energies found so far
    paths = [((), rest)]
    while paths[0][1].ndim > 0:
        nxt = []
        for es, arr in paths:
            if np.max(np.abs(arr)) < amp_floor:
                continue
            energies, amps = _stage(arr, t, 1.0, noise, amp_floor)
            nxt.extend((es + (float(e),), a) for e, a in zip(energies, amps))
        paths = nxt
        noise = noise / np.sqrt(cfg.k1_max + 1)
        if not paths:
            break
    if not paths:
        return PathAmplitudes(np.zeros((0, g.ndim - (cfg.prep == "qpe"))), np.zeros(0, dtype=complex))
    return PathAmplitudes(np.array([p[0] for p in paths]), np.array([complex(p[1]) for p in paths]))


def bin_amplitudes(energies: np.ndarray, amps: np.ndarray, delta: float, spectral_norm: float):
    """Group tones closer than ``spectral_norm * delta``.

    Works per coordinate for multi-index paths; a bin's energy is the
    amplitude-weighted mean of its members and its amplitude their sum.
    Returns ``(bin_energies, bin_amps)``.
    """
    energies = np.atleast_2d(np.asarray(energies, dtype=float).reshape(len(amps), -1))
    amps = np.asarray(amps, dtype=complex)
    if delta <= 0:
        raise PPEError("delta must be positive")
    width = spectral_norm * delta
    labels = np.zeros(energies.shape, dtype=int)
    centers = []
    for axis in range(energies.shape[1]):
        col = energies[:, axis]
        order = np.argsort(col)
        lab = np.zeros(len(col), dtype=int)
        current = 0
        for prev, idx in zip(order[:-1], order[1:]):
            if col[idx] - col[prev] >= width:
                current += 1
            lab[idx] = current
        labels[:, axis] = lab
        wts = np.abs(amps) + 1e-300
        centers.append(np.array([np.average(col[lab == b], weights=wts[lab == b]) for b in range(current + 1)]))
    groups: dict[tuple, complex] = {}
    for lab, amp in zip(map(tuple, labels), amps):
        groups[lab] = groups.get(lab, 0.0) + amp
    keys = sorted(groups)
    bin_e = np.array([[centers[ax][b] for ax, b in enumerate(k)] for k in keys]).reshape(len(keys), -1)
    return bin_e, np.array([groups[k] for k in keys], dtype=complex)


def binned_paths(paths: PathAmplitudes, e0: float, a0: float, cfg: PPEConfig, spectral_norm: float) -> PathAmplitudeSet:
    if len(paths) == 0:
        return PathAmplitudeSet((), e0, a0)
    e, a = bin_amplitudes(paths.energies, paths.amps, cfg.delta, spectral_norm)
    return PathAmplitudeSet(tuple(Bin(tuple(map(float, ei)), complex(ai / a0)) for ei, ai in zip(e, a)), e0, a0)


# ----------------------------------------------------------------- assembly


def assemble_second_derivative(
    terms: Sequence[tuple[complex, PathAmplitudeSet]],
    second_order_term: float,
    e0: float,
    tol: float = 1e-9,
) -> float:
    """``<d2H> + sum_pairs w * sum_B 2 Re[A_B] / (E0 - E_B)``.

    ``terms`` pairs a unitary-decomposition weight product with the binned
    (ground-excluded) path set of that excitation pair.

    Raises:
        DegenerateResponseError: a bin energy within ``tol`` of ``E0``.
    """
    total = float(second_order_term)
    for weight, pset in terms:
        for b in pset.bins:
            gap = e0 - b.energies[0]
            if abs(gap) < tol:
                raise DegenerateResponseError(f"bin at {b.energies[0]:.6g} coincides with E0")
            total += float(np.real(weight * 2.0 * b.amp / gap))
    return total


def exclude_ground(pset: PathAmplitudeSet, spectral_norm: float, delta: float) -> PathAmplitudeSet:
    """Drop bins whose every coordinate lies within ``||H|| delta`` of ``E0``."""
    width = spectral_norm * delta
    kept = tuple(b for b in pset.bins if not all(abs(e - pset.e0) < width for e in b.energies))
    return PathAmplitudeSet(kept, pset.e0, pset.a0)


def _third_order_coefficient(e0: float, ej: float, ek: float, width: float) -> float:
    gj, gk = abs(ej - e0) < width, abs(ek - e0) < width
    if gj and gk:
        return 0.0
    if gj:
        return -3.0 / (e0 - ek) ** 2
    if gk:
        return -3.0 / (e0 - ej) ** 2
    return 6.0 / ((e0 - ej) * (e0 - ek))


# ---------------------------------------------------------------- pipelines


@dataclass
class PPEDiagnostics:
    e0: float
    a0: float
    t: float
    spectral_norm: float
    gap: float
    n_amplitudes: int
    resolution_bound: float
    sampling_variance: float | None = None
    post_selection: dict | None = None
    paths: dict = field(default_factory=dict)


@dataclass
class PPEResult:
    value: float
    second_order_term: float
    response_term: float
    diagnostics: PPEDiagnostics


def resolution_bound(order: int, n_amplitudes: int, gap: float, spectral_norm: float, delta: float) -> float:
    """Loose binning-error bound ``d N_A^{1/2} gap^{d-2} ||H|| delta``."""
    return order * np.sqrt(n_amplitudes) * gap ** (order - 2) * spectral_norm * delta


def sampling_variance_model(
    order: int, n_amplitudes: int, gap: float, delta: float, n_meas: int, k_max: int, t: float, a0: float
) -> float:
    """Scaling model for Var[D] (constants unknown, reported as a diagnostic)."""
    return n_amplitudes * (
        gap ** (2 * order - 2) * delta ** (order / 2) / (n_meas * a0)
        + order * gap ** (2 * order - 4) * delta**order / (k_max**2 * t**2 * a0**2)
    )


def _unitary_parts(op: QubitOperator) -> list[tuple[complex, PauliTerm]]:
    dec = decompose_unitary(op)
    return [(complex(w), p) for p, w in zip(dec.parts, dec.weights)]


def _default_state(eig: EigenDecomposition, state: PreparedState | None) -> PreparedState:
    return prepare_state(eig) if state is None else state


def _qpe_expectation(eig, state, op: QubitOperator, cfg: PPEConfig, t, e0, a0, rng) -> float:
    """``<Psi_0|O|Psi_0>`` from single-excitation signals at the ``2 E0`` tone."""
    if cfg.prep == "vqe" or not cfg.sampled:
        v = eig.ground_state if cfg.prep == "qpe" else state.vector
        return float(np.real(np.vdot(v, op.apply(v))))
    n = op.n_qubits
    ident = PauliTerm("I" * n, 1.0)
    total = 0.0
    noise, floor = _noise_levels(cfg)
    for w, p in _unitary_parts(op):
        g = ppe_signal(eig, state, [p, ident], cfg, t, rng)[:, 0]
        e1, a1 = _stage(g, t, 2.0, noise, floor)
        hit = np.flatnonzero(np.abs(e1 - e0) < eig.spectral_norm * cfg.delta)
        if hit.size:
            total += float(np.real(w * a1[hit[0]] / a0))
    return total


def ppe_derivative_from_operators(
    eig: EigenDecomposition,
    first: Sequence[QubitOperator],
    second_order_op: QubitOperator | None,
    cfg: PPEConfig,
    state: PreparedState | None = None,
) -> PPEResult:
    """Second derivative from derivative operators ``first = (dH/di, dH/dj)``.

    Each operator is split into weighted Pauli words; every word pair gives
    one two-index signal, whose ground-excluded bins enter the response sum.
    """
    state = _default_state(eig, state)
    rng = np.random.default_rng(cfg.seed)
    t = cfg.time(eig)
    e0, a0 = ground_from_identity(eig, state, cfg, t, rng)
    # post-selected amplitudes already refer to the prepared state itself
    scale = a0 if cfg.prep == "qpe" else 1.0
    norm = eig.spectral_norm
    terms, path_log = [], {}
    parts_i, parts_j = _unitary_parts(first[0]), _unitary_parts(first[1])
    n_amp = 0
    for (wp, p), (wq, q) in itertools.product(parts_i, parts_j):
        if set(p.word) == {"I"} or set(q.word) == {"I"}:
            continue  # identity only reaches the ground tone, which is excluded
        g = ppe_signal(eig, state, [p, q], cfg, t, rng)
        raw = nested_prony(g, t, e0, norm, cfg)
        pset = exclude_ground(binned_paths(raw, e0, scale, cfg, norm), norm, cfg.delta)
        n_amp += len(pset)
        terms.append((wp * wq, pset))
        path_log[(p.word, q.word)] = pset
    second = 0.0 if second_order_op is None else _qpe_expectation(eig, state, second_order_op, cfg, t, e0, a0, rng)
    value = assemble_second_derivative(terms, second, e0)
    gap = eig.gap
    diag = PPEDiagnostics(
        e0=e0, a0=a0, t=t, spectral_norm=norm, gap=gap, n_amplitudes=n_amp,
        resolution_bound=resolution_bound(2, max(n_amp, 1), gap, norm, cfg.delta),
        sampling_variance=(
            sampling_variance_model(2, max(n_amp, 1), gap, cfg.delta, cfg.n_meas, cfg.k1_max, t, a0)
            if cfg.sampled else None
        ),
        paths=path_log,
    )
    return PPEResult(value, second, value - second, diag)


def ppe_second_derivative(
    family: OperatorFamily,
    at: Mapping[str, float] | None,
    params: tuple[str, str],
    cfg: PPEConfig = PPEConfig(),
    state: PreparedState | None = None,
    subspace: np.ndarray | None = None,
) -> PPEResult:
    """``d2E0 / d(params[0]) d(params[1])`` for a family at ``at``.

    Args:
        family: operator family; derivative operators come from
            ``family.derivative`` (exact if the family supplies them,
            central differences otherwise).
        at: parameter point.
        params: the two parameter names (equal for a diagonal entry).
        cfg: PPE configuration.
        state: prepared state; the exact ground state by default.
        subspace: optional invariant subspace for the diagonalization.
    """
    H = family(at)
    eig = diagonalize(H, subspace)
    d_i = family.derivative(at, params[0])
    d_j = family.derivative(at, params[1])
    d_ij = family.derivative(at, tuple(params))
    return ppe_derivative_from_operators(eig, (d_i, d_j), d_ij, cfg, state)


def ppe_third_derivative(
    family: OperatorFamily,
    at: Mapping[str, float] | None,
    param: str,
    cfg: PPEConfig = PPEConfig(k0_max=15, k1_max=7),
    state: PreparedState | None = None,
) -> PPEResult:
    """Single-parameter third derivative from three-index signals (analytic mode).

    Connected third-order paths carry ``6 / ((E0 - Ej)(E0 - Ek))``; paths
    passing through the ground state once carry ``-3 / (E0 - E)^2`` and
    reproduce the disconnected term. The ``dH dH2`` cross term uses two-index signals.
    """
    if cfg.sampled:
        raise PPEError("the third-order pipeline is implemented for analytic signals only")
    H = family(at)
    eig = diagonalize(H)
    state = _default_state(eig, state)
    t = cfg.time(eig)
    rng = np.random.default_rng(cfg.seed)
    e0, a0 = ground_from_identity(eig, state, cfg, t, rng)
    norm = eig.spectral_norm
    width = norm * cfg.delta
    d1 = family.derivative(at, param)
    d2 = family.derivative(at, (param, param))
    d3 = family.derivative(at, (param, param, param))
    total = 0.0
    parts1 = _unitary_parts(d1)
    n_amp = 0
    for (w1, p1), (w2, p2), (w3, p3) in itertools.product(parts1, parts1, parts1):
        g = ppe_signal(eig, state, [p1, p2, p3], cfg, t, rng)
        raw = nested_prony(g, t, e0, norm, cfg)
        if not len(raw):
            continue
        e, a = bin_amplitudes(raw.energies, raw.amps, cfg.delta, norm)
        for (ej, ek), amp in zip(e, a):
            coef = _third_order_coefficient(e0, ej, ek, width)
            if coef:
                n_amp += 1
                total += float(np.real(w1 * w2 * w3 * amp / a0)) * coef
    # 6 sum' Re[(H1)0j (H2)j0] / (E0 - Ej) from two-index signals (3 * the 2 Re[..] form)
    cross = 0.0
    for (wp, p), (wq, q) in itertools.product(parts1, _unitary_parts(d2)):
        g = ppe_signal(eig, state, [p, q], cfg, t, rng)
        pset = exclude_ground(binned_paths(nested_prony(g, t, e0, norm, cfg), e0, a0, cfg, norm), norm, cfg.delta)
        cross += assemble_second_derivative([(wp * wq, pset)], 0.0, e0)
    third = _qpe_expectation(eig, state, d3, cfg, t, e0, a0, rng) if len(d3) else 0.0
    value = third + 3.0 * cross + total
    diag = PPEDiagnostics(
        e0=e0, a0=a0, t=t, spectral_norm=norm, gap=eig.gap, n_amplitudes=n_amp,
        resolution_bound=resolution_bound(3, max(n_amp, 1), eig.gap, norm, cfg.delta),
    )
    return PPEResult(value, third, value - third, diag)


# ---------------------------------------------------------------- VQE prep


def post_selection_report(g: np.ndarray, pset_weight: float) -> dict:
    """Bookkeeping for post-selected (VQE-prepared) signals.

    ``return_probability[k] = |g(k)|^2`` is the chance of the system register
    returning to the reference state; the ancilla-inclusive success
    probability is ``(1 + |g|^2) / 2``. Averaged over ``k`` the return
    probability approaches the summed squared path weights.
    """
    g = np.asarray(g).reshape(-1)
    ret = np.abs(g) ** 2
    return {
        "return_probability": ret,
        "success_probability": (1.0 + ret) / 2.0,
        "mean_return_probability": float(ret.mean()),
        "path_weight": float(pset_weight),
    }


# ----------------------------------------------------------------- toy model


def toy_table(lambda_x: float, cfg: PPEConfig | None = None) -> dict[str, float]:
    """Second derivatives of the ground energy of ``lx X + lz Z`` at ``lz = 0``.

    The state is ``|0>``, an equal superposition of both eigenstates.
    Returns entries ``zz``, ``xz``, ``xx``.
    """
    cfg = PPEConfig(k0_max=7, k1_max=7) if cfg is None else cfg
    fam = toy_family()
    at = {"lx": lambda_x, "lz": 0.0}
    eig = diagonalize(fam(at))
    state = state_from_vector(eig, np.array([1.0, 0.0]), kind="basis")
    out = {}
    for key, pair in (("zz", ("lz", "lz")), ("xz", ("lx", "lz")), ("xx", ("lx", "lx"))):
        res = ppe_derivative_from_operators(
            eig,
            (fam.derivative(at, pair[0]), fam.derivative(at, pair[1])),
            fam.derivative(at, pair),
            cfg,
            state,
        )
        out[key] = res.value
    return out
