"""Tone estimation from uniformly sampled phase signals."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qderiv.simulator import ShotConfig, mt_tomography

MERGE_TOL = 1e-6
AMP_THRESHOLD = 1e-3


class SpectralError(ValueError):
    pass


class IdentifiabilityError(SpectralError):
    """More tones requested than the signal length can determine."""


class SingularSignalError(SpectralError):
    """Hankel system is rank deficient for the requested tone count."""


@dataclass(frozen=True)
class PhaseSignal:
    """Samples ``g(k)`` for ``k = 0 .. k_max`` taken at evolution unit ``t``."""

    samples: np.ndarray
    t: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1 or s.size == 0:
            raise SpectralError("signal must be a non-empty 1-d array")
        object.__setattr__(self, "samples", s)

    @property
    def k_max(self) -> int:
        return self.samples.size - 1

    def conj(self) -> "PhaseSignal":
        return PhaseSignal(self.samples.conj(), self.t)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "re", "im"])
        for k, v in enumerate(self.samples):
            w.writerow([k, repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, t: float = 1.0) -> "PhaseSignal":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise SpectralError("signal file has no samples")
        try:
            ks = [int(r["k"]) for r in rows]
            vals = [complex(float(r["re"]), float(r["im"])) for r in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise SpectralError(f"malformed signal CSV: {exc}") from exc
        if ks != list(range(len(ks))):
            raise SpectralError("k column must run 0, 1, 2, ... without gaps")
        return cls(np.array(vals), t)


@dataclass(frozen=True)
class Tone:
    omega: float  # phase per step, in (-pi, pi]
    amp: complex


@dataclass(frozen=True)
class SpectralEstimate:
    tones: tuple[Tone, ...]

    @property
    def omegas(self) -> np.ndarray:
        return np.array([t.omega for t in self.tones])

    @property
    def amps(self) -> np.ndarray:
        return np.array([t.amp for t in self.tones], dtype=complex)

    def __len__(self) -> int:
        return len(self.tones)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["omega", "amp_re", "amp_im"])
        for t in self.tones:
            w.writerow([repr(t.omega), repr(float(t.amp.real)), repr(float(t.amp.imag))])
        return buf.getvalue()


def synthesize(omegas: Sequence[float], amps: Sequence[complex], k_max: int, t: float = 1.0) -> PhaseSignal:
    k = np.arange(k_max + 1)
    g = np.exp(1j * np.outer(k, omegas)) @ np.asarray(amps, dtype=complex)
    return PhaseSignal(g, t)


def max_tones(k_max: int) -> int:
    return (k_max + 1) // 2


def _hankel(g: np.ndarray, n_cols: int) -> np.ndarray:
    rows = g.size - n_cols + 1
    idx = np.arange(rows)[:, None] + np.arange(n_cols)[None, :]
    return g[idx]


def _stacked_hankel(g: np.ndarray, n_cols: int) -> np.ndarray:
    # g has shape (K, channels); channels share poles, so their Hankel blocks stack
    return np.vstack([_hankel(g[:, c], n_cols) for c in range(g.shape[1])])


def _rank_floor(s: np.ndarray, shape, rtol: float, noise_std: float) -> float:
    m, n = shape
    return max(rtol * s[0], 3.0 * noise_std * (np.sqrt(m) + np.sqrt(n)))


def _as_channels(samples) -> np.ndarray:
    g = np.asarray(samples, dtype=complex)
    return g[:, None] if g.ndim == 1 else g


def estimate_n_tones(sig: PhaseSignal | np.ndarray, rtol: float = 1e-10, noise_std: float = 0.0) -> int:
    """Numerical rank of the widest Hankel matrix of the signal.

    Singular values count when above ``max(rtol * s_max, 3 * noise_std * (sqrt(m) + sqrt(n)))``;
    the second term is the usual spectral-norm bound for an ``m x n`` noise matrix.
    A 2-d array is read as channels sharing one set of tones.
    """
    g = _as_channels(sig.samples if isinstance(sig, PhaseSignal) else sig)
    n_cols = max_tones(g.shape[0] - 1)
    if n_cols == 0:
        return int(np.any(np.abs(g[0]) > 0))
    mat = _stacked_hankel(g, n_cols)
    s = np.linalg.svd(mat, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > _rank_floor(s, mat.shape, rtol, noise_std)))


def _vandermonde_fit(g: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    k = np.arange(g.shape[0])
    V = np.exp(1j * np.outer(k, omegas))
    return np.linalg.lstsq(V, g, rcond=None)[0]


def prony_multi(
    samples: np.ndarray,
    n_tones: int | None = None,
    amp_threshold: float = AMP_THRESHOLD,
    merge_tol: float = MERGE_TOL,
    rank_rtol: float = 1e-10,
    noise_std: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Prony fit of several channels that share frequencies.

    Args:
        samples: array of shape ``(k_max + 1, channels)``.
        n_tones, amp_threshold, merge_tol, rank_rtol, noise_std: see ``prony``.
            A tone survives pruning if its largest amplitude over channels
            reaches ``amp_threshold``.

    Returns:
        ``(omegas, amps)`` with ``amps`` of shape ``(n, channels)``, sorted by omega.
    """
    g = _as_channels(samples)
    K = g.shape[0]
    if n_tones is None:
        n_tones = estimate_n_tones(g, rank_rtol, noise_std)
        if n_tones == 0:
            return np.zeros(0), np.zeros((0, g.shape[1]), dtype=complex)
    if n_tones < 1:
        raise SpectralError("n_tones must be positive")
    if n_tones > max_tones(K - 1):
        raise IdentifiabilityError(f"{n_tones} tones need at least {2 * n_tones} samples, signal has {K}")
    H = _stacked_hankel(g[:-1], n_tones)
    rhs = -np.concatenate([g[n_tones:, c] for c in range(g.shape[1])])
    s = np.linalg.svd(H, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= _rank_floor(s, H.shape, rank_rtol, noise_std):
        raise SingularSignalError(f"Hankel matrix is rank deficient for {n_tones} tones")
    coeffs = np.linalg.lstsq(H, rhs, rcond=None)[0]
    roots = np.roots(np.concatenate(([1.0], coeffs[::-1])))
    omegas = np.sort(np.angle(roots))  # projection onto the unit circle
    merged = [omegas[0]]
    for w in omegas[1:]:
        if w - merged[-1] >= merge_tol:
            merged.append(w)
    if len(merged) > 1 and (merged[0] + 2 * np.pi) - merged[-1] < merge_tol:
        merged.pop(0)  # wrap-around duplicate near +-pi
    omegas = np.array(merged)
    amps = _vandermonde_fit(g, omegas)
    keep = np.max(np.abs(amps), axis=1) >= amp_threshold
    if not keep.all():
        omegas = omegas[keep]
        amps = _vandermonde_fit(g, omegas) if omegas.size else amps[keep]
    return omegas, amps


def prony(
    sig: PhaseSignal,
    n_tones: int | None = None,
    amp_threshold: float = AMP_THRESHOLD,
    merge_tol: float = MERGE_TOL,
    rank_rtol: float = 1e-10,
    noise_std: float = 0.0,
) -> SpectralEstimate:
    """Recover frequencies and complex amplitudes of ``g(k) = sum_j a_j e^{i w_j k}``.

    Linear prediction over every usable Hankel row gives the characteristic
    polynomial. Its roots are pushed onto the unit circle and the amplitudes
    follow from a Vandermonde least-squares fit.

    Args:
        sig: sampled signal.
        n_tones: number of tones; estimated from the Hankel rank when omitted.
        amp_threshold: tones with smaller amplitude magnitude are dropped and
            the rest refitted.
        merge_tol: roots closer than this (radians) are merged.
        rank_rtol: relative singular-value floor for the rank checks.
        noise_std: per-sample noise level, raises the rank floor for sampled data.

    Raises:
        IdentifiabilityError: ``n_tones > (k_max + 1) / 2``.
        SingularSignalError: the Hankel system cannot support ``n_tones`` tones.
    """
    omegas, amps = prony_multi(sig.samples, n_tones, amp_threshold, merge_tol, rank_rtol, noise_std)
    return SpectralEstimate(tuple(Tone(float(w), complex(a)) for w, a in zip(omegas, amps[:, 0])))


# ----------------------------------------------------------- least squares


def lsq_phase(sig: PhaseSignal, n_terms: int | None = None) -> float:
    """Phase of a single-tone signal from the lag-one autocorrelation."""
    g = sig.samples
    K = g.size - 1 if n_terms is None else int(n_terms)
    if K < 1 or K > g.size - 1:
        raise SpectralError("need at least two samples")
    acc = np.vdot(g[:K], g[1 : K + 1])
    if acc == 0:
        raise SpectralError("signal has no energy")
    return float(np.angle(acc))


def default_window(k_max: int) -> int:
    return max(1, min(k_max, int(round(k_max ** (2.0 / 3.0)))))


def lsq_amplitude(sig: PhaseSignal, phi: float, window: int | None = None) -> complex:
    """Amplitude of a single tone ``A e^{i phi k}`` averaged over ``k = 1 .. L``."""
    L = default_window(sig.k_max) if window is None else int(window)
    if L < 1 or L > sig.k_max:
        raise SpectralError(f"window {L} outside 1..{sig.k_max}")
    k = np.arange(1, L + 1)
    return complex(np.mean(np.exp(-1j * k * phi) * sig.samples[k]))


@dataclass(frozen=True)
class ScalingResult:
    x: np.ndarray
    variances: np.ndarray
    slope: float
    slope_stderr: float

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return self.slope - z * self.slope_stderr, self.slope + z * self.slope_stderr


def _loglog_fit(x, y) -> tuple[float, float]:
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    dof = max(len(x) - 2, 1)
    sigma2 = float(np.sum((ly - A @ coef) ** 2)) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(np.sqrt(cov[0, 0]))


def sampled_amplitude_variance(
    k_max: int,
    n_meas: int,
    n_seeds: int,
    amplitude: complex = 0.5,
    phi: float = 0.2,
    window: int | None = None,
    seed: int = 0,
) -> float:
    """Monte-Carlo variance of the least-squares amplitude for one ``k_max``.

    Each sample ``g(k)`` is read out through the two-basis ancilla model with
    ``n_meas`` shots per basis.
    """
    truth = amplitude * np.exp(1j * phi * np.arange(k_max + 1))
    rng = np.random.default_rng(seed)
    noisy = mt_tomography(np.broadcast_to(truth, (n_seeds, k_max + 1)), ShotConfig(n_meas), rng).estimate
    est = np.empty(n_seeds, dtype=complex)
    for i in range(n_seeds):
        sig = PhaseSignal(noisy[i])
        est[i] = lsq_amplitude(sig, lsq_phase(sig), window)
    return float(np.mean(np.abs(est - est.mean()) ** 2))


def variance_scaling_experiment(
    k_max_values: Sequence[int],
    n_meas: int = 10_000,
    n_seeds: int = 200,
    window_rule: Callable[[int], int] | str = "two-thirds",
    amplitude: complex = 0.5,
    phi: float = 0.2,
    seed: int = 0,
) -> ScalingResult:
    """Fit the log-log slope of ``Var[A]`` against ``k_max``.

    Args:
        window_rule: ``"two-thirds"`` for ``L = round(k_max^(2/3))``,
            ``"full"`` for ``L = k_max``, or a callable ``k_max -> L``.
    """
    ks = np.asarray(k_max_values, dtype=int)
    if ks.size < 4:
        raise SpectralError("need at least 4 sweep points")
    if window_rule == "two-thirds":
        rule = default_window
    elif window_rule == "full":
        rule = lambda k: k  # noqa: E731
    elif callable(window_rule):
        rule = window_rule
    else:
        raise SpectralError(f"unknown window rule {window_rule!r}")
    var = np.array([
        sampled_amplitude_variance(int(k), n_meas, n_seeds, amplitude, phi, rule(int(k)), seed + i)
        for i, k in enumerate(ks)
    ])
    slope, err = _loglog_fit(ks.astype(float), var)
    return ScalingResult(ks, var, slope, err)


def shot_scaling_experiment(
    n_meas_values: Sequence[int],
    k_max: int = 128,
    n_seeds: int = 200,
    amplitude: complex = 0.5,
    phi: float = 0.2,
    seed: int = 0,
) -> ScalingResult:
    """Fit the log-log slope of ``Var[A]`` against shots per point."""
    ns = np.asarray(n_meas_values, dtype=int)
    if ns.size < 4:
        raise SpectralError("need at least 4 sweep points")
    var = np.array([
        sampled_amplitude_variance(k_max, int(n), n_seeds, amplitude, phi, None, seed + i)
        for i, n in enumerate(ns)
    ])
    slope, err = _loglog_fit(ns.astype(float), var)
    return ScalingResult(ns, var, slope, err)
