"""Link and emission metrics: EVM, SNR, Welch spectra and space-frequency power integrals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .channel import ArrayGeometry
from .frontend import ElementPattern, element_fields

__all__ = [
    "MetricsReport",
    "REPORT_COLUMNS",
    "AngularGrid",
    "UsefulRegion",
    "AntennaSpectra",
    "evm",
    "snr_of",
    "psd_welch",
    "antenna_spectra",
    "band_covariance",
    "aslr",
    "unwanted_emission_rel",
    "emission_powers",
]

RHO_MODES = ("gain", "lmmse")


@dataclass
class MetricsReport:
    evm_pct_per_user: np.ndarray
    evm_pct_avg: float
    snr_db: float
    aslr_db: float | None = None
    unwanted_rel_db: float | None = None
    meta: dict = field(default_factory=dict)

    def to_row(self) -> dict:
        """Flat summary in ``REPORT_COLUMNS`` order (missing values are ``None``)."""
        per = np.asarray(self.evm_pct_per_user, dtype=float)
        return {
            "evm_pct_avg": float(self.evm_pct_avg),
            "evm_pct_stderr": self.meta.get("evm_stderr"),
            "evm_pct_user_min": float(per.min()) if per.size else None,
            "evm_pct_user_max": float(per.max()) if per.size else None,
            "snr_db": float(self.snr_db),
            "aslr_db": self.aslr_db,
            "unwanted_rel_db": self.unwanted_rel_db,
        }

    def to_record(self) -> str:
        """One-line JSON record with per-user values and provenance."""
        rec = {
            **self.to_row(),
            "evm_pct_per_user": [float(v) for v in np.asarray(self.evm_pct_per_user)],
            "meta": self.meta,
        }
        return json.dumps(rec, sort_keys=True, default=_json_default)


REPORT_COLUMNS = (
    "evm_pct_avg",
    "evm_pct_stderr",
    "evm_pct_user_min",
    "evm_pct_user_max",
    "snr_db",
    "aslr_db",
    "unwanted_rel_db",
)


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _rho(s: np.ndarray, y: np.ndarray, mode: str, axis) -> np.ndarray:
    if mode == "gain":
        # inverse of the least-squares gain of y on s
        den = np.sum(np.conj(s) * y, axis=axis, keepdims=True)
        num = np.sum(np.abs(s) ** 2, axis=axis, keepdims=True)
    elif mode == "lmmse":
        den = np.sum(np.abs(y) ** 2, axis=axis, keepdims=True)
        num = np.sum(np.conj(y) * s, axis=axis, keepdims=True)
    else:
        raise ValueError(f"rho mode must be one of {RHO_MODES}")
    if np.any(den == 0):
        raise ValueError("received frame has no component along the reference; EVM undefined")
    return num / den


def evm(s, y, rho: str = "gain", per_user: bool = True) -> tuple[np.ndarray, float]:
    """EVM in percent after removing a complex gain.

    ``s`` and ``y`` are ``(K, L)``. With ``rho="gain"`` the scalar is the inverse
    of the least-squares gain of ``y`` on ``s``; ``rho="lmmse"`` uses
    ``y^H s / ||y||^2``, which additionally shrinks noisy estimates. With
    ``per_user`` each user gets its own scalar, otherwise one scalar is shared.

    Returns
    -------
    per_user_evm : ndarray, shape (K,)
    average : float
        Mean of the per-user values.
    """
    s = np.atleast_2d(np.asarray(s))
    y = np.atleast_2d(np.asarray(y))
    if s.shape != y.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {y.shape}")
    if not np.any(y):
        raise ValueError("received frame is all zero; EVM undefined")
    axis = 1 if per_user else None
    r = _rho(s, y, rho, axis)
    err = np.sum(np.abs(s - r * y) ** 2, axis=1)
    ref = np.sum(np.abs(s) ** 2, axis=1)
    per = 100.0 * np.sqrt(err / ref)
    return per, float(np.mean(per))


def snr_of(s, y) -> float:
    """``10 log10(E|s|^2 / E|s - y|^2)`` without any gain correction.

    Returns ``math.inf`` when ``y`` equals ``s`` exactly.
    """
    s = np.asarray(s)
    y = np.asarray(y)
    if s.shape != y.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {y.shape}")
    err = np.mean(np.abs(s - y) ** 2)
    if err == 0:
        return math.inf
    return float(10.0 * np.log10(np.mean(np.abs(s) ** 2) / err))


def psd_welch(y, segment: int = 256, overlap: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided Welch PSD with a Hann window, frequencies in cycles/sample.

    Output is ordered from ``-0.5`` upward and integrates (``sum * df``) to the
    mean power of ``y``.
    """
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("psd_welch expects a single stream")
    if y.size < segment:
        raise ValueError(f"stream of {y.size} samples is shorter than one segment ({segment})")
    f, p = signal.welch(
        y,
        fs=1.0,
        window="hann",
        nperseg=segment,
        noverlap=int(round(overlap * segment)),
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    return np.fft.fftshift(f), np.fft.fftshift(p)


@dataclass
class AntennaSpectra:
    """Windowed segment spectra, scaled so that averaged ``|.|^2`` is a PSD."""

    freqs: np.ndarray
    segments: np.ndarray  # (n_seg, M, nfft), fftshifted along the last axis

    @property
    def df(self) -> float:
        return 1.0 / self.segments.shape[-1]


def antenna_spectra(Y, segment: int = 256, overlap: float = 0.5) -> AntennaSpectra:
    """Per-antenna complex spectra on Welch segments of an ``(M, N)`` frame.

    Keeping the phase lets coherent far-field sums be formed after the fact.
    """
    Y = np.atleast_2d(np.asarray(Y))
    if Y.shape[-1] < segment:
        raise ValueError(f"stream of {Y.shape[-1]} samples is shorter than one segment ({segment})")
    step = segment - int(round(overlap * segment))
    win = signal.windows.hann(segment, sym=False)
    frames = np.lib.stride_tricks.sliding_window_view(Y, segment, axis=-1)[:, ::step, :]
    spec = np.fft.fft(frames * win, axis=-1) / np.sqrt(np.sum(win**2))
    spec = np.fft.fftshift(np.moveaxis(spec, 1, 0), axes=-1)
    freqs = np.fft.fftshift(np.fft.fftfreq(segment))
    return AntennaSpectra(freqs=freqs, segments=spec)


def _trapz_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x, dtype=float)
    if x.size < 2:
        return w
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def band_covariance(spectra: AntennaSpectra, f_max: float | None = None) -> np.ndarray:
    """Frequency-integrated cross-spectral matrix ``int Y(f) Y(f)^H df``.

    ``f_max=None`` integrates the whole periodic band with uniform weights; a
    value integrates ``|f| <= f_max`` by the trapezoid rule.
    """
    f = spectra.freqs
    if f_max is None:
        w = np.full(f.size, spectra.df)
    else:
        inband = np.abs(f) <= f_max + 1e-12
        w = np.zeros(f.size)
        w[inband] = _trapz_weights(f[inband])
    segs = spectra.segments  # (S, M, F)
    sel = w > 0
    Z = segs[:, :, sel] * np.sqrt(w[sel])[None, None, :]
    Z = np.moveaxis(Z, 1, 0).reshape(segs.shape[1], -1)
    return (Z @ Z.conj().T) / segs.shape[0]


@dataclass(frozen=True)
class AngularGrid:
    """Front-hemisphere grid with ``theta, phi`` in ``[-90, 90]`` degrees.

    The pair covers every front direction once; the solid-angle density is
    ``|sin(theta)|``.
    """

    step_deg: float = 2.0

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        n = int(round(180.0 / self.step_deg)) + 1
        ax = np.linspace(-90.0, 90.0, n)
        return ax, ax


@dataclass(frozen=True)
class UsefulRegion:
    """Band ``|f| <= bandwidth/2`` (cycles/sample) times an angular rectangle."""

    bandwidth: float
    theta: tuple[float, float] = (-30.0, 30.0)
    phi: tuple[float, float] = (-60.0, 60.0)

    @classmethod
    def for_pulse(cls, rolloff: float, osr: int, **kw) -> "UsefulRegion":
        return cls(bandwidth=(1.0 + rolloff) / osr, **kw)


def _angular_weights(theta: np.ndarray, phi: np.ndarray, th_lim, ph_lim) -> np.ndarray:
    """Trapezoid weights of ``|sin theta| dtheta dphi`` over a rectangle, normalized by 2 pi."""
    t_in = (theta >= th_lim[0] - 1e-9) & (theta <= th_lim[1] + 1e-9)
    p_in = (phi >= ph_lim[0] - 1e-9) & (phi <= ph_lim[1] + 1e-9)
    wt = np.zeros(theta.size)
    wp = np.zeros(phi.size)
    wt[t_in] = _trapz_weights(np.deg2rad(theta[t_in]))
    wp[p_in] = _trapz_weights(np.deg2rad(phi[p_in]))
    wt *= np.abs(np.sin(np.deg2rad(theta)))
    return np.outer(wt, wp) / (2.0 * np.pi)


def _directional_power(R: np.ndarray, E: np.ndarray) -> np.ndarray:
    # |sum_m E_m y_m|^2 averaged = E^T R conj(E)
    return np.real(np.sum(E * (R @ E.conj()), axis=0))


def emission_powers(
    spectra: AntennaSpectra,
    geom: ArrayGeometry,
    pat: ElementPattern,
    useful: UsefulRegion,
    grid: AngularGrid | None = None,
) -> tuple[float, float]:
    """Far-field power integrated over the useful region and over its complement.

    Angular integrals are normalized by the hemisphere solid angle, so a single
    isotropic element radiating power ``P`` integrates to ``P``.
    """
    grid = grid or AngularGrid()
    theta, phi = grid.axes()
    full_band = useful.bandwidth / 2.0 >= spectra.freqs.max() and -useful.bandwidth / 2.0 <= spectra.freqs.min()
    full_angle = (
        useful.theta[0] <= theta[0] and useful.theta[1] >= theta[-1]
        and useful.phi[0] <= phi[0] and useful.phi[1] >= phi[-1]
    )
    if full_band and full_angle:
        raise ValueError("useful region covers everything; unwanted region is empty")

    TT, PP = np.meshgrid(theta, phi, indexing="ij")
    E = element_fields(geom, pat, TT.ravel(), PP.ravel())
    w_all = _angular_weights(theta, phi, (theta[0], theta[-1]), (phi[0], phi[-1])).ravel()
    w_use = _angular_weights(theta, phi, useful.theta, useful.phi).ravel()

    R_all = band_covariance(spectra)
    R_in = band_covariance(spectra, useful.bandwidth / 2.0)
    p_use = float(np.dot(w_use, _directional_power(R_in, E)))
    p_tot = float(np.dot(w_all, _directional_power(R_all, E)))
    return p_use, max(p_tot - p_use, 0.0)


def _db(num: float, den: float) -> float:
    if den <= 0:
        return math.inf
    if num <= 0:
        return -math.inf
    return float(10.0 * np.log10(num / den))


def aslr(
    spectra: AntennaSpectra,
    geom: ArrayGeometry,
    pat: ElementPattern,
    useful: UsefulRegion,
    grid: AngularGrid | None = None,
) -> float:
    """Useful-to-unwanted space-frequency power ratio in dB (``+inf`` if nothing leaks)."""
    p_use, p_unw = emission_powers(spectra, geom, pat, useful, grid)
    if p_unw <= 1e-300:
        return math.inf
    return _db(p_use, p_unw)


def unwanted_emission_rel(
    spectra: AntennaSpectra,
    geom: ArrayGeometry,
    pat: ElementPattern,
    useful: UsefulRegion,
    per_user_rx_power: float,
    grid: AngularGrid | None = None,
) -> float:
    """Unwanted far-field power relative to the average in-band power per user, in dB."""
    if not per_user_rx_power > 0:
        raise ValueError("per-user received power must be positive")
    _, p_unw = emission_powers(spectra, geom, pat, useful, grid)
    return _db(p_unw, per_user_rx_power)
