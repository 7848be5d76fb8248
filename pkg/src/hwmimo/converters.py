"""Transmit DAC model: Cartesian mid-rise quantization, clipping and dithering."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelMatrix

__all__ = [
    "QuantizerConfig",
    "NullProjector",
    "quantize",
    "draw_dither",
    "null_projector",
    "dithered_quantize",
    "rail_rms",
]

DITHER_MODES = ("none", "uniform", "nspd")


@dataclass(frozen=True)
class QuantizerConfig:
    bits: int = 6
    fullscale: float = 1.0
    dither: str = "none"

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ValueError("bits must be in 1..16")
        if not self.fullscale > 0:
            raise ValueError("fullscale must be positive")
        if self.dither not in DITHER_MODES:
            raise ValueError(f"dither must be one of {DITHER_MODES}")

    @property
    def lsb(self) -> float:
        return 2.0 * self.fullscale / 2**self.bits

    @property
    def levels(self) -> int:
        return 2**self.bits


@dataclass
class NullProjector:
    P: np.ndarray
    H: np.ndarray


def rail_rms(x) -> float:
    """RMS of one real rail, ``sqrt(mean|x|^2 / 2)``."""
    x = np.asarray(x)
    return float(np.sqrt(np.mean(np.abs(x) ** 2) / 2.0))


def _quantize_rail(v: np.ndarray, cfg: QuantizerConfig) -> np.ndarray:
    fs, lsb = cfg.fullscale, cfg.lsb
    k = np.floor((np.clip(v, -fs, fs) + fs) / lsb)
    k = np.clip(k, 0, cfg.levels - 1)
    return (k + 0.5) * lsb - fs


def quantize(x, cfg: QuantizerConfig) -> np.ndarray:
    """Clip each rail to ``[-fullscale, fullscale]`` and snap to the nearest level centre.

    Level centres are ``(k + 1/2) LSB - fullscale`` for ``k = 0 .. 2**bits - 1``;
    there is no zero level.
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return _quantize_rail(x.real, cfg) + 1j * _quantize_rail(x.imag, cfg)
    return _quantize_rail(x, cfg)


def draw_dither(M: int, N: int, lsb: float, rng: np.random.Generator) -> np.ndarray:
    """Complex dither with independent ``U(-LSB/2, LSB/2)`` rails."""
    if not lsb > 0:
        raise ValueError("LSB must be positive")
    half = lsb / 2.0
    return rng.uniform(-half, half, (M, N)) + 1j * rng.uniform(-half, half, (M, N))


def null_projector(H) -> NullProjector:
    """Orthogonal projector onto the null space of the downlink map ``H^H``.

    ``P = I_M - H (H^H H)^{-1} H^H`` so that ``H^H P = 0``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``H`` is numerically rank deficient.
    """
    H = H.H if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=complex)
    M, K = H.shape
    if K == 0:
        return NullProjector(np.eye(M, dtype=complex), H)
    if K > M:
        raise ValueError(f"null projector needs M >= K, got M={M}, K={K}")
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e10:
        raise np.linalg.LinAlgError(f"channel is rank deficient (condition number {cond:.3g})")
    # orthonormal basis of range(H) is better conditioned than the normal equations
    Q, _ = np.linalg.qr(H)
    P = np.eye(M, dtype=complex) - Q @ Q.conj().T
    P = 0.5 * (P + P.conj().T)
    return NullProjector(P, H)


def dithered_quantize(
    x,
    cfg: QuantizerConfig,
    H=None,
    rng: np.random.Generator | None = None,
    projector: NullProjector | None = None,
) -> np.ndarray:
    """Quantize an ``(M, N)`` antenna frame with optional non-subtractive dither.

    ``none`` quantizes ``x``; ``uniform`` quantizes ``x + eps``; ``nspd`` quantizes
    ``x + P_null eps`` so the dither never reaches the users. Fresh dither is drawn
    for every sample.
    """
    x = np.asarray(x)
    if cfg.dither == "none":
        return quantize(x, cfg)
    if rng is None:
        raise ValueError("dithering needs a random generator")
    M, N = x.shape
    eps = draw_dither(M, N, cfg.lsb, rng)
    if cfg.dither == "nspd":
        if projector is None:
            if H is None:
                raise ValueError("nspd dithering needs the channel matrix")
            Hm = H.H if isinstance(H, ChannelMatrix) else np.asarray(H)
            if Hm.shape[0] <= Hm.shape[1]:
                raise ValueError("nspd dithering requires M > K")
            projector = null_projector(Hm)
        eps = projector.P @ eps
    return quantize(x + eps, cfg)


def with_fullscale(cfg: QuantizerConfig, x, clip: float) -> QuantizerConfig:
    """Copy of ``cfg`` whose full scale is ``clip`` times the per-rail RMS of ``x``."""
    return replace(cfg, fullscale=clip * rail_rms(x))
