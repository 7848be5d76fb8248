"""Regularized zero-forcing precoding with total transmit-power normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelMatrix

__all__ = ["PrecodingMatrix", "rzf", "apply_precoder", "user_gains", "noise_variance"]


@dataclass
class PrecodingMatrix:
    G: np.ndarray
    snr_linear: float
    power_scale: float = 1.0


def _as_array(H) -> np.ndarray:
    return H.H if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=complex)


def rzf(H, snr_linear: float) -> PrecodingMatrix:
    """``G = H (H^H H + I_K / snr)^{-1}``.

    ``snr_linear = inf`` gives plain zero forcing. A singular regularized Gram
    raises ``numpy.linalg.LinAlgError``.
    """
    if not snr_linear > 0:
        raise ValueError("snr_linear must be positive")
    H = _as_array(H)
    K = H.shape[1]
    gram = H.conj().T @ H
    if np.isfinite(snr_linear):
        gram = gram + np.eye(K) / snr_linear
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e15:
        raise np.linalg.LinAlgError(f"regularized Gram is singular (cond={cond:.3g})")
    # G = H gram^{-1}; gram is Hermitian so solve on the transposed system
    G = np.linalg.solve(gram.T, H.T).T
    if not np.all(np.isfinite(G)):
        raise np.linalg.LinAlgError("precoder has non-finite entries")
    return PrecodingMatrix(G=G, snr_linear=float(snr_linear))


def apply_precoder(
    P: PrecodingMatrix, frame, normalize: bool = True
) -> tuple[np.ndarray, PrecodingMatrix]:
    """Map per-user waveforms ``(K, N)`` to antenna waveforms ``(M, N)``.

    With ``normalize`` the output is scaled so that the expected total transmit
    power per sample is one, using the measured average per-user input power and
    ``tr(G^H G)``. The returned precoder carries the applied scale.
    """
    frame = np.asarray(frame)
    G = P.G
    if frame.shape[0] != G.shape[1]:
        raise ValueError(f"frame has {frame.shape[0]} streams, precoder expects {G.shape[1]}")
    scale = 1.0
    if normalize:
        p_in = np.mean(np.abs(frame) ** 2)
        gain = np.real(np.trace(G.conj().T @ G)) * p_in
        if gain > 0:
            scale = 1.0 / np.sqrt(gain)
    out = scale * (G @ frame)
    return out, PrecodingMatrix(G=G, snr_linear=P.snr_linear, power_scale=float(scale))


def user_gains(H, P: PrecodingMatrix) -> np.ndarray:
    """Useful per-user amplitude ``scale * [H^H G]_kk`` of the distortion-free link.

    For RZF the diagonal of ``H^H G`` is real and positive.
    """
    H = _as_array(H)
    d = np.einsum("mk,mk->k", H.conj(), P.G)
    return P.power_scale * np.real(d)


def noise_variance(snr_db: float | None) -> float:
    """Receive-noise variance relative to unit-power symbols after gain removal.

    The receiver divides by :func:`user_gains`, so a distortion-free zero-forcing
    link sees exactly ``snr_db`` per user for any ``M``. ``None`` means noise-free.
    """
    if snr_db is None:
        return 0.0
    return float(10.0 ** (-snr_db / 10.0))
