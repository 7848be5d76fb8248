"""Single-carrier QAM baseband: Gray mapping, RRC pulse shaping, matched filtering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

__all__ = [
    "QamConfig",
    "PulseConfig",
    "qam_constellation",
    "map_qam",
    "demap_qam",
    "rrc_taps",
    "pulse_shape",
    "matched_filter_decimate",
    "group_delay",
]


@dataclass(frozen=True)
class QamConfig:
    order: int = 64
    symbols_per_frame: int = 1000

    def __post_init__(self):
        side = int(round(np.sqrt(self.order)))
        bits = int(round(np.log2(self.order))) if self.order > 0 else 0
        if self.order < 4 or side * side != self.order or 2**bits != self.order or bits % 2:
            raise ValueError(f"QAM order must be a power of 4, got {self.order}")
        if self.symbols_per_frame < 1:
            raise ValueError("symbols_per_frame must be >= 1")

    @property
    def bits_per_symbol(self) -> int:
        return int(round(np.log2(self.order)))


@dataclass(frozen=True)
class PulseConfig:
    rolloff: float = 0.22
    osr: int = 5
    span_symbols: int = 16

    def __post_init__(self):
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError("rolloff must lie in [0, 1]")
        if self.osr < 1:
            raise ValueError("osr must be >= 1")
        if self.span_symbols < 1:
            raise ValueError("span_symbols must be >= 1")

    @property
    def n_taps(self) -> int:
        return 2 * self.span_symbols * self.osr + 1


def _gray_levels(n_bits: int) -> np.ndarray:
    """PAM amplitude index for every n_bits-wide Gray codeword."""
    n = 2**n_bits
    idx = np.arange(n)
    gray = idx ^ (idx >> 1)
    levels = np.empty(n, dtype=int)
    levels[gray] = idx
    return levels


def qam_constellation(order: int) -> np.ndarray:
    """Unit-average-power square QAM points indexed by their Gray-coded integer label.

    The upper half of the label bits selects the in-phase level, the lower half the
    quadrature level; along each axis neighbouring levels differ in exactly one bit.
    """
    cfg = QamConfig(order=order)
    half = cfg.bits_per_symbol // 2
    side = 2**half
    pam = 2.0 * _gray_levels(half) - (side - 1)
    labels = np.arange(order)
    points = pam[labels >> half] + 1j * pam[labels & (side - 1)]
    return points / np.sqrt(2.0 * (order - 1) / 3.0)


def _bits_to_labels(bits: np.ndarray, bps: int) -> np.ndarray:
    weights = 1 << np.arange(bps - 1, -1, -1)
    return bits.reshape(-1, bps) @ weights


def map_qam(bits, cfg: QamConfig) -> np.ndarray:
    """Map a bit array onto Gray-coded QAM symbols.

    Parameters
    ----------
    bits : array_like of {0, 1}
        Either a flat bit sequence or a ``(K, n_bits)`` array with one row per user.
    cfg : QamConfig

    Returns
    -------
    ndarray of complex
        Symbols with the leading shape of ``bits`` and the trailing bit axis
        collapsed by ``log2(order)``.
    """
    bits = np.asarray(bits, dtype=np.int64)
    bps = cfg.bits_per_symbol
    if bits.shape[-1] % bps:
        raise ValueError(
            f"bit count {bits.shape[-1]} is not divisible by log2(order) = {bps}"
        )
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    labels = _bits_to_labels(bits, bps).reshape(bits.shape[:-1] + (-1,))
    return qam_constellation(cfg.order)[labels]


def demap_qam(symbols, cfg: QamConfig) -> np.ndarray:
    """Hard-decision inverse of :func:`map_qam`."""
    symbols = np.asarray(symbols)
    bps = cfg.bits_per_symbol
    half = bps // 2
    side = 2**half
    scale = np.sqrt(2.0 * (cfg.order - 1) / 3.0)
    # amplitude index 0..side-1 per rail
    to_idx = lambda v: np.clip(np.rint((v * scale + side - 1) / 2.0), 0, side - 1).astype(int)
    gray = np.arange(side) ^ (np.arange(side) >> 1)
    labels = (gray[to_idx(symbols.real)] << half) | gray[to_idx(symbols.imag)]
    out = (labels[..., None] >> np.arange(bps - 1, -1, -1)) & 1
    return out.reshape(symbols.shape[:-1] + (-1,)) if symbols.ndim else out


def rrc_taps(cfg: PulseConfig) -> np.ndarray:
    """Root-raised-cosine impulse response with unit energy.

    Time runs over ``[-span_symbols, span_symbols]`` symbol periods in steps of
    ``1/osr``. The removable singularities at ``t = 0`` and ``|t| = 1/(4 rolloff)``
    are replaced by their limits.
    """
    beta = float(cfg.rolloff)
    half = cfg.span_symbols * cfg.osr
    t = np.arange(-half, half + 1) / cfg.osr
    h = np.empty_like(t)

    at_zero = np.isclose(t, 0.0, atol=1e-12)
    if beta > 0:
        at_sing = np.isclose(np.abs(4.0 * beta * t), 1.0, atol=1e-9)
    else:
        at_sing = np.zeros_like(at_zero)
    regular = ~(at_zero | at_sing)

    tr = t[regular]
    num = np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    den = np.pi * tr * (1 - (4 * beta * tr) ** 2)
    h[regular] = num / den
    h[at_zero] = 1.0 - beta + 4.0 * beta / np.pi
    if np.any(at_sing):
        h[at_sing] = (beta / np.sqrt(2.0)) * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
            + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
        )
    return h / np.sqrt(np.sum(h**2))


def group_delay(cfg: PulseConfig) -> int:
    """Combined transmit + receive filter delay in samples."""
    return cfg.n_taps - 1


def pulse_shape(frame, cfg: PulseConfig, taps: np.ndarray | None = None) -> np.ndarray:
    """Upsample symbols by ``osr`` and filter with the RRC pulse.

    ``frame`` is ``(K, L)`` (or 1-D for a single stream). The output keeps the full
    convolution, so it has ``L * osr + n_taps - 1`` samples per user.
    """
    frame = np.asarray(frame)
    squeeze = frame.ndim == 1
    frame = np.atleast_2d(frame)
    if taps is None:
        taps = rrc_taps(cfg)
    up = np.zeros(frame.shape[:-1] + (frame.shape[-1] * cfg.osr,), dtype=complex)
    up[..., :: cfg.osr] = frame
    out = signal.oaconvolve(up, taps[None, :], axes=-1)
    return out[0] if squeeze else out


def matched_filter_decimate(
    waveform,
    cfg: PulseConfig,
    delay: int | None = None,
    n_symbols: int | None = None,
    taps: np.ndarray | None = None,
) -> np.ndarray:
    """Matched-filter a ``(K, N)`` waveform and pick one sample per symbol.

    Parameters
    ----------
    waveform : array_like
        Received samples, laid out as produced by :func:`pulse_shape`.
    cfg : PulseConfig
    delay : int, optional
        Index of the first symbol in the matched-filter output. Defaults to the
        combined group delay ``n_taps - 1``.
    n_symbols : int, optional
        Number of symbols to return; inferred from the waveform length otherwise.

    Raises
    ------
    ValueError
        If the requested symbol instants fall outside the filtered stream.
    """
    waveform = np.asarray(waveform)
    squeeze = waveform.ndim == 1
    waveform = np.atleast_2d(waveform)
    if taps is None:
        taps = rrc_taps(cfg)
    if delay is None:
        delay = group_delay(cfg)
    n = waveform.shape[-1]
    if n_symbols is None:
        n_symbols = (n - (len(taps) - 1)) // cfg.osr
    filtered_len = n + len(taps) - 1
    last = delay + (n_symbols - 1) * cfg.osr
    if delay < 0 or n_symbols < 1 or last >= filtered_len:
        raise ValueError(
            f"symbol alignment out of range: delay={delay}, n_symbols={n_symbols}, "
            f"filtered length={filtered_len}"
        )
    # taps are real and even, so the matched filter is the pulse itself
    z = signal.oaconvolve(waveform, taps[None, ::-1].conj(), axes=-1)
    out = z[..., delay : last + 1 : cfg.osr]
    return out[0] if squeeze else out
