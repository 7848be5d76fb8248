"""Stochastic impairment models (additive and multiplicative) and their calibration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import ChannelMatrix

__all__ = [
    "AdditiveModelParams",
    "MultiplicativeModelParams",
    "MultiplicativeDraw",
    "CalibrationError",
    "CalibrationResult",
    "additive_impair",
    "mult_impair",
    "calibrate",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdditiveModelParams:
    nu: float = 0.0

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be non-negative")


@dataclass(frozen=True)
class MultiplicativeModelParams:
    sigma_a2: float = 0.0
    sigma_phi2: float = 0.0

    def __post_init__(self):
        if self.sigma_a2 < 0 or self.sigma_phi2 < 0:
            raise ValueError("error variances must be non-negative")

    @classmethod
    def from_scale(cls, t: float) -> "MultiplicativeModelParams":
        """Equal amplitude and phase standard deviations ``t`` (phase in radians)."""
        return cls(sigma_a2=t * t, sigma_phi2=t * t)


def additive_impair(
    X, p: AdditiveModelParams, rng: np.random.Generator, normalize: bool = True
) -> tuple[np.ndarray, float]:
    """Add ``w ~ CN(0, nu diag(W))`` to an ``(M, N)`` frame.

    ``W_mm`` is the measured power of antenna ``m`` over the frame. Returns the
    impaired frame and the normalization ``alpha`` (1 when ``normalize`` is off).
    """
    X = np.asarray(X, dtype=complex)
    if normalize and not np.any(X):
        raise ValueError("cannot normalize the power of an all-zero frame")
    W = np.mean(np.abs(X) ** 2, axis=1, keepdims=True)
    std = np.sqrt(p.nu * W / 2.0)
    w = std * (rng.standard_normal(X.shape) + 1j * rng.standard_normal(X.shape))
    out = X + w
    alpha = 1.0
    if normalize:
        alpha = float(np.linalg.norm(X) / np.linalg.norm(out))
        out = alpha * out
    return out, alpha


@dataclass
class MultiplicativeDraw:
    downlink: np.ndarray  # K x M map applied to x_dl
    E: np.ndarray  # diagonal of the error matrix
    beta: float


def mult_impair(
    H, p: MultiplicativeModelParams, rng: np.random.Generator, normalize: bool = True
) -> MultiplicativeDraw:
    """Draw per-antenna gain/phase errors and build the effective map ``beta H^H E``."""
    H = H.H if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=complex)
    M = H.shape[0]
    a = rng.standard_normal(M) * np.sqrt(p.sigma_a2)
    phi = rng.standard_normal(M) * np.sqrt(p.sigma_phi2)
    e = (1.0 + a) * np.exp(-1j * phi)
    HhE = H.conj().T * e[None, :]
    beta = 1.0
    if normalize:
        beta = float(np.linalg.norm(H) / np.linalg.norm(HhE))
    return MultiplicativeDraw(downlink=beta * HhE, E=e, beta=beta)


class CalibrationError(RuntimeError):
    def __init__(self, message: str, achieved: tuple[float, float] | None = None):
        super().__init__(message)
        self.achieved = achieved


@dataclass
class CalibrationResult:
    model: str
    params: dict
    reference_evm: float
    achieved_evm: float
    stderr: float
    iterations: int
    scan: list = field(default_factory=list)

    def to_record(self, seed: int | None = None) -> dict:
        return {
            "model": self.model,
            "params": dict(self.params),
            "reference_evm_pct": self.reference_evm,
            "achieved_evm_pct": self.achieved_evm,
            "stderr_pct": self.stderr,
            "iterations": self.iterations,
            "seed": seed,
        }


def _params_for(model: str, value: float) -> dict:
    if model == "additive":
        return {"nu": value}
    if model == "multiplicative":
        return {"sigma_a2": value * value, "sigma_phi2": value * value}
    raise ValueError(f"unknown stochastic model {model!r}")


def calibrate(
    model: str,
    reference_evm: float,
    evaluate: Callable[[dict], tuple[float, float]],
    bracket: tuple[float, float] = (0.0, 1.0),
    tol_pp: float = 0.05,
    max_iter: int = 40,
    scan_points: int = 6,
) -> CalibrationResult:
    """Fit one impairment level so the mean EVM matches ``reference_evm``.

    The additive model is searched over ``nu``; the multiplicative one over a
    common scale ``t`` with ``sigma_a = sigma_phi = t``. ``evaluate`` maps model
    parameters to ``(mean EVM %, stderr %)`` and must use a fixed seed batch so
    that the target function is deterministic.

    A coarse scan first checks that EVM is non-decreasing across the bracket;
    then bisection runs until the EVM is within ``tol_pp`` of the reference.
    """
    lo, hi = bracket
    grid = np.linspace(lo, hi, scan_points)
    scan = [(float(v), *evaluate(_params_for(model, v))) for v in grid]
    evms = np.array([s[1] for s in scan])
    slack = np.array([s[2] for s in scan])
    if np.any(np.diff(evms) < -2.0 * np.maximum(slack[1:], slack[:-1]) - 1e-9):
        raise CalibrationError(f"EVM is not monotone over the bracket: {evms.round(3).tolist()}")
    # an endpoint within Monte-Carlo error of the reference is the fit itself
    lo_tol = max(tol_pp, 2.0 * slack[0])
    hi_tol = max(tol_pp, 2.0 * slack[-1])
    if not evms[0] - lo_tol <= reference_evm <= evms[-1] + hi_tol:
        raise CalibrationError(
            f"reference EVM {reference_evm:.3f}% outside achievable range "
            f"[{evms[0]:.3f}, {evms[-1]:.3f}]%",
            achieved=(float(evms[0]), float(evms[-1])),
        )
    for end, tol in ((0, lo_tol), (-1, hi_tol)):
        if abs(reference_evm - evms[end]) <= tol and (
            (end == 0 and reference_evm <= evms[0]) or (end == -1 and reference_evm >= evms[-1])
        ):
            v, e, s = scan[end]
            log.info("calibrate %s: reference at bracket end %.6g (within MC error)", model, v)
            return CalibrationResult(
                model=model, params=_params_for(model, v), reference_evm=float(reference_evm),
                achieved_evm=float(e), stderr=float(s), iterations=0, scan=scan,
            )

    # tighten the bracket with the scan before bisecting
    i = int(np.searchsorted(evms, reference_evm))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i, len(grid) - 1)]
    best = min(scan, key=lambda s: abs(s[1] - reference_evm))
    it = 0
    while abs(best[1] - reference_evm) > tol_pp and it < max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        evm, err = evaluate(_params_for(model, mid))
        log.debug("calibrate %s: value=%.6g evm=%.4f target=%.4f", model, mid, evm, reference_evm)
        if abs(evm - reference_evm) < abs(best[1] - reference_evm):
            best = (mid, evm, err)
        if evm < reference_evm:
            lo = mid
        else:
            hi = mid
    if abs(best[1] - reference_evm) > tol_pp:
        raise CalibrationError(
            f"bisection stopped {abs(best[1] - reference_evm):.3f} pp from the reference",
            achieved=(float(best[1]), float(best[1])),
        )
    return CalibrationResult(
        model=model,
        params=_params_for(model, best[0]),
        reference_evm=float(reference_evm),
        achieved_evm=float(best[1]),
        stderr=float(best[2]),
        iterations=it,
        scan=scan,
    )
