"""Deterministic transmitter front end: dual-input memoryless PA, mutual coupling, far field."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, path_difference

__all__ = [
    "PaParams",
    "CouplingMatrix",
    "ElementPattern",
    "PaOutput",
    "FrontendResult",
    "FrontendConvergenceError",
    "DEFAULT_PA",
    "synth_coupling",
    "coupled_inputs",
    "pa_output",
    "run_frontend",
    "element_fields",
    "far_field",
]


def _complex_vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=complex))


@dataclass(frozen=True)
class PaParams:
    """Coefficients of the memoryless dual-input polynomial.

    ``chi`` holds orders ``1..P1``, ``eta`` orders ``1..P2`` and ``gamma`` orders
    ``2..P2`` (so ``len(gamma) == P2 - 1``).
    """

    chi: np.ndarray
    eta: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    def __post_init__(self):
        chi, eta, gamma = map(_complex_vec, (self.chi, self.eta, self.gamma))
        if chi.size < 1 or chi[0] == 0:
            raise ValueError("chi_1 must be present and non-zero")
        if gamma.size > max(eta.size - 1, 0):
            raise ValueError("gamma covers orders 2..P2 and cannot exceed len(eta) - 1")
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def P1(self) -> int:
        return self.chi.size

    @property
    def P2(self) -> int:
        return self.eta.size

    @property
    def linear_gain(self) -> complex:
        return complex(self.chi[0])

    @classmethod
    def linear(cls, gain: complex = 1.0) -> "PaParams":
        return cls(chi=[gain])


DEFAULT_PA = PaParams(
    chi=[1.0, -0.08 + 0.02j, 0.005 - 0.003j],
    eta=[0.12, -0.02j],
    gamma=[0.03],
)


@dataclass
class CouplingMatrix:
    S: np.ndarray
    scaled_by: float = 1.0

    @property
    def spectral_radius(self) -> float:
        if self.S.size == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.S))))


@dataclass(frozen=True)
class ElementPattern:
    """Patch-like amplitude pattern ``cos(theta)**exponent`` in the front hemisphere."""

    exponent: float = 1.5

    def gain(self, theta_deg, phi_deg=0.0) -> np.ndarray:
        th = np.deg2rad(np.asarray(theta_deg, dtype=float))
        c = np.cos(th)
        g = np.where(c >= 0, np.clip(c, 0.0, None) ** self.exponent, 0.0)
        return np.broadcast_to(g, np.broadcast_shapes(np.shape(th), np.shape(phi_deg)))


def synth_coupling(
    geom: ArrayGeometry,
    c0_db: float = -17.0,
    decay_exp: float = 3.0,
    ref_distance: float = 0.5,
    max_spectral_radius: float = 0.9,
) -> CouplingMatrix:
    """Parametric S-matrix for a planar array.

    ``|S_mj|^2`` falls off as ``(d_mj / ref_distance) ** -decay_exp`` from
    ``10 ** (c0_db / 10)`` at the reference distance, so ``|S_mj|`` expressed in
    dB drops by ``10 * decay_exp * log10(2)`` when the spacing doubles. The phase
    is the free-space delay ``-2 pi d_mj / lambda``. The diagonal is zero, and the
    whole matrix is scaled down if its spectral radius exceeds
    ``max_spectral_radius``.
    """
    if c0_db >= 0:
        raise ValueError("c0_db must be negative")
    if decay_exp <= 0:
        raise ValueError("decay_exp must be positive")
    pos = geom.positions
    M = pos.shape[0]
    if M == 1:
        return CouplingMatrix(np.zeros((1, 1), complex))
    d = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    off = ~np.eye(M, dtype=bool)
    if np.any(d[off] <= 1e-12):
        raise ValueError("degenerate geometry: coincident elements")
    S = np.zeros((M, M), complex)
    mag = 10.0 ** (c0_db / 20.0) * (d[off] / ref_distance) ** (-decay_exp / 2.0)
    S[off] = mag * np.exp(-2j * np.pi * d[off] / geom.wavelength)
    cm = CouplingMatrix(S)
    rho = cm.spectral_radius
    if rho > max_spectral_radius:
        factor = max_spectral_radius / rho
        cm = CouplingMatrix(S * factor, scaled_by=factor)
    return cm


def coupled_inputs(Y, S) -> np.ndarray:
    """Reflected wave ``x_{m,r}[n] = sum_{j != m} S_mj y_j[n]`` for an ``(M, N)`` frame."""
    S = S.S if isinstance(S, CouplingMatrix) else np.asarray(S)
    Y = np.asarray(Y)
    if S.shape != (Y.shape[0], Y.shape[0]):
        raise ValueError(f"S is {S.shape} but frame has {Y.shape[0]} antennas")
    S = S - np.diag(np.diag(S))
    return S @ Y


@dataclass
class PaOutput:
    y: np.ndarray
    linear: np.ndarray
    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def pa_output(x, x_r, p: PaParams) -> PaOutput:
    """Evaluate the memoryless dual-input polynomial sample by sample.

    ``y = chi_1 x + d0 + d1 + d2`` with self distortion
    ``d0 = sum_{p>=2} chi_p x |x|^{2(p-1)}``, coupled term
    ``d1 = sum_{p>=1} eta_p x_r |x|^{2(p-1)}`` and conjugate cross term
    ``d2 = sum_{p>=2} gamma_p conj(x_r) x^2 |x|^{2(p-2)}``.
    """
    x = np.asarray(x, dtype=complex)
    x_r = np.asarray(x_r, dtype=complex)
    if x.shape != x_r.shape:
        raise ValueError("drive and coupled streams must have the same shape")
    a2 = np.abs(x) ** 2
    linear = p.chi[0] * x

    d0 = np.zeros_like(x)
    if p.P1 > 1:
        d0 = x * np.polynomial.polynomial.polyval(a2, np.r_[0.0, p.chi[1:]])

    d1 = np.zeros_like(x)
    if p.P2 > 0:
        d1 = x_r * np.polynomial.polynomial.polyval(a2, p.eta)

    d2 = np.zeros_like(x)
    if p.gamma.size:
        d2 = np.conj(x_r) * x * x * np.polynomial.polynomial.polyval(a2, p.gamma)

    return PaOutput(y=linear + d0 + d1 + d2, linear=linear, d0=d0, d1=d1, d2=d2)


class FrontendConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"coupled PA fixed point did not converge in {iterations} iterations "
            f"(last relative change {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


@dataclass
class FrontendResult:
    y: np.ndarray
    iterations: int
    residual: float
    parts: PaOutput


def run_frontend(
    X,
    S,
    p: PaParams,
    tol: float = 1e-9,
    max_iter: int = 10,
    linearized: bool = False,
) -> FrontendResult:
    """Solve ``y = f(x, S y)`` for the whole array by fixed-point iteration.

    Starts from the linear output ``chi_1 x``; the first iterate is the common
    linearized-coupling approximation and is returned as-is when ``linearized``.

    Raises
    ------
    FrontendConvergenceError
        When the relative Frobenius change is still above ``tol`` after
        ``max_iter`` iterations.
    """
    X = np.asarray(X, dtype=complex)
    S_arr = S.S if isinstance(S, CouplingMatrix) else np.asarray(S, dtype=complex)
    if not np.any(S_arr):
        parts = pa_output(X, np.zeros_like(X), p)
        return FrontendResult(parts.y, 1, 0.0, parts)

    y = p.chi[0] * X
    change = np.inf
    for it in range(1, max_iter + 1):
        parts = pa_output(X, coupled_inputs(y, S_arr), p)
        norm = np.linalg.norm(parts.y)
        change = np.linalg.norm(parts.y - y) / norm if norm > 0 else 0.0
        y = parts.y
        if linearized or change < tol:
            return FrontendResult(y, it, float(change), parts)
    raise FrontendConvergenceError(float(change), max_iter)


def element_fields(
    geom: ArrayGeometry, pat: ElementPattern, theta_deg, phi_deg
) -> np.ndarray:
    """Per-element far-field factors ``E_m(theta, phi)`` as an ``(M, n_dirs)`` array.

    The geometric phase is conjugate to the channel steering vector, so the far
    field toward a line-of-sight user equals what that user receives through
    ``h^H y``.
    """
    theta = np.atleast_1d(np.asarray(theta_deg, dtype=float))
    phi = np.atleast_1d(np.asarray(phi_deg, dtype=float))
    theta, phi = np.broadcast_arrays(theta, phi)
    psi = path_difference(geom.positions, theta.ravel(), phi.ravel())
    g = pat.gain(theta.ravel(), phi.ravel())
    return g[None, :] * np.exp(-2j * np.pi * psi / geom.wavelength)


def far_field(Y, geom: ArrayGeometry, pat: ElementPattern, theta_deg, phi_deg) -> np.ndarray:
    """Superposed far-field stream ``sum_m y_m[n] E_m(theta, phi)``.

    Scalar direction gives an ``(N,)`` stream; arrays of directions give
    ``(n_dirs, N)``.
    """
    Y = np.atleast_2d(np.asarray(Y))
    E = element_fields(geom, pat, theta_deg, phi_deg)
    out = E.T @ Y
    if np.ndim(theta_deg) == 0 and np.ndim(phi_deg) == 0:
        return out[0]
    return out
