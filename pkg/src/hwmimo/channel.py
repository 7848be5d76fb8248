"""Rice channel: IID Rayleigh scattering mixed with planar-array line-of-sight vectors.

Conventions: ``H`` is ``M x K`` and the downlink applies ``H^H``. Directions are
``(theta, phi)`` in degrees where ``theta`` is measured from the array normal and
``phi`` is the azimuth in the array plane, so the path difference of element ``m``
is ``psi_m = X_m sin(theta) cos(phi) + Y_m sin(theta) sin(phi)`` (in wavelengths).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayGeometry",
    "UserPlacement",
    "ChannelMatrix",
    "rect_array",
    "grid_shape",
    "path_difference",
    "draw_iid",
    "draw_users",
    "pair_with_separation",
    "los_matrix",
    "rice_mix",
    "channel_correlation",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """Element coordinates in wavelengths for a rectangular grid."""

    rows: int
    cols: int
    spacing: float
    positions: np.ndarray = field(repr=False)
    wavelength: float = 1.0

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] > self.rows * self.cols:
            raise ValueError("positions must be an (M, 2) array that fits the grid")

    @property
    def n_elements(self) -> int:
        return self.positions.shape[0]


def grid_shape(n_elements: int) -> tuple[int, int]:
    """Square-as-possible ``(rows, cols)`` with ``rows = ceil(sqrt(M))``."""
    if n_elements < 1:
        raise ValueError("need at least one element")
    rows = math.isqrt(n_elements)
    if rows * rows < n_elements:
        rows += 1
    cols = -(-n_elements // rows)
    return rows, cols


def rect_array(n_elements: int, spacing: float = 0.5) -> ArrayGeometry:
    """Rectangular array filled row-major, centred on the origin.

    Non-square ``M`` leaves the last row partially filled.
    """
    rows, cols = grid_shape(n_elements)
    idx = np.arange(n_elements)
    r, c = idx // cols, idx % cols
    x = (c - (cols - 1) / 2.0) * spacing
    y = (r - (rows - 1) / 2.0) * spacing
    return ArrayGeometry(rows, cols, float(spacing), np.column_stack([x, y]))


@dataclass(frozen=True)
class UserPlacement:
    """Per-user directions in degrees (``theta`` from the array normal, ``phi`` azimuth)."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.theta, dtype=float))
        ph = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if th.shape != ph.shape or th.ndim != 1:
            raise ValueError("theta and phi must be equal-length 1-D sequences")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "phi", ph)

    @property
    def n_users(self) -> int:
        return self.theta.size


@dataclass
class ChannelMatrix:
    H: np.ndarray
    kappa: float
    H_iid: np.ndarray
    H_los: np.ndarray

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def K(self) -> int:
        return self.H.shape[1]


def path_difference(positions, theta_deg, phi_deg) -> np.ndarray:
    """``psi`` for every element (rows) and direction (columns), in wavelengths."""
    positions = np.asarray(positions, dtype=float)
    th = np.deg2rad(np.atleast_1d(theta_deg))
    ph = np.deg2rad(np.atleast_1d(phi_deg))
    ux = np.sin(th) * np.cos(ph)
    uy = np.sin(th) * np.sin(ph)
    return positions[:, :1] * ux[None, :] + positions[:, 1:2] * uy[None, :]


def draw_iid(M: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """IID CN(0, 1) entries."""
    if M < 1 or K < 1:
        raise ValueError("M and K must be >= 1")
    return (rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))) / np.sqrt(2.0)


def draw_users(
    K: int,
    rng: np.random.Generator,
    theta_range=(-30.0, 30.0),
    phi_range=(-60.0, 60.0),
) -> UserPlacement:
    """Users uniform over the elevation/azimuth sector."""
    theta = rng.uniform(theta_range[0], theta_range[1], K)
    phi = rng.uniform(phi_range[0], phi_range[1], K)
    return UserPlacement(theta, phi)


def pair_with_separation(
    base: UserPlacement, separation_deg: float
) -> UserPlacement:
    """Move user 1 to user 0's elevation with an azimuth offset of ``separation_deg``."""
    if base.n_users < 2:
        return base
    theta = base.theta.copy()
    phi = base.phi.copy()
    theta[1] = theta[0]
    phi[1] = phi[0] + separation_deg
    return UserPlacement(theta, phi)


def los_matrix(geom: ArrayGeometry, users: UserPlacement) -> np.ndarray:
    """Unit-modulus steering vectors, entry ``(m, k) = exp(i 2 pi psi_m(theta_k, phi_k) / lambda)``."""
    psi = path_difference(geom.positions, users.theta, users.phi)
    return np.exp(2j * np.pi * psi / geom.wavelength)


def rice_mix(H_iid, H_los, kappa: float) -> ChannelMatrix:
    """Weighted sum of the scattered and line-of-sight parts."""
    H_iid = np.asarray(H_iid, dtype=complex)
    H_los = np.asarray(H_los, dtype=complex)
    if H_iid.shape != H_los.shape:
        raise ValueError(f"component shapes differ: {H_iid.shape} vs {H_los.shape}")
    if kappa < 0:
        raise ValueError("Rice factor must be non-negative")
    H = np.sqrt(1.0 / (1.0 + kappa)) * H_iid + np.sqrt(kappa / (1.0 + kappa)) * H_los
    return ChannelMatrix(H=H, kappa=float(kappa), H_iid=H_iid, H_los=H_los)


def channel_correlation(H, k: int, l: int) -> complex:
    """Normalised column inner product ``h_k^H h_l / M``."""
    H = H.H if isinstance(H, ChannelMatrix) else np.asarray(H)
    K = H.shape[1]
    if not (0 <= k < K and 0 <= l < K):
        raise IndexError(f"user indices ({k}, {l}) out of range for K={K}")
    return complex(np.vdot(H[:, k], H[:, l]) / H.shape[0])
