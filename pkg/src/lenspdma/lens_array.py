"""Array geometry and responses.

Covers the full-dimensional lens antenna array at the base station (antenna
grid on the focal surface, sinc-product response), the uniform planar array
used by the mobile stations, and a direct numerical integration over the lens
aperture that serves as an independent check of the closed-form lens response.

All lengths are normalized to the carrier wavelength.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.integrate import cubature

__all__ = [
    "AntennaIndex",
    "LensArrayConfig",
    "UpaConfig",
    "IntegrationError",
    "antenna_grid",
    "lens_response",
    "upa_response",
    "aperture_integration_oracle",
    "snapped_sinc",
    "equivalent_upa",
]

# floor() guard: d * cos(theta_m) lands on integers (e.g. 10 * 0.8) up to rounding
_FLOOR_EPS = 1e-9
_SINC_EPS = 1e-12


class AntennaIndex(NamedTuple):
    """Elevation and azimuth index of one lens-array antenna."""

    m_e: int
    m_a: int


@dataclass(frozen=True)
class LensArrayConfig:
    """Full-dimensional lens antenna array.

    Parameters
    ----------
    d_y, d_z : float
        Electric dimensions of the lens (physical size over wavelength).
    theta_cov, phi_cov : float
        Elevation and azimuth coverage angles in radians.
    focal_ratio : float
        Focal length over lens dimension. Only the aperture-integration oracle
        uses it.
    phase0 : float
        Common phase from the lens aperture to the focal surface. It has no
        effect on any power or rate quantity.
    """

    d_y: float = 10.0
    d_z: float = 10.0
    theta_cov: float = math.pi
    phi_cov: float = math.pi
    focal_ratio: float = 10.0
    phase0: float = 0.0

    def __post_init__(self):
        if not (self.d_y > 0 and self.d_z > 0):
            raise ValueError("lens electric dimensions must be positive")
        if not 0.0 <= self.theta_cov <= math.pi:
            raise ValueError("theta_cov must lie in [0, pi]")
        if not 0.0 < self.phi_cov <= math.pi:
            raise ValueError("phi_cov must lie in (0, pi]")
        if self.focal_ratio < 1.0:
            raise ValueError("focal_ratio must be >= 1")

    @cached_property
    def indices(self) -> np.ndarray:
        """Antenna grid as an ``(M, 2)`` integer array of ``(m_e, m_a)``."""
        max_e = math.floor(self.d_z * math.sin(self.theta_cov / 2) + _FLOOR_EPS)
        rows = []
        for m_e in range(-max_e, max_e + 1):
            cos_m = math.sqrt(max(self.d_z**2 - m_e**2, 0.0)) / self.d_z
            max_a = math.floor(self.d_y * cos_m * math.sin(self.phi_cov / 2) + _FLOOR_EPS)
            rows.extend((m_e, m_a) for m_a in range(-max_a, max_a + 1))
        out = np.array(rows, dtype=int)
        out.setflags(write=False)
        return out

    @property
    def n_antennas(self) -> int:
        return len(self.indices)

    def position(self, antenna) -> int:
        """Canonical position of ``antenna`` (an ``(m_e, m_a)`` pair)."""
        hit = np.flatnonzero((self.indices[:, 0] == antenna[0]) & (self.indices[:, 1] == antenna[1]))
        if hit.size == 0:
            raise KeyError(f"antenna {tuple(antenna)} is not on the grid")
        return int(hit[0])


@dataclass(frozen=True)
class UpaConfig:
    """Uniform planar array in the y-z plane."""

    n_y: int = 4
    n_z: int = 4
    spacing: float = 0.5

    def __post_init__(self):
        if self.n_y < 1 or self.n_z < 1:
            raise ValueError("UPA needs at least one element per axis")
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_y * self.n_z

    @cached_property
    def element_indices(self) -> np.ndarray:
        """``(N, 2)`` array of ``(p, q)`` element indices, p-major."""
        p, q = np.meshgrid(np.arange(self.n_y), np.arange(self.n_z), indexing="ij")
        return np.stack([p.ravel(), q.ravel()], axis=1)


def equivalent_upa(config: LensArrayConfig, spacing: float = 0.5) -> UpaConfig:
    """Half-wavelength UPA with the same aperture as the lens (``2 d`` elements per axis).

    For a 10 x 10 aperture this is the 400-element benchmark array.
    """
    return UpaConfig(
        max(1, round(config.d_y / spacing)), max(1, round(config.d_z / spacing)), spacing
    )


def antenna_grid(config: LensArrayConfig) -> list[AntennaIndex]:
    """All focal-surface antennas of the lens array, ordered by ``(m_e, m_a)``."""
    return list(map(AntennaIndex._make, config.indices.tolist()))


def snapped_sinc(x):
    """Normalized sinc that is exact at (numerically) integer arguments.

    Arguments within ``1e-12`` of an integer return exactly 1 (at zero) or 0,
    so on-grid angles focus onto a single antenna without rounding residue.
    """
    x = np.asarray(x, dtype=float)
    nearest = np.rint(x)
    on_int = np.abs(x - nearest) < _SINC_EPS
    out = np.sinc(np.where(on_int, 0.0, x))
    return np.where(on_int, np.where(nearest == 0, 1.0, 0.0), out)


def _check_angles(theta, phi):
    half = math.pi / 2 + 1e-12
    if np.any(np.abs(theta) > half) or np.any(np.abs(phi) > half):
        raise ValueError("angles must lie in [-pi/2, pi/2]")


def lens_response(config: LensArrayConfig, theta, phi) -> np.ndarray:
    """Lens array response for elevation ``theta`` and azimuth ``phi``.

    Scalar angles give a length-``M`` vector in canonical antenna order;
    array-valued angles broadcast and append the antenna axis last.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    _check_angles(theta, phi)
    m_e = config.indices[:, 0]
    m_a = config.indices[:, 1]
    el = config.d_z * np.sin(theta)[..., None]
    az = (config.d_y * np.cos(theta) * np.sin(phi))[..., None]
    amp = math.sqrt(config.d_y * config.d_z)
    return amp * np.exp(-1j * config.phase0) * snapped_sinc(m_e - el) * snapped_sinc(m_a - az)


def upa_response(config: UpaConfig, theta, phi) -> np.ndarray:
    """Unit-norm planar steering vector (element order p-major, see ``UpaConfig``)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    _check_angles(theta, phi)
    p = config.element_indices[:, 0]
    q = config.element_indices[:, 1]
    u_y = (np.cos(theta) * np.sin(phi))[..., None]
    u_z = np.sin(theta)[..., None]
    phase = 2 * np.pi * config.spacing * (p * u_y + q * u_z)
    return np.exp(1j * phase) / math.sqrt(config.n_elements)


class IntegrationError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, error_estimate):
        super().__init__(message)
        self.error_estimate = error_estimate


def aperture_integration_oracle(
    config: LensArrayConfig, theta: float, phi: float, antenna, rtol: float = 1e-6
) -> complex:
    """Received signal at ``antenna`` for a unit plane wave, by aperture integration.

    Integrates the incident plane wave times the lens phase delay over the
    rectangular aperture, using the exact path length from each aperture point
    to the antenna on the focal hemisphere (no far-focus approximation). The
    result is normalized by the input amplitude and is directly comparable to
    ``lens_response``.

    Raises
    ------
    ValueError
        If ``focal_ratio < 5``.
    IntegrationError
        If the adaptive cubature does not converge.
    """
    if config.focal_ratio < 5:
        raise ValueError("aperture oracle requires focal_ratio >= 5")
    if config.focal_ratio < 10:
        warnings.warn("focal_ratio < 10: the oracle departs noticeably from the sinc model", stacklevel=2)
    _check_angles(theta, phi)

    m_e, m_a = antenna
    d_y, d_z = config.d_y, config.d_z
    focal = config.focal_ratio * max(d_y, d_z)
    k0 = 2 * np.pi
    sin_m = m_e / d_z
    # cos(theta_m) * sin(phi_m) by construction of the azimuth index
    cs_m = m_a / d_y
    in_y = math.cos(theta) * math.sin(phi)
    in_z = math.sin(theta)
    norm = 1.0 / math.sqrt(d_y * d_z)

    def integrand(pts):
        y = pts[:, 0]
        z = pts[:, 1]
        r2 = focal**2 + y**2 + z**2
        delay = k0 * (np.sqrt(r2 - 2 * focal * (y * cs_m + z * sin_m)) - np.sqrt(r2))
        val = norm * np.exp(-1j * (k0 * (y * in_y + z * in_z) + config.phase0 + delay))
        return np.stack([val.real, val.imag], axis=-1)

    res = cubature(integrand, [-d_y / 2, -d_z / 2], [d_y / 2, d_z / 2], rtol=rtol, atol=1e-10)
    if res.status != "converged":
        raise IntegrationError(
            f"aperture integration did not converge (error estimate {res.error})", res.error
        )
    return complex(res.estimate[0], res.estimate[1])
