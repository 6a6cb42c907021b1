"""MS-side analog beamformers: steering codebook, omni probing vector and the
phase-3 training matrix. Every vector here has unit norm and equal-magnitude
entries (phase-shifter constraint)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lens_array import UpaConfig, upa_response

__all__ = [
    "Codebook",
    "OmniBeamformer",
    "beamsteering_codebook",
    "omni_beamformer",
    "training_matrix",
    "response_ripple",
]


@dataclass(frozen=True, eq=False)
class Codebook:
    """Finite set of analog beamformers.

    ``vectors`` has shape ``(N_CB, M_MS)``; ``angles`` holds the
    ``(elevation, azimuth)`` each codeword steers to.
    """

    vectors: np.ndarray
    angles: np.ndarray

    @property
    def n_cb(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_ms(self) -> int:
        return self.vectors.shape[1]

    def feedback_bits(self, n_users: int) -> float:
        """Bits needed to feed back one codeword index per user."""
        return n_users * math.log2(self.n_cb)

    def __len__(self):
        return self.n_cb

    def __getitem__(self, i):
        return self.vectors[i]


def beamsteering_codebook(
    upa: UpaConfig,
    n_cb: int = 256,
    shape: tuple[int, int] | None = None,
    el_range: float = math.pi / 2,
    az_range: float = math.pi / 2,
) -> Codebook:
    """Steering vectors on a uniform (elevation, azimuth) grid.

    Each axis is quantized as ``-r + 2 r i / n`` for ``i = 0..n-1``, which puts
    broadside on the grid whenever ``n`` is even. ``n_cb`` must be a perfect
    square unless ``shape = (n_el, n_az)`` is given. Codeword ``(i, j)`` has
    index ``i * n_az + j``.
    """
    if shape is None:
        side = math.isqrt(n_cb)
        if side * side != n_cb:
            raise ValueError(f"n_cb={n_cb} is not a perfect square; pass shape=(n_el, n_az)")
        shape = (side, side)
    n_el, n_az = shape
    if n_el * n_az != n_cb or n_el < 1 or n_az < 1:
        raise ValueError(f"shape {shape} does not factor n_cb={n_cb}")
    el = -el_range + 2 * el_range * np.arange(n_el) / n_el
    az = -az_range + 2 * az_range * np.arange(n_az) / n_az
    grid_el, grid_az = np.meshgrid(el, az, indexing="ij")
    angles = np.stack([grid_el.ravel(), grid_az.ravel()], axis=1)
    return Codebook(upa_response(upa, angles[:, 0], angles[:, 1]), angles)


@dataclass(frozen=True, eq=False)
class OmniBeamformer:
    """Quasi-omni probing vector ``f_bar``.

    ``gain`` is the nominal response ``C`` (mean of ``|b^H f_bar|`` over the
    evaluation grid) and ``ripple`` the max/min ratio of that magnitude.
    """

    vector: np.ndarray
    gain: float
    ripple: float


def _flat_sequence(n: int, band: float = math.pi, levels: int = 48) -> np.ndarray:
    """Unimodular length-``n`` sequence with a flat DTFT magnitude on ``[-band, band]``.

    Exhaustive phase search for ``n <= 4``; quadratic-phase (chirp) family
    otherwise.
    """
    if n == 1:
        return np.ones(1, complex)
    band = min(band, math.pi)
    w = np.linspace(-band, band, 256, endpoint=band < math.pi)
    kernel = np.exp(-1j * np.outer(np.arange(n), w))
    if n <= 4:
        grid = np.linspace(0, 2 * np.pi, levels, endpoint=False)
        free = np.stack(np.meshgrid(*([grid] * (n - 1)), indexing="ij"), -1).reshape(-1, n - 1)
        phases = np.hstack([np.zeros((len(free), 1)), free])
    else:
        rates = np.linspace(0, 2, 401)
        phases = np.pi * np.outer(rates, np.arange(n) ** 2) / n
    best_ratio, best = np.inf, None
    for chunk in np.array_split(phases, max(1, len(phases) // 8192)):
        mag = np.abs(np.exp(1j * chunk) @ kernel)
        with np.errstate(divide="ignore"):
            ratio = mag.max(axis=1) / mag.min(axis=1)
        i = int(np.argmin(ratio))
        if ratio[i] < best_ratio:
            best_ratio, best = ratio[i], chunk[i]
    return np.exp(1j * best)


def response_ripple(upa: UpaConfig, f: np.ndarray, el_range: float, az_range: float, n: int = 181):
    """Max/min ratio and mean of ``|b^H f|`` over an ``n x n`` angle grid."""
    el = np.linspace(-el_range, el_range, n)
    az = np.linspace(-az_range, az_range, n)
    te, ta = np.meshgrid(el, az, indexing="ij")
    g = np.abs(upa_response(upa, te.ravel(), ta.ravel()).conj() @ f)
    with np.errstate(divide="ignore"):
        return float(g.max() / g.min()), float(g.mean())


@lru_cache(maxsize=16)
def omni_beamformer(
    upa: UpaConfig, el_range: float = math.pi / 2, az_range: float = math.pi / 2
) -> OmniBeamformer:
    """Separable constant-modulus omni vector for ``upa``.

    The per-axis sequences minimize their own spectral ripple over the spatial
    frequencies the angular support can produce; the Kronecker product inherits
    at most the product of the two ratios. Ripple and gain are measured on a
    181 x 181 grid over the same support.
    """
    k = 2 * math.pi * upa.spacing
    fy = _flat_sequence(upa.n_y, k * math.sin(min(az_range, math.pi / 2)))
    fz = _flat_sequence(upa.n_z, k * math.sin(min(el_range, math.pi / 2)))
    f = np.kron(fy, fz) / math.sqrt(upa.n_elements)
    f.setflags(write=False)
    ripple, gain = response_ripple(upa, f, el_range, az_range)
    return OmniBeamformer(f, gain, ripple)


def training_matrix(m_ms: int) -> np.ndarray:
    """Unitary DFT matrix whose columns are the phase-3 beamformers ``f[n]``."""
    if m_ms < 1:
        raise ValueError("m_ms must be >= 1")
    n = np.arange(m_ms)
    return np.exp(-2j * np.pi * np.outer(n, n) / m_ms) / math.sqrt(m_ms)
