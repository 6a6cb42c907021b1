"""Multi-path channel generation, symbol-rate discretization and the
delay-compensated effective channel matrices.

Index conventions used throughout the package:

* users ``k`` and paths ``l`` are zero-based;
* BS antennas are referred to by their position in the canonical lens
  ordering (``LensArrayConfig.indices``);
* within an :class:`EffectiveChannels` object, rows are ordered like
  ``selected`` (the set ``M_S``, sorted canonically).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .lens_array import LensArrayConfig, UpaConfig, lens_response, upa_response

__all__ = [
    "PathLossConfig",
    "ScenarioConfig",
    "PathParams",
    "ChannelRealization",
    "DiscreteChannel",
    "EffectiveChannels",
    "sample_channel",
    "discretize",
    "beta",
    "effective_matrices",
    "save_realization",
    "load_realization",
]


@dataclass(frozen=True)
class PathLossConfig:
    """Stand-in large-scale model for path gains.

    ``alpha_kl = sqrt(PL(d) * w_kl) * exp(j psi)`` with ``PL(d) = (d / d_ref)^-n``
    so that users at the reference distance have unit mean total path power.
    The power fractions ``w_kl`` give the strongest path at least
    ``dominant_fraction`` of the total; the remainder is split with a flat
    Dirichlet(``dirichlet_alpha``) draw.
    """

    exponent: float = 2.9
    ref_distance_m: float = 100.0
    dominant_fraction: float = 0.5
    dirichlet_alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.dominant_fraction <= 1.0:
            raise ValueError("dominant_fraction must lie in [0, 1]")
        if self.ref_distance_m <= 0 or self.dirichlet_alpha <= 0:
            raise ValueError("ref_distance_m and dirichlet_alpha must be positive")

    def pathloss(self, distance_m):
        return (np.asarray(distance_m, dtype=float) / self.ref_distance_m) ** (-self.exponent)


@dataclass(frozen=True)
class ScenarioConfig:
    """Random multi-user scenario.

    ``angle_range`` is the half-width (radians) of the uniform support of every
    AoA component; ``aod_range`` defaults to the same value.
    """

    n_users: int = 5
    n_paths: int = 3
    carrier_hz: float = 28e9
    bandwidth_hz: float = 500e6
    max_delay_s: float = 100e-9
    angle_range: float = math.radians(60)
    aod_range: float | None = None
    distance_m: float | tuple = 100.0
    pathloss: PathLossConfig = field(default_factory=PathLossConfig)

    def __post_init__(self):
        if self.n_users < 1 or self.n_paths < 1:
            raise ValueError("need at least one user and one path")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.max_delay_s < 0:
            raise ValueError("max_delay_s must be non-negative")
        if not 0 <= self.angle_range <= math.pi / 2:
            raise ValueError("angle_range must lie in [0, pi/2]")
        if np.ndim(self.distance_m) and len(self.distance_m) != self.n_users:
            raise ValueError("distance_m must be a scalar or one value per user")

    @property
    def mu(self) -> int:
        """Delay spread bound in symbols."""
        return int(round(self.max_delay_s * self.bandwidth_hz))

    @property
    def aod_half_width(self) -> float:
        return self.angle_range if self.aod_range is None else self.aod_range


class PathParams(NamedTuple):
    gain: complex
    delay_s: float
    aoa: tuple[float, float]
    aod: tuple[float, float]


@dataclass(frozen=True)
class ChannelRealization:
    """Per-user path parameters, arrays of shape ``(K, L)``.

    Angles are stored as ``(K, L, 2)`` arrays of ``(elevation, azimuth)``.
    """

    gains: np.ndarray
    delays_s: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    rng_seed: int | None = None

    @property
    def n_users(self) -> int:
        return self.gains.shape[0]

    @property
    def n_paths(self) -> int:
        return self.gains.shape[1]

    @property
    def paths(self) -> list[list[PathParams]]:
        return [
            [
                PathParams(
                    complex(self.gains[k, l]),
                    float(self.delays_s[k, l]),
                    tuple(map(float, self.aoa[k, l])),
                    tuple(map(float, self.aod[k, l])),
                )
                for l in range(self.n_paths)
            ]
            for k in range(self.n_users)
        ]

    def __eq__(self, other):
        if not isinstance(other, ChannelRealization):
            return NotImplemented
        return (
            self.rng_seed == other.rng_seed
            and np.array_equal(self.gains, other.gains)
            and np.array_equal(self.delays_s, other.delays_s)
            and np.array_equal(self.aoa, other.aoa)
            and np.array_equal(self.aod, other.aod)
        )

    __hash__ = None


def sample_channel(scenario: ScenarioConfig, seed: int) -> ChannelRealization:
    """Draw one channel realization; fully determined by ``seed``."""
    rng = np.random.default_rng(seed)
    K, L = scenario.n_users, scenario.n_paths
    a, b = scenario.angle_range, scenario.aod_half_width
    aoa = rng.uniform(-a, a, size=(K, L, 2))
    aod = rng.uniform(-b, b, size=(K, L, 2))
    delays = rng.uniform(0.0, scenario.max_delay_s, size=(K, L))

    pl = scenario.pathloss
    if L == 1:
        frac = np.ones((K, 1))
    else:
        rest = rng.dirichlet(np.full(L, pl.dirichlet_alpha), size=K)
        frac = (1.0 - pl.dominant_fraction) * rest
        frac[:, 0] += pl.dominant_fraction
    power = pl.pathloss(np.broadcast_to(scenario.distance_m, (K,)))[:, None] * frac
    phase = rng.uniform(0.0, 2 * np.pi, size=(K, L))
    gains = np.sqrt(power) * np.exp(1j * phase)
    return ChannelRealization(gains, delays, aoa, aod, rng_seed=seed)


@dataclass(frozen=True, eq=False)
class DiscreteChannel:
    """Symbol-rate channel.

    Attributes
    ----------
    h : ndarray, shape (K, L, M_BS, M_MS)
        Tap row vectors ``h_mkl^H``.
    beta : ndarray, shape (K, L, M_BS)
        Omni-directional path gains ``alpha_kl * a_m``.
    delays : ndarray of int, shape (K, L)
    active : ndarray of bool, shape (K, L)
        ``False`` for paths merged into an earlier path of the same user with
        the same integer delay; their ``h`` and ``beta`` are zero.
    """

    lens: LensArrayConfig
    upa: UpaConfig
    h: np.ndarray
    beta: np.ndarray
    delays: np.ndarray
    active: np.ndarray

    @property
    def n_users(self) -> int:
        return self.h.shape[0]

    @property
    def n_paths(self) -> int:
        return self.h.shape[1]

    @property
    def n_bs(self) -> int:
        return self.h.shape[2]

    @property
    def n_ms(self) -> int:
        return self.h.shape[3]

    @property
    def mu(self) -> int:
        """Largest integer path delay."""
        return int(self.delays[self.active].max())


def discretize(
    realization: ChannelRealization, lens: LensArrayConfig, upa: UpaConfig, bandwidth_hz: float
) -> DiscreteChannel:
    """Round delays to symbols and build the tap rows.

    Paths of one user that land on the same symbol delay are merged by adding
    their rows into the lowest-indexed of them.
    """
    delays = np.rint(realization.delays_s * bandwidth_hz).astype(int)
    a = lens_response(lens, realization.aoa[..., 0], realization.aoa[..., 1])
    b = upa_response(upa, realization.aod[..., 0], realization.aod[..., 1])
    beta_ = realization.gains[..., None] * a
    h = beta_[..., :, None] * b.conj()[..., None, :]

    K, L = delays.shape
    active = np.ones((K, L), dtype=bool)
    for k in range(K):
        for l in range(L):
            first = np.flatnonzero(active[k, :l] & (delays[k, :l] == delays[k, l]))
            if first.size:
                j = first[0]
                h[k, j] += h[k, l]
                beta_[k, j] += beta_[k, l]
                h[k, l] = 0
                beta_[k, l] = 0
                active[k, l] = False
    return DiscreteChannel(lens, upa, h, beta_, delays, active)


def beta(discrete: DiscreteChannel, m: int, k: int, l: int) -> complex:
    """Relative received gain of path ``(k, l)`` at antenna position ``m``."""
    return complex(discrete.beta[k, l, m])


@dataclass(frozen=True, eq=False)
class EffectiveChannels:
    """Delay-compensated channels on the selected antennas.

    Each selected antenna ``m`` is synchronized, for every user ``k``, to
    ``ref_delay[m, k]``. With genie association that is the delay of the user's
    strongest path at ``m``; for the antenna's own (associated) user it may come
    from estimation instead.

    Attributes
    ----------
    selected : ndarray of int, shape (S,)
    rows : ndarray, shape (K, L, S, M_MS)
    delays, active : ndarrays, shape (K, L)
    user : ndarray of int, shape (S,)
        Associated user ``k_m`` per antenna, ``-1`` when unassociated.
    path : ndarray of int, shape (S,)
        Associated path ``l_m`` (``-1`` when unassociated or no path of
        ``k_m`` has the synchronized delay).
    sync_path : ndarray of int, shape (S, K)
        Strongest path of each user at each antenna.
    ref_delay : ndarray of int, shape (S, K)
    """

    selected: np.ndarray
    rows: np.ndarray
    delays: np.ndarray
    active: np.ndarray
    user: np.ndarray
    path: np.ndarray
    sync_path: np.ndarray
    ref_delay: np.ndarray

    @property
    def n_users(self) -> int:
        return self.rows.shape[0]

    @property
    def n_selected(self) -> int:
        return self.rows.shape[2]

    @property
    def n_ms(self) -> int:
        return self.rows.shape[3]

    @cached_property
    def shift(self) -> np.ndarray:
        """Excessive delays ``n_k'l - ref_delay[m, k]``, shape ``(S, K, K', L)``."""
        return self.delays[None, None, :, :] - self.ref_delay[:, :, None, None]

    @property
    def mu(self) -> int:
        """Largest excessive-delay magnitude among active paths."""
        return int(np.abs(self.shift[..., self.active]).max())

    def user_antennas(self, k: int) -> np.ndarray:
        """Row positions (into ``selected``) of the antennas associated with ``k``."""
        return np.flatnonzero(self.user == k)

    @cached_property
    def g_cross(self) -> dict[tuple[int, int, int], np.ndarray]:
        """Non-zero ``G_{kk'}[i]`` matrices keyed by ``(k, k', i)``, each ``(S, M_MS)``."""
        out = {}
        S = self.n_selected
        for k in range(self.n_users):
            for kp in range(self.n_users):
                for l in np.flatnonzero(self.active[kp]):
                    shifts = self.shift[:, k, kp, l]
                    for i in np.unique(shifts):
                        mat = out.setdefault((k, kp, int(i)), np.zeros((S, self.n_ms), complex))
                        hit = shifts == i
                        mat[hit] += self.rows[kp, l, hit]
        return out

    def g0(self, k: int) -> np.ndarray:
        """``G_{kk}[0]``: user ``k``'s synchronized rows on all selected antennas."""
        return self.g_cross.get((k, k, 0), np.zeros((self.n_selected, self.n_ms), complex))

    def g_self(self, k: int) -> np.ndarray:
        """``G_k``: rows of ``G_{kk}[0]`` on the antennas associated with ``k``."""
        return self.g0(k)[self.user_antennas(k)]


def effective_matrices(
    discrete: DiscreteChannel,
    selected: Sequence[int],
    association: tuple[np.ndarray, np.ndarray] | None = None,
) -> EffectiveChannels:
    """Build the effective channels on antenna set ``selected``.

    Parameters
    ----------
    discrete : DiscreteChannel
    selected : sequence of int
        Canonical antenna positions (``M_S``), non-empty.
    association : (users, delays), optional
        Per selected antenna, the associated user (``-1`` for none) and the
        delay it synchronizes to, e.g. from path estimation. Without it the
        strongest path by ``|beta|^2`` is used; antennas that receive exactly
        zero power stay unassociated. Ties go to the lowest ``(k, l)``.
    """
    selected = np.asarray(selected, dtype=int)
    if selected.size == 0:
        raise ValueError("antenna set must be non-empty")
    K, L = discrete.n_users, discrete.n_paths
    S = selected.size
    pw = np.abs(discrete.beta[:, :, selected]) ** 2  # (K, L, S)
    pw = np.where(discrete.active[:, :, None], pw, -1.0)

    sync_path = pw.argmax(axis=1).T  # (S, K)
    ref = discrete.delays[np.arange(K)[None, :], sync_path]

    if association is None:
        flat = pw.reshape(K * L, S)
        best = flat.argmax(axis=0)
        powered = flat[best, np.arange(S)] > 0
        user = np.where(powered, best // L, -1)
        path = np.where(powered, best % L, -1)
    else:
        user = np.asarray(association[0], dtype=int).copy()
        assoc_delay = np.asarray(association[1], dtype=int)
        path = np.full(S, -1)
        for s in np.flatnonzero(user >= 0):
            k = user[s]
            ref[s, k] = assoc_delay[s]
            hit = np.flatnonzero(discrete.active[k] & (discrete.delays[k] == assoc_delay[s]))
            if hit.size:
                path[s] = hit[0]

    return EffectiveChannels(
        selected=selected,
        rows=discrete.h[:, :, selected, :],
        delays=discrete.delays,
        active=discrete.active,
        user=user,
        path=path,
        sync_path=sync_path,
        ref_delay=ref,
    )


_CSV_FIELDS = ["user", "path", "gain_re", "gain_im", "delay_s", "aoa_el", "aoa_az", "aod_el", "aod_az"]


def save_realization(path, realization: ChannelRealization) -> None:
    """Write one CSV record per path; the seed goes in a leading comment line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# rng_seed={realization.rng_seed}\n")
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for k in range(realization.n_users):
            for l in range(realization.n_paths):
                g = realization.gains[k, l]
                values = [
                    g.real,
                    g.imag,
                    realization.delays_s[k, l],
                    *realization.aoa[k, l],
                    *realization.aod[k, l],
                ]
                writer.writerow([k, l, *(repr(float(v)) for v in values)])


def load_realization(path) -> ChannelRealization:
    path = Path(path)
    with path.open(newline="") as fh:
        head = fh.readline().strip()
        if not head.startswith("# rng_seed="):
            raise ValueError(f"{path}: missing rng_seed header")
        seed_text = head.split("=", 1)[1]
        seed = None if seed_text == "None" else int(seed_text)
        records = list(csv.DictReader(fh))
    if not records:
        raise ValueError(f"{path}: no path records")
    K = 1 + max(int(r["user"]) for r in records)
    L = 1 + max(int(r["path"]) for r in records)
    if len(records) != K * L:
        raise ValueError(f"{path}: expected {K * L} records, found {len(records)}")
    gains = np.zeros((K, L), complex)
    delays = np.zeros((K, L))
    aoa = np.zeros((K, L, 2))
    aod = np.zeros((K, L, 2))
    for r in records:
        k, l = int(r["user"]), int(r["path"])
        gains[k, l] = complex(float(r["gain_re"]), float(r["gain_im"]))
        delays[k, l] = float(r["delay_s"])
        aoa[k, l] = float(r["aoa_el"]), float(r["aoa_az"])
        aod[k, l] = float(r["aod_el"]), float(r["aod_az"])
    return ChannelRealization(gains, delays, aoa, aod, rng_seed=seed)
