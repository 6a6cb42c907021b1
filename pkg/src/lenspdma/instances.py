"""Constructed channel instances for validation and tests.

``random_instance`` draws from the scenario model; ``on_grid_instance`` places
every path exactly on an antenna's focus direction so that each path lights up
a single antenna, which makes the multi-path signals perfectly separated.
"""

from __future__ import annotations

import math

import numpy as np

from .channel import ChannelRealization, DiscreteChannel, ScenarioConfig, discretize, sample_channel
from .lens_array import LensArrayConfig, UpaConfig

__all__ = ["focus_angles", "random_instance", "on_grid_instance", "distinct_delay_instance"]


def focus_angles(lens: LensArrayConfig, m_e: int, m_a: int) -> tuple[float, float]:
    """Incidence ``(theta, phi)`` focused exactly onto antenna ``(m_e, m_a)``."""
    theta = math.asin(m_e / lens.d_z)
    phi = math.asin(m_a / (lens.d_y * math.cos(theta)))
    return theta, phi


def random_instance(
    n_users: int,
    n_paths: int,
    seed: int,
    lens: LensArrayConfig | None = None,
    upa: UpaConfig | None = None,
    scenario: ScenarioConfig | None = None,
) -> DiscreteChannel:
    lens = lens or LensArrayConfig()
    upa = upa or UpaConfig()
    base = scenario or ScenarioConfig()
    scenario = ScenarioConfig(
        n_users=n_users,
        n_paths=n_paths,
        carrier_hz=base.carrier_hz,
        bandwidth_hz=base.bandwidth_hz,
        max_delay_s=base.max_delay_s,
        angle_range=base.angle_range,
        aod_range=base.aod_range,
        distance_m=base.distance_m if np.ndim(base.distance_m) == 0 else 100.0,
        pathloss=base.pathloss,
    )
    return discretize(sample_channel(scenario, seed), lens, upa, scenario.bandwidth_hz)


def _realization(gains, delays, aoa, aod, bandwidth_hz) -> ChannelRealization:
    return ChannelRealization(
        np.asarray(gains, complex),
        np.asarray(delays, float) / bandwidth_hz,
        np.asarray(aoa, float),
        np.asarray(aod, float),
    )


def on_grid_instance(
    n_users: int,
    n_paths: int,
    seed: int,
    lens: LensArrayConfig | None = None,
    upa: UpaConfig | None = None,
    mu: int = 50,
    bandwidth_hz: float = 500e6,
    max_index: int = 6,
) -> DiscreteChannel:
    """Paths on distinct antenna focus directions (disjoint AoAs).

    Antennas are drawn without replacement from ``|m_e|, |m_a| <= max_index``,
    so no two paths share an antenna and every lens response is a Kronecker
    delta. Delays are arbitrary integers in ``[0, mu]``.
    """
    lens = lens or LensArrayConfig()
    upa = upa or UpaConfig()
    rng = np.random.default_rng(seed)
    idx = lens.indices
    pool = np.flatnonzero((np.abs(idx[:, 0]) <= max_index) & (np.abs(idx[:, 1]) <= max_index))
    pick = rng.choice(pool, size=n_users * n_paths, replace=False).reshape(n_users, n_paths)
    aoa = np.array([[focus_angles(lens, *idx[p]) for p in row] for row in pick])
    aod = rng.uniform(-math.pi / 3, math.pi / 3, size=(n_users, n_paths, 2))
    gains = (rng.standard_normal((n_users, n_paths)) + 1j * rng.standard_normal((n_users, n_paths))) / math.sqrt(2)
    delays = rng.integers(0, mu + 1, size=(n_users, n_paths))
    return discretize(_realization(gains, delays, aoa, aod, bandwidth_hz), lens, upa, bandwidth_hz)


def distinct_delay_instance(
    n_users: int,
    n_paths: int,
    seed: int,
    lens: LensArrayConfig | None = None,
    upa: UpaConfig | None = None,
    mu: int = 50,
    bandwidth_hz: float = 500e6,
    angle_range: float = math.radians(60),
) -> DiscreteChannel:
    """Random angles and gains with all ``K L`` integer delays distinct."""
    lens = lens or LensArrayConfig()
    upa = upa or UpaConfig()
    rng = np.random.default_rng(seed)
    n = n_users * n_paths
    if n > mu + 1:
        raise ValueError("not enough distinct delays in [0, mu]")
    delays = rng.choice(mu + 1, size=n, replace=False).reshape(n_users, n_paths)
    aoa = rng.uniform(-angle_range, angle_range, size=(n_users, n_paths, 2))
    aod = rng.uniform(-angle_range, angle_range, size=(n_users, n_paths, 2))
    gains = (rng.standard_normal((n_users, n_paths)) + 1j * rng.standard_normal((n_users, n_paths))) / math.sqrt(2)
    return discretize(_realization(gains, delays, aoa, aod, bandwidth_hz), lens, upa, bandwidth_hz)
