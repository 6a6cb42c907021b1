"""Waveform-level single-carrier simulation.

Symbols are pushed through the delayed multi-path superposition, each
antenna's stream is delay-compensated and combined, and the output is split
into desired / ISI / IUI / noise parts by regenerating every path's
contribution from the known symbols. The resulting empirical SINR is an
independent check of the analytic expression in :func:`lenspdma.pdma.sinr_eq21`.

:func:`run_experiment` drives the Monte Carlo sweeps.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .channel import DiscreteChannel, EffectiveChannels, discretize, effective_matrices, sample_channel
from .codebook import beamsteering_codebook
from .estimation import estimate_channel, training_overhead
from .pdma import BeamformerSet, mmse_design, mrc_design, select_antennas, sinr_eq21
from .results import SweepResult, SweepRow

if TYPE_CHECKING:
    from .config import ExperimentConfig

__all__ = [
    "SimConfig",
    "Transmission",
    "TrialResult",
    "transmit_receive",
    "measure_sinr",
    "run_experiment",
]


@dataclass(frozen=True)
class SimConfig:
    """Data-phase simulation settings.

    ``empirical`` additionally runs the waveform simulation in sweeps and
    reports its sum rate next to the analytic one.
    """

    n_symbols: int = 100_000
    n_trials: int = 1
    snr_db: float = 0.0
    seed: int = 0
    modulation: str = "gaussian"
    empirical: bool = False

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.modulation not in ("gaussian", "qpsk"):
            raise ValueError(f"unknown modulation {self.modulation!r}")


def _symbols(rng: np.random.Generator, shape, modulation: str) -> np.ndarray:
    if modulation == "qpsk":
        return np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=shape)))
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


@dataclass(eq=False)
class Transmission:
    """One data block as seen by the selected antennas.

    ``paths[k, l]`` is the noise-free contribution of path ``(k, l)`` to every
    selected antenna, shape ``(K, L, S, N)``; ``received`` adds all paths and
    ``noise``.
    """

    selected: np.ndarray
    symbols: np.ndarray
    paths: np.ndarray
    noise: np.ndarray
    delays: np.ndarray
    active: np.ndarray

    @property
    def received(self) -> np.ndarray:
        return self.paths.sum(axis=(0, 1)) + self.noise


def transmit_receive(
    discrete: DiscreteChannel,
    selected,
    beamformers: BeamformerSet,
    powers,
    noise_var: float,
    n_symbols: int,
    seed=None,
    modulation: str = "gaussian",
    symbols: np.ndarray | None = None,
) -> Transmission:
    """Delayed superposition ``y_m[n] = sum_kl h_mkl v_k sqrt(p_k) s_k[n - n_kl] + z_m[n]``.

    Symbols before ``n = 0`` are zero. Pass ``symbols`` (shape ``(K, N)``) to
    drive the channel with a fixed sequence, e.g. an impulse.
    """
    selected = np.asarray(selected, dtype=int)
    K, L = discrete.n_users, discrete.n_paths
    rng = np.random.default_rng(seed)
    if symbols is None:
        symbols = _symbols(rng, (K, n_symbols), modulation)
    symbols = np.asarray(symbols, complex)
    N = symbols.shape[1]
    powers = np.broadcast_to(np.asarray(powers, float), (K,))

    paths = np.zeros((K, L, selected.size, N), complex)
    for k, l in zip(*np.nonzero(discrete.active)):
        n = discrete.delays[k, l]
        if n >= N:
            continue
        weight = discrete.h[k, l, selected] @ beamformers.v[k] * math.sqrt(powers[k])
        paths[k, l, :, n:] = weight[:, None] * symbols[k, : N - n]
    if noise_var > 0:
        noise = math.sqrt(noise_var / 2) * (
            rng.standard_normal((selected.size, N)) + 1j * rng.standard_normal((selected.size, N))
        )
    else:
        noise = np.zeros((selected.size, N), complex)
    return Transmission(selected, symbols, paths, noise, discrete.delays, discrete.active)


@dataclass(eq=False)
class TrialResult:
    """Empirical vs analytic SINR for one block.

    ``desired``, ``isi``, ``iui`` and ``noise`` are time-averaged powers of the
    regenerated combiner-output terms; ``sinr_stderr`` is a batch-means
    standard error of ``empirical_sinr``. ``infinite`` flags users whose
    interference-plus-noise power is exactly zero.
    """

    empirical_sinr: np.ndarray
    sinr_stderr: np.ndarray
    analytic_sinr: np.ndarray
    desired: np.ndarray
    isi: np.ndarray
    iui: np.ndarray
    noise: np.ndarray
    infinite: np.ndarray

    @property
    def empirical_rate(self) -> np.ndarray:
        return np.log2(1 + self.empirical_sinr)

    @property
    def analytic_rate(self) -> np.ndarray:
        return np.log2(1 + self.analytic_sinr)


def _combined_terms(tx: Transmission, eff: EffectiveChannels, k: int, u: np.ndarray, lo: int, hi: int):
    """Combiner output of user ``k`` split into desired/ISI/IUI/noise streams over ``[lo, hi)``."""
    n = hi - lo
    K = tx.paths.shape[0]
    desired = np.zeros(n, complex)
    isi = np.zeros(n, complex)
    iui = np.zeros(n, complex)
    noise = np.zeros(n, complex)
    for s in np.flatnonzero(u):
        ref = eff.ref_delay[s, k]
        w = np.conj(u[s])
        win = slice(lo + ref, hi + ref)
        noise += w * tx.noise[s, win]
        for kp in range(K):
            for l in np.flatnonzero(tx.active[kp]):
                part = w * tx.paths[kp, l, s, win]
                if kp != k:
                    iui += part
                elif tx.delays[kp, l] == ref:
                    desired += part
                else:
                    isi += part
    return desired, isi, iui, noise


def _ratio_stderr(num: np.ndarray, den: np.ndarray, n_batches: int) -> float:
    """Batch-means delta-method standard error of ``mean(num) / mean(den)``."""
    nb = min(n_batches, len(num))
    a = np.array([b.mean() for b in np.array_split(num, nb)])
    b = np.array([c.mean() for c in np.array_split(den, nb)])
    ratio = a.mean() / b.mean()
    return float(np.std(a - ratio * b, ddof=1) / (b.mean() * math.sqrt(nb)))


def measure_sinr(
    tx: Transmission,
    beamformers: BeamformerSet,
    effective: EffectiveChannels,
    powers,
    noise_var: float,
    n_batches: int = 50,
) -> TrialResult:
    """Empirical per-user SINR after delay compensation and combining.

    Only output samples whose every contributing symbol lies inside the block
    are used, i.e. ``n`` in ``[mu, N - mu)`` with ``mu`` bounding both path and
    compensation delays.
    """
    K, S = effective.n_users, effective.n_selected
    N = tx.symbols.shape[1]
    span = int(max(tx.delays[tx.active].max(), effective.ref_delay.max()))
    lo, hi = span, N - span
    if hi - lo < 2 * n_batches:
        raise ValueError(f"block of {N} symbols is too short for delay span {span}")

    analytic = sinr_eq21(effective, beamformers, powers, noise_var).sinr
    out = {name: np.zeros(K) for name in ("emp", "err", "des", "isi", "iui", "noise")}
    infinite = np.zeros(K, bool)
    for k in range(K):
        if beamformers.empty[k] or beamformers.u[k] is None:
            continue
        u = beamformers.padded(k, S)
        d, i1, i2, z = _combined_terms(tx, effective, k, u, lo, hi)
        pd = np.abs(d) ** 2
        pin = np.abs(i1 + i2 + z) ** 2
        out["des"][k] = pd.mean()
        out["isi"][k] = np.mean(np.abs(i1) ** 2)
        out["iui"][k] = np.mean(np.abs(i2) ** 2)
        out["noise"][k] = np.mean(np.abs(z) ** 2)
        if pin.mean() == 0:
            infinite[k] = pd.mean() > 0
            out["emp"][k] = np.inf if infinite[k] else 0.0
            continue
        out["emp"][k] = pd.mean() / pin.mean()
        out["err"][k] = _ratio_stderr(pd, pin, n_batches)
    return TrialResult(
        out["emp"], out["err"], analytic, out["des"], out["isi"], out["iui"], out["noise"], infinite
    )


# --------------------------------------------------------------------------- sweeps


def _worker_count(n_jobs: int) -> int:
    cap = os.environ.get("SIM_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, min(workers, n_jobs))


def _seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def _genie_selection(discrete: DiscreteChannel, m_rf: int) -> np.ndarray:
    power = np.sum(np.abs(discrete.beta) ** 2, axis=(0, 1))
    return select_antennas(power, m_rf)


def _run_trial(config: ExperimentConfig, trial: int):
    """Per-user rates for every (sweep point, series) of one trial.

    Returns a list indexed like ``config.sweep.values`` of lists indexed like
    ``config.series``; entries are ``(rates, overhead_T, empirical_rates)`` or
    an error string.
    """
    sim = config.sim
    root = np.random.SeedSequence([sim.seed, trial])
    ch_seq, tr_seq, sim_seq = root.spawn(3)
    ch_seed = _seed_int(ch_seq)
    codebook = beamsteering_codebook(config.upa, **config.codebook_kwargs)
    noise_var = config.noise_var
    axis = config.sweep.axis

    cache = {}

    def channel(n_users):
        key = ("ch", n_users)
        if key not in cache:
            scenario = replace(config.scenario, n_users=n_users)
            cache[key] = discretize(
                sample_channel(scenario, ch_seed), config.lens, config.upa, scenario.bandwidth_hz
            )
        return cache[key]

    out = []
    for value in config.sweep.values:
        n_users = int(value) if axis == "k_users" else config.scenario.n_users
        m_rf = config.resolve_m_rf(value if axis == "m_rf" else config.m_rf)
        snr_db = float(value) if axis == "snr_db" else sim.snr_db
        p = 10 ** (snr_db / 10) * noise_var
        row = []
        for series in config.series:
            try:
                discrete = channel(n_users)
                overhead_t = 0
                if series.csi == "perfect":
                    key = ("eff", n_users, m_rf)
                    if key not in cache:
                        cache[key] = effective_matrices(discrete, _genie_selection(discrete, m_rf))
                    eff = cache[key]
                    if series.mode == "mrc":
                        bf = mrc_design(eff, codebook)
                    else:
                        bf = mmse_design(eff, p, noise_var, codebook)
                    scale = 1.0
                else:
                    key = ("est", n_users, m_rf)
                    if key not in cache:
                        training = replace(
                            config.training, mu=config.scenario.mu, omni_range=config.scenario.aod_half_width
                        )
                        rep = estimate_channel(
                            discrete, training, m_rf, noise_var, tr_seq, codebook, config.coherence
                        )
                        eff_est = effective_matrices(discrete, rep.selected, rep.association)
                        cache[key] = (rep, eff_est, mrc_design(rep.g_hat, codebook, rep.support))
                    rep, eff, bf = cache[key]
                    overhead_t = rep.overhead.total
                    scale = rep.overhead.efficiency
                rates = sinr_eq21(eff, bf, p, noise_var).rate * scale
                emp = None
                if sim.empirical:
                    tx = transmit_receive(
                        discrete, eff.selected, bf, p, noise_var, sim.n_symbols, sim_seq, sim.modulation
                    )
                    emp = measure_sinr(tx, bf, eff, p, noise_var).empirical_rate * scale
                row.append((rates, overhead_t, emp))
            except Exception as exc:  # recorded per trial, never fatal
                row.append(f"{type(exc).__name__}: {exc}")
        out.append(row)
    return out


def _run_trial_star(args):
    return _run_trial(*args)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> SweepResult:
    """Monte Carlo sweep over one axis for every configured series.

    Trial ``t`` derives all its randomness from ``(seed, t)``, so results do not
    depend on the worker count; reductions run in trial order.
    """
    n = config.sim.n_trials
    workers = _worker_count(n) if workers is None else workers
    jobs = [(config, t) for t in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_trial_star, jobs, chunksize=max(1, n // (4 * workers))))
    else:
        trials = [_run_trial_star(j) for j in jobs]

    rows = []
    for vi, value in enumerate(config.sweep.values):
        for si, series in enumerate(config.series):
            entries = [t[vi][si] for t in trials]
            ok = [e for e in entries if not isinstance(e, str)]
            errors = sorted({e for e in entries if isinstance(e, str)})
            if ok:
                rates = np.array([e[0] for e in ok])
                sums = rates.sum(axis=1)
                stderr = float(np.std(sums, ddof=1) / math.sqrt(len(sums))) if len(sums) > 1 else 0.0
                user_means = tuple(float(x) for x in rates.mean(axis=0))
                overhead = int(ok[0][1])
                mean_sum = float(sums.mean())
                if ok[0][2] is not None:
                    emp = float(np.mean([e[2].sum() for e in ok]))
                else:
                    emp = float("nan")
            else:
                stderr, user_means, overhead, mean_sum, emp = float("nan"), (), 0, float("nan"), float("nan")
            rows.append(
                SweepRow(
                    axis=config.sweep.axis,
                    value=float(value),
                    mode=series.mode,
                    csi=series.csi,
                    trials=len(ok),
                    mean_sum_rate=mean_sum,
                    std_err=stderr,
                    user_rates=user_means,
                    overhead=overhead,
                    failures=len(entries) - len(ok),
                    empirical_sum_rate=emp,
                    errors=tuple(errors),
                )
            )
    rows.sort(key=lambda r: r.value)
    return SweepResult(rows=rows, metadata=config.metadata())


def overhead_for(config: ExperimentConfig, m_rf: int, n_users: int):
    """Training overhead of the configured protocol at ``m_rf`` and ``n_users``."""
    return training_overhead(
        config.lens.n_antennas, m_rf, config.upa.n_elements, config.scenario.mu, n_users, config.coherence
    )
