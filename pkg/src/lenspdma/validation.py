"""Oracle suite behind ``lenspdma validate``.

Each check returns an :class:`OracleResult` with the measured error and the
tolerance it was held to. Checks are sized to finish in well under a minute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import lens_array
from .channel import effective_matrices
from .codebook import beamsteering_codebook
from .estimation import TrainingConfig, estimate_channel, phase2_path_ls, phase3_effective_ls, training_overhead
from .instances import distinct_delay_instance, focus_angles, on_grid_instance, random_instance
from .lens_array import AntennaIndex, LensArrayConfig, UpaConfig, aperture_integration_oracle
from .linksim import measure_sinr, transmit_receive
from .pdma import exhaustive_p1_oracle, mmse_design, mrc_design, select_antennas, sinr_eq21

__all__ = ["OracleResult", "run_oracles", "ORACLES"]


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        text = f"[{tag}] {self.name}: error={self.error:.3e} tol={self.tolerance:.1e}"
        return f"{text} ({self.detail})" if self.detail else text


def check_antenna_count(**_) -> OracleResult:
    m = LensArrayConfig(10, 10, math.pi, math.pi).n_antennas
    return OracleResult("antenna count", m == 317, abs(m - 317), 0, f"M_BS={m}")


def check_overhead(**_) -> OracleResult:
    a = training_overhead(317, 10, 16, 50, 5)
    b = training_overhead(317, 3, 16, 50, 1)
    err = abs(a.total - 503) + abs(a.brute_force - 128000) + abs(b.total - 373)
    return OracleResult("training overhead", err == 0, err, 0, f"T={a.total} T'={a.brute_force} T(K=1)={b.total}")


def check_lens_response(response: Callable = lens_array.lens_response, **_) -> OracleResult:
    """Closed-form response against aperture integration.

    At normal incidence on antenna (0, 0) the closed form is exact; at large
    focal ratio the focus antenna and its neighbours converge to it as well.
    Errors are relative to the peak amplitude ``sqrt(d_y d_z)``.
    """
    cfg = LensArrayConfig(focal_ratio=10.0)
    ref = aperture_integration_oracle(cfg, 0.0, 0.0, AntennaIndex(0, 0))
    closed = response(cfg, 0.0, 0.0)[cfg.position((0, 0))]
    worst = abs(closed - ref) / abs(ref)

    far = LensArrayConfig(focal_ratio=1000.0)
    peak = math.sqrt(far.d_y * far.d_z)
    for m_e, m_a in [(2, -1), (-3, 4)]:
        theta, phi = focus_angles(far, m_e, m_a)
        closed = response(far, theta, phi)
        for de in (-1, 0, 1):
            for da in (-1, 0, 1):
                ant = AntennaIndex(m_e + de, m_a + da)
                ref = aperture_integration_oracle(far, theta, phi, ant)
                c = closed[far.position(ant)]
                worst = max(worst, abs(c - ref) / peak)
    tol = 2e-3
    return OracleResult("lens response vs aperture integration", worst <= tol, worst, tol)


def check_ls_exact(n_seeds: int = 5, **_) -> OracleResult:
    upa = UpaConfig(1, 1)
    worst = 0.0
    for seed in range(n_seeds):
        disc = distinct_delay_instance(2, 3, seed, upa=upa, mu=20)
        cfg = TrainingConfig(p_tr=1.0, mu=20)
        selected = select_antennas(np.sum(np.abs(disc.beta) ** 2, axis=(0, 1)), 10)
        p2 = phase2_path_ls(disc, selected, cfg, 0.0)
        truth = np.zeros_like(p2.beta_hat)
        for k, l in zip(*np.nonzero(disc.active)):
            truth[:, k, disc.delays[k, l]] += disc.beta[k, l, selected]
        worst = max(worst, np.abs(p2.beta_hat - truth).max())
        p3 = phase3_effective_ls(disc, selected, (p2.user, p2.delay), cfg, 0.0)
        eff = effective_matrices(disc, selected, (p2.user, p2.delay))
        for k in range(disc.n_users):
            if len(p3.g_hat[k]):
                worst = max(worst, np.abs(p3.g_hat[k] - eff.g_self(k)).max())
    tol = 1e-9
    return OracleResult("noiseless LS exactness", worst <= tol, float(worst), tol)


def check_sinr_agreement(n_symbols: int = 100_000, **_) -> OracleResult:
    disc = random_instance(2, 2, seed=11)
    cb = beamsteering_codebook(disc.upa, 64)
    sel = select_antennas(np.sum(np.abs(disc.beta) ** 2, axis=(0, 1)), 8)
    eff = effective_matrices(disc, sel)
    worst = 0.0
    for design in ("mrc", "mmse"):
        bf = mrc_design(eff, cb) if design == "mrc" else mmse_design(eff, 1.0, 1.0, cb)
        tx = transmit_receive(disc, sel, bf, 1.0, 1.0, n_symbols, seed=3)
        res = measure_sinr(tx, bf, eff, 1.0, 1.0)
        ok = ~bf.empty
        z = np.abs(res.empirical_sinr - res.analytic_sinr)[ok] / res.sinr_stderr[ok]
        worst = max(worst, float(z.max(initial=0.0)))
    return OracleResult("analytic vs empirical SINR", worst <= 3.0, worst, 3.0, "in Monte Carlo sigmas")


def check_p1_oracle(n_instances: int = 10, **_) -> OracleResult:
    upa = UpaConfig(2, 2)
    cb = beamsteering_codebook(upa, 8, shape=(2, 4))
    worst = 0.0
    for seed in range(n_instances):
        disc = random_instance(2, 2, seed, upa=upa)
        sel = select_antennas(np.sum(np.abs(disc.beta) ** 2, axis=(0, 1)), 6)
        eff = effective_matrices(disc, sel)
        _, best = exhaustive_p1_oracle(eff, 10.0, 1.0, cb)
        design = sinr_eq21(eff, mmse_design(eff, 10.0, 1.0, cb), 10.0, 1.0).sum_rate
        worst = max(worst, design - best)
    tol = 1e-9
    return OracleResult("exhaustive oracle dominance", worst <= tol, max(worst, 0.0), tol)


def check_separated(n_instances: int = 5, **_) -> OracleResult:
    worst = 0.0
    for seed in range(n_instances):
        disc = on_grid_instance(3, 3, seed)
        cb = beamsteering_codebook(disc.upa, 64)
        sel = select_antennas(np.sum(np.abs(disc.beta) ** 2, axis=(0, 1)), 9)
        eff = effective_matrices(disc, sel)
        a = sinr_eq21(eff, mrc_design(eff, cb), 10.0, 1.0).rate
        b = sinr_eq21(eff, mmse_design(eff, 10.0, 1.0, cb), 10.0, 1.0).rate
        worst = max(worst, float(np.abs(a - b).max()))
    tol = 1e-9
    return OracleResult("MRC equals MMSE when separated", worst <= tol, worst, tol)


def check_estimation_pipeline(**_) -> OracleResult:
    disc = random_instance(1, 3, seed=5)
    rep = estimate_channel(disc, TrainingConfig(p_tr=100.0, mu=50), 3, 1.0, seed=0)
    ok = rep.overhead.total == 373
    return OracleResult("estimation frame length", ok, abs(rep.overhead.total - 373), 0, f"T={rep.overhead.total}")


ORACLES = {
    "antenna_count": check_antenna_count,
    "overhead": check_overhead,
    "lens_response": check_lens_response,
    "ls_exact": check_ls_exact,
    "sinr_agreement": check_sinr_agreement,
    "p1_oracle": check_p1_oracle,
    "separated": check_separated,
    "estimation_frame": check_estimation_pipeline,
}


def run_oracles(names=None, response: Callable | None = None) -> list[OracleResult]:
    """Run the named oracles (all by default).

    ``response`` replaces the closed-form lens response in the lens response check,
    which is how the harness itself is mutation-tested.
    """
    names = list(ORACLES) if names is None else list(names)
    out = []
    for name in names:
        kwargs = {} if response is None else {"response": response}
        try:
            out.append(ORACLES[name](**kwargs))
        except Exception as exc:  # a crashing oracle is a failing oracle
            out.append(OracleResult(name, False, math.inf, 0.0, f"{type(exc).__name__}: {exc}"))
    return out
