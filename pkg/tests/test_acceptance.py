"""Acceptance criteria, one test and one printed verdict line each.

Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from conftest import genie_power
from lenspdma import cli
from lenspdma.channel import effective_matrices
from lenspdma.codebook import beamsteering_codebook
from lenspdma.config import from_mapping
from lenspdma.estimation import TrainingConfig, phase2_path_ls, phase3_effective_ls, training_overhead
from lenspdma.instances import distinct_delay_instance, on_grid_instance, random_instance
from lenspdma.lens_array import AntennaIndex, LensArrayConfig, UpaConfig, antenna_grid, aperture_integration_oracle, lens_response
from lenspdma.linksim import measure_sinr, run_experiment, transmit_receive
from lenspdma.pdma import exhaustive_p1_oracle, mmse_design, mrc_design, select_antennas, sinr_eq21

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    start = time.perf_counter()

    def emit(n, name, ok, measured, tol, budget_s):
        took = time.perf_counter() - start
        ok = bool(ok) and took <= budget_s
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2} {name}: measured={measured} tol={tol} time={took:.1f}s/{budget_s:g}s"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def test_c01_antenna_count(verdict):
    took = math.inf
    for _ in range(5):
        t = time.perf_counter()
        grid = antenna_grid(LensArrayConfig(10, 10, math.pi, math.pi))
        took = min(took, time.perf_counter() - t)
    verdict(1, "antenna count", len(grid) == 317 and took < 1e-3, f"{len(grid)} in {took * 1e3:.3f} ms", "== 317, < 1 ms", 1)


def test_c02_overhead(verdict):
    a = training_overhead(317, 10, 16, 50, 5)
    b = training_overhead(317, 3, 16, 50, 1)
    ok = (a.total, a.brute_force, b.total) == (503, 128_000, 373)
    verdict(2, "training overhead", ok, f"T={a.total} T'={a.brute_force} T(K=1)={b.total}", "503/128000/373", 1)


def test_c03_lens_oracle(verdict):
    cfg = LensArrayConfig(focal_ratio=10.0)
    peak = math.sqrt(cfg.d_y * cfg.d_z)
    angles = np.random.default_rng(2024).uniform(-math.pi / 4, math.pi / 4, size=(20, 2))
    worst = 0.0
    for theta, phi in angles:
        closed = lens_response(cfg, theta, phi)
        m_e = round(cfg.d_z * math.sin(theta))
        m_a = round(cfg.d_y * math.cos(theta) * math.sin(phi))
        for de in (-1, 0, 1):
            for da in (-1, 0, 1):
                ant = AntennaIndex(m_e + de, m_a + da)
                ref = aperture_integration_oracle(cfg, theta, phi, ant)
                worst = max(worst, abs(abs(ref) - abs(closed[cfg.position(ant)])) / peak)
    verdict(3, "closed-form lens response vs aperture integration (F/D=10)", worst <= 0.05, f"{worst:.4f} of peak", "<= 0.05", 60)


def test_c04_ls_exact(verdict):
    upa = UpaConfig(1, 1)
    worst = 0.0
    for seed in range(50):
        d = distinct_delay_instance(2, 3, seed, upa=upa, mu=20)
        cfg = TrainingConfig(p_tr=1.0, mu=20)
        sel = select_antennas(genie_power(d), 10)
        p2 = phase2_path_ls(d, sel, cfg, 0.0)
        truth = np.zeros_like(p2.beta_hat)
        for k, l in zip(*np.nonzero(d.active)):
            truth[:, k, d.delays[k, l]] += d.beta[k, l, sel]
        worst = max(worst, np.abs(p2.beta_hat - truth).max())
        p3 = phase3_effective_ls(d, sel, (p2.user, p2.delay), cfg, 0.0)
        eff = effective_matrices(d, sel, (p2.user, p2.delay))
        for k in range(2):
            if len(p3.g_hat[k]):
                worst = max(worst, np.abs(p3.g_hat[k] - eff.g_self(k)).max())
    verdict(4, "noiseless LS exactness (50 seeds)", worst <= 1e-9, f"{worst:.2e}", "<= 1e-9", 60)


def test_c05_sinr_agreement(verdict):
    worst = 0.0
    for seed in range(20):
        d = random_instance(2, 2, seed)
        cb = beamsteering_codebook(d.upa, 64)
        sel = select_antennas(genie_power(d), 8)
        eff = effective_matrices(d, sel)
        for bf in (mrc_design(eff, cb), mmse_design(eff, 1.0, 1.0, cb)):
            tx = transmit_receive(d, sel, bf, 1.0, 1.0, 100_000, seed=seed)
            res = measure_sinr(tx, bf, eff, 1.0, 1.0)
            ok = ~bf.empty
            z = np.abs(res.empirical_sinr - res.analytic_sinr)[ok] / res.sinr_stderr[ok]
            worst = max(worst, float(z.max(initial=0.0)))
    verdict(5, "analytic vs empirical SINR (20 instances, MRC and MMSE)", worst <= 3.0, f"{worst:.2f} sigma", "<= 3 sigma", 300)


def test_c06_separated(verdict):
    worst = 0.0
    for seed in range(20):
        d = on_grid_instance(3, 3, seed)
        cb = beamsteering_codebook(d.upa, 256)
        eff = effective_matrices(d, select_antennas(genie_power(d), 9))
        for p in (0.1, 10.0):
            a = sinr_eq21(eff, mrc_design(eff, cb), p, 1.0).rate
            b = sinr_eq21(eff, mmse_design(eff, p, 1.0, cb), p, 1.0).rate
            worst = max(worst, float(np.abs(a - b).max()))
    verdict(6, "MRC equals MMSE under separation", worst <= 1e-9, f"{worst:.2e}", "<= 1e-9", 10)


def test_c07_p1_dominance(verdict):
    upa = UpaConfig(2, 2)
    cb = beamsteering_codebook(upa, 8, shape=(2, 4))
    gap, sep_gap = 0.0, 0.0
    for seed in range(100):
        d = random_instance(2, 2, seed, upa=upa)
        eff = effective_matrices(d, select_antennas(genie_power(d), 6))
        _, best = exhaustive_p1_oracle(eff, 10.0, 1.0, cb)
        design = sinr_eq21(eff, mmse_design(eff, 10.0, 1.0, cb), 10.0, 1.0).sum_rate
        gap = max(gap, design - best)
    for seed in range(10):
        d = on_grid_instance(2, 2, seed, upa=upa)
        eff = effective_matrices(d, select_antennas(genie_power(d), 4))
        _, best = exhaustive_p1_oracle(eff, 10.0, 1.0, cb)
        design = sinr_eq21(eff, mmse_design(eff, 10.0, 1.0, cb), 10.0, 1.0).sum_rate
        sep_gap = max(sep_gap, abs(best - design))
    ok = gap <= 1e-9 and sep_gap <= 1e-9
    verdict(7, "exhaustive oracle dominance", ok, f"max(design-oracle)={gap:.2e}, separated |gap|={sep_gap:.2e}", "<= 1e-9", 300)


def _rf_ratio(preset, values, trials):
    series = [{"mode": "mrc", "csi": "perfect"}, {"mode": "mmse", "csi": "perfect"}]
    cfg = from_mapping({"preset": preset, "sweep": {"values": values}, "series": series}, trials=trials)
    assert cfg.sim.snr_db == -10.0
    res = run_experiment(cfg)
    out = {}
    for mode in ("mrc", "mmse"):
        low, full = res.select(mode, "perfect")
        out[mode] = low.mean_sum_rate / full.mean_sum_rate
    return out


def test_c08_fig4_rf_chains(verdict):
    r = _rf_ratio("fig4", [5, "all"], 500)
    ok = min(r.values()) >= 0.97
    verdict(8, "K=1, M_RF=5 vs all RF chains (500 trials)", ok, f"MRC {r['mrc']:.4f} MMSE {r['mmse']:.4f}", ">= 0.97", 900)


def test_c09_fig6_rf_chains(verdict):
    r = _rf_ratio("fig6", [20, "all"], 300)
    ok = min(r.values()) >= 0.85
    verdict(9, "K=5, M_RF=20 vs all RF chains (300 trials)", ok, f"MRC {r['mrc']:.4f} MMSE {r['mmse']:.4f}", ">= 0.85", 1800)


def test_c10_estimated_csi(verdict):
    series = [{"mode": "mrc", "csi": "perfect"}, {"mode": "mrc", "csi": "estimated"}]
    parts, worst = [], math.inf
    for preset in ("fig3", "paper-defaults"):
        cfg = from_mapping({"preset": preset, "series": series}, trials=200)
        assert cfg.coherence == 50_000
        res = run_experiment(cfg)
        ratios = [e.mean_sum_rate / p.mean_sum_rate for p, e in zip(res.select("mrc", "perfect"), res.select("mrc", "estimated"))]
        worst = min(worst, min(ratios))
        parts.append(f"{preset} {min(ratios):.3f}-{max(ratios):.3f}")
    verdict(10, "estimated vs perfect CSI MRC incl. overhead (200 trials)", worst >= 0.90, "; ".join(parts), ">= 0.90", 1800)


def test_c11_determinism(verdict, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert cli.main(["run", "--preset", "paper-defaults", "--seed", "0", "--out", str(out)]) == cli.EXIT_OK
    meta_same = (tmp_path / "a.csv.meta.json").read_bytes() == (tmp_path / "b.csv.meta.json").read_bytes()
    same = a.read_bytes() == b.read_bytes() and meta_same
    verdict(11, "byte-identical paper-defaults reruns", same, "identical" if same else "differ", "byte equality", 600)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
