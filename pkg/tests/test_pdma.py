import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import genie_power
from lenspdma.channel import ScenarioConfig, effective_matrices
from lenspdma.codebook import beamsteering_codebook
from lenspdma.instances import on_grid_instance, random_instance
from lenspdma.lens_array import LensArrayConfig, UpaConfig
from lenspdma.pdma import (
    BeamformerSet,
    exhaustive_p1_oracle,
    mmse_design,
    mrc_design,
    select_antennas,
    sinr_eq21,
)


def instance(k, l, seed, m_rf=8, upa=None, mu_delay=None):
    sc = ScenarioConfig() if mu_delay is None else ScenarioConfig(max_delay_s=mu_delay / 500e6)
    d = random_instance(k, l, seed, upa=upa, scenario=sc)
    return d, effective_matrices(d, select_antennas(genie_power(d), m_rf))


class TestSelect:
    def test_top_set(self):
        p = np.array([0.1, 5.0, 3.0, 0.2, 4.0])
        assert select_antennas(p, 3).tolist() == [1, 2, 4]

    def test_ties_prefer_lower_position(self):
        assert select_antennas(np.array([1.0, 2.0, 2.0, 2.0]), 2).tolist() == [1, 2]

    def test_all(self):
        assert select_antennas(np.ones(317), 317).tolist() == list(range(317))

    def test_range(self):
        with pytest.raises(ValueError):
            select_antennas(np.ones(3), 4)

    @pytest.mark.parametrize("m_rf", [3, 4, 10])
    def test_on_grid_focus_included(self, m_rf):
        d = on_grid_instance(1, 3, seed=m_rf)
        focus = {int(np.flatnonzero(d.beta[0, l])[0]) for l in range(3)}
        assert focus <= set(select_antennas(genie_power(d), m_rf).tolist())


class TestMrc:
    def test_rank_one(self, codebook):
        rng = np.random.default_rng(1)
        h = rng.standard_normal((1, 16)) + 1j * rng.standard_normal((1, 16))
        bf = mrc_design([h], codebook)
        i = bf.v_index[0]
        assert i == np.argmax(np.abs(h @ codebook.vectors.T) ** 2)
        assert abs(bf.u[0][0]) == pytest.approx(1.0)

    def test_on_grid_aod(self, codebook, upa):
        from lenspdma.lens_array import upa_response

        target = 37
        h = 2.0 * upa_response(upa, *codebook.angles[target]).conj()[None, :]
        assert mrc_design([h], codebook).v_index[0] == target

    def test_matches_exhaustive(self, codebook):
        rng = np.random.default_rng(5)
        for _ in range(100):
            rows = rng.integers(1, 6)
            g = rng.standard_normal((rows, 16)) + 1j * rng.standard_normal((rows, 16))
            best = max(range(256), key=lambda i: (np.linalg.norm(g @ codebook[i]) ** 2, -i))
            bf = mrc_design([g], codebook)
            assert bf.v_index[0] == best
            gv = g @ codebook[best]
            np.testing.assert_allclose(bf.u[0], gv / np.linalg.norm(gv))

    def test_empty_user_silent(self, codebook):
        bf = mrc_design([np.zeros((0, 16)), np.ones((2, 16))], codebook)
        assert bf.empty.tolist() == [True, False]
        assert bf.u[0] is None and bf.v_index[0] == -1 and not bf.v[0].any()

    def test_empty_user_zero_rate(self, codebook):
        d = on_grid_instance(2, 1, seed=0)
        eff = effective_matrices(d, select_antennas(genie_power(d), 1))
        bf = mrc_design(eff, codebook)
        rep = sinr_eq21(eff, bf, 1.0, 1.0)
        assert bf.empty.sum() == 1
        assert rep.rate[bf.empty][0] == 0.0


class TestMmse:
    def test_separated_is_mrc(self, codebook):
        d = on_grid_instance(2, 2, seed=4)
        eff = effective_matrices(d, select_antennas(genie_power(d), 4))
        mm = mmse_design(eff, 2.0, 0.5, codebook)
        mr = mrc_design(eff, codebook)
        for k in range(2):
            g0v = eff.g0(k) @ mm.v[k]
            assert abs(np.vdot(mm.u[k], g0v / np.linalg.norm(g0v))) == pytest.approx(1.0)
            assert mm.design_sinr[k] == pytest.approx(2.0 * np.linalg.norm(g0v) ** 2 / 0.5)
            assert mm.v_index[k] == mr.v_index[k]

    def test_scalar_channel(self):
        lens = LensArrayConfig(1, 1, 0.0, 0.01)
        upa = UpaConfig(1, 1)
        cb = beamsteering_codebook(upa, 1)
        d = random_instance(1, 1, seed=0, lens=lens, upa=upa)
        eff = effective_matrices(d, [0])
        g = d.h[0, 0, 0, 0]
        bf = mmse_design(eff, 3.0, 0.7, cb)
        assert bf.design_sinr[0] == pytest.approx(3.0 * abs(g) ** 2 / 0.7)

    def test_design_sinr_matches_evaluated_sinr(self):
        upa = UpaConfig(2, 2)
        cb = beamsteering_codebook(upa, 16)
        for seed in range(10):
            _, eff = instance(2, 2, seed, m_rf=6, upa=upa, mu_delay=3)
            assert eff.mu <= 3 and eff.n_selected == 6 and eff.n_ms == 4
            bf = mmse_design(eff, [1.0, 3.0], 0.5, cb)
            rep = sinr_eq21(eff, bf, [1.0, 3.0], 0.5)
            np.testing.assert_allclose(rep.sinr, bf.design_sinr, rtol=1e-9)

    def test_unit_norm(self, small_codebook):
        _, eff = instance(3, 3, 1, m_rf=12)
        bf = mmse_design(eff, 1.0, 1.0, small_codebook)
        for u in bf.u:
            assert np.linalg.norm(u) == pytest.approx(1.0)

    def test_monotone_in_antennas(self, small_codebook):
        d = random_instance(3, 3, seed=8)
        order = np.argsort(-genie_power(d), kind="stable")
        sinr_prev = None
        v = None
        for m in (4, 8, 16, 32):
            eff = effective_matrices(d, np.sort(order[:m]))
            bf = mmse_design(eff, 1.0, 1.0, small_codebook)
            if v is None:
                v = bf.v_index.copy()
            # hold the codewords fixed to isolate the combiner
            fixed = BeamformerSet("mmse", v, small_codebook.vectors[v], [], [], bf.empty)
            from lenspdma.pdma import _coupling

            sinr = []
            for k in range(3):
                A, owner, des = _coupling(eff, k, fixed.v)
                dvec = A[:, des]
                interf = np.delete(A, des, axis=1)
                cov = interf @ interf.conj().T + np.eye(eff.n_selected)
                sinr.append(np.real(np.vdot(dvec, np.linalg.solve(cov, dvec))))
            if sinr_prev is not None:
                assert np.all(np.array(sinr) >= np.array(sinr_prev) - 1e-9)
            sinr_prev = sinr

    def test_requires_noise(self, small_codebook):
        _, eff = instance(1, 2, 0)
        with pytest.raises(ValueError):
            mmse_design(eff, 1.0, 0.0, small_codebook)

    def test_ill_conditioned_warning(self, small_codebook):
        _, eff = instance(3, 3, 2, m_rf=20)
        with pytest.warns(UserWarning, match="ill-conditioned"):
            mmse_design(eff, 1e13, 1e-3, small_codebook)


class TestSinr:
    def test_no_interference(self, codebook):
        d = on_grid_instance(3, 1, seed=2)
        eff = effective_matrices(d, select_antennas(genie_power(d), 3))
        bf = mrc_design(eff, codebook)
        rep = sinr_eq21(eff, bf, 2.0, 0.1)
        for k in range(3):
            u = bf.padded(k, 3)
            assert rep.sinr[k] == pytest.approx(2.0 * abs(np.vdot(u, eff.g0(k) @ bf.v[k])) ** 2 / 0.1)

    def test_large_noise_limit(self, small_codebook):
        _, eff = instance(3, 3, 3, m_rf=15)
        bf = mrc_design(eff, small_codebook)
        big = 1e9
        rep = sinr_eq21(eff, bf, 1.0, big)
        for k in range(3):
            snr = abs(np.vdot(bf.padded(k, 15), eff.g0(k) @ bf.v[k])) ** 2 / big
            assert rep.sinr[k] / snr == pytest.approx(1.0, rel=1e-6)

    def test_rate_is_log(self, small_codebook):
        _, eff = instance(2, 2, 4)
        rep = sinr_eq21(eff, mrc_design(eff, small_codebook), 1.0, 1.0)
        np.testing.assert_array_equal(rep.rate, np.log2(1 + rep.sinr))
        assert rep.sum_rate == pytest.approx(rep.rate.sum())

    def test_dimension_mismatch(self, small_codebook):
        _, eff = instance(2, 2, 4)
        bf = mrc_design(eff, small_codebook)
        _, eff3 = instance(3, 2, 4)
        with pytest.raises(ValueError):
            sinr_eq21(eff3, bf, 1.0, 1.0)
        bf.support[0] = np.array([99])
        bf.u[0] = np.ones(1)
        with pytest.raises(ValueError):
            sinr_eq21(eff, bf, 1.0, 1.0)

    @given(st.floats(0.1, 10.0))
    def test_scale_equivariance(self, c):
        cb = beamsteering_codebook(UpaConfig(), 64)
        d = random_instance(2, 2, seed=6)
        sel = select_antennas(genie_power(d), 8)
        eff = effective_matrices(d, sel)
        bf = mrc_design(eff, cb)
        scaled = dataclasses.replace(eff, rows=c * eff.rows)
        bf2 = mrc_design(scaled, cb)
        assert bf2.v_index.tolist() == bf.v_index.tolist()
        a = sinr_eq21(eff, bf, 1.0, 1.0).sinr
        b = sinr_eq21(scaled, bf, 1.0, c**2).sinr
        np.testing.assert_allclose(a, b, rtol=1e-9)


class TestExhaustive:
    cb8 = beamsteering_codebook(UpaConfig(2, 2), 8, shape=(2, 4))

    def test_single_user_matches_design(self):
        # with one path there is no ISI, so the numerator argmax is optimal
        for seed in range(10):
            _, eff = instance(1, 1, seed, m_rf=5, upa=UpaConfig(2, 2))
            _, best = exhaustive_p1_oracle(eff, 1.0, 1.0, self.cb8)
            design = sinr_eq21(eff, mmse_design(eff, 1.0, 1.0, self.cb8), 1.0, 1.0).sum_rate
            assert best == pytest.approx(design, rel=1e-9)

    def test_dominates(self):
        for seed in range(20):
            _, eff = instance(2, 2, seed, m_rf=6, upa=UpaConfig(2, 2))
            _, best = exhaustive_p1_oracle(eff, 10.0, 1.0, self.cb8)
            design = sinr_eq21(eff, mmse_design(eff, 10.0, 1.0, self.cb8), 10.0, 1.0).sum_rate
            assert best >= design - 1e-9

    def test_separated_identical(self):
        for seed in range(5):
            d = on_grid_instance(2, 2, seed, upa=UpaConfig(2, 2))
            eff = effective_matrices(d, select_antennas(genie_power(d), 4))
            oracle, best = exhaustive_p1_oracle(eff, 10.0, 1.0, self.cb8)
            design = mmse_design(eff, 10.0, 1.0, self.cb8)
            assert oracle.v_index.tolist() == design.v_index.tolist()
            assert best == pytest.approx(sinr_eq21(eff, design, 10.0, 1.0).sum_rate, rel=1e-12)

    def test_size_limit(self, codebook):
        _, eff = instance(3, 1, 0)
        with pytest.raises(ValueError):
            exhaustive_p1_oracle(eff, 1.0, 1.0, codebook)
