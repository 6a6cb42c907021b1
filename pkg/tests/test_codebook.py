import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lenspdma.codebook import (
    beamsteering_codebook,
    omni_beamformer,
    response_ripple,
    training_matrix,
)
from lenspdma.lens_array import UpaConfig, upa_response


def test_default_codebook(codebook):
    assert codebook.vectors.shape == (256, 16)
    np.testing.assert_allclose(np.linalg.norm(codebook.vectors, axis=1), 1.0)
    np.testing.assert_allclose(np.abs(codebook.vectors), 0.25)
    assert codebook.feedback_bits(5) == 40


def test_broadside_codeword(codebook, upa):
    i = int(np.flatnonzero(np.all(codebook.angles == 0, axis=1))[0])
    assert i == 8 * 16 + 8
    np.testing.assert_allclose(codebook[i], upa_response(upa, 0.0, 0.0))


def test_each_codeword_peaks_at_own_angle(upa):
    cb = beamsteering_codebook(upa, 64)
    el = np.linspace(-math.pi / 2, math.pi / 2, 61)
    te, ta = np.meshgrid(el, el, indexing="ij")
    grid = np.concatenate([np.stack([te.ravel(), ta.ravel()], 1), cb.angles])
    b = upa_response(upa, grid[:, 0], grid[:, 1])
    for i in range(cb.n_cb):
        own = abs(np.vdot(upa_response(upa, *cb.angles[i]), cb[i]))
        assert own >= np.abs(b.conj() @ cb[i]).max() - 1e-12


def test_rectangular_shape(upa):
    cb = beamsteering_codebook(upa, 8, shape=(2, 4), el_range=math.pi / 3)
    assert cb.n_cb == 8 and len(cb) == 8
    assert cb.angles[:, 0].min() == pytest.approx(-math.pi / 3)


@pytest.mark.parametrize("n,shape", [(10, None), (8, (3, 3))])
def test_unfactorable(upa, n, shape):
    with pytest.raises(ValueError):
        beamsteering_codebook(upa, n, shape=shape)


@given(st.floats(0, 2 * math.pi))
def test_selection_phase_invariant(phase):
    rng = np.random.default_rng(3)
    g = rng.standard_normal((5, 16)) + 1j * rng.standard_normal((5, 16))
    cb = beamsteering_codebook(UpaConfig(), 64)
    a = np.sum(np.abs(g @ cb.vectors.T) ** 2, axis=0)
    b = np.sum(np.abs(g @ (np.exp(1j * phase) * cb.vectors).T) ** 2, axis=0)
    assert np.argmax(a) == np.argmax(b)


class TestOmni:
    def test_single_element(self):
        o = omni_beamformer(UpaConfig(1, 1))
        np.testing.assert_array_equal(o.vector, [1.0])
        assert o.gain == pytest.approx(1.0) and o.ripple == pytest.approx(1.0)

    def test_default_ripple_bound(self, upa):
        o = omni_beamformer(upa)
        assert np.linalg.norm(o.vector) == pytest.approx(1.0)
        np.testing.assert_allclose(np.abs(o.vector), 0.25)
        assert o.ripple <= 8.0
        assert 0.2 < o.gain < 0.3

    def test_tuned_to_sixty_degrees(self, upa):
        wide = omni_beamformer(upa)
        narrow = omni_beamformer(upa, math.radians(60), math.radians(60))
        assert narrow.ripple < 3.0 < wide.ripple
        ratio, mean = response_ripple(upa, narrow.vector, math.radians(60), math.radians(60))
        assert (ratio, mean) == (narrow.ripple, narrow.gain)

    def test_beats_single_steering_vector(self, upa):
        steer = upa_response(upa, 0.0, 0.0)
        assert omni_beamformer(upa).ripple < response_ripple(upa, steer, math.pi / 2, math.pi / 2)[0]


class TestTrainingMatrix:
    def test_two(self):
        f = training_matrix(2) * math.sqrt(2)
        np.testing.assert_allclose(f, [[1, 1], [1, -1]], atol=1e-15)

    @pytest.mark.parametrize("m", [1, 4, 16])
    def test_unitary(self, m):
        f = training_matrix(m)
        np.testing.assert_allclose(f.conj().T @ f, np.eye(m), atol=1e-12)
        np.testing.assert_allclose(np.abs(f), 1 / math.sqrt(m))
        assert abs(np.linalg.det(f)) == pytest.approx(1.0)

    def test_inverse_recovers(self):
        rng = np.random.default_rng(0)
        g = rng.standard_normal((7, 16)) + 1j * rng.standard_normal((7, 16))
        f = training_matrix(16)
        np.testing.assert_allclose(np.linalg.solve(f.T, (g @ f).T).T, g, atol=1e-10)

    def test_invalid(self):
        with pytest.raises(ValueError):
            training_matrix(0)
