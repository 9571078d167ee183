import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from mdgs.lattice import (
    G_LIMIT, G_OPT, DitheredLattice, quantize, reconstruct, redundancy_bits, shape,
    step_for_noise_variance,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_redundancy_constants():
    assert redundancy_bits(G_OPT[1]) == pytest.approx(0.2546143, abs=1e-7)
    assert G_OPT[2] == pytest.approx(0.0801875, abs=1e-7)
    assert redundancy_bits(G_LIMIT) == pytest.approx(0.0, abs=1e-15)


def test_dither_is_reproducible_and_keyed():
    lat = DitheredLattice(1.0, dither_seed=42, stream_id=3)
    a = lat.dither(0, 1000)
    assert np.array_equal(a, lat.dither(0, 1000))
    other = DitheredLattice(1.0, dither_seed=42, stream_id=4).dither(0, 1000)
    assert not np.array_equal(a, other)
    assert np.all(a > -0.5) and np.all(a <= 0.5)


@given(st.integers(0, 5000), st.integers(1, 200), st.integers(1, 4))
def test_dither_blocks_can_be_generated_out_of_order(t0, count, n):
    lat = DitheredLattice(2.0, dimension=n, dither_seed=7, stream_id=1)
    whole = lat.uniforms(0, t0 + count)
    assert np.array_equal(lat.uniforms(t0, count), whole[t0:])


@given(st.lists(finite, min_size=1, max_size=50), st.integers(0, 1000),
       st.floats(1e-3, 100.0))
def test_error_lies_in_the_cell(xs, t, step):
    lat = DitheredLattice(step, dither_seed=1)
    x = np.array(xs)
    q = quantize(lat, x, t)
    err = q.w - x
    assert np.all(np.abs(err) <= step / 2 * (1 + 1e-9) + 1e-9 * np.abs(x))
    assert np.allclose(reconstruct(lat, q.index, t), q.w)


@given(st.floats(-100, 100, allow_nan=False), st.floats(0.01, 10.0), st.floats(0.1, 5.0))
def test_shaped_quantizer_scales(x, step, a):
    lat = DitheredLattice(step, dither_seed=3)
    q0 = quantize(lat, np.array([x / a]))
    q1 = quantize(shape(lat, a), np.array([x]))
    assert q1.index[0] == q0.index[0]
    assert q1.w[0] == pytest.approx(a * q0.w[0], rel=1e-12, abs=1e-12)
    assert shape(lat, a).second_moment == pytest.approx(a * a * step * step / 12)


def test_cells_are_half_open_on_the_left():
    lat = DitheredLattice(1.0)
    x = np.array([0.5, -0.5, 1.5, 0.49999])
    k = quantize(lat, x, dither=0.0).index
    # ((k-1/2), (k+1/2)]: the upper boundary belongs to the lower cell
    assert k.tolist() == [0, -1, 1, 0]


def test_ecdq_error_is_uniform_and_uncorrelated():
    rng = np.random.default_rng(0)
    x = rng.laplace(size=200_000) * 3.0
    lat = DitheredLattice(0.7, dither_seed=11)
    err = quantize(lat, x).w - x
    assert stats.kstest(err, stats.uniform(-0.35, 0.7).cdf).pvalue > 0.01
    assert abs(np.corrcoef(x, err)[0, 1]) < 0.01
    assert np.var(err) == pytest.approx(0.49 / 12, rel=0.02)


def test_vector_lattice_axes_are_independent():
    lat = DitheredLattice(1.0, dimension=3, dither_seed=5)
    x = np.random.default_rng(1).normal(size=(100_000, 3))
    err = quantize(lat, x).w - x
    c = np.corrcoef(err.T)
    assert np.max(np.abs(c - np.eye(3))) < 0.02
    assert lat.cell_volume == 1.0


def test_step_for_noise_variance():
    assert step_for_noise_variance(0.0) is None
    assert step_for_noise_variance(1.0 / 12.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        step_for_noise_variance(-1.0)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        DitheredLattice(0.0)
    with pytest.raises(ValueError):
        DitheredLattice(1.0, dimension=0)
    with pytest.raises(ValueError):
        DitheredLattice(1.0, stream_id=-1)
    lat = DitheredLattice(1.0)
    with pytest.raises(ValueError, match="sample 2"):
        quantize(lat, np.array([0.0, 1.0, np.nan]))
    with pytest.raises(OverflowError):
        quantize(lat, np.array([1e12]))
    with pytest.raises(ValueError):
        quantize(DitheredLattice(1.0, dimension=2), np.zeros((4, 3)))
    with pytest.raises(ValueError):
        lat.uniforms(-1, 3)
