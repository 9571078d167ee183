import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdgs.entropy import conditional_entropy, dither_bins, entropy, joint_context


def test_uniform_symbols():
    s = np.repeat(np.arange(8), 1000)
    assert entropy(s, correction=False) == pytest.approx(3.0)
    assert entropy(s) == pytest.approx(3.0 + 7 / (2 * s.size) / math.log(2))


def test_conditioning_removes_determined_part():
    rng = np.random.default_rng(0)
    c = rng.integers(0, 4, 100_000)
    s = c * 10 + rng.integers(0, 2, c.size)
    assert conditional_entropy(s, c, correction=False) == pytest.approx(1.0, abs=0.01)
    assert conditional_entropy(c, c) == 0.0


def test_miller_madow_reduces_bias():
    rng = np.random.default_rng(1)
    s = rng.integers(0, 64, 2000)
    raw = entropy(s, correction=False)
    corrected = entropy(s)
    assert abs(corrected - 6.0) < abs(raw - 6.0)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=200))
def test_entropy_bounds(xs):
    s = np.array(xs)
    h = entropy(s, correction=False)
    assert -1e-12 <= h <= math.log2(len(set(xs))) + 1e-12


def test_dither_bins_and_contexts():
    u = np.array([0.0, 0.4999, 0.5, 0.99999999])
    assert dither_bins(u, 2).tolist() == [0, 0, 1, 1]
    ctx = joint_context(np.array([0, 0, 1, 1]), np.array([5, 6, 5, 6]))
    assert len(set(ctx.tolist())) == 4


def test_errors():
    with pytest.raises(ValueError):
        conditional_entropy([1, 2], [1])
    with pytest.raises(ValueError):
        entropy(np.array([], dtype=int))
