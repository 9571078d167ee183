import math

import numpy as np
import pytest

from mdgs import codec
from mdgs.entropy import EstimatorConfig
from mdgs.region import DistortionTriple, split_params
from mdgs.region import test_channel_params as channel_params

RUN = DistortionTriple(1.0, 0.1, 0.1, 0.05)
N = 200_000


@pytest.fixture(scope="module")
def x():
    return np.random.default_rng(12).standard_normal(N)


def _topo(kind, split="balanced", **kw):
    if kind in ("successive", "separate"):
        d = RUN if kind == "successive" else DistortionTriple(1.0, 0.1, 0.1, 1 / 19)
        return codec.build(kind, channel_params(d), 3, **kw)
    return codec.build(kind, split_params(RUN, split), 3, **kw)


@pytest.mark.parametrize("kind,split", [("successive", None), ("splitting", "balanced"),
                                        ("splitting", "vertex1"), ("splitting", "vertex2"),
                                        ("reuse", "balanced"), ("separate", None)])
def test_distortions_hit_targets(x, kind, split):
    topo = _topo(kind, split)
    batch = codec.simulate(topo, x, config=None)
    d3 = RUN.d3 if kind != "separate" else 1 / 19
    for got, want in zip(batch.distortions, (0.1, 0.1, d3)):
        assert got == pytest.approx(want, rel=0.03)


def test_vertex2_mirrors_vertex1(x):
    t1 = codec.build("successive", channel_params(RUN), 3, vertex=1)
    t2 = codec.build("successive", channel_params(RUN), 3, vertex=2)
    assert [s.name for s in t2.stages] == ["w2", "w1"]
    b = codec.simulate(t2, x, config=None)
    assert b.distortions == pytest.approx(codec.simulate(t1, x, config=None).distortions,
                                          rel=0.03)


def test_reuse_produces_the_same_indices_as_splitting(x):
    split = _topo("splitting")
    reuse = codec._to_reuse(split)
    a = codec.encode(split, x)
    b = codec.encode(reuse, x)
    for name in a.indices:
        assert np.array_equal(a.indices[name], b.indices["v_" + name])
    assert np.allclose(codec.decode_central(a, split), codec.decode_central(b, reuse),
                       atol=1e-9)
    steps = {s.lattice.step for s in reuse.stages if s.lattice is not None}
    assert len(steps) == 1


def test_decoding_is_deterministic_and_keyed(x):
    topo = _topo("splitting")
    s1 = codec.encode(topo, x[:1000])
    s2 = codec.encode(topo, x[:1000])
    for k in s1.indices:
        assert np.array_equal(s1.indices[k], s2.indices[k])
    assert topo.fingerprint == _topo("splitting").fingerprint
    assert topo.fingerprint != codec.build("splitting", split_params(RUN, "balanced"), 4
                                           ).fingerprint


def test_blocks_decode_at_any_offset(x):
    topo = _topo("splitting")
    whole = codec.decode_central(codec.encode(topo, x[:2000]), topo)
    tail = codec.decode_central(codec.encode(topo, x[1000:2000], t0=1000), topo)
    assert np.array_equal(whole[1000:], tail)


def test_lost_description(x):
    topo = _topo("splitting")
    streams = codec.encode(topo, x[:1000]).drop(2)
    out = codec.decode_available(streams, topo)
    assert set(out) == {"side1"}
    with pytest.raises(codec.ChannelFailure):
        codec.decode_central(streams, topo)
    with pytest.raises(codec.ChannelFailure):
        codec.decode_side2(streams, topo)
    assert set(streams.streams_of(2)) == {"w2p", "delta"}


def test_forced_zero_dither_is_plain_rounding():
    topo = _topo("successive")
    xs = np.array([0.0, 0.3, -2.0])
    st = codec.encode(topo, xs, forced_dither=0.0)
    step = topo.stage("w1").lattice.step
    assert st.indices["w1"].tolist() == np.ceil(xs / step - 0.5).astype(int).tolist()


def test_rate_estimates_near_budgets(x):
    topo = _topo("successive")
    streams = codec.encode(topo, x)
    rates = codec.measure_rate(streams, topo, EstimatorConfig(min_samples=N))
    params = topo.params
    red = 0.5 * math.log2(2 * math.pi * math.e / 12)
    assert rates.r1 == pytest.approx(0.5 * math.log2(1 / 0.1) + red, abs=0.03)
    with pytest.raises(ValueError, match="at least"):
        codec.measure_rate(codec.encode(topo, x[:10]), topo)
    assert params.d == RUN


def test_joint_rate_of_two_stage_description(x):
    topo = _topo("splitting")
    rates = codec.measure_rate(codec.encode(topo, x), topo, EstimatorConfig(min_samples=N))
    assert rates.r2_joint <= rates.r2 + 0.01
    assert set(rates.stage) == {"w2p", "w1", "delta"}


def test_vector_codec(x):
    topo = _topo("splitting", n=2)
    batch = codec.simulate(topo, x, config=None)
    assert batch.distortions == pytest.approx((0.1, 0.1, 0.05), rel=0.03)
    with pytest.raises(ValueError, match="multiple"):
        codec.encode(topo, x[:3])


def test_build_errors():
    with pytest.raises(ValueError, match="unknown"):
        codec.build("other", channel_params(RUN))
    with pytest.raises(ValueError, match="splitting coefficients"):
        codec.build("splitting", channel_params(RUN))
    with pytest.raises(ValueError, match="harmonic"):
        codec.build("separate", channel_params(RUN))
    with pytest.raises(ValueError):
        codec.build("successive", channel_params(RUN), vertex=3)
    topo = _topo("splitting")
    with pytest.raises(ValueError, match="non-finite"):
        codec.encode(topo, np.array([0.0, np.inf]))
