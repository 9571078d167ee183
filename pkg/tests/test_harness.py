import json
import math

import numpy as np
import pytest

from mdgs.entropy import EstimatorConfig
from mdgs.harness import (
    ENTROPY_POWER, FILE_ENTROPY_TOLERANCE, SourceSpec, batch_means, dumps, highres_acceptance,
    run_experiment, sweep_dominant_face, trend_non_increasing,
)
from mdgs.harness import test_channel_covariance as channel_covariance
from mdgs.region import DistortionTriple, split_params, sum_rate, vertices
from mdgs.region import test_channel_params as channel_params

RUN = DistortionTriple(1.0, 0.1, 0.1, 0.05)
N = 200_000


@pytest.mark.parametrize("family", ["gaussian", "uniform", "laplacian"])
@pytest.mark.parametrize("var", [1.0, 3.5])
def test_source_variance(family, var):
    x = SourceSpec(family, var, seed=4).raw(200_000)
    assert np.var(x) == pytest.approx(var, rel=0.01)
    u, mean, scale = SourceSpec(family, var, seed=4).sample(10)
    assert mean == 0.0 and scale == pytest.approx(math.sqrt(var))


def test_entropy_power_below_variance():
    assert ENTROPY_POWER["gaussian"] == 1.0
    assert ENTROPY_POWER["uniform"] == pytest.approx(0.7025980, abs=1e-6)
    for fam in ("uniform", "laplacian"):
        assert SourceSpec(fam).entropy_power() < 1.0
    # closed forms of the unit-variance densities
    assert SourceSpec("uniform").entropy_bits() == pytest.approx(math.log2(2 * math.sqrt(3)))
    assert SourceSpec("laplacian").entropy_bits() == pytest.approx(
        math.log2(2 * math.e / math.sqrt(2)))


def test_file_source(tmp_path):
    rng = np.random.default_rng(0)
    data = 3.0 + 2.0 * rng.uniform(-1, 1, 200_000)
    path = tmp_path / "src.f64"
    data.astype("<f8").tofile(path)
    src = SourceSpec.parse(f"file:{path}")
    u, mean, scale = src.sample(200_000)
    assert mean == pytest.approx(3.0, abs=0.01)
    assert np.var(u) == pytest.approx(1.0, abs=1e-12)
    assert src.entropy_bits(u) == pytest.approx(SourceSpec("uniform").entropy_bits(),
                                                abs=FILE_ENTROPY_TOLERANCE)
    with pytest.raises(ValueError, match="holds"):
        src.raw(300_000)


def test_source_errors(tmp_path):
    with pytest.raises(ValueError):
        SourceSpec("cauchy")
    with pytest.raises(ValueError):
        SourceSpec("gaussian", variance=0.0)
    with pytest.raises(ValueError):
        SourceSpec("file")
    path = tmp_path / "bad.f64"
    np.array([0.0, np.nan]).astype("<f8").tofile(path)
    with pytest.raises(ValueError, match="non-finite"):
        SourceSpec.parse(f"file:{path}").raw(2)


def test_batch_means():
    x = np.random.default_rng(1).standard_normal(100_000)
    m, se = batch_means(x)
    assert m == pytest.approx(x.mean())
    assert se == pytest.approx(1 / math.sqrt(x.size), rel=0.5)
    with pytest.raises(ValueError):
        batch_means(np.ones(5))


@pytest.mark.parametrize("names", [("x", "u1", "u2"), ("x", "u1", "u2", "u2p", "delta")])
def test_channel_covariance_matches_params(names):
    p = split_params(RUN, "balanced")
    k = channel_covariance(p, names)
    assert k[0, 0] == 1.0
    # E(X - U1)(X - U2) is the error correlation
    e = k[0, 0] - k[0, 1] - k[0, 2] + k[1, 2]
    assert e == pytest.approx(p.t0 - math.sqrt(p.t1 * p.t2), abs=1e-12)
    assert np.all(np.linalg.eigvalsh(k) > -1e-12)
    with pytest.raises(ValueError):
        channel_covariance(channel_params(RUN), ("x", "u2p"))


def test_run_experiment_report():
    rep = run_experiment(SourceSpec(), RUN, "balanced", "splitting", N, seed=2,
                         config=EstimatorConfig(min_samples=N))
    assert rep.passed, rep.checks
    for block in (rep.distortions, {k: v for k, v in rep.rates.items() if k != "stages"}):
        for v in block.values():
            assert "tolerance" in v
    assert rep.theory["sum_rate"] == pytest.approx(sum_rate(RUN))
    doc = json.loads(rep.to_json())
    assert doc["passed"] is True and doc["fingerprint"] == rep.fingerprint


def test_report_is_deterministic_and_parallel_invariant():
    cfg = EstimatorConfig(min_samples=N)
    a = run_experiment(SourceSpec(), RUN, "balanced", "splitting", N, 3, config=cfg)
    b = run_experiment(SourceSpec(), RUN, "balanced", "splitting", N, 3, config=cfg)
    c = run_experiment(SourceSpec(), RUN, "balanced", "splitting", N, 3, config=cfg,
                       chunk=30_001, workers=4)
    assert a.to_json() == b.to_json()
    assert a.to_json() == c.to_json()
    d = run_experiment(SourceSpec(), RUN, "balanced", "splitting", N, 4, config=cfg)
    assert d.fingerprint != a.fingerprint


def test_scale_is_restored():
    d = DistortionTriple(4.0, 0.4, 0.4, 0.2)
    rep = run_experiment(SourceSpec("gaussian", 4.0), d, "vertex1", "successive", N, 1,
                         config=EstimatorConfig(min_samples=N))
    assert rep.distortions["D1"]["target"] == pytest.approx(0.4)
    assert rep.distortions["D3"]["value"] == pytest.approx(0.2, rel=0.03)
    assert rep.config["source"]["scale"] == pytest.approx(2.0)


def test_refusals():
    with pytest.raises(ValueError, match="at least 100000"):
        run_experiment(SourceSpec(), RUN, n_samples=1000)
    with pytest.raises(ValueError, match="vertex1 or vertex2"):
        run_experiment(SourceSpec(), RUN, "balanced", "successive", N)
    with pytest.raises(ValueError, match="outside the dominant face"):
        run_experiment(SourceSpec(), RUN, 5.0, "splitting", N)


def test_uniform_source_stays_inside_gaussian_budget():
    cfg = EstimatorConfig(min_samples=N)
    g = run_experiment(SourceSpec(), RUN, "balanced", "splitting", N, 5, config=cfg)
    u = run_experiment(SourceSpec("uniform"), RUN, "balanced", "splitting", N, 5, config=cfg)
    assert u.passed, u.checks
    assert u.rates["R1"]["value"] <= g.theory["budget_R1"]
    assert u.rates["R2"]["value"] <= g.theory["budget_R2"]
    assert u.theory["entropy_power"] == pytest.approx(ENTROPY_POWER["uniform"])


def test_harmonic_bound_runs_separate_codec():
    d = DistortionTriple(1.0, 0.1, 0.1, 1 / 19)
    rep = run_experiment(SourceSpec(), d, "balanced", "separate", N, 6,
                         config=EstimatorConfig(min_samples=N))
    assert rep.checks["error_correlation"]
    assert rep.passed, rep.checks


def test_sweep_endpoints_are_vertices():
    rows = sweep_dominant_face(RUN, 2)
    v1, v2 = vertices(RUN)
    assert (rows[0]["R1G"], rows[0]["R2G"]) == pytest.approx((v2.r1, v2.r2), abs=1e-12)
    assert (rows[-1]["R1G"], rows[-1]["R2G"]) == pytest.approx((v1.r1, v1.r2), abs=1e-12)
    assert rows[0]["sigma2_T3"] == 0.0 and math.isinf(rows[-1]["sigma2_T3"])


def test_sweep_sum_rate_constant_and_monotone():
    rows = sweep_dominant_face(RUN, 9)
    assert len(rows) == 9
    for r in rows:
        assert r["sum"] == pytest.approx(3.32392906016611, abs=1e-10)
    r1 = [r["R1G"] for r in rows]
    assert all(b < a for a, b in zip(r1, r1[1:]))
    t3 = [r["sigma2_T3"] for r in rows]
    assert all(b > a for a, b in zip(t3, t3[1:]))
    with pytest.raises(ValueError):
        sweep_dominant_face(RUN, 1)


def test_measured_sweep():
    rows = sweep_dominant_face(RUN, 3, measure=True, n_samples=N)
    red = 0.5 * math.log2(2 * math.pi * math.e / 12)
    for r in rows:
        measured = r["R1_measured"] + r["R2_measured"]
        assert r["sum"] < measured <= r["sum"] + 3 * red + 0.05


def test_highres_rows():
    rows = highres_acceptance(RUN, (1.0, 0.25), n_samples=N)
    assert [r["scale"] for r in rows] == [1.0, 0.25]
    for r in rows:
        assert r["phi_minus_psi"] == pytest.approx(0.0, abs=1e-12)
        assert r["excess"] == pytest.approx(r["measured_sum"] - r["outer_sum"])


def test_trend_and_dumps():
    assert trend_non_increasing([3, 2, 2, 1])
    assert not trend_non_increasing([1, 2])
    assert trend_non_increasing([1, 1.01], slack=0.02)
    assert json.loads(dumps({"a": math.inf, "b": np.float64(1.5), "c": (1, 2)})) == {
        "a": "inf", "b": 1.5, "c": [1, 2]}


@pytest.mark.parametrize("family", ["gaussian", "laplacian"])
def test_distortion_errors_are_calibrated(family):
    """Across seeds the standardized distortion errors look like t(19) draws."""
    cfg = EstimatorConfig(min_samples=N)
    z = {k: [] for k in ("D1", "D2", "D3")}
    for s in range(30):
        rep = run_experiment(SourceSpec(family, seed=500 + s), RUN, "balanced", "splitting", N,
                             seed=700 + s, config=cfg)
        for k, d in rep.distortions.items():
            z[k].append((d["value"] - d["target"]) / (d["tolerance"] / 3))
    for v in z.values():
        # t(19) has standard deviation 1.056
        assert abs(np.mean(v)) <= 3 * 1.056 / math.sqrt(len(v))
        assert 0.6 <= np.std(v) <= 1.5
