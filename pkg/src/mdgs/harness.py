"""Sources, Monte Carlo experiments and theory-versus-measurement reports."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import codec
from .entropy import EstimatorConfig
from .lattice import G_LIMIT, G_OPT, redundancy_bits
from .region import (
    DistortionTriple, GaussMDParams, clamp_degenerate, low_branch_suggestion, outer_bound_phi,
    psi, split_params, split_sigma_T3, sum_rate, test_channel_params, vertices,
)

FAMILIES = ("gaussian", "uniform", "laplacian", "file")

#: Entropy power of each unit-variance family.
ENTROPY_POWER = {
    "gaussian": 1.0,
    "uniform": 6.0 / (math.pi * math.e),
    "laplacian": math.e / math.pi,
}

#: Stated accuracy (bits) of the spacing estimate of a file source's entropy.
FILE_ENTROPY_TOLERANCE = 0.05

#: Slack added to the rate budgets for the entropy estimator (bits).
RATE_SLACK_ONE_STAGE = 0.02
RATE_SLACK_TWO_STAGE = 0.03

#: Absolute tolerance on second-moment entries at unit variance.
COVARIANCE_TOLERANCE = 0.01

BATCHES = 20


@dataclass(frozen=True)
class SourceSpec:
    """A memoryless source.

    Parameters
    ----------
    family : {'gaussian', 'uniform', 'laplacian', 'file'}
    variance : float
        Variance of synthetic sources; ignored for files, whose empirical
        variance is used.
    seed : int
        Seed of the sample generator.
    path : str, optional
        Raw little-endian float64 file for the ``file`` family.
    """

    family: str = "gaussian"
    variance: float = 1.0
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown source family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "file" and not self.path:
            raise ValueError("file source needs a path")
        if not (math.isfinite(self.variance) and self.variance > 0):
            raise ValueError(f"variance must be positive, got {self.variance!r}")

    @classmethod
    def parse(cls, text: str, seed: int = 0, variance: float = 1.0) -> "SourceSpec":
        """``'gaussian'``, ``'uniform'``, ``'laplacian'`` or ``'file:PATH'``."""
        if text.startswith("file:"):
            return cls("file", variance, seed, text[5:])
        return cls(text, variance, seed)

    def raw(self, n: int) -> np.ndarray:
        """``n`` samples at the source's own scale."""
        if self.family == "file":
            data = np.fromfile(self.path, dtype="<f8")
            if data.size < n:
                raise ValueError(f"{self.path} holds {data.size} samples, {n} requested")
            data = data[:n].astype(np.float64)
            if not np.all(np.isfinite(data)):
                raise ValueError(f"{self.path} contains non-finite samples")
            return data
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x5EED]))
        sigma = math.sqrt(self.variance)
        if self.family == "gaussian":
            return sigma * rng.standard_normal(n)
        if self.family == "uniform":
            h = math.sqrt(3.0) * sigma
            return rng.uniform(-h, h, n)
        return rng.laplace(0.0, sigma / math.sqrt(2.0), n)

    def sample(self, n: int) -> tuple[np.ndarray, float, float]:
        """Unit-variance samples with the mean and scale that were removed.

        Synthetic families are scaled by their nominal standard deviation;
        file sources by their empirical mean and standard deviation.
        """
        x = self.raw(n)
        if self.family == "file":
            mean, scale = float(x.mean()), float(x.std())
            if scale <= 0:
                raise ValueError("file source has zero variance")
        else:
            mean, scale = 0.0, math.sqrt(self.variance)
        return (x - mean) / scale, mean, scale

    def entropy_power(self, samples: np.ndarray | None = None) -> float:
        """Entropy power of the unit-variance source, ``2^(2h) / (2 pi e)``.

        File sources estimate ``h`` from ``samples`` with the Vasicek
        spacing estimator (stated accuracy ``FILE_ENTROPY_TOLERANCE`` bits).
        """
        if self.family != "file":
            return ENTROPY_POWER[self.family]
        if samples is None:
            samples, _, _ = self.sample(np.fromfile(self.path, dtype="<f8").size)
        h_nats = float(stats.differential_entropy(samples, method="vasicek"))
        return min(math.exp(2.0 * h_nats) / (2.0 * math.pi * math.e), 1.0)

    def entropy_bits(self, samples: np.ndarray | None = None) -> float:
        """Differential entropy of the unit-variance source in bits."""
        return 0.5 * math.log2(2.0 * math.pi * math.e * self.entropy_power(samples))


def batch_means(values: np.ndarray, batches: int = BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error of a sample sequence."""
    values = np.asarray(values, dtype=np.float64).ravel()
    usable = values.size - values.size % batches
    if usable == 0:
        raise ValueError(f"need at least {batches} values")
    means = values[:usable].reshape(batches, -1).mean(axis=1)
    return float(values.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def test_channel_covariance(params: GaussMDParams, names=("x", "u1", "u2")) -> np.ndarray:
    """Covariance of Gaussian test-channel variables.

    Names: ``'x'``, ``'u1'``, ``'u2'``, ``'u2p'`` (``U2 + T3``) and
    ``'delta'`` (``U2 - b*6 U2'``).  ``'u2p'`` and ``'delta'`` need a finite
    splitting variance.
    """
    v, t0, t1, t2 = params.var, params.t0, params.t1, params.t2
    s1, s2 = math.sqrt(t1), math.sqrt(t2)
    # basis: X, T0, T1, T2, T3 with T1, T2 correlated
    basis_cov = np.zeros((5, 5))
    basis_cov[0, 0], basis_cov[1, 1], basis_cov[2, 2], basis_cov[3, 3] = v, t0, t1, t2
    basis_cov[2, 3] = basis_cov[3, 2] = -s1 * s2
    rows = {"x": [1, 0, 0, 0, 0], "u1": [1, 1, 1, 0, 0], "u2": [1, 1, 0, 1, 0]}
    if any(n in names for n in ("u2p", "delta")):
        sp = params.splitting
        if sp is None or math.isinf(sp.t3):
            raise ValueError("u2p and delta need a finite splitting variance")
        basis_cov[4, 4] = sp.t3
        b6 = sp.bstar[5]
        rows["u2p"] = [1, 1, 0, 1, 1]
        rows["delta"] = [1 - b6, 1 - b6, 0, 1 - b6, -b6]
    a = np.array([rows[n] for n in names], dtype=np.float64)
    return a @ basis_cov @ a.T


def _signal_sets(topo: codec.CodecTopology, signals: dict, xh1, xh2):
    """Measured variables matched to test-channel names."""
    p = topo.params
    out = {"x": signals["x"], "u1": xh1 / p.alpha1, "u2": xh2 / p.alpha2}
    if topo.kind == "splitting" and "w2p" in signals:
        out["u2p"] = signals["w2p"]
        out["delta"] = signals["delta"]
    return out


@dataclass(frozen=True)
class Measured:
    """A measured value and its tolerance."""

    value: float
    tolerance: float

    def as_dict(self) -> dict:
        return {"value": self.value, "tolerance": self.tolerance}


@dataclass(frozen=True)
class SimReport:
    """Result of :func:`run_experiment`; every number carries a tolerance.

    Distortions are in the source's original scale; rates in bits/sample.
    """

    fingerprint: str
    config: dict
    rates: dict
    distortions: dict
    theory: dict
    covariance: dict
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_dict(self) -> dict:
        return {"fingerprint": self.fingerprint, "config": self.config, "rates": self.rates,
                "distortions": self.distortions, "theory": self.theory,
                "covariance": self.covariance, "checks": self.checks, "passed": self.passed}

    def to_json(self) -> str:
        return dumps(self.as_dict())


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, infinities as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2)


def resolve_triple(d: DistortionTriple) -> tuple[DistortionTriple, str]:
    """Apply the band clamps; a low-branch triple gets tightened side targets."""
    d2, fired = clamp_degenerate(d)
    if fired == "low":
        d2 = low_branch_suggestion(d)
    return d2, fired


def build_topology(kind: str, d: DistortionTriple, split, seed: int, n: int = 1
                   ) -> codec.CodecTopology:
    """Codec for a normalized triple and split selector.

    ``successive`` takes ``'vertex1'`` or ``'vertex2'``; ``separate``
    ignores the selector (it exists only at the harmonic bound).
    """
    if kind == "successive":
        if split not in ("vertex1", "vertex2"):
            raise ValueError("successive quantization reaches only the vertices; "
                             f"use vertex1 or vertex2, got {split!r}")
        return codec.build(kind, test_channel_params(d), seed, n=n, vertex=int(split[-1]))
    if kind == "separate":
        return codec.build(kind, test_channel_params(d), seed, n=n)
    return codec.build(kind, split_params(d, split), seed, n=n)


def _encode_chunks(topo, x, chunk: int, workers: int):
    n = topo.dimension
    chunk -= chunk % n
    starts = list(range(0, x.size, chunk))

    def one(s):
        xs = x[s:s + chunk]
        t0 = s // n
        streams = codec.encode(topo, xs, t0)
        sig = codec.stage_signals(topo, xs, t0)
        return streams, sig, codec.decode_side1(streams, topo), codec.decode_side2(streams, topo), \
            codec.decode_central(streams, topo)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(one, starts))
    else:
        parts = [one(s) for s in starts]
    first = parts[0][0]
    axis0 = (lambda arrs: np.concatenate(arrs, axis=0))
    indices = {k: axis0([p[0].indices[k] for p in parts]) for k in first.indices}
    streams = replace(first, indices=indices, n_samples=x.size, t0=0)
    signals = {k: axis0([p[1][k] for p in parts]) for k in parts[0][1]}
    xh = [axis0([p[i] for p in parts]) for i in (2, 3, 4)]
    return streams, signals, xh


def run_experiment(source: SourceSpec, d: DistortionTriple, split="balanced",
                   kind: str = "splitting", n_samples: int = 1_000_000, seed: int = 0, *,
                   n: int = 1, config: EstimatorConfig = EstimatorConfig(),
                   chunk: int = 1 << 18, workers: int = 1) -> SimReport:
    """Encode, decode and measure one configuration.

    Parameters
    ----------
    source : SourceSpec
    d : DistortionTriple
        Targets at the source's scale; ``d.var`` is the source variance.
    split : {'vertex1', 'vertex2', 'balanced'} or float
        Rate split (a float is the target rate of description 1).
    kind : {'successive', 'splitting', 'separate', 'reuse'}
    n_samples : int
        At least ``config.min_samples``.
    seed : int
        Dither key.
    chunk, workers : int
        Samples per encoding task and number of threads; the report does not
        depend on either because dither streams are keyed by time index.

    Raises
    ------
    ValueError
        Too few samples, an infeasible split or an invalid kind.
    """
    if n_samples < config.min_samples:
        raise ValueError(f"rate estimation needs at least {config.min_samples} samples, "
                         f"got {n_samples}")
    var = d.var
    unit = DistortionTriple(1.0, d.d1 / var, d.d2 / var, d.d3 / var)
    unit, clamp = resolve_triple(unit)
    topo = build_topology(kind, unit, split, seed, n)
    x, mean, scale = source.sample(n_samples)
    streams, signals, (xh1, xh2, xh3) = _encode_chunks(topo, x, chunk, workers)
    rates = codec.measure_rate(streams, topo, config)

    # distortions at the original scale
    dist = {}
    checks = {}
    targets = (unit.d1 * var, unit.d2 * var, unit.d3 * var)
    for name, xh, target in zip(("D1", "D2", "D3"), (xh1, xh2, xh3), targets):
        m, se = batch_means((x - xh) ** 2 * var)
        dist[name] = {"value": m, "tolerance": 3.0 * se, "target": target}
        checks[f"distortion_{name}"] = abs(m - target) <= 3.0 * se

    p = topo.params
    sp = p.splitting
    v1, v2 = vertices(unit)
    r1g, r2g = (sp.r1, sp.r2) if sp is not None else (
        (v1.r1, v1.r2) if kind != "successive" or split == "vertex1" else (v2.r1, v2.r2))
    if kind == "separate":
        r1g, r2g = 0.5 * math.log2(1.0 / unit.d1), 0.5 * math.log2(1.0 / unit.d2)
    red = redundancy_bits(G_OPT[1])
    k1 = sum(1 for s in topo.stages if s.description == 1 and s.lattice is not None)
    k2 = sum(1 for s in topo.stages if s.description == 2 and s.lattice is not None)
    slack2 = RATE_SLACK_TWO_STAGE if k2 > 1 else RATE_SLACK_ONE_STAGE
    budget1 = r1g + k1 * red + RATE_SLACK_ONE_STAGE
    budget2 = r2g + k2 * red + slack2
    checks["rate_budget_R1"] = rates.r1 <= budget1
    checks["rate_budget_R2"] = rates.r2 <= budget2

    p_x = source.entropy_power(x) if source.family == "file" else source.entropy_power()
    outer = outer_bound_phi(unit, p_x) if max(unit.d1, unit.d2) <= p_x else None

    names = tuple(_signal_sets(topo, signals, xh1, xh2))
    measured = _signal_sets(topo, signals, xh1, xh2)
    mat = np.stack([measured[k] for k in names])
    emp = mat @ mat.T / mat.shape[1]
    theo = test_channel_covariance(p, names)
    delta = float(np.max(np.abs(emp - theo)))
    err1, err2 = measured["u1"] - measured["x"], measured["u2"] - measured["x"]
    err_corr = float(np.corrcoef(err1, err2)[0, 1])
    checks["covariance"] = delta <= COVARIANCE_TOLERANCE
    if abs(unit.d3 - unit.harmonic) <= 1e-10:
        checks["error_correlation"] = abs(err_corr) <= 0.01

    config_dict = {
        "source": {"family": source.family, "variance": var, "seed": source.seed,
                   "path": source.path, "mean_removed": mean, "scale": scale},
        "targets": {"var": d.var, "d1": d.d1, "d2": d.d2, "d3": d.d3},
        "clamp": clamp, "split": split, "kind": kind, "n_samples": n_samples, "seed": seed,
        "dimension": n, "estimator": {"bins": config.bins, "correction": config.correction,
                                      "tolerance": config.tolerance},
        "topology": topo.fingerprint,
    }
    fp = hashlib.sha256(dumps(config_dict).encode()).hexdigest()[:16]
    rate_dict = {
        "R1": Measured(rates.r1, config.tolerance).as_dict(),
        "R2": Measured(rates.r2, config.tolerance).as_dict(),
        "R2_joint": Measured(rates.r2_joint, config.tolerance).as_dict(),
        "stages": rates.stage,
        "sum": Measured(rates.r1 + rates.r2, 2 * config.tolerance).as_dict(),
    }
    theory = {
        "R1G": r1g, "R2G": r2g, "sum_rate": sum_rate(unit),
        "V1": [v1.r1, v1.r2], "V2": [v2.r1, v2.r2],
        "redundancy_per_stage": red, "redundancy_limit": redundancy_bits(G_LIMIT),
        "budget_R1": budget1, "budget_R2": budget2,
        "sigma2_T3": None if sp is None else sp.t3,
        "entropy_power": p_x,
        "outer_bound": None if outer is None else outer.as_dict(),
        "psi": psi(unit),
    }
    cov = {"names": list(names), "empirical": emp.tolist(), "theory": theo.tolist(),
           "max_abs_delta": delta, "tolerance": COVARIANCE_TOLERANCE,
           "error_correlation": err_corr}
    return SimReport(fp, config_dict, rate_dict, dist, theory, cov, checks)


def sweep_dominant_face(d: DistortionTriple, steps: int, *, measure: bool = False,
                        source: SourceSpec = SourceSpec(), kind: str = "splitting",
                        n_samples: int = 1_000_000, seed: int = 0) -> list[dict]:
    """Rate pairs along the dominant face on a uniform ``R1`` grid.

    Rows are ordered by increasing splitting variance, i.e. from vertex 2
    (``t3 = 0``) to vertex 1 (``t3 = inf``).
    """
    if steps < 2:
        raise ValueError("a sweep needs at least two steps")
    v1, v2 = vertices(d)
    grid = np.linspace(v2.r1, v1.r1, steps)
    total = sum_rate(d)
    rows = []
    for k, r1 in enumerate(grid):
        split = "vertex2" if k == 0 else "vertex1" if k == steps - 1 else float(r1)
        params = split_params(d, split)
        sp = params.splitting
        row = {"sigma2_T3": sp.t3, "R1G": sp.r1, "R2G": sp.r2, "sum": sp.r1 + sp.r2,
               "sum_rate": total}
        if measure:
            rep = run_experiment(source, d, split, kind, n_samples, seed)
            row["R1_measured"] = rep.rates["R1"]["value"]
            row["R2_measured"] = rep.rates["R2"]["value"]
        rows.append(row)
    return rows


def highres_acceptance(d: DistortionTriple, scales=(1.0, 0.25, 0.0625), *,
                       source: SourceSpec = SourceSpec(), split="balanced",
                       kind: str = "splitting", n_samples: int = 1_000_000,
                       seed: int = 0) -> list[dict]:
    """Measured sum rate against the outer bound as the distortions shrink.

    Each row holds the measured sum rate, the outer-bound sum rate, their
    difference (``excess``), the three-stage scalar budget
    ``1.5 log2(2 pi e / 12)`` and the excess left after subtracting it, plus
    the timeshared-vertex excess over the Gaussian sum rate with its
    two-stage budget.
    """
    red = redundancy_bits(G_OPT[1])
    rows = []
    for s in scales:
        ds = d.scaled(s)
        unit = DistortionTriple(1.0, ds.d1 / ds.var, ds.d2 / ds.var, ds.d3 / ds.var)
        rep = run_experiment(source, ds, split, kind, n_samples, seed)
        vert = run_experiment(source, ds, "vertex1", "successive", n_samples, seed)
        p_x = rep.theory["entropy_power"]
        outer = outer_bound_phi(unit, p_x)
        measured = rep.rates["sum"]["value"]
        vsum = vert.rates["sum"]["value"]
        rows.append({
            "scale": s, "measured_sum": measured, "outer_sum": outer.sum_min,
            "excess": measured - outer.sum_min, "budget": 3.0 * red,
            "excess_minus_budget": measured - outer.sum_min - 3.0 * red,
            "psi": psi(unit), "phi": outer.phi, "phi_minus_psi": outer.phi - psi(unit),
            "vertex_excess": vsum - sum_rate(unit), "vertex_budget": 2.0 * red,
        })
    return rows


def trend_non_increasing(values, slack: float = 0.0) -> bool:
    """True when every value is at most its predecessor plus ``slack``."""
    return all(b <= a + slack for a, b in zip(values, values[1:]))
