"""Two-description quantizers built from dithered lattices.

A :class:`CodecTopology` is an ordered list of stages.  Each stage forms a
linear combination of the source ``x`` and earlier stage outputs, quantizes
it with its own dither stream (or passes it through when its innovation
variance is zero) and belongs to one of the two descriptions.  Two linear
combinations of stage outputs give the auxiliary signals ``u1`` and ``u2``;
the side decoders scale them and the central decoder mixes them.

Four wirings are provided:

``successive``
    ``W1 = Q1(X)``, ``W2 = Q2(a1 X + a2 W1)`` (vertex 1, or the mirror image
    for vertex 2).
``splitting``
    ``W2' = Q1(X)``, ``W1 = Q2(b*1 X + b*2 W2')``,
    ``Delta = Q3(b*3 X + b*4 W1 + b*5 W2')`` and ``W2 = Delta + b*6 W2'``
    recombined at the decoder.  Reaches every point of the dominant face.
``separate``
    Two independent quantizers of ``X``; only at the harmonic bound.
``reuse``
    The splitting wiring run through one base quantizer with pre/post gains
    folded into the taps.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .entropy import EstimatorConfig, conditional_entropy, dither_bins, joint_context
from .lattice import DitheredLattice, quantize, step_for_noise_variance
from .region import GaussMDParams, test_channel_params

KINDS = ("successive", "splitting", "separate", "reuse")


class ChannelFailure(LookupError):
    """Raised when a decoder needs a description that was not received."""


@dataclass(frozen=True)
class Stage:
    """One quantization stage.

    Attributes
    ----------
    name : str
        Name of the signal this stage produces.
    lattice : DitheredLattice or None
        ``None`` marks a pass-through stage (zero innovation).
    taps : tuple of (str, float)
        Input as a linear combination of ``'x'`` and earlier stage names.
    description : int
        Description (1 or 2) carrying the stage's indices.
    noise_variance : float
        Second moment of the stage's quantization noise.
    """

    name: str
    lattice: DitheredLattice | None
    taps: tuple
    description: int
    noise_variance: float


@dataclass(frozen=True)
class CodecTopology:
    """A wired two-description encoder/decoder.

    ``u1`` and ``u2`` are linear combinations of stage outputs; the decoders
    output ``gains[0] * u1``, ``gains[1] * u2`` and
    ``gains[2] * u1 + gains[3] * u2``.
    """

    kind: str
    stages: tuple
    u1: tuple
    u2: tuple
    gains: tuple
    params: GaussMDParams = field(repr=False)
    seed: int = 0
    dimension: int = 1
    label: str = ""

    def stage(self, name: str) -> Stage:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def fingerprint(self) -> str:
        """Short hash identifying the wiring, steps, gains and seed."""
        parts = [self.kind, self.label, repr(self.seed), repr(self.dimension)]
        for s in self.stages:
            step = None if s.lattice is None else (s.lattice.step, s.lattice.gain, s.lattice.stream_id)
            parts.append(repr((s.name, step, s.taps, s.description)))
        parts.append(repr((self.u1, self.u2, self.gains)))
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


def _lattice(noise_variance: float, seed: int, stream_id: int, n: int) -> DitheredLattice | None:
    step = step_for_noise_variance(noise_variance)
    if step is None:
        return None
    return DitheredLattice(step=step, dimension=n, dither_seed=seed, stream_id=stream_id)


def _stage(name, variance, taps, description, seed, stream_id, n) -> Stage:
    taps = tuple((k, float(c)) for k, c in taps if c != 0.0)
    return Stage(name, _lattice(variance, seed, stream_id, n), taps, description, variance)


def _gains(p: GaussMDParams) -> tuple:
    return (p.alpha1, p.alpha2, p.beta1, p.beta2)


def build(kind: str, params: GaussMDParams, seed: int = 0, *, n: int = 1,
          vertex: int = 1, stream_base: int = 0) -> CodecTopology:
    """Wire a codec from closed-form parameters.

    Parameters
    ----------
    kind : {'successive', 'splitting', 'separate', 'reuse'}
    params : GaussMDParams
        From :func:`mdgs.region.test_channel_params`; ``splitting`` and
        ``reuse`` need splitting coefficients attached.
    seed : int
        Dither key shared by encoder and decoder.
    n : int
        Lattice dimension (Z^n, independent axes).
    vertex : {1, 2}
        Ordering for ``successive``: vertex 2 quantizes description 2 first.
    stream_base : int
        Offset added to every dither stream id.

    Raises
    ------
    ValueError
        Unknown kind, missing splitting coefficients, a trivial triple, or a
        ``separate`` request off the harmonic bound.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown codec kind {kind!r}; expected one of {KINDS}")
    if params.d.trivial:
        raise ValueError("central distortion equals the variance: nothing to encode")
    if kind == "successive":
        return _build_successive(params, seed, n, vertex, stream_base)
    if kind == "separate":
        return _build_separate(params, seed, n, stream_base)
    if params.splitting is None:
        raise ValueError(f"{kind} codec needs splitting coefficients (use params.with_split)")
    topo = _build_splitting(params, seed, n, stream_base)
    if kind == "reuse":
        topo = _to_reuse(topo)
    return topo


def _build_successive(params, seed, n, vertex, base) -> CodecTopology:
    if vertex not in (1, 2):
        raise ValueError(f"vertex must be 1 or 2, got {vertex!r}")
    if vertex == 1:
        sc = params.successive
        stages = (
            _stage("w1", sc.eb2, (("x", 1.0),), 1, seed, base + 1, n),
            _stage("w2", sc.eb3, (("x", sc.a1), ("w1", sc.a2)), 2, seed, base + 2, n),
        )
    else:
        sc = test_channel_params(params.d.swapped()).successive
        stages = (
            _stage("w2", sc.eb2, (("x", 1.0),), 2, seed, base + 1, n),
            _stage("w1", sc.eb3, (("x", sc.a1), ("w2", sc.a2)), 1, seed, base + 2, n),
        )
    return CodecTopology("successive", stages, (("w1", 1.0),), (("w2", 1.0),),
                         _gains(params), params, seed, n, f"vertex{vertex}")


def _build_separate(params, seed, n, base) -> CodecTopology:
    d = params.d
    if abs(d.d3 - d.harmonic) > 1e-10 * d.var:
        raise ValueError("separate quantization reaches the central target only at the "
                         f"harmonic bound d3={d.harmonic!r}; got d3={d.d3!r}")
    stages = (
        _stage("w1", params.t0 + params.t1, (("x", 1.0),), 1, seed, base + 1, n),
        _stage("w2", params.t0 + params.t2, (("x", 1.0),), 2, seed, base + 2, n),
    )
    return CodecTopology("separate", stages, (("w1", 1.0),), (("w2", 1.0),),
                         _gains(params), params, seed, n, "harmonic")


def _build_splitting(params, seed, n, base) -> CodecTopology:
    sp = params.splitting
    b1, b2, b3, b4, b5, b6 = sp.bstar
    if sp.eb2_tilde is None:
        stages = (
            _stage("w1", sp.eb3_tilde, (("x", b1),), 1, seed, base + 2, n),
            _stage("delta", sp.ebbar4, (("x", b3), ("w1", b4)), 2, seed, base + 3, n),
        )
        u2 = (("delta", 1.0),)
        label = "t3=inf"
    else:
        stages = (
            _stage("w2p", sp.eb2_tilde, (("x", 1.0),), 2, seed, base + 1, n),
            _stage("w1", sp.eb3_tilde, (("x", b1), ("w2p", b2)), 1, seed, base + 2, n),
            _stage("delta", sp.ebbar4, (("x", b3), ("w1", b4), ("w2p", b5)), 2, seed, base + 3, n),
        )
        u2 = (("delta", 1.0), ("w2p", b6))
        label = f"t3={sp.t3!r}"
    return CodecTopology("splitting", stages, (("w1", 1.0),), u2, _gains(params),
                         params, seed, n, label)


def _to_reuse(split: CodecTopology) -> CodecTopology:
    """Fold per-stage quantizers into one base quantizer with gains.

    Stage ``i`` quantizes with the base lattice after a prefilter ``1/a_i``
    and its output ``V_i`` is kept in base units, so ``W_i = a_i V_i``.  The
    gains are ``a_i = sigma_i / sigma_1`` (pass-through stages keep ``a_i =
    1``) and every tap, combination and decoder gain absorbs them.
    """
    quantized = [s for s in split.stages if s.lattice is not None]
    base = quantized[0].lattice
    sigma0 = math.sqrt(quantized[0].noise_variance)
    gain = {s.name: (math.sqrt(s.noise_variance) / sigma0 if s.lattice is not None else 1.0)
            for s in split.stages}
    gain["x"] = 1.0
    rename = {s.name: f"v_{s.name}" for s in split.stages}
    stages = []
    for s in split.stages:
        a = gain[s.name]
        taps = tuple((rename.get(k, k), c * gain[k] / a) for k, c in s.taps)
        lat = None if s.lattice is None else replace(base, stream_id=s.lattice.stream_id)
        var = s.noise_variance / a**2 if s.lattice is not None else s.noise_variance
        stages.append(Stage(rename[s.name], lat, taps, s.description, var))

    def fold(combo):
        lead = combo[0][0]
        scale = gain[lead]
        return tuple((rename[k], c * gain[k] / scale) for k, c in combo), scale

    u1, a_u1 = fold(split.u1)
    u2, a_u2 = fold(split.u2)
    al1, al2, be1, be2 = split.gains
    gains = (al1 * a_u1, al2 * a_u2, be1 * a_u1, be2 * a_u2)
    return CodecTopology("reuse", tuple(stages), u1, u2, gains, split.params,
                         split.seed, split.dimension, split.label)


@dataclass(frozen=True)
class DescriptionStreams:
    """Index streams of both descriptions.

    Attributes
    ----------
    indices : dict
        Stage name to index array, for quantized stages only.
    description : dict
        Stage name to the description (1 or 2) carrying it.
    stream_ids : dict
        Stage name to dither stream id.
    n_samples : int
        Source samples encoded.
    t0 : int
        Time index of the first block.
    received : tuple of bool
        Which descriptions reached the decoder.
    forced_dither : float or None
        Test hook: constant effective dither used instead of the keyed stream.
    """

    indices: dict
    description: dict
    stream_ids: dict
    n_samples: int
    t0: int = 0
    received: tuple = (True, True)
    forced_dither: float | None = None

    def drop(self, channel: int) -> "DescriptionStreams":
        """Copy with one description lost."""
        rec = list(self.received)
        rec[channel - 1] = False
        return replace(self, received=tuple(rec))

    def streams_of(self, channel: int) -> dict:
        """Index streams belonging to one description, in stage order."""
        return {k: v for k, v in self.indices.items() if self.description[k] == channel}


def _blocks(x: np.ndarray, n: int) -> np.ndarray:
    if x.size % n:
        raise ValueError(f"sample count {x.size} is not a multiple of the lattice dimension {n}")
    return x.reshape(-1, n) if n > 1 else x


def _combine(taps, signals: dict) -> np.ndarray:
    out = None
    for k, c in taps:
        term = c * signals[k]
        out = term if out is None else out + term
    return out


def _run_encoder(topo: CodecTopology, x, t0: int, forced_dither) -> tuple[dict, dict]:
    x = np.asarray(x, dtype=np.float64).ravel()
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise ValueError(f"non-finite source sample at index {int(bad[0])}: {x[bad[0]]!r}")
    signals = {"x": _blocks(x, topo.dimension)}
    indices = {}
    for s in topo.stages:
        inp = _combine(s.taps, signals) if s.taps else np.zeros_like(signals["x"])
        if s.lattice is None:
            signals[s.name] = inp
            continue
        dither = None if forced_dither is None else forced_dither * s.lattice.gain
        q = quantize(s.lattice, inp, t0, dither=dither)
        signals[s.name] = q.w
        indices[s.name] = q.index
    return signals, indices


def encode(topology: CodecTopology, x, t0: int = 0, *, forced_dither: float | None = None
           ) -> DescriptionStreams:
    """Encode a block of source samples into two descriptions.

    ``forced_dither`` is a test hook replacing every stage's dither by the
    given constant in base-lattice units scaled by the stage gain; ``0.0``
    gives plain undithered quantization.
    """
    _, indices = _run_encoder(topology, x, t0, forced_dither)
    n = np.asarray(x).size
    return DescriptionStreams(
        indices=indices,
        description={s.name: s.description for s in topology.stages},
        stream_ids={s.name: s.lattice.stream_id for s in topology.stages if s.lattice is not None},
        n_samples=n, t0=t0, forced_dither=forced_dither)


def _decode_signals(streams: DescriptionStreams, topo: CodecTopology, channels) -> dict:
    signals = {}
    for s in topo.stages:
        if s.description not in channels:
            continue
        if s.lattice is not None:
            k = streams.indices[s.name].astype(np.float64)
            if streams.forced_dither is None:
                n = topo.dimension
                z = s.lattice.dither(streams.t0, k.shape[0] if n > 1 else k.size)
                z = z if n > 1 else z.ravel()
            else:
                z = np.full(k.shape, streams.forced_dither)
            signals[s.name] = s.lattice.gain * (k * s.lattice.step - z)
        else:
            if any(name == "x" for name, _ in s.taps):
                raise ValueError(f"pass-through stage {s.name!r} depends on the source")
            missing = [name for name, _ in s.taps if name not in signals]
            if missing:
                raise ChannelFailure(f"stage {s.name!r} needs {missing}")
            signals[s.name] = (_combine(s.taps, signals) if s.taps
                               else np.zeros(streams.n_samples // topo.dimension
                                             if topo.dimension > 1 else streams.n_samples))
    return signals


def _check(streams: DescriptionStreams, channels) -> None:
    for c in channels:
        if not streams.received[c - 1]:
            raise ChannelFailure(f"description {c} was not received")


def _u(combo, signals) -> np.ndarray:
    return _combine(combo, signals)


def _flat(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).ravel()


def decode_side1(streams: DescriptionStreams, topology: CodecTopology) -> np.ndarray:
    """Reconstruction from description 1 alone."""
    _check(streams, (1,))
    sig = _decode_signals(streams, topology, (1,))
    return _flat(topology.gains[0] * _u(topology.u1, sig))


def decode_side2(streams: DescriptionStreams, topology: CodecTopology) -> np.ndarray:
    """Reconstruction from description 2 alone."""
    _check(streams, (2,))
    sig = _decode_signals(streams, topology, (2,))
    return _flat(topology.gains[1] * _u(topology.u2, sig))


def decode_central(streams: DescriptionStreams, topology: CodecTopology) -> np.ndarray:
    """Reconstruction from both descriptions."""
    _check(streams, (1, 2))
    sig = _decode_signals(streams, topology, (1, 2))
    g = topology.gains
    return _flat(g[2] * _u(topology.u1, sig) + g[3] * _u(topology.u2, sig))


def decode_available(streams: DescriptionStreams, topology: CodecTopology) -> dict:
    """All reconstructions the received descriptions allow.

    Keys are ``'side1'``, ``'side2'`` and ``'central'``.
    """
    out = {}
    for key, fn in (("side1", decode_side1), ("side2", decode_side2),
                    ("central", decode_central)):
        try:
            out[key] = fn(streams, topology)
        except ChannelFailure:
            pass
    return out


def stage_signals(topology: CodecTopology, x, t0: int = 0) -> dict:
    """Every internal signal of the encoder (for covariance checks)."""
    signals, _ = _run_encoder(topology, x, t0, None)
    return {k: _flat(v) for k, v in signals.items()}


@dataclass(frozen=True)
class RateEstimate:
    """Estimated description rates in bits per source sample.

    ``stage`` holds each quantized stage's ``H(index | dither bin)``.
    ``r2_joint`` estimates description 2 as one stream by conditioning its
    second sub-stream on the first; it equals ``r2`` when description 2 has
    one stage.
    """

    stage: dict
    r1: float
    r2: float
    r2_joint: float
    tolerance: float
    n_samples: int


def measure_rate(streams: DescriptionStreams, topology: CodecTopology,
                 config: EstimatorConfig = EstimatorConfig()) -> RateEstimate:
    """Plug-in conditional-entropy rates of both descriptions.

    Raises
    ------
    ValueError
        With fewer than ``config.min_samples`` source samples.
    """
    if streams.n_samples < config.min_samples:
        raise ValueError(f"rate estimation needs at least {config.min_samples} samples, "
                         f"got {streams.n_samples}")
    n = topology.dimension
    stage_rates = {}
    bins = {}
    for s in topology.stages:
        if s.lattice is None:
            stage_rates[s.name] = 0.0
            continue
        k = streams.indices[s.name].reshape(-1, n)
        count = k.shape[0]
        if streams.forced_dither is None:
            b = dither_bins(s.lattice.uniforms(streams.t0, count), config.bins)
        else:
            b = np.zeros((count, n), dtype=np.int64)
        bins[s.name] = b
        # per-axis entropies, averaged over the block dimension
        stage_rates[s.name] = float(np.mean([
            conditional_entropy(k[:, j], b[:, j], config.correction) for j in range(n)]))
    r1 = sum(v for k, v in stage_rates.items() if streams.description[k] == 1)
    r2 = sum(v for k, v in stage_rates.items() if streams.description[k] == 2)
    d2 = [s.name for s in topology.stages if s.description == 2 and s.lattice is not None]
    r2_joint = r2
    if len(d2) == 2:
        first, second = d2
        k1 = streams.indices[first].reshape(-1, n)
        k2 = streams.indices[second].reshape(-1, n)
        r2_joint = float(np.mean([
            conditional_entropy(k1[:, j], bins[first][:, j], config.correction)
            + conditional_entropy(k2[:, j], joint_context(k1[:, j], bins[second][:, j]),
                                  config.correction)
            for j in range(n)]))
    return RateEstimate(stage_rates, r1, r2, r2_joint, config.tolerance, streams.n_samples)


@dataclass(frozen=True)
class SimBatch:
    """Samples, reconstructions, rates and distortions of one coded block."""

    x: np.ndarray
    xhat1: np.ndarray
    xhat2: np.ndarray
    xhat3: np.ndarray
    rates: RateEstimate | None
    distortions: tuple


def simulate(topology: CodecTopology, x, t0: int = 0,
             config: EstimatorConfig | None = EstimatorConfig()) -> SimBatch:
    """Encode, decode with all three decoders and measure rates.

    Pass ``config=None`` to skip rate estimation (e.g. short blocks).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    streams = encode(topology, x, t0)
    xh1 = decode_side1(streams, topology)
    xh2 = decode_side2(streams, topology)
    xh3 = decode_central(streams, topology)
    dist = tuple(float(np.mean((x - xh) ** 2)) for xh in (xh1, xh2, xh3))
    rates = None if config is None else measure_rate(streams, topology, config)
    return SimBatch(x, xh1, xh2, xh3, rates, dist)
