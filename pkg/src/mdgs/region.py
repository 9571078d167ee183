"""Closed-form quadratic Gaussian multiple-description region and coefficients.

The Gaussian test channel is ``U_i = X + T_0 + T_i`` with ``T_0`` independent
of the antipodally correlated pair ``(T_1, T_2)``, ``E T_1 T_2 = -s_1 s_2``
where ``s_i = sqrt(t_i)``.  Everything here is a function of the source
variance and the three target distortions.  Variances are written ``t0 .. t3``
for the noise variances of ``T_0 .. T_3``.  All rates are in bits per sample.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

BAND_TOL = 1e-12

_log2 = math.log2


def _half_log2(x: float) -> float:
    return 0.5 * _log2(x)


@dataclass(frozen=True)
class DistortionTriple:
    """Source variance and side/central distortion targets.

    Parameters
    ----------
    var : float
        Source variance.
    d1, d2 : float
        Side distortions.
    d3 : float
        Central distortion.
    """

    var: float
    d1: float
    d2: float
    d3: float

    def __post_init__(self):
        if not (math.isfinite(self.var) and self.var > 0):
            raise ValueError(f"source variance must be positive, got {self.var!r}")
        for name in ("d1", "d2", "d3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0 < v <= self.var):
                raise ValueError(f"{name} must lie in (0, var={self.var}], got {v!r}")

    @property
    def harmonic(self) -> float:
        """Upper end of the band, ``(1/d1 + 1/d2 - 1/var)^-1``."""
        return 1.0 / (1.0 / self.d1 + 1.0 / self.d2 - 1.0 / self.var)

    @property
    def lower(self) -> float:
        """Lower end of the band, ``d1 + d2 - var``."""
        return self.d1 + self.d2 - self.var

    @property
    def trivial(self) -> bool:
        """True when nothing has to be sent (``d3 == var``)."""
        return self.d3 == self.var

    def band_position(self) -> str:
        """``'low'``, ``'high'`` or ``'inside'`` relative to the band."""
        tol = BAND_TOL * self.var
        if self.d3 < self.lower - tol:
            return "low"
        if self.d3 > self.harmonic + tol:
            return "high"
        return "inside"

    def scaled(self, factor: float) -> "DistortionTriple":
        """Same variance with all three distortions multiplied by ``factor``."""
        return DistortionTriple(self.var, self.d1 * factor, self.d2 * factor, self.d3 * factor)

    def swapped(self) -> "DistortionTriple":
        """Exchange the roles of the two descriptions."""
        return DistortionTriple(self.var, self.d2, self.d1, self.d3)


@dataclass(frozen=True)
class RatePair:
    """Rates of the two descriptions with a tag naming how they arise."""

    r1: float
    r2: float
    tag: str

    @property
    def total(self) -> float:
        return self.r1 + self.r2


def clamp_degenerate(d: DistortionTriple) -> tuple[DistortionTriple, str]:
    """Bring ``d3`` into the non-degenerate band where possible.

    Returns
    -------
    (DistortionTriple, str)
        The possibly modified triple and which bound fired: ``'none'``,
        ``'high'`` (``d3`` lowered to the harmonic bound) or ``'low'`` (the
        triple is returned unchanged; see :func:`low_branch_suggestion`).
    """
    pos = d.band_position()
    if pos == "high":
        return replace(d, d3=min(d.harmonic, d.var)), "high"
    if pos == "low":
        return d, "low"
    return d, "none"


def low_branch_suggestion(d: DistortionTriple) -> DistortionTriple:
    """Tightened side targets with ``d1 + d2 = var + d3`` for a low-branch triple.

    When ``d3 < d1 + d2 - var`` the side constraints are slack.  Lowering them
    onto the band edge costs no rate; the excess is removed in proportion to
    ``d_i - d3`` so that both stay above ``d3``.
    """
    excess = d.d1 + d.d2 - d.var - d.d3
    if excess <= 0:
        return d
    w1 = (d.d1 - d.d3) / (d.d1 + d.d2 - 2.0 * d.d3)
    return DistortionTriple(d.var, d.d1 - excess * w1, d.d2 - excess * (1.0 - w1), d.d3)


def _require_band(d: DistortionTriple) -> None:
    pos = d.band_position()
    if pos != "inside":
        raise ValueError(
            f"distortions outside the non-degenerate band ({pos}): need "
            f"{d.lower:.12g} <= d3 <= {d.harmonic:.12g}, got d3={d.d3!r}")


def _excess_factor(p: float, d1: float, d2: float, d3: float) -> float:
    num = (p - d3) ** 2
    bracket = math.sqrt((p - d1) * (p - d2)) - math.sqrt(max(d1 - d3, 0.0) * max(d2 - d3, 0.0))
    return num / (num - bracket**2)


def psi(d: DistortionTriple) -> float:
    """Excess sum-rate factor of the Gaussian region (inside the band)."""
    _require_band(d)
    if d.trivial:
        return 1.0
    return _excess_factor(d.var, d.d1, d.d2, d.d3)


def sum_rate(d: DistortionTriple) -> float:
    """Minimum sum rate ``0.5 log2(var/d3) + 0.5 log2(psi)``."""
    return _half_log2(d.var / d.d3) + _half_log2(psi(d))


@dataclass(frozen=True)
class SuccessiveCoeffs:
    """Taps and innovation variances of two-stage successive quantization.

    Stage 1 quantizes ``X`` with noise variance ``eb2``; stage 2 quantizes
    ``a1 X + a2 W_1`` with noise variance ``eb3``.
    """

    a1: float
    a2: float
    eb2: float
    eb3: float


@dataclass(frozen=True)
class SplittingCoeffs:
    """Coefficients of successive quantization with quantization splitting.

    ``t3`` is the splitting variance; ``math.inf`` marks the vertex-1 limit,
    whose values are produced by their own limit expressions.  ``b`` holds
    ``b1 .. b8`` and ``bstar`` holds ``b*1 .. b*6``.  ``eb2_tilde`` is None
    when the coarse stage vanishes (``t3`` infinite).
    """

    t3: float
    b: tuple
    bstar: tuple
    eb2_tilde: float | None
    eb3_tilde: float
    ebbar2: float
    ebbar3: float
    ebbar4: float
    r1: float
    r2: float
    r21: float
    r22: float


@dataclass(frozen=True)
class GaussMDParams:
    """All closed-form quantities of the Gaussian test channel.

    Build with :func:`test_channel_params`; attach splitting coefficients with
    :meth:`with_split`.
    """

    d: DistortionTriple
    t0: float
    t1: float
    t2: float
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    successive: SuccessiveCoeffs
    splitting: SplittingCoeffs | None = None

    @property
    def var(self) -> float:
        return self.d.var

    @property
    def error_correlation(self) -> float:
        """``E (U_1 - X)(U_2 - X) = t0 - s1 s2``."""
        return self.t0 - math.sqrt(self.t1 * self.t2)

    @property
    def u1u2(self) -> float:
        """``E U_1 U_2 = var + t0 - s1 s2``."""
        return self.var + self.error_correlation

    def reconstructed_distortions(self) -> tuple[float, float, float]:
        """Distortions implied by the noise variances and decoder gains."""
        v = self.var
        d1 = v * (self.t0 + self.t1) / (v + self.t0 + self.t1)
        d2 = v * (self.t0 + self.t2) / (v + self.t0 + self.t2)
        d3 = v * (1.0 - self.beta1 - self.beta2)
        return d1, d2, d3

    def with_split(self, t3: float) -> "GaussMDParams":
        """Copy with splitting coefficients for splitting variance ``t3``."""
        return replace(self, splitting=splitting_coeffs(self, t3))

    def report(self) -> dict:
        """Every field keyed by its conventional symbol name, JSON-ready."""
        out = {
            "sigma2_X": self.var, "D1": self.d.d1, "D2": self.d.d2, "D3": self.d.d3,
            "sigma2_T0": self.t0, "sigma2_T1": self.t1, "sigma2_T2": self.t2,
            "alpha1": self.alpha1, "alpha2": self.alpha2,
            "beta1": self.beta1, "beta2": self.beta2,
            "a1": self.successive.a1, "a2": self.successive.a2,
            "EB2^2": self.successive.eb2, "EB3^2": self.successive.eb3,
            "error_correlation": self.error_correlation,
        }
        sp = self.splitting
        if sp is not None:
            out["sigma2_T3"] = "inf" if math.isinf(sp.t3) else sp.t3
            for i, v in enumerate(sp.b, 1):
                out[f"b{i}"] = v
            for i, v in enumerate(sp.bstar, 1):
                out[f"b*{i}"] = v
            out.update({
                "EB~2^2": "inf" if sp.eb2_tilde is None else sp.eb2_tilde,
                "EB~3^2": sp.eb3_tilde,
                "EB-2^2": sp.ebbar2, "EB-3^2": sp.ebbar3, "EB-4^2": sp.ebbar4,
                "R1G": sp.r1, "R2G": sp.r2, "R2,1G": sp.r21, "R2,2G": sp.r22,
            })
        return out


def test_channel_params(d: DistortionTriple) -> GaussMDParams:
    """Noise variances, decoder gains and successive coefficients.

    Raises
    ------
    ValueError
        Outside the band, or if a side distortion equals the variance while
        the central one does not (that description would carry nothing).
    """
    _require_band(d)
    v = d.var
    if d.trivial:
        inf = math.inf
        return GaussMDParams(d, inf, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                             SuccessiveCoeffs(1.0, 0.0, inf, inf))
    if d.d1 == v or d.d2 == v:
        raise ValueError("a side distortion equal to the source variance describes "
                         "a single-description problem; not supported")
    t0 = d.d3 * v / (v - d.d3)
    ts = []
    for di in (d.d1, d.d2):
        ti = di * v / (v - di) - t0
        if ti < -BAND_TOL * max(1.0, t0):
            raise ValueError(f"negative test-channel variance {ti!r}: band violation")
        ts.append(max(ti, 0.0))
    t1, t2 = ts
    s1, s2 = math.sqrt(t1), math.sqrt(t2)
    alpha1 = v / (v + t0 + t1)
    alpha2 = v / (v + t0 + t2)
    if s1 + s2 > 0:
        beta1 = v * s2 / ((s1 + s2) * (v + t0))
        beta2 = v * s1 / ((s1 + s2) * (v + t0))
    else:
        beta1 = beta2 = 0.5 * v / (v + t0)
    a1 = (t1 + s1 * s2) / (t0 + t1)
    a2 = (t0 - s1 * s2) / (t0 + t1)
    eb2 = t0 + t1
    eb3 = t0 * (s1 + s2) ** 2 / (t0 + t1)
    params = GaussMDParams(d, t0, t1, t2, alpha1, alpha2, beta1, beta2,
                           SuccessiveCoeffs(a1, a2, eb2, eb3))
    for got, want in zip(params.reconstructed_distortions(), (d.d1, d.d2, d.d3)):
        if abs(got - want) > 1e-12 * max(1.0, v):
            raise ArithmeticError(f"distortion round trip failed: {got!r} vs {want!r}")
    return params


def successive_coeffs(params: GaussMDParams) -> SuccessiveCoeffs:
    """``(a1, a2, E B_2^2, E B_3^2)`` for the vertex-1 ordering."""
    return params.successive


def vertices(d: DistortionTriple) -> tuple[RatePair, RatePair]:
    """The two corner points of the dominant face."""
    if d.trivial:
        return RatePair(0.0, 0.0, "V1"), RatePair(0.0, 0.0, "V2")
    p = psi(d)
    v1 = RatePair(_half_log2(d.var / d.d1), _half_log2(d.d1 / d.d3) + _half_log2(p), "V1")
    v2 = RatePair(_half_log2(d.d2 / d.d3) + _half_log2(p), _half_log2(d.var / d.d2), "V2")
    return v1, v2


def face_is_degenerate(d: DistortionTriple, tol: float = 1e-12) -> bool:
    """True when both vertices coincide, so every split gives the same rates."""
    v1, v2 = vertices(d)
    return abs(v1.r1 - v2.r1) <= tol


def _split_r1(params: GaussMDParams, t3: float) -> float:
    v, t0, t1, t2 = params.var, params.t0, params.t1, params.t2
    s1, s2 = math.sqrt(t1), math.sqrt(t2)
    num = (v + t0 + t1) * (t0 + t2 + t3)
    den = t0 * (s1 + s2) ** 2 + t3 * (t0 + t1)
    return _half_log2(num / den)


def splitting_coeffs(params: GaussMDParams, t3: float) -> SplittingCoeffs:
    """All splitting coefficients for splitting variance ``t3``.

    ``t3 = math.inf`` returns the successive (vertex-1) limit without
    evaluating any expression at infinity.
    """
    if params.d.trivial:
        raise ValueError("nothing to split: the central distortion equals the variance")
    if not (t3 >= 0):
        raise ValueError(f"splitting variance must be >= 0, got {t3!r}")
    v, t0, t1, t2 = params.var, params.t0, params.t1, params.t2
    s1, s2 = math.sqrt(t1), math.sqrt(t2)
    total = sum_rate(params.d)
    sc = params.successive
    if math.isinf(t3):
        v1, _ = vertices(params.d)
        b = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, sc.a2)
        bstar = (1.0, 0.0, sc.a1, sc.a2, 0.0, 0.0)
        return SplittingCoeffs(t3, b, bstar, None, sc.eb2, v, sc.eb2, sc.eb3,
                               v1.r1, total - v1.r1, 0.0, total - v1.r1)
    den12 = t0 + t2 + t3
    den = v + t0 + t2 + t3
    c3 = t0 * (s1 + s2) ** 2 + t3 * (t0 + t1)
    b1 = (t2 + t3 + s1 * s2) / den12
    b2 = (t0 - s1 * s2) / den12
    b3 = v / den
    b4 = (v + t0 - s1 * s2) / den
    b5 = (t2 + t3 + s1 * s2) / den12
    b6 = (v + t0 + t2) / den
    b7 = t3 / den12
    b8 = t3 * (t0 - s1 * s2) / c3 if c3 > 0 else 0.0
    eb2t = den12
    eb3t = c3 / den12
    ebb2 = v * den12 / den
    ebb3 = eb3t
    ebb4 = t3 * (v + t0 + t2) / den - b7**2 * ebb2 - b8**2 * ebb3
    if ebb4 < 0:
        if ebb4 < -1e-12 * v:
            raise ArithmeticError(f"negative innovation variance {ebb4!r}")
        ebb4 = 0.0
    bstar = (b1, b2, b7 - b5 * b8, b8, b3 * b5 * b8 - b3 * b7 - b4 * b8, b6)
    r1 = _split_r1(params, t3)
    r21 = _half_log2((v + eb2t) / eb2t)
    r2 = total - r1
    return SplittingCoeffs(t3, (b1, b2, b3, b4, b5, b6, b7, b8), bstar, eb2t, eb3t,
                           ebb2, ebb3, ebb4, r1, r2, r21, r2 - r21)


def split_sigma_T3(d: DistortionTriple, r1: float) -> float:
    """Splitting variance that gives description 1 the rate ``r1``.

    Returns ``0.0`` at vertex 2 and ``math.inf`` at vertex 1.  On a
    degenerate face (both vertices equal) the rate does not depend on the
    splitting variance and ``0.0`` is returned; see :func:`face_is_degenerate`.

    Raises
    ------
    ValueError
        If ``r1`` lies outside the vertex interval; the message names it.
    """
    params = test_channel_params(d)
    v1, v2 = vertices(d)
    lo, hi = v1.r1, v2.r1
    tol = 1e-12
    if not (lo - tol <= r1 <= hi + tol):
        raise ValueError(f"target R1={r1!r} outside the dominant face interval [{lo!r}, {hi!r}]")
    if hi - lo <= tol:
        return 0.0
    if r1 >= hi - tol:
        return 0.0
    if r1 <= lo + tol:
        return math.inf
    v, t0, t1, t2 = params.var, params.t0, params.t1, params.t2
    s1, s2 = math.sqrt(t1), math.sqrt(t2)
    e = 2.0 ** (2.0 * r1)
    num = t0 * (s1 + s2) ** 2 * e - (t0 + t2) * (v + t0 + t1)
    den = (v + t0 + t1) - e * (t0 + t1)
    if abs(den) > 1e-10 * (v + t0 + t1):
        return max(num / den, 0.0)
    return _bisect_t3(params, r1)


def _bisect_t3(params: GaussMDParams, r1: float) -> float:
    lo, hi = 0.0, max(params.var, 1.0)
    while _split_r1(params, hi) > r1:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if _split_r1(params, mid) > r1:
            lo = mid
        else:
            hi = mid
        if abs(_split_r1(params, hi) - r1) <= 1e-12 or hi - lo <= 1e-15 * hi:
            break
    return hi


def balanced_t3(d: DistortionTriple) -> float:
    """Splitting variance giving equal description rates."""
    return split_sigma_T3(d, 0.5 * sum_rate(d))


def split_params(d: DistortionTriple, split) -> GaussMDParams:
    """Parameters with splitting attached for a split selector.

    ``split`` is ``'vertex1'``, ``'vertex2'``, ``'balanced'`` or a target
    rate for description 1.
    """
    params = test_channel_params(d)
    if split == "vertex1":
        t3 = math.inf
    elif split == "vertex2":
        t3 = 0.0
    elif split == "balanced":
        t3 = balanced_t3(d)
    else:
        t3 = split_sigma_T3(d, float(split))
    return params.with_split(t3)


@dataclass(frozen=True)
class OuterBound:
    """Lower bounds on rates valid for any source with entropy power ``p``."""

    p: float
    phi: float
    r1_min: float
    r2_min: float
    sum_min: float

    def as_dict(self) -> dict:
        return asdict(self)


def outer_bound_phi(d: DistortionTriple, p: float) -> OuterBound:
    """Entropy-power outer bound, ``psi`` with the variance replaced by ``p``."""
    if not (math.isfinite(p) and p > 0):
        raise ValueError(f"entropy power must be positive, got {p!r}")
    if max(d.d1, d.d2) > p:
        raise ValueError("side distortions above the entropy power are not supported")
    harmonic = 1.0 / (1.0 / d.d1 + 1.0 / d.d2 - 1.0 / p)
    if d.d3 < d.d1 + d.d2 - p:
        phi = 1.0
    elif d.d3 > harmonic:
        phi = p * d.d3 / (d.d1 * d.d2)
    else:
        phi = _excess_factor(p, d.d1, d.d2, d.d3)
    return OuterBound(p, phi, max(0.0, _half_log2(p / d.d1)), max(0.0, _half_log2(p / d.d2)),
                      _half_log2(p / d.d3) + _half_log2(phi))


def phi_highres(d: DistortionTriple, p: float) -> float:
    """High-resolution form ``p / (sqrt(d1 - d3) + sqrt(d2 - d3))^2`` of ``phi``."""
    return p / (math.sqrt(d.d1 - d.d3) + math.sqrt(d.d2 - d.d3)) ** 2


def timeshare_point(var: float, d3: float, gamma: float) -> tuple[RatePair, tuple[float, float]]:
    """Timesharing one rate ``0.5 log2(var/d3)`` codebook between the encoders.

    Encoder 1 uses the codebook a fraction ``gamma`` of the time and encoder 2
    the rest.  Every point of the dominant face is reached this way when
    ``d3 = d1 + d2 - var``.

    Returns
    -------
    (RatePair, (float, float))
        Rates and the resulting side distortions.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"timesharing weight must lie in [0, 1], got {gamma!r}")
    if not 0.0 < d3 <= var:
        raise ValueError(f"central distortion must lie in (0, var], got {d3!r}")
    full = _half_log2(var / d3)
    d1 = gamma * d3 + (1.0 - gamma) * var
    d2 = (1.0 - gamma) * d3 + gamma * var
    return RatePair(gamma * full, (1.0 - gamma) * full, "timeshare"), (d1, d2)


def timeshare_gamma(d: DistortionTriple) -> float:
    """Weight reproducing the side targets of a triple on the no-excess-sum-rate edge."""
    if abs(d.d3 - d.lower) > 1e-10 * d.var:
        raise ValueError("timesharing needs d3 = d1 + d2 - var")
    return (d.var - d.d1) / (d.var - d.d3)
