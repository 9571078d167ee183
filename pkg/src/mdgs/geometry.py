"""Partition geometry of the undithered scalar two-description scheme.

Encoder ``q_a`` is a uniform quantizer of ``x`` with step ``delta_a``, cells
``((j - 1/2) delta_a, (j + 1/2) delta_a]`` and reproduction ``y_j = j delta_a``.
Encoder ``q_b`` quantizes ``s = a1 x + a2 y`` with thresholds
``offset_b + i delta_b``.  Inside one ``q_a`` cell ``s`` is increasing in
``x``, so each ``q_b`` cell pulls back to a union of short intervals, one per
``q_a`` cell it meets.  An optional refinement ``q_c`` partitions
``r = b3 x + b4 t + b5 y`` (``t`` the midpoint of the ``q_b`` cell in
``s`` units) with ``levels`` uniform cells per ``q_b`` cell width.

Everything is computed on explicit interval lists and integrated against a
source density, so distortions and entropies are exact up to quadrature.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

BALANCED_B5_STATED = 2.9555

_GL_CACHE: dict = {}


def _gauss_legendre(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class Density:
    """A source density with its variance and differential entropy (bits)."""

    name: str
    pdf: object = field(repr=False)
    variance: float
    entropy_bits: float
    support: tuple = (-math.inf, math.inf)

    def mass(self, lo: float, hi: float) -> float:
        """Probability of ``(lo, hi]`` (finite ends) by adaptive quadrature."""
        lo, hi = max(lo, self.support[0]), min(hi, self.support[1])
        if hi <= lo:
            return 0.0
        _, m0, _, _ = _moments(np.array([lo]), np.array([hi]), self.pdf, 1e-15)
        return float(m0[0])


def gaussian_density(sigma: float = 1.0) -> Density:
    c = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    return Density("gaussian", lambda x: c * np.exp(-0.5 * (x / sigma) ** 2), sigma**2,
                   0.5 * math.log2(2.0 * math.pi * math.e * sigma**2))


def uniform_density(sigma: float = 1.0) -> Density:
    half = math.sqrt(3.0) * sigma
    return Density("uniform", lambda x: np.where(np.abs(x) <= half, 0.5 / half, 0.0), sigma**2,
                   math.log2(2.0 * half), (-half, half))


def laplacian_density(sigma: float = 1.0) -> Density:
    b = sigma / math.sqrt(2.0)
    return Density("laplacian", lambda x: np.exp(-np.abs(x) / b) / (2.0 * b), sigma**2,
                   math.log2(2.0 * math.e * b))


def gaussian_tail_mass(lo: float, hi: float, sigma: float = 1.0) -> float:
    """Gaussian probability outside ``[lo, hi]``."""
    return float(special.ndtr(lo / sigma) + special.ndtr(-hi / sigma))


# ---------------------------------------------------------------------------
# quadrature


def _gl(lo, hi, pdf, order):
    nodes, weights = _gauss_legendre(order)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    u = half[:, None] * nodes[None, :]
    p = pdf(mid[:, None] + u) * (weights[None, :] * half[:, None])
    return p.sum(1), (p * u).sum(1), (p * u * u).sum(1)


def _moments(lo, hi, pdf, tol, depth: int = 0):
    """Moments of the density on each interval about the interval midpoint.

    Returns ``(mid, m0, m1, m2)`` with ``m_k = int (x - mid)^k p(x) dx``.
    Intervals whose 8- and 16-point Gauss-Legendre values disagree by more
    than ``tol`` are bisected.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    mid = 0.5 * (lo + hi)
    a = _gl(lo, hi, pdf, 16)
    b = _gl(lo, hi, pdf, 8)
    err = np.maximum(np.abs(a[0] - b[0]), np.abs(a[2] - b[2]))
    bad = np.flatnonzero(err > tol)
    m0, m1, m2 = (np.array(v) for v in a)
    if bad.size and depth < 40:
        l, h, c = lo[bad], hi[bad], mid[bad]
        _, l0, l1, l2 = _moments(l, c, pdf, 0.5 * tol, depth + 1)
        _, r0, r1, r2 = _moments(c, h, pdf, 0.5 * tol, depth + 1)
        # shift the halves' moments from their own midpoints to the parent's
        dl = 0.5 * (l + c) - c
        dr = 0.5 * (c + h) - c
        m0[bad] = l0 + r0
        m1[bad] = l1 + dl * l0 + r1 + dr * r0
        m2[bad] = l2 + 2 * dl * l1 + dl**2 * l0 + r2 + 2 * dr * r1 + dr**2 * r0
    return mid, m0, m1, m2


# ---------------------------------------------------------------------------
# schemes and cells


@dataclass(frozen=True)
class Refinement:
    """Refinement encoder ``q_c`` on ``r = b3 x + b4 t + b5 y``.

    ``levels`` uniform cells cover an ``r`` interval of width
    ``b3 delta_b / a1`` centred on zero, extended periodically.
    """

    b3: float
    b4: float
    b5: float
    levels: int


@dataclass(frozen=True)
class ScalarScheme:
    """Undithered scalar scheme: steps, taps and analysis range.

    Parameters
    ----------
    delta_a, delta_b : float
        Steps of ``q_a`` (on ``x``) and ``q_b`` (on ``s``).
    a1, a2 : float
        Taps of ``s = a1 x + a2 y``; ``a1 > 0`` and ``a2 <= 0``.
    x_lo, x_hi : float
        Analysis range.
    offset_b : float
        ``q_b`` thresholds sit at ``offset_b + i delta_b``.  Zero aligns
        them with the multiples of ``delta_b``; ``-delta_b / 2`` reproduces the
        round-to-nearest quantizer of the codec.
    refine : Refinement or None
        Optional ``q_c``.
    """

    delta_a: float
    delta_b: float
    a1: float = 2.0
    a2: float = -1.0
    x_lo: float = -8.0
    x_hi: float = 8.0
    offset_b: float = 0.0
    refine: Refinement | None = None

    def __post_init__(self):
        if not (self.delta_a > 0 and self.delta_b > 0):
            raise ValueError("steps must be positive")
        if not self.a1 > 0:
            raise ValueError(f"a1 must be positive, got {self.a1!r}")
        if self.a2 > 0:
            raise ValueError(f"a2 must be <= 0 for the staircase geometry, got {self.a2!r}")
        if not self.x_hi > self.x_lo:
            raise ValueError("empty analysis range")
        if self.refine is not None and not (self.refine.b3 > 0 and self.refine.levels >= 1):
            raise ValueError("refinement needs b3 > 0 and at least one level")

    @property
    def ratio(self) -> float:
        return self.delta_a / self.delta_b

    @property
    def ratio_flag(self) -> bool:
        """True when ``delta_a / delta_b < 8`` (fine/coarse separation is weak)."""
        return self.ratio < 8.0


@dataclass(frozen=True)
class PartitionCell:
    """A finite union of disjoint half-open intervals with a reproduction."""

    owner: str
    index: tuple
    intervals: tuple
    reproduction: float

    @property
    def measure(self) -> float:
        return float(sum(h - l for l, h in self.intervals))


@dataclass(frozen=True)
class CellSet:
    """All elementary pieces of a scheme.

    Each piece ``k`` is the interval ``(lo[k], hi[k]]`` lying in ``q_a`` cell
    ``j[k]``, ``q_b`` cell ``i[k]`` and (with refinement) ``q_c`` cell
    ``c[k]``.  Pieces are sorted by ``lo``.  Cells of every owner class are
    unions of pieces.
    """

    scheme: ScalarScheme
    lo: np.ndarray
    hi: np.ndarray
    j: np.ndarray
    i: np.ndarray
    c: np.ndarray | None

    def owner_keys(self, owner: str) -> np.ndarray:
        """Integer label per piece for an owner class.

        Classes: ``'x'`` (``q_a``), ``'s'`` (``q_b``), ``'xr'`` (``q_a`` and
        ``q_c``), ``'joint'`` (the central decoder's cells).
        """
        if owner == "x":
            return self.j - self.j.min()
        if owner == "s":
            return self.i - self.i.min()
        if owner == "xr":
            self._need_refine()
            return _pair(self.j, self.c)
        if owner == "joint":
            base = _pair(self.i, self.j)
            return base if self.c is None else _pair(base, self.c)
        raise ValueError(f"unknown owner class {owner!r}")

    def _need_refine(self):
        if self.c is None:
            raise ValueError("scheme has no refinement encoder")

    def cells(self, owner: str, reproduction: str = "midpoint", density: Density | None = None
              ) -> list[PartitionCell]:
        """Materialize the cells of one owner class."""
        keys = self.owner_keys(owner)
        order = np.lexsort((self.lo, keys))
        reps = _reproductions(self, keys, reproduction, density)
        out = []
        starts = np.flatnonzero(np.r_[True, keys[order][1:] != keys[order][:-1]])
        ends = np.r_[starts[1:], order.size]
        label = self._labels(owner)
        for a, b in zip(starts, ends):
            idx = order[a:b]
            merged = _merge(self.lo[idx], self.hi[idx], self._snap)
            k = keys[idx[0]]
            out.append(PartitionCell(owner, label(idx[0]), tuple(merged), float(reps[k])))
        return out

    def _labels(self, owner):
        if owner == "x":
            return lambda p: (int(self.j[p]),)
        if owner == "s":
            return lambda p: (int(self.i[p]),)
        if owner == "xr":
            return lambda p: (int(self.j[p]), int(self.c[p]))
        if self.c is None:
            return lambda p: (int(self.i[p]), int(self.j[p]))
        return lambda p: (int(self.i[p]), int(self.j[p]), int(self.c[p]))

    @property
    def _snap(self) -> float:
        return 1e-12 * (self.scheme.x_hi - self.scheme.x_lo)

    def interval_counts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per ``q_b`` cell: index, number of disjoint intervals and length.

        Adjacent pieces from neighbouring ``q_a`` cells are merged first.
        """
        i = self.i
        order = np.lexsort((self.lo, i))
        lo, hi, ii = self.lo[order], self.hi[order], i[order]
        same = np.r_[False, ii[1:] == ii[:-1]]
        touching = np.r_[False, np.abs(lo[1:] - hi[:-1]) <= self._snap]
        new_interval = ~(same & touching)
        starts = np.flatnonzero(np.r_[True, ii[1:] != ii[:-1]])
        counts = np.add.reduceat(new_interval.astype(np.int64), starts)
        lengths = np.add.reduceat(hi - lo, starts)
        return ii[starts], counts, lengths

    def border_cells(self, edge_only: bool = False) -> np.ndarray:
        """``q_b`` cell indices with a merged interval shorter than nominal.

        Nominal length is ``delta_b / a1``; shorter intervals come from
        segments cut by ``q_a`` boundaries or by the analysis range.  With
        ``edge_only`` only cells touching the range ends are returned.
        """
        sch = self.scheme
        nominal = sch.delta_b / sch.a1
        i = self.i
        order = np.lexsort((self.lo, i))
        lo, hi, ii = self.lo[order], self.hi[order], i[order]
        same = np.r_[False, ii[1:] == ii[:-1]]
        touching = np.r_[False, np.abs(lo[1:] - hi[:-1]) <= self._snap]
        cont = same & touching
        gid = np.cumsum(~cont) - 1
        glen = np.bincount(gid, weights=hi - lo)
        gcell = ii[np.flatnonzero(~cont)]
        glo = lo[np.flatnonzero(~cont)]
        ghi = np.maximum.reduceat(hi, np.flatnonzero(~cont))
        short = glen < nominal * (1.0 - 1e-9)
        edge = (glo <= sch.x_lo + self._snap) | (ghi >= sch.x_hi - self._snap)
        return np.unique(gcell[edge if edge_only else short | edge])

    def three_interval_fraction(self, exclude: str = "edge") -> tuple[float, float]:
        """Share of ``q_b`` cells with three intervals, by count and by measure.

        ``exclude`` is ``'edge'`` (drop cells cut by the analysis range),
        ``'border'`` (drop every border cell) or ``'none'``.
        """
        cell, counts, lengths = self.interval_counts()
        keep = np.ones(cell.size, dtype=bool)
        if exclude == "border":
            keep &= ~np.isin(cell, self.border_cells())
        elif exclude == "edge":
            keep &= ~np.isin(cell, self.border_cells(edge_only=True))
        elif exclude != "none":
            raise ValueError(f"unknown exclusion {exclude!r}")
        c, l = counts[keep], lengths[keep]
        three = c == 3
        return float(three.mean()), float(l[three].sum() / l.sum())


def _pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense integer label for pairs of integer arrays."""
    _, inv = np.unique(np.stack([a, b], axis=1), axis=0, return_inverse=True)
    return inv.ravel().astype(np.int64)


def _merge(lo, hi, snap):
    out = []
    for l, h in sorted(zip(lo.tolist(), hi.tolist())):
        if out and abs(l - out[-1][1]) <= snap:
            out[-1] = (out[-1][0], h)
        else:
            out.append((l, h))
    return out


def _split_at_grid(lo, hi, f_lo, f_hi, origin, step):
    """Cut intervals where an increasing affine map crosses a uniform grid.

    ``f_lo`` and ``f_hi`` are the map's values at the interval ends.  Grid
    cell ``m`` is ``(origin + m step, origin + (m + 1) step]``.  Returns the
    parent index, cell index and sub-interval ends.
    """
    first = np.floor((f_lo - origin) / step).astype(np.int64)
    last = (np.ceil((f_hi - origin) / step) - 1).astype(np.int64)
    last = np.maximum(last, first)
    counts = last - first + 1
    parent = np.repeat(np.arange(lo.size), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    m = first[parent] + offs
    slope = (hi - lo) / np.where(f_hi > f_lo, f_hi - f_lo, 1.0)
    cut_lo = lo[parent] + (origin + m * step - f_lo[parent]) * slope[parent]
    cut_hi = lo[parent] + (origin + (m + 1) * step - f_lo[parent]) * slope[parent]
    new_lo = np.maximum(lo[parent], cut_lo)
    new_hi = np.minimum(hi[parent], cut_hi)
    return parent, m, new_lo, new_hi


def compute_cells(scheme: ScalarScheme) -> CellSet:
    """All pieces of the ``q_a``, ``q_b`` (and ``q_c``) partitions.

    Piece ends within ``1e-12`` of the range width of a neighbouring
    boundary are snapped and empty pieces dropped.
    """
    sch = scheme
    da = sch.delta_a
    snap = 1e-12 * (sch.x_hi - sch.x_lo)
    j = np.arange(math.ceil(sch.x_lo / da - 0.5), math.ceil(sch.x_hi / da - 0.5) + 1)
    xl = np.maximum((j - 0.5) * da, sch.x_lo)
    xh = np.minimum((j + 0.5) * da, sch.x_hi)
    keep = xh - xl > snap
    j, xl, xh = j[keep], xl[keep], xh[keep]
    y = j * da
    parent, i, lo, hi = _split_at_grid(xl, xh, sch.a1 * xl + sch.a2 * y, sch.a1 * xh + sch.a2 * y,
                                       sch.offset_b, sch.delta_b)
    jj = j[parent]
    lo = np.where(np.abs(lo - xl[parent]) <= snap, xl[parent], lo)
    hi = np.where(np.abs(hi - xh[parent]) <= snap, xh[parent], hi)
    ok = hi - lo > snap
    lo, hi, jj, i = lo[ok], hi[ok], jj[ok], i[ok]
    c = None
    if sch.refine is not None:
        rf = sch.refine
        t = sch.offset_b + (i + 0.5) * sch.delta_b
        const = rf.b4 * t + rf.b5 * jj * da
        width = rf.b3 * sch.delta_b / sch.a1
        step = width / rf.levels
        p2, c, lo2, hi2 = _split_at_grid(lo, hi, rf.b3 * lo + const, rf.b3 * hi + const,
                                         -0.5 * width, step)
        lo2 = np.where(np.abs(lo2 - lo[p2]) <= snap, lo[p2], lo2)
        hi2 = np.where(np.abs(hi2 - hi[p2]) <= snap, hi[p2], hi2)
        ok = hi2 - lo2 > snap
        lo, hi, jj, i, c = lo2[ok], hi2[ok], jj[p2][ok], i[p2][ok], c[ok]
    order = np.argsort(lo, kind="stable")
    return CellSet(sch, lo[order], hi[order], jj[order], i[order],
                   None if c is None else c[order])


def _reproductions(cells: CellSet, keys: np.ndarray, mode: str, density: Density | None,
                   moments=None) -> np.ndarray:
    length = cells.hi - cells.lo
    mid = 0.5 * (cells.hi + cells.lo)
    size = int(keys.max()) + 1
    if mode == "midpoint":
        w = np.bincount(keys, weights=length, minlength=size)
        s = np.bincount(keys, weights=length * mid, minlength=size)
    elif mode == "centroid":
        if moments is None:
            if density is None:
                raise ValueError("centroid reproduction needs a density")
            moments = _moments(cells.lo, cells.hi, density.pdf, 1e-13)
        _, m0, m1, _ = moments
        w = np.bincount(keys, weights=m0, minlength=size)
        s = np.bincount(keys, weights=m1 + mid * m0, minlength=size)
    else:
        raise ValueError(f"unknown reproduction mode {mode!r}")
    return np.divide(s, w, out=np.zeros(size), where=w > 0)


@dataclass(frozen=True)
class CellDistortions:
    """Distortions and entropies of the three decoders.

    ``d1`` uses ``q_a`` cells, ``d2`` the ``q_b`` cells and ``d3`` the joint
    cells (including ``q_c`` when present).  ``d1_excl`` drops ``q_a`` cells cut by
    the analysis range; ``d2_excl`` and ``d3_excl`` drop every piece of a
    border ``q_b`` cell, as the high-resolution formulas do.  ``h_a``, ``h_b`` and ``h_xr`` are index entropies
    in bits; ``outside`` is the density mass outside the analysis range.
    """

    d1: float
    d2: float
    d3: float
    d1_excl: float
    d2_excl: float
    d3_excl: float
    h_a: float
    h_b: float
    h_xr: float | None
    outside: float
    mode: str

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _entropy_of(keys: np.ndarray, mass: np.ndarray) -> float:
    p = np.bincount(keys, weights=mass)
    p = p[p > 0]
    p = p / p.sum()
    return float(-(p * np.log2(p)).sum())


def cell_distortions(cells: CellSet, density: Density, mode: str = "midpoint",
                     tol: float | None = None) -> CellDistortions:
    """Integrate the squared error of each decoder against the density.

    Parameters
    ----------
    mode : {'midpoint', 'centroid'}
        Length-weighted centre of each cell, or its conditional mean.
    tol : float, optional
        Absolute quadrature tolerance per interval; default ``1e-12 var``.
    """
    sch = cells.scheme
    if tol is None:
        tol = 1e-12 * density.variance
    inside_mass = density.mass(sch.x_lo, sch.x_hi)
    outside = max(0.0, float(1.0 - inside_mass))
    if outside > 1e-6:
        warnings.warn(f"density mass {outside:.2e} lies outside the analysis range; "
                      "overload distortion is not modeled", RuntimeWarning, stacklevel=2)
    mom = _moments(cells.lo, cells.hi, density.pdf, tol)
    mid, m0, m1, m2 = mom
    # q_a cells are only ever cut by the analysis range; q_b and joint cells
    # also by q_a boundaries
    da = sch.delta_a
    x_edge = ((cells.j - 0.5) * da < sch.x_lo) | ((cells.j + 0.5) * da > sch.x_hi)
    s_border = np.isin(cells.i, cells.border_cells())

    def decoder(owner, drop):
        keys = cells.owner_keys(owner)
        rep = _reproductions(cells, keys, mode, density, mom)[keys]
        dc = mid - rep
        err = m2 + 2.0 * dc * m1 + dc * dc * m0
        full = err.sum() / m0.sum()
        keep = ~drop
        excl = err[keep].sum() / m0[keep].sum()
        return float(full), float(excl)

    d1, d1e = decoder("x", x_edge)
    d2, d2e = decoder("s", s_border)
    d3, d3e = decoder("joint", s_border)
    h_xr = _entropy_of(cells.owner_keys("xr"), m0) if cells.c is not None else None
    return CellDistortions(d1, d2, d3, d1e, d2e, d3e, _entropy_of(cells.owner_keys("x"), m0),
                           _entropy_of(cells.owner_keys("s"), m0), h_xr, outside, mode)


def write_cells_csv(cells: CellSet, density: Density, path, mode: str = "midpoint") -> None:
    """Dump every cell: owner, index, intervals, reproduction, mass, distortion."""
    mom = _moments(cells.lo, cells.hi, density.pdf, 1e-12 * density.variance)
    mid, m0, m1, m2 = mom
    owners = ["x", "s", "joint"] + (["xr"] if cells.c is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["owner", "index", "intervals", "reproduction", "probability", "distortion"])
        for owner in owners:
            keys = cells.owner_keys(owner)
            reps = _reproductions(cells, keys, mode, density, mom)
            dc = mid - reps[keys]
            err = m2 + 2.0 * dc * m1 + dc * dc * m0
            mass = np.bincount(keys, weights=m0)
            dist = np.bincount(keys, weights=err)
            for cell in cells.cells(owner, mode, density):
                k = cells.owner_keys(owner)[_first_piece(cells, owner, cell.index)]
                ivs = ";".join(f"({l!r},{h!r}]" for l, h in cell.intervals)
                w.writerow([owner, "/".join(map(str, cell.index)), ivs, repr(cell.reproduction),
                            repr(float(mass[k])), repr(float(dist[k]))])


def _first_piece(cells: CellSet, owner: str, index: tuple) -> int:
    if owner == "x":
        m = cells.j == index[0]
    elif owner == "s":
        m = cells.i == index[0]
    elif owner == "xr":
        m = (cells.j == index[0]) & (cells.c == index[1])
    else:
        m = (cells.i == index[0]) & (cells.j == index[1])
        if cells.c is not None:
            m &= cells.c == index[2]
    return int(np.flatnonzero(m)[0])


# ---------------------------------------------------------------------------
# closed forms


def balanced_cubic(a: float) -> float:
    """``5 a^3 + 4 a^2 + 4/3``, zero at the tap that equalizes side distortions."""
    return 5.0 * a**3 + 4.0 * a**2 + 4.0 / 3.0


def solve_balanced_a2() -> float:
    """Tap ``a2`` in ``(-4/3, -1)`` with ``-(5 a2 + 4) a2^2 / 16 = 1/12``."""
    lo, hi = -4.0 / 3.0, -1.0
    if balanced_cubic(lo) * balanced_cubic(hi) >= 0:
        raise ArithmeticError("no sign change of the balancing cubic on (-4/3, -1)")
    return float(optimize.brentq(balanced_cubic, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def side_distortion_ratio(a2: float) -> float:
    """High-resolution ``D2 / D1`` for taps ``(2, a2)``, ``a2`` in ``[-4/3, -1]``."""
    return -(5.0 * a2 + 4.0) * a2**2 * 12.0 / 16.0


def three_interval_share(a2: float) -> tuple[float, float]:
    """High-resolution share of three-interval ``q_b`` cells for taps ``(2, a2)``.

    Returns the share by cell count and by measure; the latter is
    ``-3 - 3 a2``.
    """
    cover = 2.0 / (2.0 + a2)
    by_count = cover - 2.0
    return by_count, 3.0 * by_count / (3.0 * by_count + 2.0 * (1.0 - by_count))


def rate_b_highres(delta_b: float, a2: float, h_bits: float) -> float:
    """Entropy of ``q_b`` at high resolution for taps ``(2, a2)``.

    ``h - log2(delta_b) + (3 + 3 a2) log2(3/2)`` for ``a2`` in
    ``[-4/3, -1]``; ``h - log2(delta_b)`` for ``a2 = -1``.
    """
    extra = (3.0 + 3.0 * a2) * math.log2(1.5) if a2 < -1.0 else 0.0
    return h_bits - math.log2(delta_b) + extra


def distortion_product_gap(d1: float, d3: float, rate: float, var: float = 1.0) -> float:
    """Distance in dB of ``d1 d3`` above ``var^2 2^(-4 rate) / 4``."""
    return 10.0 * math.log10(d3 * d1 / (var**2 * 2.0 ** (-4.0 * rate) / 4.0))


#: Distortion-product gap of optimized multiple-description scalar
#: quantization reported in the literature (dB).
MDSQ_GAP_DB = 2.67


def mdsq_reference_product() -> float:
    """Normalized product ``d1 d3 2^(4R) / var^2`` of the MDSQ reference point."""
    return 0.25 * 10.0 ** (MDSQ_GAP_DB / 10.0)


@dataclass(frozen=True)
class HighResSpec:
    """Side distortion of the form ``b var 2^(-2 (1 - eta) R)``."""

    rate: float
    b: float = 1.0
    eta: float = 0.5

    def __post_init__(self):
        if self.b < 1 or not 0 <= self.eta < 1:
            raise ValueError("need b >= 1 and 0 <= eta < 1")

    def side(self, var: float = 1.0) -> float:
        return self.b * var * 2.0 ** (-2.0 * (1.0 - self.eta) * self.rate)

    def central_bound(self, var: float = 1.0) -> float:
        """Smallest achievable central distortion for this side distortion."""
        if self.eta == 0:
            return var * 2.0 ** (-2.0 * self.rate) / (2.0 * (self.b + math.sqrt(self.b**2 - 1)))
        return var * 2.0 ** (-2.0 * self.rate * (1.0 + self.eta)) / (4.0 * self.b)


@dataclass(frozen=True)
class HighResPoint:
    """Closed-form high-resolution operating point."""

    mode: str
    r1: float
    r2: float
    d1: float
    d2: float
    d3: float
    gap_db: float
    low_resolution: bool

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def highres_point(mode: str, r1: float, r2: float | None = None, var: float = 1.0,
                  a2: float = -1.0, r1a: float | None = None) -> HighResPoint:
    """High-resolution distortions of the scalar schemes.

    Modes
    -----
    ``successive``
        Rates ``(r1, r2)`` of ``q_a`` and ``q_b`` with taps ``(2, a2)``.
    ``timeshare``
        Average of ``successive`` at ``(r1, r2)`` and its mirror image.
    ``splitting-balanced``
        Both descriptions at rate ``r1``; ``q_a`` runs at ``r1a`` (default
        ``r1 - 4``) and the balancing tap is used.
    """
    c12 = 2.0 * math.pi * math.e / 12.0
    c48 = 2.0 * math.pi * math.e / 48.0
    if mode in ("successive", "timeshare"):
        if r2 is None:
            raise ValueError(f"{mode} needs both rates")
        d1 = c12 * 2.0 ** (-2.0 * r1) * var
        d2 = side_distortion_ratio(a2) * d1
        d3 = c48 * 2.0 ** (-2.0 * r2) * var * 1.5 ** (2.0 * (3.0 + 3.0 * a2) if a2 < -1 else 0.0)
        if mode == "timeshare":
            d1 = d2 = 0.5 * (d1 + d2)
        rate = 0.5 * (r1 + r2)
        gap = distortion_product_gap(d1, d3, rate, var)
        return HighResPoint(mode, r1, r2, d1, d2, d3, gap, min(r1, r2) < 4.0)
    if mode == "splitting-balanced":
        a2 = solve_balanced_a2()
        if r1a is None:
            r1a = r1 - 4.0
        d1 = c12 * 2.0 ** (-2.0 * r1a) * var
        d0 = 1.5 ** (6.0 + 6.0 * a2) * c48 * var * 2.0 ** (-2.0 * (2.0 * r1 - r1a))
        gap = distortion_product_gap(d1, d0, r1, var)
        return HighResPoint(mode, r1, r1, d1, d1, d0, gap, min(r1a, r1 - r1a) < 4.0)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# case studies


def solve_b5(delta_a: float, delta_b: float, a1: float, a2: float, b3: float, b4: float,
             offset_b: float = 0.0, cell: int = 1) -> float:
    """Tap ``b5`` that zeroes the mean of ``r`` over one ``q_a`` cell.

    The mean is taken with uniform weight over the nominal cell ``cell``
    (away from zero so that ``y`` is nonzero).
    """
    sch = ScalarScheme(delta_a, delta_b, a1, a2, (cell - 0.5) * delta_a,
                       (cell + 0.5) * delta_a, offset_b)
    cs = compute_cells(sch)
    y = cell * delta_a
    t = offset_b + (cs.i + 0.5) * delta_b
    length = cs.hi - cs.lo
    mid = 0.5 * (cs.hi + cs.lo)

    def mean_r(b5):
        return float(((b3 * mid + b4 * t + b5 * y) * length).sum() / length.sum())

    return float(optimize.brentq(mean_r, -20.0, 20.0, xtol=1e-14))


@dataclass(frozen=True)
class ScalarReport:
    """Measured operating point of a scalar case study."""

    mode: str
    rate: float
    scheme: ScalarScheme
    distortions: CellDistortions
    r1: float
    r2: float
    gap_db: float
    gap_db_all: float
    three_interval_count: float
    three_interval_measure: float
    predicted: HighResPoint | None

    def as_dict(self) -> dict:
        sch = self.scheme
        out = {
            "mode": self.mode, "rate": self.rate,
            "delta_a": sch.delta_a, "delta_b": sch.delta_b, "a1": sch.a1, "a2": sch.a2,
            "ratio": sch.ratio, "ratio_flag": sch.ratio_flag,
            "x_range": [sch.x_lo, sch.x_hi], "offset_b": sch.offset_b,
            "R1": self.r1, "R2": self.r2,
            "gap_db_border_excluded": self.gap_db, "gap_db_all_cells": self.gap_db_all,
            "three_interval_share_count": self.three_interval_count,
            "three_interval_share_measure": self.three_interval_measure,
        }
        if sch.refine is not None:
            rf = sch.refine
            out["refine"] = {"b3": rf.b3, "b4": rf.b4, "b5": rf.b5, "levels": rf.levels}
        out["distortions"] = self.distortions.as_dict()
        out["D3/D1"] = self.distortions.d3_excl / self.distortions.d1_excl
        out["D2/D1"] = self.distortions.d2_excl / self.distortions.d1_excl
        if self.predicted is not None:
            out["predicted"] = self.predicted.as_dict()
        return out


def scalar_case(mode: str, rate: float, *, ratio: float = 64.0, refine_bits: int = 4,
                b5: str = "stated", x_range: float = 8.0, density: Density | None = None,
                reproduction: str = "midpoint") -> tuple[ScalarReport, CellSet]:
    """Run one of the scalar case studies at rate ``rate``.

    Modes
    -----
    ``fig8a``
        Taps ``(2, -1)``, equal steps: two staggered uniform quantizers.
    ``fig8b``
        Taps ``(2, -1)``, ``delta_a = ratio * delta_b``.
    ``balanced``
        Balancing tap on ``q_b`` plus a ``2**refine_bits``-level refinement
        on ``q_a``; steps chosen from the high-resolution rate formulas so
        that both descriptions have rate ``rate``.

    ``b5`` selects the refinement tap: ``'stated'`` (2.9555), ``'solved'``
    (:func:`solve_b5`), ``'aligned'`` (equal to ``a2``, which lines the
    ``q_c`` grid up with every ``q_b`` cell) or a number.
    """
    density = density or gaussian_density()
    sigma = math.sqrt(density.variance)
    h = density.entropy_bits
    lo, hi = -x_range * sigma, x_range * sigma
    predicted = None
    if mode == "fig8a":
        da = 2.0 ** (h - rate)
        sch = ScalarScheme(da, da, 2.0, -1.0, lo, hi)
    elif mode == "fig8b":
        da = 2.0 ** (h - rate)
        sch = ScalarScheme(da, da / ratio, 2.0, -1.0, lo, hi)
    elif mode == "balanced":
        a2 = solve_balanced_a2()
        db = 2.0 ** (h + (3.0 + 3.0 * a2) * math.log2(1.5) - rate)
        r1a = rate - refine_bits
        da = 2.0 ** (h - r1a)
        if b5 == "solved":
            b5v = solve_b5(da, db, 2.0, a2, 2.0, -1.0)
        elif b5 == "aligned":
            b5v = a2
        elif b5 == "stated":
            b5v = BALANCED_B5_STATED
        else:
            b5v = float(b5)
        sch = ScalarScheme(da, db, 2.0, a2, lo, hi,
                           refine=Refinement(2.0, -1.0, b5v, 2**refine_bits))
        predicted = highres_point("splitting-balanced", rate, var=density.variance, r1a=r1a)
    else:
        raise ValueError(f"unknown scalar mode {mode!r}")
    cells = compute_cells(sch)
    dist = cell_distortions(cells, density, reproduction)
    r1 = dist.h_xr if dist.h_xr is not None else dist.h_a
    r2 = dist.h_b
    if mode == "fig8b" and predicted is None:
        predicted = highres_point("successive", dist.h_a, dist.h_b, density.variance, -1.0)
    rate_avg = 0.5 * (r1 + r2)
    side_e = 0.5 * (dist.d1_excl + dist.d2_excl)
    side_a = 0.5 * (dist.d1 + dist.d2)
    gap_e = distortion_product_gap(side_e, dist.d3_excl, rate_avg, density.variance)
    gap_a = distortion_product_gap(side_a, dist.d3, rate_avg, density.variance)
    by_count, by_measure = cells.three_interval_fraction()
    return ScalarReport(mode, rate, sch, dist, r1, r2, gap_e, gap_a, by_count, by_measure,
                        predicted), cells
