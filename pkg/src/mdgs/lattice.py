"""Subtractively dithered lattice quantizers (scalar and Z^n).

A quantizer maps ``x`` to ``w = Q(x + z) - z`` where ``z`` is uniform over the
basic cell.  The error ``w - x`` is then distributed as ``-z`` whatever the
input, and the index entropy conditioned on the dither equals the mutual
information between the input and the input plus an independent uniform noise.

Dither is not stored anywhere.  It is regenerated from a counter-based
generator keyed by ``(dither_seed, stream_id)`` and positioned by the time
index, so an encoder and a decoder that agree on the key agree on every
dither sample, and any block of the stream can be produced out of order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

#: Normalized second moments of the best known lattices, used for reporting.
G_OPT = {
    1: 1.0 / 12.0,
    2: 5.0 / (36.0 * math.sqrt(3.0)),  # hexagonal lattice
}

#: Limit of the optimal normalized second moment as the dimension grows.
G_LIMIT = 1.0 / (2.0 * math.pi * math.e)

#: Indices are clipped to this magnitude; anything larger is an overflow.
INDEX_LIMIT = 2**31

_TWO_POW_M53 = 2.0**-53
_UINT64 = 2**64


def redundancy_bits(g: float) -> float:
    """Rate redundancy ``0.5 * log2(2 pi e G)`` of a lattice with moment ``g``."""
    return 0.5 * math.log2(2.0 * math.pi * math.e * g)


@dataclass(frozen=True)
class DitheredLattice:
    """A cubic lattice quantizer with a keyed subtractive-dither stream.

    Parameters
    ----------
    step : float
        Step of the base lattice per axis.
    dimension : int
        Number of axes ``n``.  Axes are quantized independently (Z^n).
    dither_seed : int
        64-bit key shared by encoder and decoder.
    stream_id : int
        Distinguishes independent dither streams under one seed.
    gain : float
        Shaping gain.  The effective quantizer is ``gain * Q(x / gain)``
        with the dither scaled by the same gain.
    """

    step: float
    dimension: int = 1
    dither_seed: int = 0
    stream_id: int = 0
    gain: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError(f"lattice step must be finite and positive, got {self.step!r}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        if not (math.isfinite(self.gain) and self.gain != 0):
            raise ValueError(f"shaping gain must be finite and nonzero, got {self.gain!r}")
        for name in ("dither_seed", "stream_id"):
            value = getattr(self, name)
            if int(value) != value or not 0 <= value < _UINT64:
                raise ValueError(f"{name} must be an integer in [0, 2**64), got {value!r}")

    @property
    def effective_step(self) -> float:
        """Step of the shaped quantizer, ``|gain| * step``."""
        return abs(self.gain) * self.step

    @property
    def second_moment(self) -> float:
        """Per-axis second moment of the quantization noise."""
        return (self.gain * self.step) ** 2 / 12.0

    @property
    def normalized_second_moment(self) -> float:
        """``G_n`` of the cubic lattice, 1/12 for every dimension."""
        return 1.0 / 12.0

    @property
    def cell_volume(self) -> float:
        """Volume of the basic cell of the shaped lattice."""
        return self.effective_step ** self.dimension

    def uniforms(self, t0: int, count: int) -> np.ndarray:
        """Uniform variates on ``[0, 1)`` for time steps ``t0 .. t0+count-1``.

        Returns an array of shape ``(count, dimension)``.  Sample ``(t, k)``
        is word ``t * dimension + k`` of a Philox stream keyed by
        ``(dither_seed, stream_id)``.
        """
        if int(t0) != t0 or t0 < 0:
            raise ValueError(f"time index must be a nonnegative integer, got {t0!r}")
        n = self.dimension
        first = int(t0) * n
        total = int(count) * n
        gen = np.random.Philox(key=int(self.dither_seed) + (int(self.stream_id) << 64),
                               counter=first // 4)
        raw = gen.random_raw(total + first % 4)[first % 4:]
        u = (raw >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53
        return u.reshape(int(count), n)

    def dither(self, t0: int, count: int) -> np.ndarray:
        """Base-lattice dither on ``(-step/2, step/2]``, shape ``(count, dimension)``."""
        return self.step * (0.5 - self.uniforms(t0, count))


@dataclass(frozen=True)
class QuantizedSample:
    """Output of :func:`quantize`.

    ``index`` holds lattice coordinates and ``w`` the reproduction
    ``gain * (index * step - z)`` where ``z`` is the base dither.
    """

    index: np.ndarray
    w: np.ndarray


def shape(lattice: DitheredLattice, a: float) -> DitheredLattice:
    """Return the quantizer ``x -> a * Q(x / a)`` with dither scaled by ``a``."""
    if not math.isfinite(a) or a == 0:
        raise ValueError(f"shaping gain must be finite and nonzero, got {a!r}")
    return replace(lattice, gain=lattice.gain * a)


def step_for_noise_variance(noise_variance: float) -> float | None:
    """Step of the scalar lattice whose dither noise has the given variance.

    Returns ``None`` when the variance is exactly zero, meaning no quantizer
    is needed and the stage passes its input through.
    """
    if noise_variance == 0:
        return None
    if not (math.isfinite(noise_variance) and noise_variance > 0):
        raise ValueError(f"noise variance must be positive, got {noise_variance!r}")
    return math.sqrt(12.0 * noise_variance)


def _as_blocks(x, n: int) -> tuple[np.ndarray, tuple]:
    arr = np.asarray(x, dtype=np.float64)
    if n == 1:
        return arr.reshape(-1, 1), arr.shape
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise ValueError(f"expected samples of dimension {n}, got shape {arr.shape}")
    return arr, arr.shape


def _check_finite(arr: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        pos = np.argwhere(bad)[0]
        t, k = int(pos[0]), int(pos[1])
        raise ValueError(f"non-finite {what} at sample {t}, coordinate {k}: {arr[t, k]!r}")


def quantize(lattice: DitheredLattice, x, t: int = 0, *, dither=None) -> QuantizedSample:
    """Dithered quantization of a block of consecutive samples.

    Parameters
    ----------
    lattice : DitheredLattice
        Quantizer, possibly shaped.
    x : array_like
        For ``dimension == 1`` any shape, read as consecutive scalars.
        Otherwise ``(n,)`` for one vector or ``(N, n)`` for ``N`` vectors.
    t : int
        Time index of the first sample.
    dither : array_like, optional
        Test hook.  Overrides the generated dither with the given effective
        dither (in the units of ``x``); broadcast against ``x``.

    Returns
    -------
    QuantizedSample
        Index and reproduction with the same shape as ``x``.

    Notes
    -----
    Cells are half-open, ``((k - 1/2) step, (k + 1/2) step]``, so the index of
    ``v`` is ``ceil(v / step - 1/2)``.
    """
    n = lattice.dimension
    blocks, out_shape = _as_blocks(x, n)
    _check_finite(blocks, "input")
    if dither is None:
        z = lattice.dither(t, blocks.shape[0])
    else:
        z = np.broadcast_to(np.asarray(dither, dtype=np.float64).reshape(
            (-1, 1) if n == 1 else (-1, n)), blocks.shape) / lattice.gain
    v = blocks / lattice.gain + z
    k = np.ceil(v / lattice.step - 0.5)
    if np.any(np.abs(k) > INDEX_LIMIT):
        pos = np.argwhere(np.abs(k) > INDEX_LIMIT)[0]
        raise OverflowError(f"lattice index overflow at sample {int(pos[0])}, "
                            f"coordinate {int(pos[1])}: |index| > 2**31")
    w = lattice.gain * (k * lattice.step - z)
    return QuantizedSample(index=k.astype(np.int64).reshape(out_shape), w=w.reshape(out_shape))


def reconstruct(lattice: DitheredLattice, index, t: int = 0) -> np.ndarray:
    """Rebuild reproductions from indices and the regenerated dither."""
    n = lattice.dimension
    k, out_shape = _as_blocks(np.asarray(index, dtype=np.float64), n)
    z = lattice.dither(t, k.shape[0])
    return (lattice.gain * (k * lattice.step - z)).reshape(out_shape)
