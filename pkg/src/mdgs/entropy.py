"""Plug-in entropy estimates with the Miller-Madow bias correction.

Rates of dithered quantizers are conditional entropies of the index given the
dither.  The dither is continuous, so it is discretized into equal bins and
the conditional entropy is estimated from the joint histogram of
``(context, index)``.  Each context contributes ``(m_c - 1) / (2 N)`` nats of
bias correction, ``m_c`` being the number of distinct indices seen in it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings of the rate estimator.

    Parameters
    ----------
    bins : int
        Number of equal dither bins used as context.
    min_samples : int
        Estimates from fewer samples are refused.
    tolerance : float
        Stated accuracy of a rate estimate in bits at ``10**6`` samples.
    correction : bool
        Apply the Miller-Madow correction.
    """

    bins: int = 64
    min_samples: int = 100_000
    tolerance: float = 0.02
    correction: bool = True


def _dense(values: np.ndarray) -> tuple[np.ndarray, int]:
    values = np.asarray(values).ravel()
    if values.size == 0:
        return values.astype(np.int64), 0
    uniq, inv = np.unique(values, return_inverse=True)
    return inv.astype(np.int64), uniq.size


def entropy(symbols, correction: bool = True) -> float:
    """Entropy in bits of an empirical symbol sequence."""
    return conditional_entropy(symbols, np.zeros(np.size(symbols), dtype=np.int64), correction)


def conditional_entropy(symbols, contexts, correction: bool = True) -> float:
    """Plug-in estimate of ``H(symbol | context)`` in bits.

    Parameters
    ----------
    symbols, contexts : array_like of int
        Paired observations of equal length.
    correction : bool
        Add the Miller-Madow term ``(m_c - 1) / (2 N)`` per context.
    """
    s, ns = _dense(symbols)
    c, _ = _dense(contexts)
    n = s.size
    if n != c.size:
        raise ValueError(f"symbols and contexts differ in length ({n} vs {c.size})")
    if n == 0:
        raise ValueError("cannot estimate an entropy from zero samples")
    joint = np.bincount(c * ns + s)
    joint = joint[joint > 0]
    ctx = np.bincount(c)
    ctx = ctx[ctx > 0]
    # H(S|C) = H(S, C) - H(C), both from counts
    h_nats = (-(joint * np.log(joint)).sum() + (ctx * np.log(ctx)).sum()) / n
    if correction:
        h_nats += (joint.size - ctx.size) / (2.0 * n)
    return max(h_nats, 0.0) / _LN2


def dither_bins(u: np.ndarray, bins: int) -> np.ndarray:
    """Bin index of uniform variates on ``[0, 1)``."""
    return np.minimum((np.asarray(u) * bins).astype(np.int64), bins - 1)


def joint_context(*parts) -> np.ndarray:
    """Fold several integer sequences into one context label per sample."""
    out = np.zeros(np.size(parts[0]), dtype=np.int64)
    for p in parts:
        d, k = _dense(p)
        out = out * max(k, 1) + d
    return out
