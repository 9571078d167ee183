"""Gram-Schmidt orthogonalization of random variables as an LDL^T factorization.

For a zero-mean vector ``X`` with covariance ``K`` the innovations are
``B_i = X_i - K_{i-1} X_1^{i-1}`` where ``K_{i-1}`` holds the linear-MMSE
weights.  Then ``X = L B`` with ``L`` unit lower triangular and the ``B_i``
uncorrelated with variances ``D``, i.e. ``K = L diag(D) L^T``.

Feeding the predictions through subtractively dithered quantizers whose noise
variance equals the innovation variances produces a chain whose covariance is
again ``K``.  Both the scalar and the vector version of that chain live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import DitheredLattice, quantize

#: Relative tolerance below which an innovation variance counts as zero.
SINGULAR_TOL = 1e-9


def check_covariance(K) -> np.ndarray:
    """Validate a covariance matrix and return it as a float array.

    Raises
    ------
    ValueError
        If ``K`` is not square, not symmetric to 1e-12 relative, or has an
        eigenvalue below ``-1e-9 * trace(K)``.
    """
    K = np.array(K, dtype=np.float64, ndmin=2)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"covariance must be a square matrix, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise ValueError("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(K))) if K.size else 1.0)
    asym = float(np.max(np.abs(K - K.T))) if K.size else 0.0
    if asym > 1e-12 * scale:
        raise ValueError(f"covariance is not symmetric (max |K - K^T| = {asym:.3e})")
    K = 0.5 * (K + K.T)
    if K.size:
        lam_min = float(np.linalg.eigvalsh(K)[0])
        if lam_min < -1e-9 * max(float(np.trace(K)), 0.0) - 1e-300:
            raise ValueError(f"covariance is indefinite: eigenvalue {lam_min:.6e}")
    return K


@dataclass(frozen=True)
class InnovationsDecomposition:
    """Result of :func:`ldl`.

    Attributes
    ----------
    L : ndarray
        Unit lower-triangular factor, ``L[i, j] = <X_i, B_j> / |B_j|^2``.
    D : ndarray
        Innovation variances ``|B_i|^2``; exact zeros mark pass-through stages.
    predictors : tuple of ndarray
        ``predictors[i]`` are the linear-MMSE weights of ``X_i`` on
        ``X_0 .. X_{i-1}`` (minimum-norm when the past is singular).
    """

    L: np.ndarray
    D: np.ndarray
    predictors: tuple

    @property
    def pass_through(self) -> np.ndarray:
        """Boolean mask of stages whose innovation vanishes."""
        return self.D == 0.0

    def innovations(self, x) -> np.ndarray:
        """Innovations ``B = X - prediction`` for sample rows of ``x``."""
        x = np.asarray(x, dtype=np.float64)
        b = x.copy()
        for i in range(1, x.shape[1]):
            b[:, i] = x[:, i] - x[:, :i] @ self.predictors[i]
        return b


def ldl(K, tol: float = SINGULAR_TOL) -> InnovationsDecomposition:
    """LDL^T factorization with linear-MMSE predictor rows.

    Parameters
    ----------
    K : array_like
        Symmetric positive semidefinite ``M x M`` covariance.
    tol : float
        Pivots at or below ``tol * lambda_max(K)`` are set to exactly zero.

    Returns
    -------
    InnovationsDecomposition
    """
    K = check_covariance(K)
    m = K.shape[0]
    lam_max = float(np.linalg.eigvalsh(K)[-1]) if m else 0.0
    floor = tol * lam_max
    L = np.eye(m)
    D = np.zeros(m)
    for i in range(m):
        for j in range(i):
            if D[j] > 0.0:
                L[i, j] = (K[i, j] - np.dot(L[i, :j] * L[j, :j], D[:j])) / D[j]
        d = K[i, i] - np.dot(L[i, :i] ** 2, D[:i])
        D[i] = d if d > floor else 0.0
    predictors = [np.zeros(0)]
    for i in range(1, m):
        # minimum-norm solution, eigenvalues below the global floor dropped
        w, v = np.linalg.eigh(K[:i, :i])
        keep = w > floor
        proj = v[:, keep].T @ K[:i, i]
        predictors.append(v[:, keep] @ (proj / w[keep]))
    return InnovationsDecomposition(L=L, D=D, predictors=tuple(predictors))


def innovations_variances(K, tol: float = SINGULAR_TOL) -> np.ndarray:
    """Innovation variances ``E B_i^2``; zeros mark pass-through stages."""
    return ldl(K, tol).D


@dataclass(frozen=True)
class DegenerateSubspace:
    """Quantization subspace of a possibly singular innovation covariance.

    ``basis`` is an orthogonal ``n x n`` matrix whose first ``rank`` columns
    span the subspace where quantization happens, with variances
    ``eigenvalues``.  The remaining coordinates are passed through.
    """

    rank: int
    basis: np.ndarray
    eigenvalues: np.ndarray

    def complete(self, prediction, quantized) -> np.ndarray:
        """Assemble the output from quantized leading coordinates.

        ``prediction`` has rows in the original axes, ``quantized`` holds the
        first ``rank`` rotated coordinates after quantization.
        """
        rotated = np.asarray(prediction, dtype=np.float64) @ self.basis
        rotated[:, : self.rank] = quantized
        return rotated @ self.basis.T


def vector_gs_degenerate(K_B, tol: float = SINGULAR_TOL) -> DegenerateSubspace:
    """Eigen-split an innovation covariance into quantized and fixed parts.

    Eigenvalues at or below ``tol * lambda_max`` count as zero.  Eigenvectors
    are ordered by decreasing eigenvalue and signed so that their largest
    entry is positive, which makes the basis deterministic.
    """
    K_B = check_covariance(K_B)
    lam, vec = np.linalg.eigh(K_B)
    order = np.argsort(-lam, kind="stable")
    lam, vec = lam[order], vec[:, order]
    for c in range(vec.shape[1]):
        col = vec[:, c]
        if col[np.argmax(np.abs(col))] < 0:
            vec[:, c] = -col
    lam_max = float(lam[0]) if lam.size else 0.0
    if lam_max <= 0.0:
        k = 0
    else:
        k = int(np.sum(lam > tol * lam_max))
    return DegenerateSubspace(rank=k, basis=vec, eigenvalues=lam[:k].copy())


def sequential_chain(K, x1, seed: int = 0, stream_base: int = 0) -> np.ndarray:
    """Scalar sequential dithered quantization driven by ``K``.

    ``X~_1 = x1`` and ``X~_i = Q_i(K_{i-1} X~_1^{i-1} + Z_i) - Z_i`` with the
    noise variance of ``Q_i`` equal to the ``i``-th innovation variance.
    Zero innovations skip the quantizer.

    Returns
    -------
    ndarray
        Shape ``(N, M)``; column 0 is ``x1``.
    """
    dec = ldl(K)
    x1 = np.asarray(x1, dtype=np.float64).ravel()
    m = dec.D.size
    out = np.empty((x1.size, m))
    out[:, 0] = x1
    for i in range(1, m):
        pred = out[:, :i] @ dec.predictors[i]
        if dec.D[i] == 0.0:
            out[:, i] = pred
            continue
        lat = DitheredLattice(step=math.sqrt(12.0 * dec.D[i]), dither_seed=seed,
                              stream_id=stream_base + i)
        out[:, i] = quantize(lat, pred).w
    return out


def cholesky_psd(K) -> np.ndarray:
    """Lower-triangular ``A`` with ``A A^T = K`` for a PSD ``K``.

    Built from the LDL^T factors, so zero pivots give zero columns rather
    than a failure.
    """
    dec = ldl(K)
    return dec.L * np.sqrt(dec.D)[None, :]


def vector_sequential_chain(K, n: int, x1, seed: int = 0, stream_base: int = 0,
                            shaping: str = "cholesky") -> np.ndarray:
    """Vector sequential dithered quantization on ``M`` blocks of size ``n``.

    Each block is produced as ``A [Q(A^{-1} p + Z') - Z']`` where ``p`` is
    the linear-MMSE prediction from earlier blocks, ``Q`` is the cubic
    lattice with unit-variance dither and ``A A^T`` is the innovation
    covariance.  ``shaping`` chooses the Cholesky factor (default) or the
    symmetric eigen factor for ``A``.  A singular innovation covariance is
    quantized only in its nonsingular eigen-subspace.

    Parameters
    ----------
    K : array_like
        ``(M n) x (M n)`` covariance of the stacked blocks.
    n : int
        Block dimension.
    x1 : array_like
        Samples of the first block, shape ``(N, n)``.

    Returns
    -------
    ndarray
        Shape ``(N, M * n)``.
    """
    K = check_covariance(K)
    if K.shape[0] % n:
        raise ValueError(f"covariance size {K.shape[0]} is not a multiple of n={n}")
    if shaping not in ("cholesky", "eigen"):
        raise ValueError(f"unknown shaping {shaping!r}")
    m = K.shape[0] // n
    x1 = np.asarray(x1, dtype=np.float64).reshape(-1, n)
    out = np.empty((x1.shape[0], m * n))
    out[:, :n] = x1
    unit = DitheredLattice(step=math.sqrt(12.0), dimension=n, dither_seed=seed)
    for i in range(1, m):
        prev, cur = slice(0, i * n), slice(i * n, (i + 1) * n)
        kp = K[prev, prev]
        rcond = SINGULAR_TOL if np.max(np.abs(kp)) > 0 else 1.0
        gain = K[cur, prev] @ np.linalg.pinv(kp, rcond=rcond, hermitian=True)
        k_b = K[cur, cur] - gain @ K[prev, cur]
        k_b = 0.5 * (k_b + k_b.T)
        pred = out[:, prev] @ gain.T
        sub = vector_gs_degenerate(k_b)
        if sub.rank == n:
            if shaping == "cholesky":
                a = np.linalg.cholesky(k_b)
            else:
                a = sub.basis @ np.diag(np.sqrt(sub.eigenvalues)) @ sub.basis.T
            lat = DitheredLattice(step=unit.step, dimension=n, dither_seed=seed,
                                  stream_id=stream_base + i)
            v = np.linalg.solve(a, pred.T).T
            out[:, cur] = quantize(lat, v).w @ a.T
        elif sub.rank == 0:
            out[:, cur] = pred
        else:
            k = sub.rank
            lat = DitheredLattice(step=unit.step, dimension=k, dither_seed=seed,
                                  stream_id=stream_base + i)
            scale = np.sqrt(sub.eigenvalues)
            lead = (pred @ sub.basis)[:, :k]
            q = quantize(lat, lead / scale).w * scale
            out[:, cur] = sub.complete(pred, q)
    return out
