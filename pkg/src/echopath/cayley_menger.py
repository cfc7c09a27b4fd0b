"""Distance algebra: Cayley-Menger matrices, bordered rank, point recovery.

A distance matrix here is always a symmetric matrix of *squared* Euclidean
distances with zero diagonal. Bordering such a matrix with a 0/1 row and
column gives the classical Cayley-Menger matrix, whose rank encodes the
affine dimension of the generating points. Everything below builds on that
fact: rank tests, a consistency polynomial for echo profiles, barycentric
point recovery, and cross-set distance computation that needs only distances
to a fixed affine basis.
"""

from __future__ import annotations

import numpy as np

from .geometry import DegenerateGeometryError, affine_dimension

DEFAULT_RANK_TOL = 1e-6


def validate_distance_matrix(d: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Check symmetry, zero diagonal and nonnegativity of a squared-distance matrix."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    bound = tol * max(scale, 1.0)
    if np.max(np.abs(d - d.T), initial=0.0) > bound:
        raise ValueError("distance matrix must be symmetric")
    if np.max(np.abs(np.diag(d)), initial=0.0) > bound:
        raise ValueError("distance matrix must have zero diagonal")
    if d.size and float(np.min(d)) < -bound:
        raise ValueError("distance matrix entries must be nonnegative")
    return d


def border(m: np.ndarray) -> np.ndarray:
    """Surround a square matrix with a leading 0/1 row and column."""
    m = np.asarray(m, dtype=float)
    k = m.shape[0]
    out = np.ones((k + 1, k + 1))
    out[0, 0] = 0.0
    out[1:, 1:] = m
    return out


def cm_matrix(d: np.ndarray) -> np.ndarray:
    """Cayley-Menger matrix of a squared-distance matrix: its 0/1 bordering.

    For k points the result is (k+1) x (k+1).
    """
    return border(validate_distance_matrix(d))


def bordered_rank(m: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
    """Rank of the bordered matrix minus 2.

    For the squared-distance matrix of a point set this equals the affine
    dimension of the set. Rank uses singular values above tol * sigma_max.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("bordered_rank expects a square matrix")
    s = np.linalg.svd(border(m), compute_uv=False)
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    return rank - 2


def cm_polynomial(c: np.ndarray, x) -> float:
    """Echo-profile consistency polynomial for four microphones.

    c is the 5x5 Cayley-Menger matrix of the microphones and x four candidate
    squared distances, one per microphone. The value is the determinant of c
    bordered by (1, x1..x4); it vanishes when x is the squared-distance
    profile of an actual point relative to the microphones.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ValueError("cm_polynomial expects exactly four squared distances")
    return float(cm_polynomial_batch(c, x[None, :])[0])


def cm_polynomial_batch(c: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Vectorized cm_polynomial over rows of xs (shape (k, 4))."""
    c = np.asarray(c, dtype=float)
    if c.shape != (5, 5):
        raise ValueError(f"microphone Cayley-Menger matrix must be 5x5, got {c.shape}")
    xs = np.asarray(xs, dtype=float)
    k = xs.shape[0]
    full = np.zeros((k, 6, 6))
    full[:, :5, :5] = c
    full[:, 0, 5] = 1.0
    full[:, 5, 0] = 1.0
    full[:, 1:5, 5] = xs
    full[:, 5, 1:5] = xs
    return np.linalg.det(full)


def recover_point(basis: np.ndarray, d) -> np.ndarray:
    """Coordinates of the point at given squared distances from an affine basis.

    basis holds n+1 points spanning R^n; d their n+1 squared distances to the
    unknown point. Solves the bordered Gram system for the barycentric
    coordinates and returns their combination of the basis points.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    d = np.asarray(d, dtype=float)
    n = basis.shape[1]
    if basis.shape[0] != n + 1:
        raise ValueError(f"need {n + 1} basis points in dimension {n}")
    if d.shape != (n + 1,):
        raise ValueError("need one squared distance per basis point")
    if affine_dimension(basis) < n:
        raise DegenerateGeometryError("basis points do not span the space")
    gram = basis @ basis.T
    imat = border(gram)
    rhs = np.empty(n + 2)
    rhs[0] = 2.0
    rhs[1:] = np.einsum("ij,ij->i", basis, basis) - d
    try:
        sol = np.linalg.solve(imat, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("bordered Gram matrix is singular") from exc
    alpha = 0.5 * sol[1:]
    return alpha @ basis


def mutual_distances(c: np.ndarray, delta: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Squared distances between points known only by distances to a basis.

    c is the Cayley-Menger matrix of n+1 basis points spanning R^n and each
    column of delta is (1, d_0, ..., d_n) for one target point. Returns
    delta^T c^{-1} delta, symmetrized, with the diagonal forced to zero and
    negative round-off clamped.
    """
    c = np.asarray(c, dtype=float)
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("Cayley-Menger matrix must be square")
    if delta.shape[0] != c.shape[0]:
        raise ValueError(
            f"delta must have {c.shape[0]} rows to match the basis, got {delta.shape[0]}"
        )
    if np.max(np.abs(delta[0] - 1.0), initial=0.0) > tol:
        raise ValueError("first row of delta must be all ones")
    try:
        solved = np.linalg.solve(c, delta)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError(
            "Cayley-Menger matrix is singular; basis points do not span the space"
        ) from exc
    out = delta.T @ solved
    out = 0.5 * (out + out.T)
    # Exact arithmetic yields a zero diagonal and nonnegative entries; the
    # deviations seen here are round-off (or measurement noise) and are
    # projected away so downstream code sees a valid distance matrix.
    np.fill_diagonal(out, 0.0)
    np.clip(out, 0.0, None, out=out)
    return out
