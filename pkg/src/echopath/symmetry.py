"""Symmetry breaking by reflection: genericity tests for speaker placement.

A fixed loudspeaker at position v is seen through its reflections in the
walls. Whether those mirror points are free of accidental isometries is a
polynomial condition on v. This module evaluates the individual polynomial
factors of that condition, reports which one vanishes (if any), builds the
classical family of line arrangements for which symmetry breaking is
impossible, and enumerates distance-preserving permutations of small point
sets by brute force.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Hyperplane,
    as_point,
    pairwise_squared_distances,
    reflect_point,
)

DEFAULT_GENERICITY_TOL = 1e-9
_GEOM_TOL = 1e-9
_MAX_AUTOMORPHISM_POINTS = 10


class ConcurrentLinesError(ValueError):
    """Three lines of a 2-d arrangement pass through one point."""


@dataclass(frozen=True)
class Arrangement:
    """A finite set of distinct affine hyperplanes in fixed dimension."""

    hyperplanes: tuple[Hyperplane, ...]
    dimension: int

    def __post_init__(self):
        hs = tuple(self.hyperplanes)
        if not hs:
            raise ValueError("arrangement needs at least one hyperplane")
        for h in hs:
            if h.dim != self.dimension:
                raise ValueError("all hyperplanes must match the arrangement dimension")
        for i, j in itertools.combinations(range(len(hs)), 2):
            if hs[i].same_plane(hs[j]):
                raise ValueError(f"hyperplanes {i} and {j} describe the same plane")
        object.__setattr__(self, "hyperplanes", hs)

    def __len__(self) -> int:
        return len(self.hyperplanes)

    def reflections(self, v) -> np.ndarray:
        """All reflections of v, one row per hyperplane."""
        p = as_point(v, self.dimension)
        return np.stack([reflect_point(h, p) for h in self.hyperplanes])


@dataclass(frozen=True)
class FactorRef:
    """Identifies one vanishing polynomial factor by kind and hyperplane tuple."""

    kind: str  # "g", "h" or "f"
    planes: tuple
    value: float

    def __str__(self) -> str:
        return f"{self.kind}{list(self.planes)!r} = {self.value:.3e}"


@dataclass(frozen=True)
class GenericityReport:
    passed: bool
    failed_factor: FactorRef | None = None

    def __post_init__(self):
        if self.passed != (self.failed_factor is None):
            raise ValueError("passed must hold exactly when no factor failed")


def eval_g(h1: Hyperplane, h2: Hyperplane, h3: Hyperplane, v) -> float:
    """Squared mirror-pair distance of (h1, h3) minus squared reflection
    distance of h2: ||ref1(v) - ref3(v)||^2 - ||ref2(v) - v||^2."""
    p = as_point(v)
    w1 = reflect_point(h1, p)
    w3 = reflect_point(h3, p)
    w2 = reflect_point(h2, p)
    return float(np.sum((w1 - w3) ** 2) - np.sum((w2 - p) ** 2))


def eval_h(h1: Hyperplane, h2: Hyperplane, v) -> float:
    """Difference of squared reflection distances to two distinct planes."""
    if h1.same_plane(h2):
        raise ValueError("eval_h needs two distinct hyperplanes")
    p = as_point(v)
    w1 = reflect_point(h1, p)
    w2 = reflect_point(h2, p)
    return float(np.sum((w1 - p) ** 2) - np.sum((w2 - p) ** 2))


def _line_triples_concurrent(hs) -> tuple[int, int, int] | None:
    """First triple of 2-d lines meeting in one point, or None."""
    k = len(hs)
    for a, b in itertools.combinations(range(k), 2):
        mat = np.stack([hs[a].normal, hs[b].normal])
        if abs(np.linalg.det(mat)) < _GEOM_TOL:
            continue  # parallel pair, no intersection point
        p = np.linalg.solve(mat, np.array([hs[a].offset, hs[b].offset]))
        for c in range(k):
            if c in (a, b):
                continue
            if abs(hs[c].normal @ p - hs[c].offset) <= _GEOM_TOL * (1.0 + np.linalg.norm(p)):
                return tuple(sorted((a, b, c)))
    return None


def _ordered_triples(k: int) -> np.ndarray:
    idx = np.indices((k, k, k)).reshape(3, -1).T
    return idx  # lexicographic order


def _independent_triple_mask(normals: np.ndarray, triples: np.ndarray) -> np.ndarray:
    # Unit normals: the triple is independent exactly when its 3x3 determinant
    # is away from zero (repeated indices give determinant zero for free).
    mats = normals[triples]  # (s, 3, 3)
    return np.abs(np.linalg.det(mats)) > 1e-9


def genericity_check(
    a: Arrangement,
    v,
    tol: float = DEFAULT_GENERICITY_TOL,
    allow_concurrent: bool = False,
) -> GenericityReport:
    """Decide whether v breaks all reflection symmetries of the arrangement.

    Evaluates every factor of the symmetry-breaking polynomial at v and
    passes only if all of them stay above tol * scale^2, where scale is the
    largest distance from v to one of its reflections. The reported factor is
    the first vanishing one in scan order (g factors, then h, then f).

    In dimension 2 the guarantee requires that no three lines meet in one
    point; such arrangements are rejected unless allow_concurrent is set, in
    which case the factors are still evaluated (for them, some f factor
    vanishes identically in v).
    """
    p = as_point(v, a.dimension)
    hs = a.hyperplanes
    k = len(hs)
    if a.dimension == 2 and not allow_concurrent:
        triple = _line_triples_concurrent(hs)
        if triple is not None:
            raise ConcurrentLinesError(
                f"lines {triple} meet in one point; the 2-d genericity "
                "guarantee does not apply (pass allow_concurrent=True to "
                "evaluate the factors anyway)"
            )

    refl = a.reflections(p)
    pair_sq = pairwise_squared_distances(refl)  # ||w_a - w_b||^2
    refl_sq = np.sum((refl - p) ** 2, axis=1)  # ||w_a - v||^2
    scale_sq = float(np.max(refl_sq))
    threshold = tol * scale_sq

    # g factors over all ordered triples (a, b, c).
    g_vals = pair_sq[:, None, :] - refl_sq[None, :, None]
    bad = np.argwhere(np.abs(g_vals) <= threshold)
    if bad.size:
        i, j, l = (int(x) for x in bad[0])
        return GenericityReport(False, FactorRef("g", (i, j, l), float(g_vals[i, j, l])))

    # h factors over ordered pairs of distinct planes.
    h_vals = refl_sq[:, None] - refl_sq[None, :]
    h_bad = np.abs(h_vals) <= threshold
    np.fill_diagonal(h_bad, False)
    bad = np.argwhere(h_bad)
    if bad.size:
        i, j = (int(x) for x in bad[0])
        return GenericityReport(False, FactorRef("h", (i, j), float(h_vals[i, j])))

    if a.dimension >= 3:
        return _check_f_triples(hs, pair_sq, threshold)
    return _check_f_pairs(hs, pair_sq, threshold)


def _check_f_triples(hs, pair_sq: np.ndarray, threshold: float) -> GenericityReport:
    # For each ordered triple with independent normals, the three mirror-pair
    # distances must differ from those of every other ordered triple. The
    # factor is a sum of three squared differences; its square root is held
    # to the same squared-distance threshold as the g and h factors.
    k = len(hs)
    normals = np.stack([h.normal for h in hs])
    triples = _ordered_triples(k)  # (s, 3)
    indep_idx = np.flatnonzero(_independent_triple_mask(normals, triples))
    if indep_idx.size == 0:
        return GenericityReport(True, None)
    pair_vec = np.stack(
        [
            pair_sq[triples[:, 0], triples[:, 1]],
            pair_sq[triples[:, 0], triples[:, 2]],
            pair_sq[triples[:, 1], triples[:, 2]],
        ],
        axis=1,
    )  # (s, 3)
    s = len(triples)
    chunk = max(1, 2_000_000 // s)
    for start in range(0, indep_idx.size, chunk):
        rows = indep_idx[start : start + chunk]
        diffs = pair_vec[rows][:, None, :] - pair_vec[None, :, :]
        f_vals = np.sum(diffs**2, axis=2)  # (chunk, s)
        f_vals[np.arange(rows.size), rows] = np.inf  # each tuple vs itself
        flat = int(np.argmin(f_vals))
        ti, oj = divmod(flat, s)
        if np.sqrt(f_vals[ti, oj]) <= threshold:
            return GenericityReport(
                False,
                FactorRef(
                    "f",
                    (tuple(int(x) for x in triples[rows[ti]]), tuple(int(x) for x in triples[oj])),
                    float(f_vals[ti, oj]),
                ),
            )
    return GenericityReport(True, None)


def _check_f_pairs(hs, pair_sq: np.ndarray, threshold: float) -> GenericityReport:
    # 2-d form: the mirror-pair distance of each non-parallel pair must
    # differ from that of every other pair (ordered pairs collapse to sets).
    k = len(hs)
    normals = np.stack([h.normal for h in hs])
    indep_pairs = [
        (i, j)
        for i, j in itertools.combinations(range(k), 2)
        if abs(np.linalg.det(normals[[i, j]])) > _GEOM_TOL
    ]
    all_pairs = [(i, j) for i in range(k) for j in range(i, k)]
    pair_vals = np.array([pair_sq[i, j] for i, j in all_pairs])
    for t in indep_pairs:
        f_vals = pair_sq[t[0], t[1]] - pair_vals
        for idx, other in enumerate(all_pairs):
            if other == t:
                continue
            if abs(f_vals[idx]) <= threshold:
                return GenericityReport(
                    False, FactorRef("f", (t, other), float(f_vals[idx]))
                )
    return GenericityReport(True, None)


def dihedral_counterexample(k: int) -> Arrangement:
    """k lines through the origin at angles i*pi/k, i = 0..k-1.

    The reflections of any point in these lines form a regular k-gon, so no
    choice of point breaks the symmetry of this arrangement.
    """
    if k < 3:
        raise ValueError("need at least three lines")
    lines = []
    for i in range(k):
        theta = i * np.pi / k
        lines.append(Hyperplane(np.array([-np.sin(theta), np.cos(theta)]), 0.0))
    return Arrangement(tuple(lines), 2)


def distance_automorphisms(points, tol: float = 1e-9) -> list[tuple[int, ...]]:
    """All permutations of the points preserving every pairwise distance.

    Brute-force search over permutations (pruned on partial assignments),
    limited to 10 points. The identity is always part of the result.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    k = pts.shape[0]
    if k > _MAX_AUTOMORPHISM_POINTS:
        raise ValueError(f"at most {_MAX_AUTOMORPHISM_POINTS} points supported, got {k}")
    dist = np.sqrt(pairwise_squared_distances(pts))
    found: list[tuple[int, ...]] = []

    def extend(partial: list[int]):
        i = len(partial)
        if i == k:
            found.append(tuple(partial))
            return
        for cand in range(k):
            if cand in partial:
                continue
            if all(abs(dist[cand, partial[j]] - dist[i, j]) <= tol for j in range(i)):
                extend(partial + [cand])

    extend([])
    return found
