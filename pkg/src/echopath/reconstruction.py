"""Self-location from sorted echoes and a registry of known sound sources.

One locate step consumes the echo sets of a single emission and runs:

1. echo matching: combine one squared distance per microphone into columns
   that are consistent with a common sound source (the consistency test is
   the vanishing of the microphones' Cayley-Menger polynomial);
2. source geometry: squared distances between the detected sources, computed
   from the echo columns alone (microphone mutual distances are pose
   invariant, so the local coordinates suffice);
3. a rank test: fewer than four detected sources, or coplanar ones, cannot
   anchor a pose, so the step fails;
4. bootstrap or matching: the first usable emission freezes the vehicle
   frame and stores the detected sources in it; later emissions match four
   detected sources against the registry by submatrix search;
5. self-location: multilaterate the microphones from the four matched
   reference points and factor the result into orientation and position;
6. knowledge update: express all detected sources in the frozen frame and
   register the ones not seen before.

Any internal failure is reported as a FAIL result with a diagnostic tag and
leaves the registry untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cayley_menger import (
    bordered_rank,
    cm_matrix,
    cm_polynomial_batch,
    mutual_distances,
)
from .geometry import (
    DegenerateGeometryError,
    affine_dimension,
    pairwise_squared_distances,
)
from .simulator import EchoSet, Pose


class PoseInconsistencyError(RuntimeError):
    """Recovered orientation is far from orthogonal (bad match or noise overload)."""


@dataclass(frozen=True)
class ReconstructionConfig:
    """Numerical thresholds for one reconstruction pipeline.

    With noise_sigma > 0 the echo-root and matching tolerances are widened
    per step based on the observed distances; the configured values act as
    floors.
    """

    root_tol: float = 1e-9
    eq_tol: float = 1e-6
    rank_tol: float = 1e-6
    dedup_eps: float = 1e-3
    ortho_tol: float = 1e-6
    noise_sigma: float = 0.0
    noise_margin: float = 8.0


@dataclass(eq=False)
class SourceRegistry:
    """Known sound-source positions, all in the frozen coordinate frame."""

    sources: list = field(default_factory=list)
    frame_frozen: bool = False

    def __len__(self) -> int:
        return len(self.sources)

    def as_array(self) -> np.ndarray:
        if not self.sources:
            return np.zeros((0, 3))
        return np.stack(self.sources)


@dataclass(frozen=True, eq=False)
class EchoAssignment:
    """Columns of per-microphone squared distances, one per detected source."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=float)
        if d.ndim != 2 or d.shape[0] != 4:
            raise ValueError(f"assignment must be 4 x m, got shape {d.shape}")
        object.__setattr__(self, "delta", d)

    @property
    def n_sources(self) -> int:
        return self.delta.shape[1]


@dataclass(frozen=True, eq=False)
class LocateResult:
    status: str  # "success" or "fail"
    pose: Pose | None = None
    new_sources: tuple | None = None
    fail_reason: str | None = None

    def __post_init__(self):
        if self.status not in ("success", "fail"):
            raise ValueError("status must be 'success' or 'fail'")
        if self.status == "fail" and (self.pose is not None or self.new_sources is not None):
            raise ValueError("failed results carry no pose and no new sources")


@dataclass
class MatchStats:
    """Operation counts of one submatrix search (for complexity experiments)."""

    comparisons: int = 0
    rank_checks: int = 0


def _polynomial_noise_std(c: np.ndarray, grid: np.ndarray, sigma: float) -> np.ndarray:
    """Predicted std of the consistency polynomial under travel-distance noise.

    Linearizes the determinant in each squared distance (finite differences)
    and propagates independent per-entry noise of std 2*sqrt(x)*sigma.
    """
    base = cm_polynomial_batch(c, grid)
    var = np.zeros(len(grid))
    for k in range(4):
        step = 1e-6 * np.maximum(grid[:, k], 1.0)
        bumped = grid.copy()
        bumped[:, k] += step
        dfdx = (cm_polynomial_batch(c, bumped) - base) / step
        var += (dfdx * (2.0 * np.sqrt(grid[:, k]) * sigma + sigma**2)) ** 2
    return np.sqrt(var)


def echo_match(
    mics,
    e: EchoSet,
    root_tol: float = 1e-9,
    noise_sigma: float = 0.0,
    noise_margin: float = 8.0,
) -> EchoAssignment:
    """Assign echoes to common sources by testing all cross combinations.

    A column (d1, d2, d3, d4) from the product of the four echo sets is kept
    when the Cayley-Menger polynomial of the microphones vanishes on it,
    relative to root_tol times (max d_i)^3. Duplicate columns are merged.

    With noise_sigma > 0 the root test is additionally widened per tuple by
    noise_margin times the polynomial's predicted noise std, so true columns
    survive measurement noise. Combinations that merely come close to
    consistency under noise are kept as well; such ghost columns are expected
    to be discarded later by failing to match known sources.
    """
    mics = np.asarray(mics, dtype=float)
    if affine_dimension(mics) != 3:
        raise DegenerateGeometryError("microphones must be non-coplanar")
    sets = [np.asarray(s, dtype=float) for s in e.d_sets]
    if any(s.size == 0 for s in sets):
        return EchoAssignment(np.zeros((4, 0)))
    grid = np.stack(np.meshgrid(*sets, indexing="ij"), axis=-1).reshape(-1, 4)
    c = cm_matrix(pairwise_squared_distances(mics))
    vals = cm_polynomial_batch(c, grid)
    threshold = root_tol * np.max(grid, axis=1) ** 3
    if noise_sigma > 0.0:
        threshold = threshold + noise_margin * _polynomial_noise_std(c, grid, noise_sigma)
    cols = grid[np.abs(vals) <= threshold]
    if cols.shape[0] == 0:
        return EchoAssignment(np.zeros((4, 0)))
    cols = np.unique(cols, axis=0)
    return EchoAssignment(np.ascontiguousarray(cols.T))


def detected_distance_matrix(mics, a: EchoAssignment) -> np.ndarray:
    """Squared distances between the detected sources.

    Built from the echo columns and the (pose-invariant) microphone mutual
    distances only; no world positions are needed.
    """
    mics = np.asarray(mics, dtype=float)
    if affine_dimension(mics) != 3:
        raise DegenerateGeometryError("microphones must be non-coplanar")
    c = cm_matrix(pairwise_squared_distances(mics))
    m = a.n_sources
    delta_bar = np.vstack([np.ones((1, m)), a.delta])
    return mutual_distances(c, delta_bar)


def match_submatrices(
    a,
    b,
    r: int,
    eq_tol: float = 1e-6,
    rank_tol: float = 1e-6,
    stats: MatchStats | None = None,
):
    """Find index tuples with equal principal submatrices in two symmetric matrices.

    Searches for strictly increasing i_1..i_r and pairwise distinct j_1..j_r
    such that a[i.,i.] equals b[j.,j.] entrywise within eq_tol and the
    selected a-submatrix has bordered rank r-1 (for distance matrices: the
    selected points span a full simplex). The backtracking explores candidate
    tuples in lexicographic order of (i1, j1, i2, j2, ...), so the returned
    solution is the lexicographically least one; None means no solution
    exists. Indices are 0-based.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape[0], b.shape[0]
    if a.ndim != 2 or a.shape[0] != a.shape[1] or b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("match_submatrices expects square matrices")
    if not 1 <= r <= min(m, n):
        raise ValueError(f"r must be between 1 and min(m, n) = {min(m, n)}")

    # State uses 1-based index tuples i[1..k], j[1..k]; slot r+1 exists so the
    # final successful extension has somewhere to write.
    ii = [0] * (r + 2)
    jj = [0] * (r + 2)
    ii[1] = jj[1] = 1
    k = 1
    rank_cache: dict[tuple, int] = {}

    def conditions_hold() -> bool:
        jk = jj[k]
        if jk == n + 1 or jk in jj[1:k]:
            return False
        ik = ii[k]
        for nu in range(1, k + 1):
            if stats is not None:
                stats.comparisons += 1
            if abs(a[ik - 1, ii[nu] - 1] - b[jk - 1, jj[nu] - 1]) > eq_tol:
                return False
        sel = tuple(x - 1 for x in ii[1 : k + 1])
        rank = rank_cache.get(sel)
        if rank is None:
            rank = bordered_rank(a[np.ix_(sel, sel)], rank_tol)
            rank_cache[sel] = rank
            if stats is not None:
                stats.rank_checks += 1
        return rank == k - 1

    while k <= r:
        if conditions_hold():
            ii[k + 1] = ii[k] + 1
            jj[k + 1] = 1
            k += 1
        elif jj[k] < n:
            jj[k] += 1
        elif ii[k] < m - r + k:
            ii[k] += 1
            jj[k] = 1
        elif k > 1:
            jj[k - 1] += 1
            k -= 1
        else:
            return None
    return tuple(x - 1 for x in ii[1 : r + 1]), tuple(x - 1 for x in jj[1 : r + 1])


def _inverse_transpose_top(points: np.ndarray) -> np.ndarray:
    """Upper 3x4 block of the inverse transpose of [[p1..p4], [1..1]]."""
    stacked = np.vstack([points.T, np.ones((1, 4))])
    try:
        inv = np.linalg.inv(stacked)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("reference points are coplanar") from exc
    return inv.T[:3, :]


def self_locate(mic_local, b, delta_cols, ortho_tol: float = 1e-6) -> Pose:
    """Pose of the vehicle from four matched reference points.

    b holds the four reference points (rows, frozen frame) and delta_cols the
    squared microphone-to-reference distances with delta_cols[k, j] the
    distance from microphone k to reference j. Multilaterating each
    microphone from the references and factoring against the local microphone
    coordinates yields (A | v); A must come out orthogonal, anything else
    means the match was wrong or noise dominates.
    """
    mic_local = np.asarray(mic_local, dtype=float)
    b = np.asarray(b, dtype=float)
    delta_cols = np.asarray(delta_cols, dtype=float)
    if b.shape != (4, 3) or mic_local.shape != (4, 3) or delta_cols.shape != (4, 4):
        raise ValueError("self_locate expects 4x3 points and a 4x4 distance block")
    bmat = _inverse_transpose_top(b)
    g = np.einsum("ij,ij->i", b, b)[:, None] - delta_cols.T  # rows j, cols k
    mics_world = 0.5 * bmat @ g  # columns are the microphone positions
    m = np.vstack([mic_local.T, np.ones((1, 4))])
    try:
        av = np.linalg.solve(m.T, mics_world.T).T
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("local microphone matrix is singular") from exc
    rot, v = av[:, :3], av[:, 3]
    defect = float(np.max(np.abs(rot.T @ rot - np.eye(3))))
    if defect > ortho_tol:
        raise PoseInconsistencyError(
            f"recovered orientation deviates from orthogonal by {defect:.3e}"
        )
    return Pose(v, rot, ortho_tol=max(ortho_tol, 1e-9))


def pose_to_euler(a) -> tuple[float, float, float]:
    """Yaw, pitch and roll angles of an orientation matrix (Z-Y-X convention).

    At the gimbal singularity |a31| = 1 the roll is fixed to zero and the
    returned yaw is one representative of the one-parameter family.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (3, 3):
        raise ValueError("expected a 3x3 orientation matrix")
    if abs(a[2, 0]) >= 1.0 - 1e-12:
        pitch = -np.sign(a[2, 0]) * np.pi / 2.0
        roll = 0.0
        yaw = float(np.arctan2(-a[0, 1], a[1, 1]))
    else:
        yaw = float(np.arctan2(a[1, 0], a[0, 0]))
        pitch = float(-np.arcsin(np.clip(a[2, 0], -1.0, 1.0)))
        roll = float(np.arctan2(a[2, 1], a[2, 2]))
    return yaw, float(pitch), roll


def update_sources(b, delta, registry: SourceRegistry, dedup_eps: float = 1e-3) -> list:
    """Express detected sources via reference points and register unseen ones.

    delta[j, k] is the squared distance from reference point b_j to detected
    source k. Sources closer than dedup_eps to a registered one (or to an
    earlier new source) are treated as already known. Returns the list of
    newly added points; the registry is extended in place.
    """
    b = np.asarray(b, dtype=float)
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    if b.shape != (4, 3) or delta.shape[0] != 4:
        raise ValueError("update_sources expects 4 reference points and 4 x m distances")
    bmat = _inverse_transpose_top(b)
    points = 0.5 * bmat @ (np.einsum("ij,ij->i", b, b)[:, None] - delta)
    known = list(registry.sources)
    new = []
    for t in points.T:
        if all(np.linalg.norm(t - s) > dedup_eps for s in known):
            known.append(t)
            new.append(t)
    registry.sources.extend(new)
    return new


def locate_step(
    state: SourceRegistry,
    mic_local,
    e: EchoSet,
    cfg: ReconstructionConfig | None = None,
) -> LocateResult:
    """Run one full locate step against the registry (which it may extend).

    The first call with at least four non-coplanar detected sources seeds the
    registry in the vehicle frame of that moment and returns success without
    a pose; later calls return the pose in that frozen frame. On failure the
    registry is left exactly as it was.
    """
    cfg = cfg if cfg is not None else ReconstructionConfig()
    mic_local = np.asarray(mic_local, dtype=float)
    if affine_dimension(mic_local) != 3:
        raise ValueError("mic_local must be non-coplanar")
    try:
        assignment = echo_match(mic_local, e, cfg.root_tol, cfg.noise_sigma, cfg.noise_margin)
        d_detected = detected_distance_matrix(mic_local, assignment)
        if bordered_rank(d_detected, cfg.rank_tol) < 3:
            return LocateResult("fail", fail_reason="coplanar_sources")
        if len(state) == 0:
            new = update_sources(mic_local, assignment.delta, state, cfg.dedup_eps)
            state.frame_frozen = True
            return LocateResult("success", pose=None, new_sources=tuple(new))
        d_known = pairwise_squared_distances(state.as_array())
        found = match_submatrices(d_detected, d_known, 4, cfg.eq_tol, cfg.rank_tol)
        if found is None:
            return LocateResult("fail", fail_reason="no_match")
        i_idx, j_idx = found
        refs = state.as_array()[list(j_idx)]
        pose = self_locate(mic_local, refs, assignment.delta[:, list(i_idx)], cfg.ortho_tol)
        new = update_sources(refs, d_detected[list(i_idx), :], state, cfg.dedup_eps)
        return LocateResult("success", pose=pose, new_sources=tuple(new))
    except (DegenerateGeometryError, PoseInconsistencyError) as exc:
        return LocateResult("fail", fail_reason=f"{type(exc).__name__}: {exc}")
