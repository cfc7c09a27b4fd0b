import itertools
from pathlib import Path

import numpy as np
import pytest

from echopath import (
    Hyperplane,
    Pose,
    Scenario,
    Wall,
    bordered_rank,
    rotation_from_yaw_pitch_roll,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def box_walls(lx: float, ly: float, lz: float) -> tuple:
    return (
        Wall(Hyperplane([1, 0, 0], 0.0)),
        Wall(Hyperplane([1, 0, 0], lx)),
        Wall(Hyperplane([0, 1, 0], 0.0)),
        Wall(Hyperplane([0, 1, 0], ly)),
        Wall(Hyperplane([0, 0, 1], 0.0)),
        Wall(Hyperplane([0, 0, 1], lz)),
    )


def tetra_mics(edge: float = 0.7) -> np.ndarray:
    verts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    return verts * edge / (2.0 * np.sqrt(2.0))


def demo_path() -> tuple:
    spec = [
        ((2.0, 1.5, 1.0), (0.0, 0.0, 0.0)),
        ((2.5, 2.0, 1.2), (0.4, -0.1, 0.05)),
        ((3.5, 3.0, 1.5), (1.2, 0.2, -0.3)),
        ((4.2, 2.2, 0.8), (-0.8, 0.15, 0.25)),
        ((3.0, 3.8, 1.8), (2.2, -0.25, 0.4)),
        ((2.2, 3.2, 0.9), (-2.0, 0.1, -0.2)),
        ((4.5, 4.0, 2.0), (2.9, 0.35, 0.5)),
        ((3.8, 1.2, 1.4), (-1.5, -0.3, -0.45)),
        ((1.6, 3.9, 2.2), (0.9, 0.45, 0.15)),
        ((4.8, 3.1, 1.1), (-2.7, -0.2, 0.3)),
    ]
    return tuple(Pose(v, rotation_from_yaw_pitch_roll(*ypr)) for v, ypr in spec)


def box_scenario(**overrides) -> Scenario:
    base = dict(
        walls=box_walls(6.0, 5.0, 3.0),
        speaker=[1.1, 2.3, 1.7],
        mic_local=tetra_mics(),
        path=demo_path(),
        noise_sigma=0.0,
        seed=20240601,
        occlusion_enabled=False,
    )
    base.update(overrides)
    return Scenario(**base)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return rotation_from_yaw_pitch_roll(
        rng.uniform(-np.pi, np.pi), rng.uniform(-1.2, 1.2), rng.uniform(-np.pi, np.pi)
    )


def brute_force_match(a, b, r, eq_tol=1e-6, rank_tol=1e-6):
    """Exhaustive submatrix matcher, independent of the backtracking search.

    Enumerates every increasing i-tuple and distinct j-tuple, keeps those
    with entrywise-equal submatrices (within eq_tol) whose selected block has
    bordered rank r-1, and returns the least in lexicographic
    (i1, j1, i2, j2, ...) order, or None.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape[0], b.shape[0]
    i_tuples = list(itertools.combinations(range(m), r))
    j_tuples = list(itertools.permutations(range(n), r))
    if not i_tuples or not j_tuples:
        return None
    sub_a = np.array([a[np.ix_(t, t)] for t in i_tuples])
    sub_b = np.array([b[np.ix_(t, t)] for t in j_tuples])
    rank_ok = np.array([bordered_rank(a[np.ix_(t, t)], rank_tol) == r - 1 for t in i_tuples])
    worst = np.abs(sub_a[:, None, :, :] - sub_b[None, :, :, :]).max(axis=(2, 3))
    hits = np.argwhere((worst <= eq_tol) & rank_ok[:, None])
    if hits.size == 0:
        return None

    def interleaved(hit):
        it, jt = i_tuples[hit[0]], j_tuples[hit[1]]
        return tuple(x for pair in zip(it, jt) for x in pair)

    best = min(hits, key=interleaved)
    return tuple(i_tuples[best[0]]), tuple(j_tuples[best[1]])


@pytest.fixture
def scenario_dir() -> Path:
    return SCENARIO_DIR
