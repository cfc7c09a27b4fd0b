"""Deterministic image-source simulator for a four-microphone vehicle.

Each emission of the fixed loudspeaker reaches a microphone directly and,
once per wall, via a first-order reflection. In the ray model the reflected
path has the length of the straight line from the wall's mirror point, so
simulating an emission reduces to distance computations against the set of
sound sources (speaker plus mirror points). Travel-distance noise is drawn
from a counter-keyed generator, which makes every echo set a pure function
of (scenario, pose, pose index).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import (
    DegenerateGeometryError,
    Hyperplane,
    Wall,
    affine_dimension,
    as_point,
    mirror_point,
    plane_basis,
    point_in_polygon,
)

ORTHOGONALITY_TOL = 1e-9
_MIC_SOURCE_EPS = 1e-9


def rotation_from_yaw_pitch_roll(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rotation matrix Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    ca, sa = np.cos(yaw), np.sin(yaw)
    cb, sb = np.cos(pitch), np.sin(pitch)
    cg, sg = np.cos(roll), np.sin(roll)
    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cg, -sg], [0.0, sg, cg]])
    return rz @ ry @ rx


@dataclass(frozen=True, eq=False)
class Pose:
    """Vehicle state: center-of-mass position v and orientation matrix A.

    A must be orthogonal; its columns are the vehicle's principal axes
    expressed in the surrounding frame.
    """

    v: np.ndarray
    A: np.ndarray
    ortho_tol: float = ORTHOGONALITY_TOL

    def __post_init__(self):
        v = as_point(self.v, 3)
        a = np.asarray(self.A, dtype=float)
        if a.shape != (3, 3):
            raise ValueError(f"orientation matrix must be 3x3, got {a.shape}")
        defect = np.max(np.abs(a.T @ a - np.eye(3)))
        if defect > self.ortho_tol:
            raise ValueError(f"orientation matrix is not orthogonal (defect {defect:.2e})")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "A", a)


@dataclass(frozen=True)
class EchoSet:
    """Squared travel distances per microphone, exact duplicates merged."""

    d_sets: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.d_sets) != 4:
            raise ValueError("an echo set holds one distance set per microphone (4)")
        cleaned = []
        for entries in self.d_sets:
            vals = tuple(sorted(set(float(x) for x in entries)))
            if any(not np.isfinite(x) or x <= 0.0 for x in vals):
                raise ValueError("echo entries must be positive and finite")
            cleaned.append(vals)
        object.__setattr__(self, "d_sets", tuple(cleaned))

    def __len__(self) -> int:
        return len(self.d_sets)


@dataclass(frozen=True, eq=False)
class Scenario:
    """World description driving the simulator.

    speaker holds the world position of the loudspeaker, or, when
    speaker_on_vehicle is set, its fixed offset in the vehicle frame.
    Dimension-2 scenarios carry walls and speaker only (for the symmetry
    demos); microphones and path require dimension 3.
    """

    walls: tuple[Wall, ...]
    speaker: np.ndarray | None = None
    mic_local: np.ndarray | None = None
    path: tuple[Pose, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0
    occlusion_enabled: bool = True
    speaker_on_vehicle: bool = False
    dimension: int = 3

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        walls = tuple(self.walls)
        if not walls:
            raise ValueError("scenario needs at least one wall")
        for i, w in enumerate(walls):
            if w.plane.dim != self.dimension:
                raise ValueError(f"walls[{i}] does not match scenario dimension")
        object.__setattr__(self, "walls", walls)
        if self.speaker_on_vehicle and self.dimension != 3:
            raise ValueError("speaker_on_vehicle requires a 3-d scenario")
        if self.speaker is not None:
            object.__setattr__(self, "speaker", as_point(self.speaker, self.dimension))
        elif self.speaker_on_vehicle:
            raise ValueError("speaker offset required when speaker_on_vehicle is set")
        if self.mic_local is not None:
            mics = np.asarray(self.mic_local, dtype=float)
            if self.dimension != 3:
                raise ValueError("microphones require a 3-d scenario")
            if mics.shape != (4, 3):
                raise ValueError(f"mic_local must be 4 points in 3-d, got shape {mics.shape}")
            if affine_dimension(mics) != 3:
                raise ValueError("mic_local must be non-coplanar")
            object.__setattr__(self, "mic_local", mics)
        path = tuple(self.path)
        if path and self.dimension != 3:
            raise ValueError("a pose path requires a 3-d scenario")
        object.__setattr__(self, "path", path)
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def with_overrides(self, **kwargs) -> "Scenario":
        return replace(self, **kwargs)


def world_microphones(s: Scenario, p: Pose) -> np.ndarray:
    """Microphone positions A @ m_k + v for the given pose, one row each."""
    if s.mic_local is None:
        raise ValueError("scenario has no microphones")
    return s.mic_local @ p.A.T + p.v


def speaker_position(s: Scenario, p: Pose) -> np.ndarray:
    """World position of the loudspeaker for this emission."""
    if s.speaker is None:
        raise ValueError("scenario has no speaker")
    if s.speaker_on_vehicle:
        return p.A @ s.speaker + p.v
    return s.speaker


def image_sources(walls, speaker) -> np.ndarray:
    """The speaker and one mirror point per wall, one row each."""
    spk = as_point(speaker)
    return np.stack([spk] + [mirror_point(w, spk) for w in walls])


def _reflection_audible(wall: Wall, mic: np.ndarray, mirror: np.ndarray) -> bool:
    # The echo exists when the segment microphone -> mirror point crosses the
    # wall's polygon (the actual reflection point lies on the finite wall).
    d_mic = wall.plane.signed_distance(mic)
    d_mirror = wall.plane.signed_distance(mirror)
    if d_mic * d_mirror >= 0.0:
        return False  # segment does not cross the plane
    t = d_mic / (d_mic - d_mirror)
    hit = mic + t * (mirror - mic)
    basis = plane_basis(wall.plane.normal)
    return point_in_polygon(basis @ hit, wall.boundary @ basis.T)


def source_audibility(s: Scenario, p: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Sound sources for the emission and their per-microphone audibility.

    Returns (sources, audible) where sources has one row per source (speaker
    first, then one mirror point per wall in wall order) and audible is a
    boolean (n_sources, 4) matrix. The direct path is always audible;
    reflections are subject to the occlusion test when the wall is bounded
    and occlusion is enabled.
    """
    if s.mic_local is None:
        raise ValueError("scenario has no microphones")
    spk = speaker_position(s, p)
    sources = image_sources(s.walls, spk)
    mics = world_microphones(s, p)
    audible = np.ones((len(sources), 4), dtype=bool)
    if s.occlusion_enabled:
        for wi, wall in enumerate(s.walls):
            if not wall.bounded:
                continue  # unbounded plane: occlusion test forced off
            for k in range(4):
                audible[1 + wi, k] = _reflection_audible(wall, mics[k], sources[1 + wi])
    return sources, audible


def ground_truth_sources(s: Scenario, p: Pose) -> list[np.ndarray]:
    """Speaker position plus mirror points heard by at least one microphone.

    With occlusion disabled (or all walls unbounded) this is simply the
    speaker and every mirror point.
    """
    if s.mic_local is None or not s.occlusion_enabled or not any(w.bounded for w in s.walls):
        return list(image_sources(s.walls, speaker_position(s, p)))
    sources, audible = source_audibility(s, p)
    return [sources[i] for i in range(len(sources)) if audible[i].any()]


def _noise(seed: int, pose_index: int, mic_index: int, source_index: int, sigma: float) -> float:
    if sigma == 0.0:
        return 0.0
    rng = np.random.default_rng((seed, pose_index, mic_index, source_index))
    return float(rng.standard_normal() * sigma)


def generate_echoes(s: Scenario, p: Pose, pose_index: int = 0) -> EchoSet:
    """Squared travel distances seen by each microphone for one emission.

    Only first-order reflections are modelled. Gaussian noise of standard
    deviation noise_sigma is applied to each travel distance before squaring,
    keyed by (seed, pose index, microphone index, source index).
    """
    sources, audible = source_audibility(s, p)
    mics = world_microphones(s, p)
    dists = np.linalg.norm(sources[:, None, :] - mics[None, :, :], axis=2)
    if np.min(dists) < _MIC_SOURCE_EPS:
        raise DegenerateGeometryError("a microphone coincides with a sound source")
    d_sets = []
    for k in range(4):
        entries = []
        for i in range(len(sources)):
            if not audible[i, k]:
                continue
            d = dists[i, k] + _noise(s.seed, pose_index, k, i, s.noise_sigma)
            entries.append(d * d)
        d_sets.append(tuple(entries))
    return EchoSet(tuple(d_sets))


def ambiguity_pair(
    s: Scenario, pose_a: int = 0, pose_b: int = 1
) -> tuple[Pose, Pose, EchoSet, EchoSet]:
    """Two path poses and their noiseless echo sets, for symmetry demos.

    With the speaker mounted on the vehicle and a pose pair related by a
    symmetry of the walls, the two echo sets coincide and the poses cannot be
    told apart; with a fixed generic speaker they differ.
    """
    if not (0 <= pose_a < len(s.path) and 0 <= pose_b < len(s.path)):
        raise ValueError("pose indices out of range")
    noiseless = s.with_overrides(noise_sigma=0.0)
    pa, pb = s.path[pose_a], s.path[pose_b]
    return pa, pb, generate_echoes(noiseless, pa, pose_a), generate_echoes(noiseless, pb, pose_b)


def echo_set_difference(a: EchoSet, b: EchoSet) -> float:
    """Largest per-microphone Hausdorff distance between travel distances (m)."""
    worst = 0.0
    for da, db in zip(a.d_sets, b.d_sets):
        ra = np.sqrt(np.asarray(da))
        rb = np.sqrt(np.asarray(db))
        forward = np.max([np.min(np.abs(rb - x)) for x in ra])
        backward = np.max([np.min(np.abs(ra - x)) for x in rb])
        worst = max(worst, forward, backward)
    return float(worst)


def rigidly_transformed(s: Scenario, rotation: np.ndarray, translation) -> Scenario:
    """The same scenario expressed after a global rigid motion.

    Walls, speaker and path move together, so all echo sets are preserved.
    """
    r = np.asarray(rotation, dtype=float)
    t = as_point(translation, s.dimension)
    walls = []
    for w in s.walls:
        normal = r @ w.plane.normal
        offset = w.plane.offset + float(normal @ t)
        boundary = None if w.boundary is None else w.boundary @ r.T + t
        walls.append(Wall(Hyperplane(normal, offset), boundary))
    speaker = s.speaker
    if speaker is not None and not s.speaker_on_vehicle:
        speaker = r @ speaker + t
    path = tuple(Pose(r @ p.v + t, r @ p.A) for p in s.path)
    return s.with_overrides(walls=tuple(walls), speaker=speaker, path=path)
