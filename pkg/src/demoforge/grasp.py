"""Object-agnostic 6-DoF grasp candidates and task-conditioned 2D filtering.

Candidates are enumerated, not learned: for every graspable part, downward
approaches from 8 azimuths x 2 elevations (0 and 45 degrees off vertical),
centered at the part's grasp point, with width equal to the part extent across
the closure axis. The quality score is a monotone heuristic (narrower width
and more vertical approach rank higher); the engine only consumes the ranking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoCandidatesError, OffsetTooLargeError
from .geometry import (
    Pose6D,
    Vec3,
    frame_quat,
    quat_rotate,
    vec_add,
    vec_cross,
    vec_norm,
    vec_scale,
    vec_sub,
    vec_unit,
)
from .render import ViewFrame
from .world import (
    GRIPPER_MAX_WIDTH,
    GRIPPER_SPHERE_RADIUS,
    WorldState,
    _aabb_distance,
    _closure_width,
)

N_AZIMUTHS = 8
ELEVATIONS_DEG = (0.0, 45.0)
PRE_CONTACT_DISTANCE = 0.10
DEFAULT_DEPTH_TOL = 0.02


@dataclass(frozen=True)
class GraspCandidate:
    pose: Pose6D              # tool-center pose; +z is the approach direction
    width: float
    quality: float
    approach: Vec3            # unit, world frame, points from gripper toward the part
    source_object: str
    source_part: str

    def __post_init__(self):
        if not (0.0 < self.width <= GRIPPER_MAX_WIDTH):
            raise ValueError(f"grasp width {self.width} outside (0, {GRIPPER_MAX_WIDTH}]")
        if not (0.0 <= self.quality <= 1.0):
            raise ValueError(f"quality {self.quality} outside [0, 1]")
        if abs(vec_norm(self.approach) - 1.0) > 1e-9:
            raise ValueError("approach must be unit-norm")


@dataclass(frozen=True)
class BBox2D:
    view: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("empty bbox")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)


def verticality(approach) -> float:
    """1 for straight-down approaches, 0 for horizontal or upward."""
    return max(0.0, -approach[2])


def _approach_dir(azimuth: float, elevation: float) -> Vec3:
    """Downward approach tilted `elevation` rad off vertical toward `azimuth`."""
    return (
        math.sin(elevation) * math.cos(azimuth),
        math.sin(elevation) * math.sin(azimuth),
        -math.cos(elevation),
    )


def sample_grasps(state: WorldState, seed: int = 0) -> list[GraspCandidate]:
    """Enumerate antipodal candidates for every graspable part in the scene.

    Deterministic: objects in sorted id order, parts sorted, azimuth-major then
    elevation. The seed parameter is accepted for interface stability but the
    fixed enumeration does not consume randomness.
    """
    del seed
    candidates: list[GraspCandidate] = []
    aabbs = [(o.id, o.world_aabb()) for o in state.objects]
    for obj in sorted(state.objects, key=lambda o: o.id):
        if not obj.graspable:
            continue
        for pname in sorted(obj.parts):
            center = obj.world_grasp_point(pname)
            for ai in range(N_AZIMUTHS):
                azimuth = 2.0 * math.pi * ai / N_AZIMUTHS
                for elev_deg in ELEVATIONS_DEG:
                    approach = _approach_dir(azimuth, math.radians(elev_deg))
                    closure = (-math.sin(azimuth), math.cos(azimuth), 0.0)
                    width = _closure_width(obj, pname, closure)
                    if not (0.0 < width <= GRIPPER_MAX_WIDTH):
                        continue
                    pre_contact = vec_sub(center, vec_scale(approach, PRE_CONTACT_DISTANCE))
                    if any(
                        _aabb_distance(pre_contact, lo, hi) < GRIPPER_SPHERE_RADIUS
                        for _, (lo, hi) in aabbs
                    ):
                        continue
                    y_axis = vec_unit(vec_cross(approach, closure))
                    quality = 0.5 * (1.0 - width / GRIPPER_MAX_WIDTH) + 0.5 * verticality(approach)
                    candidates.append(
                        GraspCandidate(
                            pose=Pose6D(center, frame_quat(closure, y_axis, approach)),
                            width=width,
                            quality=quality,
                            approach=approach,
                            source_object=obj.id,
                            source_part=pname,
                        )
                    )
    return candidates


def filter_by_bbox(
    candidates: list[GraspCandidate],
    view: ViewFrame,
    bbox: BBox2D,
    depth_tol: float = DEFAULT_DEPTH_TOL,
) -> list[GraspCandidate]:
    """Keep candidates whose center projects inside the bbox and is not occluded.

    A candidate survives iff (a) its grasp-center pixel lies inside the bbox,
    (b) its camera range does not exceed the rendered depth at that pixel by
    more than depth_tol (pixels with no rendered surface never occlude), and
    (c) it projects in front of the camera.
    """
    cam = view.camera
    kept = []
    for cand in candidates:
        u, v, rng, in_front = cam.project(np.asarray([cand.pose.position]))
        if not bool(in_front[0]):
            continue
        x, y = float(u[0]), float(v[0])
        if not bbox.contains(x, y):
            continue
        px, py = int(math.floor(x)), int(math.floor(y))
        if not (0 <= px < cam.width and 0 <= py < cam.height):
            continue
        surface = float(view.depth[py, px])
        if surface > 0.0 and float(rng[0]) - surface > depth_tol:
            continue
        kept.append(cand)
    return kept


def select_best(
    candidates: list[GraspCandidate],
    view: ViewFrame | None = None,
    bbox: BBox2D | None = None,
) -> GraspCandidate:
    """Argmax quality; ties broken by projected distance to the bbox center,
    then by list position."""
    if not candidates:
        raise NoCandidatesError("no grasp candidates to select from")
    scored = []
    for i, cand in enumerate(candidates):
        dist = 0.0
        if view is not None and bbox is not None:
            u, v, _, in_front = view.camera.project(np.asarray([cand.pose.position]))
            if bool(in_front[0]):
                cx, cy = bbox.center()
                dist = math.hypot(float(u[0]) - cx, float(v[0]) - cy)
            else:
                dist = math.inf
        scored.append((-cand.quality, dist, i))
    scored.sort()
    return candidates[scored[0][2]]


def apply_offset(grasp: GraspCandidate, offset: Vec3, frame: str = "world") -> Pose6D:
    """Translate a grasp pose in the world frame or the approach-aligned basis.

    Approach-frame components are (along approach, along approach x up, along
    closure); when the approach is parallel to world up the middle axis
    degenerates and the pose's own y axis is used instead.
    """
    if vec_norm(offset) > 0.5:
        raise OffsetTooLargeError(f"offset magnitude {vec_norm(offset)} exceeds 0.5 m")
    if frame == "world":
        return grasp.pose.with_position(vec_add(grasp.pose.position, offset))
    if frame != "approach":
        raise ValueError(f"unknown offset frame {frame!r}")
    approach = grasp.approach
    closure = quat_rotate(grasp.pose.orientation, (1.0, 0.0, 0.0))
    lateral = vec_cross(approach, (0.0, 0.0, 1.0))
    if vec_norm(lateral) < 1e-9:
        lateral = quat_rotate(grasp.pose.orientation, (0.0, 1.0, 0.0))
    lateral = vec_unit(lateral)
    world_offset = vec_add(
        vec_add(vec_scale(approach, offset[0]), vec_scale(lateral, offset[1])),
        vec_scale(closure, offset[2]),
    )
    return grasp.pose.with_position(vec_add(grasp.pose.position, world_offset))
