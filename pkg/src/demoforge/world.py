"""Kinematic tabletop world: scenes, motion, grasp attachment, success predicates.

All operations are pure: they take a WorldState and return a new one. There is
no gravity or contact dynamics; motion is straight-line Cartesian with a
swept-sphere collision check against object bounding boxes, grasping is
proximity attachment, and articulated parts move by projecting commanded
displacements onto their joint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import TaskConfigError
from .geometry import (
    Pose6D,
    Vec3,
    quat_from_axis_angle,
    quat_mul,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
    vec_add,
    vec_cross,
    vec_dot,
    vec_norm,
    vec_scale,
    vec_sub,
    vec_unit,
)

# Tool geometry and motion constants; toy-scale defaults, override per call where exposed.
GRIPPER_MAX_WIDTH = 0.08
GRIPPER_SPHERE_RADIUS = 0.04
GRASP_ATTACH_DIST = 0.03
MOTION_SAMPLE_STEP = 0.01
ARTICULATION_ORTHO_TOL = 0.005

DEFAULT_WORKSPACE = ((-0.6, -0.6, 0.0), (0.6, 0.6, 0.8))
# Tool pointing straight down, closure axis along world x.
DEFAULT_HOME = Pose6D((0.0, -0.25, 0.30), (0.0, 1.0, 0.0, 0.0))


@dataclass(frozen=True)
class Shape:
    """Primitive centered at the object origin.

    dims: box -> (sx, sy, sz) full extents; cylinder -> (radius, height),
    axis along local z; sphere -> (radius,).
    """

    kind: str
    dims: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("box", "cylinder", "sphere"):
            raise TaskConfigError(f"unknown shape kind {self.kind!r}")
        n = {"box": 3, "cylinder": 2, "sphere": 1}[self.kind]
        dims = tuple(float(d) for d in self.dims)
        if len(dims) != n:
            raise TaskConfigError(f"{self.kind} expects {n} dims, got {len(dims)}")
        if any(d <= 0 for d in dims):
            raise TaskConfigError(f"degenerate {self.kind} dims {dims}")
        object.__setattr__(self, "dims", dims)

    def half_extents(self) -> Vec3:
        """Local axis-aligned half extents of the primitive."""
        if self.kind == "box":
            return (self.dims[0] / 2, self.dims[1] / 2, self.dims[2] / 2)
        if self.kind == "cylinder":
            r, h = self.dims
            return (r, r, h / 2)
        r = self.dims[0]
        return (r, r, r)


@dataclass(frozen=True)
class Part:
    """Named sub-region: a local axis-aligned box plus a grasp point (local frame)."""

    box_center: Vec3
    box_extents: Vec3
    grasp_point: Vec3

    def __post_init__(self):
        object.__setattr__(self, "box_center", tuple(float(c) for c in self.box_center))
        object.__setattr__(self, "box_extents", tuple(float(c) for c in self.box_extents))
        object.__setattr__(self, "grasp_point", tuple(float(c) for c in self.grasp_point))


@dataclass(frozen=True)
class Articulation:
    """Single joint in the object frame. kind 'fixed' marks immovable scenery."""

    kind: str
    axis: Vec3 = (0.0, 0.0, 1.0)
    limits: tuple[float, float] = (0.0, 0.0)
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("prismatic", "revolute", "fixed"):
            raise TaskConfigError(f"unknown joint kind {self.kind!r}")
        axis = tuple(float(c) for c in self.axis)
        n = vec_norm(axis)
        if abs(n - 1.0) > 1e-9:
            raise TaskConfigError(f"joint axis norm {n} not unit")
        lo, hi = (float(x) for x in self.limits)
        if lo > hi:
            raise TaskConfigError(f"joint limits reversed: [{lo}, {hi}]")
        v = float(self.value)
        if not (lo <= v <= hi):
            raise TaskConfigError(f"joint value {v} outside [{lo}, {hi}]")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "limits", (lo, hi))
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class SceneObject:
    id: str
    name: str
    shape: Shape
    pose: Pose6D
    articulation: Articulation | None = None
    parts: dict[str, Part] = field(default_factory=dict)
    graspable: bool = False
    color: tuple[int, int, int] | None = None

    def __post_init__(self):
        hx, hy, hz = self.shape.half_extents()
        for pname, part in self.parts.items():
            c, e = part.box_center, part.box_extents
            for i, h in enumerate((hx, hy, hz)):
                if abs(c[i]) + e[i] / 2 > 1.5 * h + 1e-12:
                    raise TaskConfigError(
                        f"part {pname!r} of {self.id!r} exceeds 1.5x shape bounds on axis {i}"
                    )

    def effective_pose(self) -> Pose6D:
        """Base pose composed with the current joint displacement."""
        art = self.articulation
        if art is None or art.kind == "fixed" or art.value == 0.0:
            return self.pose
        if art.kind == "prismatic":
            d = quat_rotate(self.pose.orientation, vec_scale(art.axis, art.value))
            return self.pose.with_position(vec_add(self.pose.position, d))
        # revolute: rotate about the joint axis through the object origin
        q = quat_from_axis_angle(art.axis, art.value)
        return Pose6D(self.pose.position, quat_normalize(quat_mul(self.pose.orientation, q)))

    def world_aabb(self) -> tuple[Vec3, Vec3]:
        """Conservative world-frame AABB of the posed primitive."""
        pose = self.effective_pose()
        h = np.array(self.shape.half_extents())
        r = np.abs(quat_to_matrix(pose.orientation)) @ h
        c = np.array(pose.position)
        return (tuple(c - r), tuple(c + r))

    def world_grasp_point(self, part_name: str) -> Vec3:
        return self.effective_pose().transform_point(self.parts[part_name].grasp_point)

    def world_part_box(self, part_name: str) -> tuple[Pose6D, Vec3]:
        """World pose of the part box center plus its extents (box axes follow the object)."""
        part = self.parts[part_name]
        pose = self.effective_pose()
        return (
            Pose6D(pose.transform_point(part.box_center), pose.orientation),
            part.box_extents,
        )


@dataclass(frozen=True)
class Predicate:
    """Success/verification condition. kind selects which params apply."""

    kind: str
    obj: str = ""
    obj_b: str = ""
    z_min: float = 0.0
    q_min: float = 0.0
    q_max: float = 0.0
    d_max: float = 0.0
    region: tuple[Vec3, Vec3] | None = None

    KINDS = ("above", "inside", "joint_ge", "joint_le", "attached", "near")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise TaskConfigError(f"unknown predicate kind {self.kind!r}")
        if self.kind == "inside" and self.region is None:
            raise TaskConfigError("inside predicate requires a region box")
        if self.region is not None:
            lo = tuple(float(c) for c in self.region[0])
            hi = tuple(float(c) for c in self.region[1])
            object.__setattr__(self, "region", (lo, hi))


@dataclass(frozen=True)
class ReferenceSubTask:
    """One entry of a task's hand-authored decomposition, used by the scripted oracle."""

    description: str
    condition: str
    kind: str  # agent_centric | object_centric
    predicate: Predicate
    target: tuple[str, str] | None = None  # (object id, part name)
    program: str | None = None  # DSL snippet for agent-centric entries
    offset: tuple[float, float, float] | None = None  # constant offset, object-centric
    offset_mode: str = "const"  # const | push_to_region | place_hover

    def __post_init__(self):
        if self.kind not in ("agent_centric", "object_centric"):
            raise TaskConfigError(f"sub-task kind {self.kind!r} invalid")
        if self.offset_mode not in ("const", "push_to_region", "place_hover"):
            raise TaskConfigError(f"offset mode {self.offset_mode!r} invalid")


@dataclass(frozen=True)
class TaskSpec:
    id: str
    instruction: str
    scene_config: tuple[SceneObject, ...]
    success: tuple[Predicate, ...]
    pose_jitter: dict[str, dict[str, tuple[float, float]]] = field(default_factory=dict)
    reference_plan: tuple[ReferenceSubTask, ...] = ()
    home: Pose6D = DEFAULT_HOME

    def __post_init__(self):
        ids = [o.id for o in self.scene_config]
        if len(set(ids)) != len(ids):
            raise TaskConfigError(f"duplicate object ids in task {self.id!r}")
        known = set(ids)
        for pred in self.success:
            for ref in (pred.obj, pred.obj_b):
                if ref and ref not in known:
                    raise TaskConfigError(f"success predicate references unknown object {ref!r}")
        for obj in self.pose_jitter:
            if obj not in known:
                raise TaskConfigError(f"jitter references unknown object {obj!r}")
        for ent in self.reference_plan:
            if ent.target is not None:
                oid, pname = ent.target
                if oid not in known:
                    raise TaskConfigError(f"plan target references unknown object {oid!r}")
                scene_obj = next(o for o in self.scene_config if o.id == oid)
                if pname not in scene_obj.parts:
                    raise TaskConfigError(f"plan target references unknown part {pname!r} of {oid!r}")

    def object(self, oid: str) -> SceneObject:
        for o in self.scene_config:
            if o.id == oid:
                return o
        raise TaskConfigError(f"unknown object {oid!r}")


@dataclass(frozen=True)
class WorldState:
    objects: tuple[SceneObject, ...]
    ee_pose: Pose6D
    gripper_aperture: float = 1.0
    attached: tuple[str, str] | None = None  # (object id, part name)
    attach_transform: Pose6D | None = None  # ee -> object base pose, free objects only
    steps_executed: int = 0
    rng_seed: int = 0

    def object(self, oid: str):
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def replace_object(self, obj: SceneObject) -> "WorldState":
        return replace(
            self, objects=tuple(obj if o.id == obj.id else o for o in self.objects)
        )


@dataclass(frozen=True)
class MotionEvent:
    kind: str  # reached | collision | workspace_rejected | joint_limit | constraint | pushed
    object_id: str = ""
    detail: float = 0.0


def spawn_scene(task: TaskSpec, seed: int) -> WorldState:
    """Reset the world for an episode: configured poses plus seeded position jitter.

    Identical (task, seed) pairs produce bit-identical states. Jitter draws
    happen in scene order, axes x then y then z, so configs replay stably.
    """
    if seed < 0:
        raise TaskConfigError("seed must be >= 0")
    rng = np.random.default_rng(seed)
    objects = []
    for obj in task.scene_config:
        jit = task.pose_jitter.get(obj.id)
        if jit:
            d = [0.0, 0.0, 0.0]
            for i, axis in enumerate(("x", "y", "z")):
                if axis in jit:
                    lo, hi = jit[axis]
                    d[i] = float(rng.uniform(lo, hi))
            obj = replace(obj, pose=obj.pose.with_position(vec_add(obj.pose.position, tuple(d))))
        objects.append(obj)
    return WorldState(
        objects=tuple(objects),
        ee_pose=task.home,
        gripper_aperture=1.0,
        attached=None,
        attach_transform=None,
        steps_executed=0,
        rng_seed=seed,
    )


def in_workspace(p, workspace=DEFAULT_WORKSPACE) -> bool:
    (lx, ly, lz), (hx, hy, hz) = workspace
    return lx <= p[0] <= hx and ly <= p[1] <= hy and lz <= p[2] <= hz


def _aabb_distance(center, lo, hi) -> float:
    """Distance from a point to an axis-aligned box (0 inside)."""
    d = 0.0
    for c, l, h in zip(center, lo, hi):
        if c < l:
            d += (l - c) ** 2
        elif c > h:
            d += (c - h) ** 2
    return math.sqrt(d)


def _segment_samples(start, end):
    """Points along the segment at MOTION_SAMPLE_STEP spacing, endpoint included."""
    delta = vec_sub(end, start)
    length = vec_norm(delta)
    if length == 0.0:
        return [start]
    n = int(length / MOTION_SAMPLE_STEP)
    pts = [vec_add(start, vec_scale(delta, (i * MOTION_SAMPLE_STEP) / length)) for i in range(n + 1)]
    if vec_norm(vec_sub(pts[-1], end)) > 1e-12:
        pts.append(end)
    return pts


def _push_clearance(sphere_center, lo, hi, direction) -> float:
    """Minimal translation of box [lo,hi] along `direction` that clears the sphere."""
    r = GRIPPER_SPHERE_RADIUS
    t_lo, t_hi = 0.0, 0.3
    if _aabb_distance(sphere_center, vec_add(lo, vec_scale(direction, t_hi)),
                      vec_add(hi, vec_scale(direction, t_hi))) < r:
        return t_hi
    for _ in range(48):
        t = 0.5 * (t_lo + t_hi)
        box_lo = vec_add(lo, vec_scale(direction, t))
        box_hi = vec_add(hi, vec_scale(direction, t))
        if _aabb_distance(sphere_center, box_lo, box_hi) < r:
            t_lo = t
        else:
            t_hi = t
    return t_hi


def _attached_articulated_move(state: WorldState, target: Pose6D):
    """Motion while holding an articulated part: project onto the joint."""
    obj = state.object(state.attached[0])
    art = obj.articulation
    delta = vec_sub(target.position, state.ee_pose.position)
    events = []

    if art.kind == "prismatic":
        axis_w = quat_rotate(obj.pose.orientation, art.axis)
        along = vec_dot(delta, axis_w)
        ortho = vec_sub(delta, vec_scale(axis_w, along))
        unclamped = art.value + along
        new_value = min(max(unclamped, art.limits[0]), art.limits[1])
        realized = new_value - art.value
        ee_pos = vec_add(state.ee_pose.position, vec_scale(axis_w, realized))
        ee_quat = state.ee_pose.orientation
        if new_value != unclamped:
            events.append(MotionEvent("joint_limit", obj.id, new_value))
        if vec_norm(ortho) > ARTICULATION_ORTHO_TOL:
            events.append(MotionEvent("constraint", obj.id, vec_norm(ortho)))
    else:  # revolute
        axis_w = quat_rotate(obj.pose.orientation, art.axis)
        origin = obj.pose.position
        value = art.value
        ee_pos = state.ee_pose.position
        ee_quat = state.ee_pose.orientation
        # walk the commanded segment, projecting each increment onto the arc tangent
        samples = _segment_samples(state.ee_pose.position, target.position)
        # tangential component check against the start tangent
        r0 = vec_sub(state.ee_pose.position, origin)
        r0_perp = vec_sub(r0, vec_scale(axis_w, vec_dot(r0, axis_w)))
        if vec_norm(r0_perp) < 1e-9:
            return state, [MotionEvent("constraint", obj.id, 0.0)]
        t0 = vec_unit(vec_cross(axis_w, r0_perp))
        ortho0 = vec_sub(delta, vec_scale(t0, vec_dot(delta, t0)))
        prev = state.ee_pose.position
        for p in samples[1:]:
            step = vec_sub(p, prev)
            prev = p
            r = vec_sub(ee_pos, origin)
            r_perp = vec_sub(r, vec_scale(axis_w, vec_dot(r, axis_w)))
            radius = vec_norm(r_perp)
            if radius < 1e-9:
                break
            tangent = vec_unit(vec_cross(axis_w, r_perp))
            d_angle = vec_dot(step, tangent) / radius
            unclamped = value + d_angle
            new_value = min(max(unclamped, art.limits[0]), art.limits[1])
            realized_angle = new_value - value
            value = new_value
            if realized_angle != 0.0:
                q = quat_from_axis_angle(axis_w, realized_angle)
                rel = vec_sub(ee_pos, origin)
                ee_pos = vec_add(origin, quat_rotate(q, rel))
                ee_quat = quat_normalize(quat_mul(q, ee_quat))
            if new_value != unclamped:
                events.append(MotionEvent("joint_limit", obj.id, value))
                break
        if vec_norm(ortho0) > ARTICULATION_ORTHO_TOL:
            events.append(MotionEvent("constraint", obj.id, vec_norm(ortho0)))
        new_value = value

    new_obj = replace(obj, articulation=replace(art, value=new_value))
    state = state.replace_object(new_obj)
    state = replace(
        state,
        ee_pose=Pose6D(ee_pos, ee_quat),
        steps_executed=state.steps_executed + 1,
    )
    if not events:
        events.append(MotionEvent("reached"))
    return state, events


def move_to_waypoint(
    state: WorldState, target: Pose6D, workspace=DEFAULT_WORKSPACE
) -> tuple[WorldState, list[MotionEvent]]:
    """Straight-line Cartesian move sampled at 1 cm.

    An open (or empty-closed near scenery) gripper truncates at the last free
    sample when its 4 cm body sphere would penetrate a non-attached object's
    bounding box; a closed gripper shoves free objects along the motion
    direction instead. Holding an articulated part constrains the move to the
    joint (see _attached_articulated_move). Orientation is applied at the end
    of whatever motion is realized.
    """
    if not in_workspace(target.position, workspace):
        return state, [MotionEvent("workspace_rejected")]

    attached_id = state.attached[0] if state.attached else None
    if attached_id is not None:
        obj = state.object(attached_id)
        if obj.articulation is not None and obj.articulation.kind != "fixed":
            return _attached_articulated_move(state, target)

    samples = _segment_samples(state.ee_pose.position, target.position)
    direction = vec_sub(target.position, state.ee_pose.position)
    length = vec_norm(direction)
    motion_dir = vec_unit(direction) if length > 0 else (0.0, 0.0, 1.0)
    closed = state.gripper_aperture < 1.0 and attached_id is None

    objects = {o.id: o for o in state.objects}
    events: list[MotionEvent] = []
    end_pos = samples[0]
    truncated = False
    pushed: dict[str, float] = {}

    for p in samples[1:]:
        collided = False
        for oid, obj in objects.items():
            if oid == attached_id:
                continue
            lo, hi = obj.world_aabb()
            if _aabb_distance(p, lo, hi) >= GRIPPER_SPHERE_RADIUS:
                continue
            pushable = closed and obj.articulation is None
            if pushable:
                t = _push_clearance(p, lo, hi, motion_dir)
                moved = replace(obj, pose=obj.pose.with_position(
                    vec_add(obj.pose.position, vec_scale(motion_dir, t))))
                objects[oid] = moved
                pushed[oid] = pushed.get(oid, 0.0) + t
            else:
                events.append(MotionEvent("collision", oid, vec_norm(vec_sub(p, samples[0]))))
                collided = True
                break
        if collided:
            truncated = True
            break
        end_pos = p

    for oid, dist in pushed.items():
        events.append(MotionEvent("pushed", oid, dist))

    new_ee = Pose6D(end_pos, target.orientation)
    new_state = replace(state, objects=tuple(objects.values()), ee_pose=new_ee,
                        steps_executed=state.steps_executed + 1)

    if attached_id is not None and state.attach_transform is not None:
        # rigid ride-along: object base pose = ee o attach_transform
        carried = objects[attached_id]
        new_pose = new_ee.compose(state.attach_transform)
        new_state = new_state.replace_object(replace(carried, pose=new_pose))

    if not truncated and not events:
        events.append(MotionEvent("reached"))
    return new_state, events


def _closure_width(obj: SceneObject, part_name: str, closure_axis_world) -> float:
    """Part-box extent along the gripper closure axis (support width)."""
    pose, extents = obj.world_part_box(part_name)
    m = quat_to_matrix(pose.orientation)
    w = 0.0
    for i in range(3):
        w += abs(vec_dot(closure_axis_world, tuple(m[:, i]))) * extents[i]
    return float(w)


def set_gripper(state: WorldState, command: str) -> WorldState:
    """Open or close the gripper; closing attaches the nearest in-reach graspable part."""
    if command not in ("open", "close"):
        raise ValueError(f"gripper command {command!r}")
    if command == "open":
        return replace(
            state,
            gripper_aperture=1.0,
            attached=None,
            attach_transform=None,
            steps_executed=state.steps_executed + 1,
        )

    tool = state.ee_pose.position
    closure_axis = quat_rotate(state.ee_pose.orientation, (1.0, 0.0, 0.0))
    best = None  # (distance, object id, part name, width)
    for obj in sorted(state.objects, key=lambda o: o.id):
        if not obj.graspable:
            continue
        for pname in sorted(obj.parts):
            gp = obj.world_grasp_point(pname)
            d = vec_norm(vec_sub(tool, gp))
            if d > GRASP_ATTACH_DIST:
                continue
            width = _closure_width(obj, pname, closure_axis)
            if width > GRIPPER_MAX_WIDTH:
                continue
            if best is None or d < best[0] - 1e-12:
                best = (d, obj.id, pname, width)

    if best is None:
        return replace(
            state,
            gripper_aperture=0.0,
            attached=None,
            attach_transform=None,
            steps_executed=state.steps_executed + 1,
        )

    _, oid, pname, width = best
    obj = state.object(oid)
    transform = None
    if obj.articulation is None:
        transform = state.ee_pose.inverse().compose(obj.pose)
    return replace(
        state,
        gripper_aperture=min(width / GRIPPER_MAX_WIDTH, 0.999),
        attached=(oid, pname),
        attach_transform=transform,
        steps_executed=state.steps_executed + 1,
    )


def eval_predicate(state: WorldState, pred: Predicate) -> bool:
    if pred.kind == "above":
        return state.object(pred.obj).effective_pose().position[2] >= pred.z_min
    if pred.kind == "inside":
        p = state.object(pred.obj).effective_pose().position
        lo, hi = pred.region
        return all(lo[i] <= p[i] <= hi[i] for i in range(3))
    if pred.kind == "joint_ge":
        art = state.object(pred.obj).articulation
        return art is not None and art.value >= pred.q_min
    if pred.kind == "joint_le":
        art = state.object(pred.obj).articulation
        return art is not None and art.value <= pred.q_max
    if pred.kind == "attached":
        return state.attached is not None and state.attached[0] == pred.obj
    if pred.kind == "near":
        pa = state.object(pred.obj).effective_pose().position
        pb = state.object(pred.obj_b).effective_pose().position
        return vec_norm(vec_sub(pa, pb)) <= pred.d_max
    raise TaskConfigError(f"unknown predicate kind {pred.kind!r}")


def check_success(state: WorldState, task: TaskSpec) -> bool:
    """True iff every success predicate of the task holds. Pure."""
    return all(eval_predicate(state, p) for p in task.success)
