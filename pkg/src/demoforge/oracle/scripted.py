"""Privileged scripted oracle: ground-truth decisions plus seeded error injection.

Stands in for the foundation-model stack: it reads the live world, the task's
reference plan, and the renderer's mask channel, then routes every decision
through the injector so perception and reasoning mistakes can be dosed
independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import OracleDecisionError
from ..geometry import quat_to_matrix
from ..grasp import BBox2D
from ..render import ViewFrame
from ..world import GRIPPER_SPHERE_RADIUS, TaskSpec, WorldState, eval_predicate
from .injection import ErrorInjection, Injector, NO_INJECTION
from .types import (
    Decompose,
    DetectPart,
    GenerateAction,
    ListObjects,
    Objects,
    OracleDecision,
    OracleQuery,
    PartBox,
    Plan,
    PlanEntry,
    Program,
    SelectView,
    Verdict,
    Verify,
    ViewIndex,
)

DETECT_DILATE_PX = 2
DEFAULT_PLACE_OFFSET = (0.0, 0.0, 0.05)


@dataclass
class WorldHandle:
    """Engine-owned view of the live episode: task plus the current state slot."""

    task: TaskSpec
    state: WorldState


def part_pixel_mask(frame: ViewFrame, state: WorldState, object_id: str, part: str) -> np.ndarray:
    """Boolean image of surface pixels belonging to the object's named part."""
    if object_id not in frame.mask_ids:
        return np.zeros_like(frame.depth, dtype=bool)
    idx = frame.mask_ids.index(object_id) + 1
    obj_mask = frame.object_mask == idx
    if not obj_mask.any():
        return obj_mask
    obj = state.object(object_id)
    if part not in obj.parts:
        raise OracleDecisionError(f"object {object_id!r} has no part {part!r}")
    ys, xs = np.nonzero(obj_mask)
    cam = frame.camera
    u = (xs + 0.5 - cam.cx) / cam.fx
    v = (ys + 0.5 - cam.cy) / cam.fy
    dirs = np.stack([u, v, np.ones_like(u)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    rot = quat_to_matrix(cam.extrinsic.orientation)
    pts = (dirs @ rot.T) * frame.depth[ys, xs][:, None] + np.asarray(cam.extrinsic.position)
    box_pose, extents = obj.world_part_box(part)
    rel = (pts - np.asarray(box_pose.position)) @ quat_to_matrix(box_pose.orientation)
    half = np.asarray(extents) / 2 + 1e-9
    inside = np.all(np.abs(rel) <= half, axis=1)
    out = np.zeros_like(obj_mask)
    out[ys[inside], xs[inside]] = True
    return out


def part_bbox(frame: ViewFrame, state: WorldState, object_id: str, part: str) -> BBox2D:
    """Tight part-pixel bbox dilated 2 px, clamped to the image."""
    mask = part_pixel_mask(frame, state, object_id, part)
    if not mask.any():
        raise OracleDecisionError(
            f"part {part!r} of {object_id!r} not visible in view {frame.camera.name!r}"
        )
    ys, xs = np.nonzero(mask)
    w, h = frame.camera.width, frame.camera.height
    return BBox2D(
        frame.camera.name,
        max(float(xs.min()) - DETECT_DILATE_PX, 0.0),
        max(float(ys.min()) - DETECT_DILATE_PX, 0.0),
        min(float(xs.max()) + DETECT_DILATE_PX, float(w - 1)) + 1.0,
        min(float(ys.max()) + DETECT_DILATE_PX, float(h - 1)) + 1.0,
    )


class ScriptedBackend:
    """Ground-truth oracle over a WorldHandle, with injectable errors."""

    backend_id = "scripted"

    def __init__(self, handle: WorldHandle, injection: ErrorInjection = NO_INJECTION,
                 episode_seed: int = 0):
        self.handle = handle
        self.injection = injection
        self.injector = Injector(injection, episode_seed)

    def bind_episode(self, handle: WorldHandle, episode_id: str, seed: int):
        self.handle = handle
        self.injector = Injector(self.injection, seed)

    # -- ground-truth rules per query kind ----------------------------------

    def _plan_entry(self, subtask_index: int):
        plan = self.handle.task.reference_plan
        if not plan:
            raise OracleDecisionError(f"task {self.handle.task.id!r} ships no reference plan")
        if not 1 <= subtask_index <= len(plan):
            raise OracleDecisionError(f"sub-task index {subtask_index} outside reference plan")
        return plan[subtask_index - 1]

    def _ground_truth(self, q: OracleQuery) -> OracleDecision:
        if isinstance(q, ListObjects):
            return Objects(tuple(o.name for o in self.handle.state.objects))

        if isinstance(q, Decompose):
            entries = tuple(
                PlanEntry(e.description, e.condition, e.kind, e.target)
                for e in self.handle.task.reference_plan
            )
            if not entries:
                raise OracleDecisionError(f"task {self.handle.task.id!r} ships no reference plan")
            return Plan(entries)

        if isinstance(q, SelectView):
            if not q.frames:
                raise OracleDecisionError("scripted SelectView needs privileged frames")
            target = None
            if q.meta.subtask_index >= 1:
                target = self._plan_entry(q.meta.subtask_index).target
            counts = []
            for frame in q.frames:
                if target is not None:
                    counts.append(int(part_pixel_mask(
                        frame, self.handle.state, target[0], target[1]).sum()))
                else:
                    counts.append(int((frame.object_mask > 0).sum()))
            return ViewIndex(int(np.argmax(counts)) + 1)

        if isinstance(q, DetectPart):
            if q.object_id not in {o.id for o in self.handle.state.objects}:
                raise OracleDecisionError(f"unknown object {q.object_id!r}")
            return PartBox(part_bbox(q.view, self.handle.state, q.object_id, q.part))

        if isinstance(q, Verify):
            entry = self._plan_entry(q.meta.subtask_index)
            if q.condition != entry.condition:
                # corrupted or unknown condition text: fail verification
                return Verdict(False, rationale="condition not recognized")
            ok = eval_predicate(self.handle.state, entry.predicate)
            return Verdict(bool(ok), rationale="ground truth predicate")

        if isinstance(q, GenerateAction):
            entry = self._plan_entry(q.meta.subtask_index)
            if q.mode == "agent_program":
                if not entry.program:
                    raise OracleDecisionError(
                        f"sub-task {q.meta.subtask_index} has no reference program"
                    )
                return Program(entry.program, offset=None)
            return Program("", offset=self._object_offset(entry))

        raise OracleDecisionError(f"unsupported query {q!r}")

    def _object_offset(self, entry):
        if entry.offset_mode == "push_to_region":
            if entry.predicate.kind != "inside" or entry.target is None:
                raise OracleDecisionError("push_to_region needs an inside predicate and target")
            lo, hi = entry.predicate.region
            center = tuple((lo[i] + hi[i]) / 2 for i in range(3))
            obj = self.handle.state.object(entry.target[0])
            pos = obj.effective_pose().position
            d = (center[0] - pos[0], center[1] - pos[1], 0.0)
            dist = math.hypot(d[0], d[1])
            if dist < 1e-9:
                return (0.0, 0.0, 0.0)
            direction = (d[0] / dist, d[1] / dist, 0.0)
            bb_lo, bb_hi = obj.world_aabb()
            support = (abs(direction[0]) * (bb_hi[0] - bb_lo[0])
                       + abs(direction[1]) * (bb_hi[1] - bb_lo[1])) / 2
            travel = dist - support - GRIPPER_SPHERE_RADIUS
            return (direction[0] * travel, direction[1] * travel, 0.0)
        if entry.offset_mode == "place_hover":
            return entry.offset if entry.offset is not None else DEFAULT_PLACE_OFFSET
        return entry.offset

    def query(self, q: OracleQuery) -> OracleDecision:
        decision = self._ground_truth(q)
        decision, _ = self.injector.perturb(q, decision)
        return decision


def make_scripted(handle: WorldHandle, injection: ErrorInjection = NO_INJECTION,
                  episode_seed: int = 0) -> ScriptedBackend:
    return ScriptedBackend(handle, injection, episode_seed)
