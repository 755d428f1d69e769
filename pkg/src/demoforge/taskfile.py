"""Task configuration files: versioned JSON, schema v1.

Layout::

    {
      "version": 1,
      "id": "pick_and_lift",
      "instruction": "...",
      "home": {"position": [x,y,z], "orientation": [w,x,y,z]},      # optional
      "scene": [
        {"id": "...", "name": "...",
         "shape": {"kind": "box|cylinder|sphere", "dims": [...]},
         "pose": {"position": [x,y,z], "orientation": [w,x,y,z]},   # orientation optional
         "articulation": {"kind": "prismatic|revolute|fixed",
                          "axis": [x,y,z], "limits": [lo,hi], "value": v},  # optional
         "parts": {"name": {"box_center": [...], "box_extents": [...],
                            "grasp_point": [...]}},
         "graspable": true,
         "color": [r,g,b]}                                           # optional
      ],
      "success": [<predicate>, ...],
      "jitter": {"<object id>": {"x": [lo,hi], "y": [lo,hi], "z": [lo,hi]}},
      "reference_plan": [
        {"description": "...", "condition": "...",
         "kind": "agent_centric|object_centric",
         "target": {"object": "...", "part": "..."} | null,
         "predicate": <predicate>,
         "program": "<DSL text>" | null,
         "offset": [dx,dy,dz] | null,
         "offset_mode": "const|push_to_region|place_hover"}          # optional
      ]
    }

Predicates: {"kind": "above", "object", "z_min"} | {"kind": "inside", "object",
"region": [[lo..],[hi..]]} | {"kind": "joint_ge", "object", "q_min"} |
{"kind": "joint_le", "object", "q_max"} | {"kind": "attached", "object"} |
{"kind": "near", "object", "object_b", "d_max"}.

Grasp-point convention for attach targets: the gripper body is a 4 cm sphere
and the attach tolerance is 3 cm, so grasp points must sit 1-3 cm outside the
object's bounding box along a downward approach; contact points for pushes sit
on the surface instead.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .errors import TaskConfigError
from .geometry import Pose6D
from .world import (
    Articulation,
    Part,
    Predicate,
    ReferenceSubTask,
    SceneObject,
    Shape,
    TaskSpec,
)

SCHEMA_VERSION = 1
BUILTIN_TASKS = (
    "pick_and_lift",
    "put_block",
    "push_block",
    "open_drawer",
    "close_box",
    "press_switch",
)


def _pose_from_json(d) -> Pose6D:
    return Pose6D(tuple(d["position"]), tuple(d.get("orientation", (1.0, 0.0, 0.0, 0.0))))


def _predicate_from_json(d) -> Predicate:
    try:
        kind = d["kind"]
        if kind == "above":
            return Predicate("above", obj=d["object"], z_min=float(d["z_min"]))
        if kind == "inside":
            lo, hi = d["region"]
            return Predicate("inside", obj=d["object"], region=(tuple(lo), tuple(hi)))
        if kind == "joint_ge":
            return Predicate("joint_ge", obj=d["object"], q_min=float(d["q_min"]))
        if kind == "joint_le":
            return Predicate("joint_le", obj=d["object"], q_max=float(d["q_max"]))
        if kind == "attached":
            return Predicate("attached", obj=d["object"])
        if kind == "near":
            return Predicate("near", obj=d["object"], obj_b=d["object_b"], d_max=float(d["d_max"]))
    except KeyError as e:
        raise TaskConfigError(f"predicate missing field {e}") from e
    raise TaskConfigError(f"unknown predicate kind {d.get('kind')!r}")


def _object_from_json(d) -> SceneObject:
    art = None
    if d.get("articulation"):
        a = d["articulation"]
        art = Articulation(
            kind=a["kind"],
            axis=tuple(a.get("axis", (0.0, 0.0, 1.0))),
            limits=tuple(a.get("limits", (0.0, 0.0))),
            value=float(a.get("value", a.get("limits", (0.0, 0.0))[0])),
        )
    parts = {
        name: Part(tuple(p["box_center"]), tuple(p["box_extents"]), tuple(p["grasp_point"]))
        for name, p in d.get("parts", {}).items()
    }
    color = tuple(int(c) for c in d["color"]) if d.get("color") else None
    return SceneObject(
        id=d["id"],
        name=d.get("name", d["id"]),
        shape=Shape(d["shape"]["kind"], tuple(d["shape"]["dims"])),
        pose=_pose_from_json(d["pose"]),
        articulation=art,
        parts=parts,
        graspable=bool(d.get("graspable", False)),
        color=color,
    )


def task_from_dict(data: dict) -> TaskSpec:
    if data.get("version") != SCHEMA_VERSION:
        raise TaskConfigError(
            f"unsupported task schema version {data.get('version')!r} (expected {SCHEMA_VERSION})"
        )
    try:
        scene = tuple(_object_from_json(o) for o in data["scene"])
        success = tuple(_predicate_from_json(p) for p in data["success"])
    except KeyError as e:
        raise TaskConfigError(f"task config missing field {e}") from e
    jitter = {
        oid: {axis: (float(r[0]), float(r[1])) for axis, r in ranges.items()}
        for oid, ranges in data.get("jitter", {}).items()
    }
    plan = []
    for ent in data.get("reference_plan", []):
        target = None
        if ent.get("target"):
            target = (ent["target"]["object"], ent["target"]["part"])
        plan.append(
            ReferenceSubTask(
                description=ent["description"],
                condition=ent["condition"],
                kind=ent["kind"],
                predicate=_predicate_from_json(ent["predicate"]),
                target=target,
                program=ent.get("program"),
                offset=tuple(ent["offset"]) if ent.get("offset") else None,
                offset_mode=ent.get("offset_mode", "const"),
            )
        )
    home = _pose_from_json(data["home"]) if data.get("home") else TaskSpec.__dataclass_fields__["home"].default
    return TaskSpec(
        id=data["id"],
        instruction=data["instruction"],
        scene_config=scene,
        success=success,
        pose_jitter=jitter,
        reference_plan=tuple(plan),
        home=home,
    )


def load_task(path: str | Path) -> TaskSpec:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise TaskConfigError(f"{path}: invalid JSON: {e}") from e
    return task_from_dict(data)


def load_builtin(task_id: str) -> TaskSpec:
    """Load one of the shipped task configs by id."""
    if task_id not in BUILTIN_TASKS:
        raise TaskConfigError(f"unknown builtin task {task_id!r}; have {BUILTIN_TASKS}")
    ref = resources.files("demoforge").joinpath(f"tasks/{task_id}.json")
    return task_from_dict(json.loads(ref.read_text(encoding="utf-8")))


def load_all_builtin() -> list[TaskSpec]:
    return [load_builtin(t) for t in BUILTIN_TASKS]
