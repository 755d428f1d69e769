"""Oracle decision protocol: query/decision variants and the wire codec.

Queries carry rich in-process payloads (frames with privileged mask channels
for the scripted backend); the wire codec serializes only the public parts,
embedding images as base64 PNG per the HTTP protocol. Decoding is strict:
anything that does not match the expected variant and ranges raises
OracleMalformedError, which the engine converts into a failed attempt.
"""
from __future__ import annotations

import base64
from dataclasses import dataclass, field

from ..errors import OracleMalformedError
from ..grasp import BBox2D
from ..render import TiledImage, ViewFrame, rgb_to_png_bytes

PROTOCOL_VERSION = 1

PERCEPTION_KINDS = ("list_objects", "select_view", "detect_part")
REASONING_KINDS = ("decompose", "verify", "generate_action")
QUERY_KINDS = PERCEPTION_KINDS + REASONING_KINDS


@dataclass(frozen=True)
class QueryMeta:
    episode_id: str
    subtask_index: int  # 0 for pre-plan queries
    attempt: int


@dataclass(frozen=True)
class ListObjects:
    meta: QueryMeta
    tiled: TiledImage
    frames: tuple[ViewFrame, ...] = ()  # privileged, scripted backend only
    kind: str = field(default="list_objects", init=False)


@dataclass(frozen=True)
class Decompose:
    meta: QueryMeta
    instruction: str
    object_names: tuple[str, ...]
    tiled: TiledImage
    kind: str = field(default="decompose", init=False)


@dataclass(frozen=True)
class SelectView:
    meta: QueryMeta
    subtask: str
    tiled: TiledImage
    k: int
    frames: tuple[ViewFrame, ...] = ()  # privileged
    kind: str = field(default="select_view", init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class DetectPart:
    meta: QueryMeta
    object_id: str
    part: str
    description: str
    view: ViewFrame
    kind: str = field(default="detect_part", init=False)


@dataclass(frozen=True)
class Verify:
    meta: QueryMeta
    condition: str
    view: ViewFrame
    kind: str = field(default="verify", init=False)


@dataclass(frozen=True)
class GenerateAction:
    meta: QueryMeta
    subtask: str
    view: ViewFrame
    example_programs: tuple[str, ...] = ()
    mode: str = "agent_program"  # agent_program | object_offset
    kind: str = field(default="generate_action", init=False)


OracleQuery = ListObjects | Decompose | SelectView | DetectPart | Verify | GenerateAction


@dataclass(frozen=True)
class Objects:
    names: tuple[str, ...]
    kind: str = field(default="objects", init=False)


@dataclass(frozen=True)
class PlanEntry:
    description: str
    condition: str
    task_kind: str  # agent_centric | object_centric
    target: tuple[str, str] | None = None

    def __post_init__(self):
        if self.task_kind not in ("agent_centric", "object_centric"):
            raise OracleMalformedError(f"plan kind {self.task_kind!r} invalid")


@dataclass(frozen=True)
class Plan:
    entries: tuple[PlanEntry, ...]
    kind: str = field(default="plan", init=False)

    def __post_init__(self):
        if not self.entries:
            raise OracleMalformedError("plan must be non-empty")


@dataclass(frozen=True)
class ViewIndex:
    index: int  # 1-based
    kind: str = field(default="view_index", init=False)


@dataclass(frozen=True)
class PartBox:
    bbox: BBox2D
    kind: str = field(default="part_box", init=False)


@dataclass(frozen=True)
class Verdict:
    value: bool
    rationale: str = ""
    kind: str = field(default="verdict", init=False)


@dataclass(frozen=True)
class Program:
    text: str
    offset: tuple[float, float, float] | None = None
    kind: str = field(default="program", init=False)


OracleDecision = Objects | Plan | ViewIndex | PartBox | Verdict | Program

# query kind -> decision kind the engine will accept
EXPECTED_DECISION = {
    "list_objects": "objects",
    "decompose": "plan",
    "select_view": "view_index",
    "detect_part": "part_box",
    "verify": "verdict",
    "generate_action": "program",
}


def _image_b64(rgb) -> str:
    return base64.b64encode(rgb_to_png_bytes(rgb)).decode("ascii")


def query_to_wire(q: OracleQuery) -> dict:
    """Serialize a query for POST /oracle/query. Privileged channels are dropped."""
    payload: dict
    if isinstance(q, ListObjects):
        payload = {"image": _image_b64(q.tiled.composite), "tile_count": q.tiled.count}
    elif isinstance(q, Decompose):
        payload = {
            "instruction": q.instruction,
            "object_names": list(q.object_names),
            "image": _image_b64(q.tiled.composite),
        }
    elif isinstance(q, SelectView):
        payload = {"subtask": q.subtask, "image": _image_b64(q.tiled.composite), "k": q.k}
    elif isinstance(q, DetectPart):
        payload = {
            "object": q.object_id,
            "part": q.part,
            "description": q.description,
            "image": _image_b64(q.view.rgb),
            "width": q.view.camera.width,
            "height": q.view.camera.height,
            "view": q.view.camera.name,
        }
    elif isinstance(q, Verify):
        payload = {"condition": q.condition, "image": _image_b64(q.view.rgb)}
    elif isinstance(q, GenerateAction):
        payload = {
            "subtask": q.subtask,
            "image": _image_b64(q.view.rgb),
            "example_programs": list(q.example_programs),
            "mode": q.mode,
        }
    else:
        raise TypeError(f"not an oracle query: {q!r}")
    return {
        "protocol_version": PROTOCOL_VERSION,
        "episode_id": q.meta.episode_id,
        "subtask_index": q.meta.subtask_index,
        "attempt": q.meta.attempt,
        "kind": q.kind,
        "payload": payload,
    }


def query_summary(q: OracleQuery) -> dict:
    """Compact transcript form of a query: metadata and text, no image bytes."""
    wire = query_to_wire(q)
    payload = {k: v for k, v in wire["payload"].items() if k != "image"}
    wire["payload"] = payload
    return wire


def decision_to_wire(d: OracleDecision) -> dict:
    if isinstance(d, Objects):
        payload = {"names": list(d.names)}
    elif isinstance(d, Plan):
        payload = {
            "entries": [
                {
                    "description": e.description,
                    "condition": e.condition,
                    "kind": e.task_kind,
                    "target": (
                        {"object": e.target[0], "part": e.target[1]} if e.target else None
                    ),
                }
                for e in d.entries
            ]
        }
    elif isinstance(d, ViewIndex):
        payload = {"index": d.index}
    elif isinstance(d, PartBox):
        b = d.bbox
        payload = {"view": b.view, "x_min": b.x_min, "y_min": b.y_min,
                   "x_max": b.x_max, "y_max": b.y_max}
    elif isinstance(d, Verdict):
        payload = {"verdict": d.value, "rationale": d.rationale}
    elif isinstance(d, Program):
        payload = {"program": d.text, "offset": list(d.offset) if d.offset else None}
    else:
        raise TypeError(f"not an oracle decision: {d!r}")
    return {"kind": d.kind, "payload": payload}


def _require(cond: bool, msg: str):
    if not cond:
        raise OracleMalformedError(msg)


def decision_from_wire(data: dict, query: OracleQuery) -> OracleDecision:
    """Strict decode of a wire response against the originating query."""
    _require(isinstance(data, dict), "response is not an object")
    kind = data.get("kind")
    expected = EXPECTED_DECISION[query.kind]
    _require(kind == expected, f"decision kind {kind!r} does not answer {query.kind!r}")
    payload = data.get("payload")
    _require(isinstance(payload, dict), "payload must be an object")

    if kind == "objects":
        names = payload.get("names")
        _require(isinstance(names, list) and all(isinstance(n, str) for n in names),
                 "objects.names must be a list of strings")
        return Objects(tuple(names))
    if kind == "plan":
        entries = payload.get("entries")
        _require(isinstance(entries, list) and entries, "plan.entries must be non-empty")
        parsed = []
        for e in entries:
            _require(isinstance(e, dict), "plan entry must be an object")
            _require(isinstance(e.get("description"), str), "plan entry needs description")
            _require(isinstance(e.get("condition"), str), "plan entry needs condition")
            _require(e.get("kind") in ("agent_centric", "object_centric"),
                     "plan entry kind must be agent_centric|object_centric")
            target = None
            if e.get("target") is not None:
                t = e["target"]
                _require(isinstance(t, dict) and isinstance(t.get("object"), str)
                         and isinstance(t.get("part"), str), "plan target malformed")
                target = (t["object"], t["part"])
            parsed.append(PlanEntry(e["description"], e["condition"], e["kind"], target))
        return Plan(tuple(parsed))
    if kind == "view_index":
        idx = payload.get("index")
        _require(isinstance(idx, int) and not isinstance(idx, bool), "view index must be int")
        _require(1 <= idx <= query.k, f"view index {idx} outside [1, {query.k}]")
        return ViewIndex(idx)
    if kind == "part_box":
        vals = []
        for key in ("x_min", "y_min", "x_max", "y_max"):
            v = payload.get(key)
            _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                     f"part_box.{key} must be a number")
            vals.append(float(v))
        w, h = query.view.camera.width, query.view.camera.height
        _require(0 <= vals[0] < vals[2] <= w and 0 <= vals[1] < vals[3] <= h,
                 "part_box outside image bounds or empty")
        view_name = payload.get("view", query.view.camera.name)
        _require(isinstance(view_name, str), "part_box.view must be a string")
        return PartBox(BBox2D(view_name, vals[0], vals[1], vals[2], vals[3]))
    if kind == "verdict":
        v = payload.get("verdict")
        _require(isinstance(v, bool), "verdict must be a boolean")
        rationale = payload.get("rationale", "")
        _require(isinstance(rationale, str), "rationale must be a string")
        return Verdict(v, rationale)
    if kind == "program":
        text = payload.get("program")
        _require(isinstance(text, str), "program must be a string")
        offset = payload.get("offset")
        if offset is not None:
            _require(isinstance(offset, list) and len(offset) == 3
                     and all(isinstance(c, (int, float)) and not isinstance(c, bool)
                             for c in offset),
                     "offset must be a 3-number list")
            offset = tuple(float(c) for c in offset)
        return Program(text, offset)
    raise OracleMalformedError(f"unknown decision kind {kind!r}")
