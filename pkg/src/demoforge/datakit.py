"""Demonstration persistence, keyframes, dataset metrics, and replay policies.

Episode layout on disk::

    episode_0000/
      meta.json         version, task, seed, outcome, keyframes, try counts,
                        CRC32 of steps.jsonl, plan, initial state
      steps.jsonl       one step record per line
      transcript.jsonl  one oracle transcript entry per line
      views/            step_####/{view}.png + 16-bit depth (when recorded)

A dataset directory holds episode dirs plus manifest.json at its root.
"""
from __future__ import annotations

import json
import warnings
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .engine import (
    Budgets,
    DatasetManifest,
    EpisodeRecord,
    StepRecord,
    SubTask,
    TranscriptEntry,
    ViewSnapshot,
)
from .errors import (
    ChecksumError,
    DemoforgeError,
    TruncatedFileError,
    VersionMismatchError,
)
from .geometry import Pose6D
from .world import (
    DEFAULT_WORKSPACE,
    TaskSpec,
    WorldState,
    check_success,
    move_to_waypoint,
    set_gripper,
    spawn_scene,
)

FORMAT_VERSION = 1


# -- keyframes ----------------------------------------------------------------


@dataclass(frozen=True)
class Keyframe:
    step_index: int
    ee_pos: tuple[float, float, float]
    ee_quat: tuple[float, float, float, float]
    gripper: str  # open | close
    subtask_index: int
    kind: str = "move"  # move | gripper | start
    terminal: bool = False


def extract_keyframes(record: EpisodeRecord) -> list[Keyframe]:
    """Start pose, every motion-segment end, and every gripper flip.

    Step records hold only executed steps, so a synthetic start keyframe
    (index 0, spawn pose, open gripper) is prepended; repeated gripper
    commands that do not change the binary state are dropped.
    """
    frames = [
        Keyframe(0, record.initial_ee_pos, record.initial_ee_quat, "open", 0, kind="start")
    ]
    prev_gripper = "open"
    for i, step in enumerate(record.steps):
        is_last = i == len(record.steps) - 1
        keep = step.kind == "move" or step.gripper != prev_gripper or is_last
        if keep:
            frames.append(
                Keyframe(step.index, step.ee_pos, step.ee_quat, step.gripper,
                         step.subtask_index, kind=step.kind)
            )
        prev_gripper = step.gripper
    # dedup identical consecutive indices (a non-keyframe last step repeats nothing)
    out: list[Keyframe] = []
    for kf in frames:
        if out and out[-1].step_index == kf.step_index:
            continue
        out.append(kf)
    if out:
        out[-1] = Keyframe(out[-1].step_index, out[-1].ee_pos, out[-1].ee_quat,
                           out[-1].gripper, out[-1].subtask_index, out[-1].kind,
                           terminal=True)
    return out


def episode_positions(record: EpisodeRecord, all_steps: bool = False) -> np.ndarray:
    """Keyframe (default) or full-step ee positions as an (N, 3) array."""
    if all_steps:
        pts = [record.initial_ee_pos] + [s.ee_pos for s in record.steps]
    else:
        pts = [kf.ee_pos for kf in extract_keyframes(record)]
    return np.asarray(pts, dtype=np.float64)


# -- metrics ------------------------------------------------------------------


def chamfer_distance(a, b) -> float:
    """Symmetric mean nearest-neighbor distance, unsquared euclidean on 3D points.

    CD = 0.5 * (mean_a min_b |a-b| + mean_b min_a |b-a|). Exact: computed from
    the full distance matrix (these are keyframe-scale sets).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise DemoforgeError("chamfer_distance requires non-empty point sets")
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 3 or b.shape[1] != 3:
        raise DemoforgeError("point sets must be (N, 3)")
    diff = a[:, None, :] - b[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=-1))
    # sequential means, matching the canonical double-loop accumulation exactly
    ab = sum(d.min(axis=1).tolist()) / a.shape[0]
    ba = sum(d.min(axis=0).tolist()) / b.shape[0]
    return 0.5 * (ab + ba)


def fit_scaling(points) -> tuple[float, float, float]:
    """OLS fit of success percent against demo count: (slope, intercept, r^2)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise DemoforgeError("fit_scaling needs at least 2 points")
    xs = np.asarray([p[0] for p in pts])
    ys = np.asarray([p[1] for p in pts])
    if np.allclose(xs, xs[0]):
        raise DemoforgeError("fit_scaling needs at least 2 distinct x values")
    xm, ym = xs.mean(), ys.mean()
    sxx = ((xs - xm) ** 2).sum()
    sxy = ((xs - xm) * (ys - ym)).sum()
    slope = sxy / sxx
    intercept = ym - slope * xm
    ss_res = ((ys - (slope * xs + intercept)) ** 2).sum()
    ss_tot = ((ys - ym) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r2)


# -- persistence --------------------------------------------------------------


def _step_to_json(s: StepRecord) -> dict:
    return {
        "index": s.index, "kind": s.kind, "ee_pos": list(s.ee_pos),
        "ee_quat": list(s.ee_quat), "gripper": s.gripper, "aperture": s.aperture,
        "attached": list(s.attached) if s.attached else None,
        "subtask_index": s.subtask_index, "attempt": s.attempt, "source": s.source,
        "events": list(s.events), "objects": s.objects,
        "cmd_pos": list(s.cmd_pos) if s.cmd_pos else None,
        "cmd_quat": list(s.cmd_quat) if s.cmd_quat else None,
    }


def _step_from_json(d: dict) -> StepRecord:
    return StepRecord(
        index=d["index"], kind=d["kind"], ee_pos=tuple(d["ee_pos"]),
        ee_quat=tuple(d["ee_quat"]), gripper=d["gripper"], aperture=d["aperture"],
        attached=tuple(d["attached"]) if d["attached"] else None,
        subtask_index=d["subtask_index"], attempt=d["attempt"], source=d["source"],
        events=tuple(d["events"]), objects=d["objects"],
        cmd_pos=tuple(d["cmd_pos"]) if d.get("cmd_pos") else None,
        cmd_quat=tuple(d["cmd_quat"]) if d.get("cmd_quat") else None,
    )


def write_episode(record: EpisodeRecord, directory) -> Path:
    """Persist an episode; rejects records violating the format invariants."""
    if not record.steps:
        raise DemoforgeError("refusing to write an episode with 0 steps")
    if len(record.steps) > record.budgets.max_action_steps:
        raise DemoforgeError("steps exceed the episode's action budget")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    steps_blob = "".join(json.dumps(_step_to_json(s)) + "\n" for s in record.steps).encode()
    (directory / "steps.jsonl").write_bytes(steps_blob)

    transcript_lines = []
    for t in record.transcript:
        transcript_lines.append(json.dumps({
            "kind": t.kind, "subtask_index": t.subtask_index, "attempt": t.attempt,
            "query": t.query, "decision": t.decision, "latency_s": t.latency_s,
            "backend_id": t.backend_id, "retry_count": t.retry_count, "error": t.error,
        }) + "\n")
    (directory / "transcript.jsonl").write_text("".join(transcript_lines), encoding="utf-8")

    views_meta = []
    for snap in record.views:
        vdir = directory / "views" / f"step_{snap.step_index:04d}_{snap.label}"
        vdir.mkdir(parents=True, exist_ok=True)
        Image.fromarray(snap.rgb).save(vdir / f"{snap.view_name}.png")
        Image.fromarray(snap.depth_mm).save(vdir / f"{snap.view_name}_depth.png")
        views_meta.append({
            "step_index": snap.step_index, "label": snap.label, "view_name": snap.view_name,
            "dir": str(vdir.relative_to(directory)),
        })

    meta = {
        "format_version": FORMAT_VERSION,
        "task_id": record.task_id,
        "instruction": record.instruction,
        "seed": record.seed,
        "outcome": record.outcome,
        "budgets": [record.budgets.max_action_steps, record.budgets.max_verify_tries],
        "plan": [
            {"index": s.index, "description": s.description, "condition": s.condition,
             "kind": s.kind, "target": list(s.target) if s.target else None}
            for s in record.plan
        ],
        "try_counts": list(record.try_counts),
        "initial_ee_pos": list(record.initial_ee_pos),
        "initial_ee_quat": list(record.initial_ee_quat),
        "initial_objects": record.initial_objects,
        "final_objects": record.final_objects,
        "keyframes": [kf.step_index for kf in extract_keyframes(record)],
        "step_count": len(record.steps),
        "steps_crc32": zlib.crc32(steps_blob),
        "views": views_meta,
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    return directory


def read_episode(directory) -> EpisodeRecord:
    """Load an episode; raises typed errors on version/corruption problems."""
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise TruncatedFileError(f"{directory}: missing meta.json")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TruncatedFileError(f"{meta_path}: {e}") from e
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{directory}: format version {version!r}, expected {FORMAT_VERSION}"
        )
    steps_path = directory / "steps.jsonl"
    if not steps_path.exists():
        raise TruncatedFileError(f"{directory}: missing steps.jsonl")
    blob = steps_path.read_bytes()
    if zlib.crc32(blob) != meta.get("steps_crc32"):
        raise ChecksumError(f"{steps_path}: CRC32 mismatch")
    steps = []
    for lineno, line in enumerate(blob.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            steps.append(_step_from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as e:
            raise TruncatedFileError(f"{steps_path}:{lineno}: {e}") from e
    if len(steps) != meta.get("step_count"):
        raise TruncatedFileError(
            f"{steps_path}: {len(steps)} steps, meta says {meta.get('step_count')}"
        )

    transcript = []
    tpath = directory / "transcript.jsonl"
    if tpath.exists():
        for lineno, line in enumerate(tpath.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise TruncatedFileError(f"{tpath}:{lineno}: {e}") from e
            transcript.append(TranscriptEntry(
                kind=d["kind"], subtask_index=d["subtask_index"], attempt=d["attempt"],
                query=d["query"], decision=d["decision"], latency_s=d["latency_s"],
                backend_id=d["backend_id"], retry_count=d.get("retry_count", 0),
                error=d.get("error", ""),
            ))

    views = []
    for vm in meta.get("views", []):
        vdir = directory / vm["dir"]
        rgb = np.asarray(Image.open(vdir / f"{vm['view_name']}.png").convert("RGB"))
        depth = np.asarray(Image.open(vdir / f"{vm['view_name']}_depth.png")).astype(np.uint16)
        views.append(ViewSnapshot(
            step_index=vm["step_index"], label=vm["label"], view_name=vm["view_name"],
            rgb=rgb, depth_mm=depth,
        ))

    return EpisodeRecord(
        task_id=meta["task_id"],
        instruction=meta.get("instruction", ""),
        seed=meta["seed"],
        outcome=meta["outcome"],
        budgets=Budgets(*meta["budgets"]),
        plan=tuple(
            SubTask(p["index"], p["description"], p["condition"], p["kind"],
                    tuple(p["target"]) if p["target"] else None)
            for p in meta.get("plan", [])
        ),
        steps=tuple(steps),
        try_counts=tuple(meta.get("try_counts", [])),
        transcript=tuple(transcript),
        initial_ee_pos=tuple(meta["initial_ee_pos"]),
        initial_ee_quat=tuple(meta["initial_ee_quat"]),
        initial_objects=meta["initial_objects"],
        final_objects=meta["final_objects"],
        views=tuple(views),
    )


def write_manifest(manifest: DatasetManifest, directory) -> Path:
    """Atomically replace manifest.json (write-temp-then-rename)."""
    import os

    directory = Path(directory)
    payload = {
        "format_version": manifest.format_version,
        "task_id": manifest.task_id,
        "target_successes": manifest.target_successes,
        "episodes": manifest.episodes,
        "created_unix": manifest.created_unix,
    }
    path = directory / "manifest.json"
    tmp = directory / ".manifest.json.tmp"
    tmp.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_manifest(directory) -> DatasetManifest:
    directory = Path(directory)
    path = directory / "manifest.json"
    if not path.exists():
        raise TruncatedFileError(f"{directory}: missing manifest.json")
    data = json.loads(path.read_text(encoding="utf-8"))
    if data.get("format_version") != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {data.get('format_version')!r}")
    return DatasetManifest(
        format_version=data["format_version"],
        task_id=data["task_id"],
        target_successes=data["target_successes"],
        episodes=data["episodes"],
        created_unix=data["created_unix"],
        root=str(directory),
    )


# -- policies and evaluation ----------------------------------------------------


@dataclass(frozen=True)
class Observation:
    ee_pos: tuple[float, float, float]
    ee_quat: tuple[float, float, float, float]
    gripper: str
    attached: tuple[str, str] | None
    objects: dict  # id -> (x, y, z), sorted id order when iterated
    joints: dict   # id -> value for articulated objects


def observe(state: WorldState) -> Observation:
    objects = {}
    joints = {}
    for obj in sorted(state.objects, key=lambda o: o.id):
        objects[obj.id] = obj.effective_pose().position
        if obj.articulation is not None:
            joints[obj.id] = obj.articulation.value
    return Observation(
        ee_pos=state.ee_pose.position,
        ee_quat=state.ee_pose.orientation,
        gripper="close" if state.gripper_aperture < 1.0 else "open",
        attached=state.attached,
        objects=objects,
        joints=joints,
    )


@dataclass(frozen=True)
class PolicyAction:
    target_pose: Pose6D | None = None
    gripper: str | None = None  # open | close
    done: bool = False


@dataclass
class SuccessTable:
    per_seed: dict[int, float]
    mean: float
    std: float
    episodes_per_seed: int


def eval_policy(policy, task: TaskSpec, episodes_per_seed: int = 25,
                seeds=(0, 1, 2), budgets: Budgets = Budgets(),
                workspace=DEFAULT_WORKSPACE) -> SuccessTable:
    """Roll out a policy in the simulator and report per-seed success rates.

    policy: callable(Observation) -> PolicyAction | None, optionally with a
    reset() method called before each episode. Episode seeds are
    seed * 100_000 + i so different eval seeds never collide.
    """
    per_seed: dict[int, float] = {}
    for seed in seeds:
        wins = 0
        for i in range(episodes_per_seed):
            episode_seed = seed * 100_000 + i
            state = spawn_scene(task, episode_seed)
            if hasattr(policy, "reset"):
                policy.reset()
            for _ in range(4 * budgets.max_action_steps):
                if state.steps_executed >= budgets.max_action_steps:
                    break
                action = policy(observe(state))
                if action is None:
                    break
                if action.target_pose is not None:
                    state, _ = move_to_waypoint(state, action.target_pose, workspace)
                if action.gripper is not None and state.steps_executed < budgets.max_action_steps:
                    current = "close" if state.gripper_aperture < 1.0 else "open"
                    if action.gripper != current:
                        state = set_gripper(state, action.gripper)
                if action.done:
                    break
            wins += int(check_success(state, task))
        per_seed[seed] = wins / episodes_per_seed
    rates = list(per_seed.values())
    mean = sum(rates) / len(rates)
    std = float(np.std(rates, ddof=1)) if len(rates) > 1 else 0.0
    return SuccessTable(per_seed=per_seed, mean=mean, std=std,
                        episodes_per_seed=episodes_per_seed)


class ReplayPolicy:
    """Replays one recorded episode's executed waypoints in order."""

    def __init__(self, record: EpisodeRecord):
        self.record = record
        self._i = 0

    def reset(self):
        self._i = 0

    def __call__(self, obs: Observation) -> PolicyAction | None:
        if self._i >= len(self.record.steps):
            return None
        step = self.record.steps[self._i]
        self._i += 1
        done = self._i >= len(self.record.steps)
        if step.kind == "gripper":
            return PolicyAction(gripper=step.gripper, done=done)
        pos = step.cmd_pos if step.cmd_pos is not None else step.ee_pos
        quat = step.cmd_quat if step.cmd_quat is not None else step.ee_quat
        return PolicyAction(target_pose=Pose6D(pos, quat), done=done)


class RandomPolicy:
    """Uniform random waypoints inside the workspace; occasional gripper toggles."""

    def __init__(self, seed: int = 0, workspace=DEFAULT_WORKSPACE, horizon: int = 20):
        self.seed = seed
        self.workspace = workspace
        self.horizon = horizon
        self._rng = np.random.default_rng(seed)
        self._n = 0

    def reset(self):
        self._n = 0

    def __call__(self, obs: Observation) -> PolicyAction | None:
        if self._n >= self.horizon:
            return None
        self._n += 1
        lo, hi = self.workspace
        pos = tuple(float(self._rng.uniform(lo[i], hi[i])) for i in range(3))
        gripper = None
        if self._rng.random() < 0.2:
            gripper = "close" if obs.gripper == "open" else "open"
        return PolicyAction(target_pose=Pose6D(pos, obs.ee_quat), gripper=gripper)


@dataclass
class _TrainingCase:
    feature: np.ndarray
    move_target: tuple | None        # (pos, quat) or None
    gripper_cmd: str | None
    terminal: bool


class KnnPolicy:
    """k-nearest-neighbor keyframe replay over privileged object positions.

    Feature: ee position + quaternion + all task-object positions,
    per-dimension standardized over the training keyframes. Action: majority
    gripper command over the k successors; move targets averaged, orientation
    from the single nearest neighbor.
    """

    def __init__(self, cases: list[_TrainingCase], mean: np.ndarray, std: np.ndarray,
                 k: int, object_ids: list[str]):
        self.cases = cases
        self.mean = mean
        self.std = std
        self.k = k
        self.object_ids = object_ids
        self._features = np.stack([c.feature for c in cases])
        self._done = False

    def reset(self):
        self._done = False

    def _featurize(self, obs: Observation) -> np.ndarray:
        parts = [list(obs.ee_pos), list(obs.ee_quat)]
        for oid in self.object_ids:
            parts.append(list(obs.objects[oid]))
        raw = np.asarray([x for chunk in parts for x in chunk])
        return (raw - self.mean) / self.std

    def __call__(self, obs: Observation) -> PolicyAction | None:
        if self._done:
            return None
        f = self._featurize(obs)
        dists = np.linalg.norm(self._features - f, axis=1)
        order = np.argsort(dists, kind="stable")
        top = [self.cases[int(i)] for i in order[: self.k]]

        grip_votes = [c.gripper_cmd for c in top if c.gripper_cmd is not None]
        if len(grip_votes) * 2 > len(top):
            counts: dict[str, int] = {}
            for g in grip_votes:
                counts[g] = counts.get(g, 0) + 1
            cmd = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
            # the feature carries no gripper state, so a pre-command keyframe can
            # tie with its post-command twin; only emit commands that change state
            if cmd != obs.gripper:
                self._done = any(c.terminal for c in top if c.gripper_cmd == cmd)
                return PolicyAction(gripper=cmd, done=self._done)

        movers = [c for c in top if c.move_target is not None]
        if movers:
            avg = np.mean(np.asarray([c.move_target[0] for c in movers]), axis=0)
            self._done = movers[0].terminal
            return PolicyAction(target_pose=Pose6D(tuple(avg), movers[0].move_target[1]),
                                done=self._done)
        # every near neighbor is a no-op: take the closest progressing action
        for i in order[self.k:]:
            c = self.cases[int(i)]
            if c.move_target is not None:
                self._done = c.terminal
                return PolicyAction(target_pose=Pose6D(c.move_target[0], c.move_target[1]),
                                    done=self._done)
            if c.gripper_cmd is not None and c.gripper_cmd != obs.gripper:
                self._done = c.terminal
                return PolicyAction(gripper=c.gripper_cmd, done=self._done)
        return None


def knn_policy(manifest: DatasetManifest | str | Path, k: int = 1) -> KnnPolicy:
    """Build the kNN replay policy from a dataset's successful episodes."""
    if not isinstance(manifest, DatasetManifest):
        manifest = read_manifest(manifest)
    if k < 1:
        raise DemoforgeError("k must be >= 1")
    root = Path(manifest.root)
    records = [read_episode(root / e["path"]) for e in manifest.success_entries()]
    if not records:
        raise DemoforgeError("no successful episodes in the dataset")

    object_ids = sorted(records[0].initial_objects.keys())
    cases: list[_TrainingCase] = []
    for record in records:
        kfs = extract_keyframes(record)
        index_of = {s.index: s for s in record.steps}
        for i, kf in enumerate(kfs[:-1]):
            objs = record.initial_objects if kf.step_index == 0 else index_of[kf.step_index].objects
            feat = [list(kf.ee_pos), list(kf.ee_quat)]
            for oid in object_ids:
                feat.append(objs[oid]["pos"])
            succ = kfs[i + 1]
            if succ.gripper != kf.gripper:
                move_target, gripper_cmd = None, succ.gripper
            else:
                move_target, gripper_cmd = (tuple(succ.ee_pos), tuple(succ.ee_quat)), None
            cases.append(_TrainingCase(
                feature=np.asarray([x for chunk in feat for x in chunk]),
                move_target=move_target,
                gripper_cmd=gripper_cmd,
                terminal=(i + 1 == len(kfs) - 1),
            ))
    if k > len(cases):
        warnings.warn(f"k={k} exceeds {len(cases)} training keyframes; clamping")
        k = len(cases)
    feats = np.stack([c.feature for c in cases])
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    for c in cases:
        c.feature = (c.feature - mean) / std
    return KnnPolicy(cases, mean, std, k, object_ids)


def replay_episode(task: TaskSpec, record: EpisodeRecord,
                   workspace=DEFAULT_WORKSPACE) -> WorldState:
    """Re-execute a stored episode's waypoints on a fresh spawn of its seed.

    Drives the recorded commanded targets (executed poses only as a fallback)
    so truncated and joint-constrained motions replay bit-identically.
    """
    state = spawn_scene(task, record.seed)
    for step in record.steps:
        if step.kind == "gripper":
            state = set_gripper(state, step.gripper)
        else:
            pos = step.cmd_pos if step.cmd_pos is not None else step.ee_pos
            quat = step.cmd_quat if step.cmd_quat is not None else step.ee_quat
            state, _ = move_to_waypoint(state, Pose6D(pos, quat), workspace)
    return state


def final_pose_deviation(record: EpisodeRecord, state: WorldState) -> float:
    """Max position/joint deviation between a record's final objects and a state."""
    worst = 0.0
    for obj in state.objects:
        stored = record.final_objects[obj.id]
        pose = obj.effective_pose()
        for i in range(3):
            worst = max(worst, abs(pose.position[i] - stored["pos"][i]))
        if obj.articulation is not None and stored["joint"] is not None:
            worst = max(worst, abs(obj.articulation.value - stored["joint"]))
    return worst
