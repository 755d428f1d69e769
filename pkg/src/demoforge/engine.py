"""Episode state machine: decompose, select views, act, verify, retry, record.

One episode runs: spawn -> ListObjects -> Decompose -> per sub-task
[SelectView -> act (grasp macro / push macro / place macro / DSL program) ->
re-render -> SelectView -> Verify], with bounded retries that re-run only the
failed sub-task's action generation from the current state (no scene reset),
and hard budgets on executed steps and per-sub-task tries.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .actionlang import GripperCommand, Hold, PoseWaypoint, compile as compile_program
from .actionlang import parse as parse_program
from .actionlang import validate as validate_program
from .errors import (
    DemoforgeError,
    DslSyntaxError,
    GenerationExhaustedError,
    NoCandidatesError,
    OracleError,
)
from .geometry import Pose6D, Vec3, vec_add, vec_norm, vec_scale, vec_sub, vec_unit
from .grasp import apply_offset, filter_by_bbox, sample_grasps, select_best
from .oracle.scripted import WorldHandle, make_scripted
from .oracle.types import (
    Decompose,
    DetectPart,
    GenerateAction,
    ListObjects,
    QueryMeta,
    SelectView,
    Verify,
    decision_to_wire,
    query_summary,
)
from .render import default_rig, render_view, tile_views
from .taskfile import load_builtin
from .world import (
    DEFAULT_WORKSPACE,
    MotionEvent,
    TaskSpec,
    WorldState,
    check_success,
    move_to_waypoint,
    set_gripper,
    spawn_scene,
)

PRE_GRASP_DISTANCE = 0.10
PUSH_STANDOFF = 0.08
DEFAULT_PLACE_OFFSET = (0.0, 0.0, 0.05)

OUTCOME_SUCCESS = "success"
OUTCOME_BUDGET_STEPS = "fail_budget_steps"
OUTCOME_BUDGET_TRIES = "fail_budget_tries"
OUTCOME_ORACLE = "fail_oracle"
OUTCOME_NO_CANDIDATES = "fail_no_candidates"
OUTCOME_FINAL_CHECK = "fail_final_check"

# Shipped few-shot snippets for GenerateAction prompts.
EXAMPLE_PROGRAMS = (
    "move_rel(dz=-0.05); gripper(close); move_rel(dz=0.1)",
    "rotate(yaw=90)",
    "move_rel(dx=0.05); pause(0.5); move_rel(dx=-0.05); gripper(open)",
)


@dataclass(frozen=True)
class Budgets:
    max_action_steps: int = 50
    max_verify_tries: int = 30

    def __post_init__(self):
        if self.max_action_steps < 1 or self.max_verify_tries < 1:
            raise ValueError("budgets must be >= 1")


@dataclass(frozen=True)
class SubTask:
    index: int  # 1-based
    description: str
    condition: str
    kind: str
    target: tuple[str, str] | None = None


@dataclass(frozen=True)
class SubTaskPlan:
    entries: tuple[SubTask, ...]
    source: str = "oracle"

    def __post_init__(self):
        if not self.entries:
            raise DemoforgeError("sub-task plan must be non-empty")
        for i, e in enumerate(self.entries, start=1):
            if e.index != i:
                raise DemoforgeError("sub-task indices must be contiguous from 1")


@dataclass(frozen=True)
class StepRecord:
    index: int                     # == steps_executed after this step
    kind: str                      # move | gripper
    ee_pos: Vec3                   # executed pose (may differ from the command on truncation)
    ee_quat: tuple[float, float, float, float]
    gripper: str                   # open | close
    aperture: float
    attached: tuple[str, str] | None
    subtask_index: int
    attempt: int
    source: str                    # grasp | program | recovery
    events: tuple[str, ...] = ()
    objects: dict = field(default_factory=dict)  # id -> {"pos": [...], "joint": v|None}
    cmd_pos: Vec3 | None = None    # commanded waypoint, move steps only
    cmd_quat: tuple[float, float, float, float] | None = None


@dataclass
class ViewSnapshot:
    step_index: int
    label: str        # decision point, e.g. "subtask_1_attempt_1_action"
    view_name: str
    rgb: np.ndarray       # uint8
    depth_mm: np.ndarray  # uint16

    def __eq__(self, other):
        if not isinstance(other, ViewSnapshot):
            return NotImplemented
        return (
            self.step_index == other.step_index
            and self.label == other.label
            and self.view_name == other.view_name
            and np.array_equal(self.rgb, other.rgb)
            and np.array_equal(self.depth_mm, other.depth_mm)
        )


@dataclass(frozen=True)
class TranscriptEntry:
    kind: str
    subtask_index: int
    attempt: int
    query: dict
    decision: dict
    latency_s: float
    backend_id: str
    retry_count: int = 0
    error: str = ""


@dataclass
class EpisodeRecord:
    task_id: str
    instruction: str
    seed: int
    outcome: str
    budgets: Budgets
    plan: tuple[SubTask, ...]
    steps: tuple[StepRecord, ...]
    try_counts: tuple[int, ...]
    transcript: tuple[TranscriptEntry, ...]
    initial_ee_pos: Vec3
    initial_ee_quat: tuple[float, float, float, float]
    initial_objects: dict
    final_objects: dict
    views: tuple[ViewSnapshot, ...] = ()

    def __eq__(self, other):
        # semantic equality: wall-clock transcript latency is excluded
        if not isinstance(other, EpisodeRecord):
            return NotImplemented
        return self.canonical_dict(with_latency=False) == other.canonical_dict(
            with_latency=False
        ) and list(self.views) == list(other.views)

    def canonical_dict(self, with_latency: bool = False) -> dict:
        entries = []
        for t in self.transcript:
            d = {
                "kind": t.kind, "subtask_index": t.subtask_index, "attempt": t.attempt,
                "query": t.query, "decision": t.decision, "backend_id": t.backend_id,
                "retry_count": t.retry_count, "error": t.error,
            }
            if with_latency:
                d["latency_s"] = t.latency_s
            entries.append(d)
        return {
            "task_id": self.task_id,
            "instruction": self.instruction,
            "seed": self.seed,
            "outcome": self.outcome,
            "budgets": [self.budgets.max_action_steps, self.budgets.max_verify_tries],
            "plan": [
                {"index": s.index, "description": s.description, "condition": s.condition,
                 "kind": s.kind, "target": list(s.target) if s.target else None}
                for s in self.plan
            ],
            "steps": [
                {"index": s.index, "kind": s.kind, "ee_pos": list(s.ee_pos),
                 "ee_quat": list(s.ee_quat), "gripper": s.gripper, "aperture": s.aperture,
                 "attached": list(s.attached) if s.attached else None,
                 "subtask_index": s.subtask_index, "attempt": s.attempt,
                 "source": s.source, "events": list(s.events), "objects": s.objects,
                 "cmd_pos": list(s.cmd_pos) if s.cmd_pos else None,
                 "cmd_quat": list(s.cmd_quat) if s.cmd_quat else None}
                for s in self.steps
            ],
            "try_counts": list(self.try_counts),
            "transcript": entries,
            "initial_ee_pos": list(self.initial_ee_pos),
            "initial_ee_quat": list(self.initial_ee_quat),
            "initial_objects": self.initial_objects,
            "final_objects": self.final_objects,
        }

    def digest(self) -> str:
        """Deterministic content hash; excludes wall-clock latency."""
        blob = json.dumps(self.canonical_dict(with_latency=False), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def _object_snapshot(state: WorldState) -> dict:
    out = {}
    for obj in state.objects:
        pose = obj.effective_pose()
        joint = obj.articulation.value if obj.articulation is not None else None
        out[obj.id] = {"pos": [float(c) for c in pose.position], "joint": joint}
    return out


class _StepBudgetExceeded(Exception):
    pass


class _AttemptFailed(Exception):
    """Retryable failure inside one try; .cause in {oracle, no_candidates, program}."""

    def __init__(self, cause: str, detail: str = ""):
        self.cause = cause
        self.detail = detail
        super().__init__(f"{cause}: {detail}")


class _EpisodeRunner:
    def __init__(self, task: TaskSpec, backend, budgets: Budgets, seed: int,
                 rig=None, record_views: bool = False, workspace=DEFAULT_WORKSPACE):
        self.task = task
        self.backend = backend
        self.budgets = budgets
        self.seed = seed
        self.rig_fn = rig if rig is not None else default_rig
        self.record_views = record_views
        self.workspace = workspace
        self.episode_id = f"{task.id}-{seed:06d}"

        self.handle = WorldHandle(task, spawn_scene(task, seed))
        self.steps: list[StepRecord] = []
        self.transcript: list[TranscriptEntry] = []
        self.views: list[ViewSnapshot] = []
        self.current_subtask = 0
        self.current_attempt = 0
        self.current_source = "grasp"

    # -- oracle plumbing -----------------------------------------------------

    def ask(self, query):
        t0 = time.perf_counter()
        error = ""
        decision = None
        try:
            decision = self.backend.query(query)
        except OracleError as e:
            error = f"{type(e).__name__}: {e}"
            raise
        finally:
            latency = time.perf_counter() - t0
            retry = getattr(self.backend, "last_retry_count", 0)
            self.transcript.append(
                TranscriptEntry(
                    kind=query.kind,
                    subtask_index=query.meta.subtask_index,
                    attempt=query.meta.attempt,
                    query=query_summary(query),
                    decision=decision_to_wire(decision) if decision is not None else {},
                    latency_s=latency,
                    backend_id=getattr(self.backend, "backend_id", "unknown"),
                    retry_count=retry,
                    error=error,
                )
            )
        return decision

    def meta(self) -> QueryMeta:
        return QueryMeta(self.episode_id, self.current_subtask, self.current_attempt)

    # -- world plumbing ------------------------------------------------------

    def _record_step(self, kind: str, events: tuple[str, ...], command: Pose6D | None = None):
        state = self.handle.state
        self.steps.append(
            StepRecord(
                index=state.steps_executed,
                kind=kind,
                ee_pos=state.ee_pose.position,
                ee_quat=state.ee_pose.orientation,
                gripper="close" if state.gripper_aperture < 1.0 else "open",
                aperture=state.gripper_aperture,
                attached=state.attached,
                subtask_index=self.current_subtask,
                attempt=self.current_attempt,
                source=self.current_source,
                events=events,
                objects=_object_snapshot(state),
                cmd_pos=command.position if command else None,
                cmd_quat=command.orientation if command else None,
            )
        )

    def exec_move(self, target: Pose6D):
        if self.handle.state.steps_executed + 1 > self.budgets.max_action_steps:
            raise _StepBudgetExceeded()
        new_state, events = move_to_waypoint(self.handle.state, target, self.workspace)
        if events and events[0].kind == "workspace_rejected":
            raise _AttemptFailed("program", "waypoint outside workspace")
        self.handle.state = new_state
        self._record_step("move", tuple(self._event_tag(e) for e in events), command=target)

    def exec_gripper(self, command: str):
        if self.handle.state.steps_executed + 1 > self.budgets.max_action_steps:
            raise _StepBudgetExceeded()
        self.handle.state = set_gripper(self.handle.state, command)
        self._record_step("gripper", ())

    @staticmethod
    def _event_tag(e: MotionEvent) -> str:
        return e.kind if not e.object_id else f"{e.kind}:{e.object_id}"

    # -- rendering / view selection ------------------------------------------

    def render_rig(self):
        cams = self.rig_fn(self.handle.state)
        return [render_view(self.handle.state, c) for c in cams]

    def select_view(self, frames, text: str, label: str):
        tiled = tile_views(frames)
        decision = self.ask(SelectView(self.meta(), text, tiled, len(frames), tuple(frames)))
        frame = frames[decision.index - 1]
        if self.record_views:
            self.views.append(
                ViewSnapshot(
                    step_index=self.handle.state.steps_executed,
                    label=label,
                    view_name=frame.camera.name,
                    rgb=frame.rgb.copy(),
                    depth_mm=np.clip(np.round(frame.depth * 1000.0), 0, 65535).astype(np.uint16),
                )
            )
        return frame

    # -- sub-task execution ---------------------------------------------------

    def run_subtask_action(self, subtask: SubTask):
        frames = self.render_rig()
        frame = self.select_view(
            frames, subtask.description,
            f"subtask_{subtask.index}_attempt_{self.current_attempt}_action",
        )
        if subtask.kind == "object_centric":
            self._object_centric_action(subtask, frame)
        else:
            self._agent_centric_action(subtask, frame)

    def _object_centric_action(self, subtask: SubTask, frame):
        if subtask.target is None:
            raise _AttemptFailed("program", "object-centric sub-task without a target")
        oid, part = subtask.target
        box = self.ask(
            DetectPart(self.meta(), oid, part, subtask.description, frame)
        ).bbox
        candidates = sample_grasps(self.handle.state, self.seed)
        filtered = filter_by_bbox(candidates, frame, box)
        try:
            best = select_best(filtered, frame, box)
        except NoCandidatesError as e:
            raise _AttemptFailed("no_candidates", str(e)) from e
        gen = self.ask(
            GenerateAction(self.meta(), subtask.description, frame,
                           example_programs=(), mode="object_offset")
        )
        state = self.handle.state
        # place only when holding something *other* than this sub-task's target;
        # a retry of a grasp sub-task that already holds its target regrasps it
        holding_other = state.attached is not None and state.attached[0] != oid
        if holding_other:
            offset = gen.offset if gen.offset is not None else DEFAULT_PLACE_OFFSET
            target = vec_add(best.pose.position, offset)
            self.exec_move(Pose6D(target, state.ee_pose.orientation))
            self.exec_gripper("open")
        elif state.attached is None and gen.offset is not None and vec_norm(gen.offset) > 1e-9:
            direction = vec_unit(gen.offset)
            if state.gripper_aperture >= 1.0:
                self.exec_gripper("close")
            pre = vec_sub(best.pose.position, vec_scale(direction, PUSH_STANDOFF))
            self.exec_move(Pose6D(pre, best.pose.orientation))
            self.exec_move(
                Pose6D(vec_add(best.pose.position, gen.offset), best.pose.orientation)
            )
        else:
            if state.gripper_aperture < 1.0:
                self.exec_gripper("open")
            pre = apply_offset(best, (-PRE_GRASP_DISTANCE, 0.0, 0.0), "approach")
            self.exec_move(pre)
            self.exec_move(best.pose)
            self.exec_gripper("close")

    def _agent_centric_action(self, subtask: SubTask, frame):
        gen = self.ask(
            GenerateAction(self.meta(), subtask.description, frame,
                           example_programs=EXAMPLE_PROGRAMS, mode="agent_program")
        )
        try:
            program = parse_program(gen.text)
        except DslSyntaxError as e:
            raise _AttemptFailed("program", f"parse error: {e}") from e
        report = validate_program(program, self.workspace, self.handle.state.ee_pose)
        if not report.ok:
            first = report.violations[0]
            raise _AttemptFailed(
                "program",
                f"{first.kind} at line {first.span.line}, col {first.span.col}: {first.detail}",
            )
        for wp in compile_program(program, self.handle.state.ee_pose):
            if isinstance(wp, PoseWaypoint):
                self.exec_move(wp.pose)
            elif isinstance(wp, GripperCommand):
                self.exec_gripper(wp.action)
            elif isinstance(wp, Hold):
                pass

    def verify_subtask(self, subtask: SubTask) -> bool:
        frames = self.render_rig()
        frame = self.select_view(
            frames, subtask.condition,
            f"subtask_{subtask.index}_attempt_{self.current_attempt}_verify",
        )
        verdict = self.ask(Verify(self.meta(), subtask.condition, frame))
        return bool(verdict.value)

    # -- episode --------------------------------------------------------------

    def run(self) -> EpisodeRecord:
        state0 = self.handle.state
        initial = {
            "ee_pos": state0.ee_pose.position,
            "ee_quat": state0.ee_pose.orientation,
            "objects": _object_snapshot(state0),
        }
        if hasattr(self.backend, "bind_episode"):
            self.backend.bind_episode(self.handle, self.episode_id, self.seed)

        outcome = None
        try_counts: list[int] = []
        plan_entries: tuple[SubTask, ...] = ()
        try:
            frames = self.render_rig()
            tiled = tile_views(frames)
            objects = self.ask(ListObjects(self.meta(), tiled, tuple(frames)))
            plan_decision = self.ask(
                Decompose(self.meta(), self.task.instruction, objects.names, tiled)
            )
            plan_entries = tuple(
                SubTask(i + 1, e.description, e.condition, e.task_kind, e.target)
                for i, e in enumerate(plan_decision.entries)
            )
        except OracleError:
            outcome = OUTCOME_ORACLE

        if outcome is None:
            plan = SubTaskPlan(plan_entries)
            try_counts = [0] * len(plan.entries)
            for subtask in plan.entries:
                self.current_subtask = subtask.index
                verified = False
                last_cause = "verify"
                for attempt in range(1, self.budgets.max_verify_tries + 1):
                    self.current_attempt = attempt
                    try_counts[subtask.index - 1] = attempt
                    base_source = "grasp" if subtask.kind == "object_centric" else "program"
                    self.current_source = base_source if attempt == 1 else "recovery"
                    try:
                        self.run_subtask_action(subtask)
                    except _StepBudgetExceeded:
                        outcome = OUTCOME_BUDGET_STEPS
                        break
                    except OracleError:
                        last_cause = "oracle"
                        continue
                    except _AttemptFailed as e:
                        last_cause = e.cause
                        continue
                    try:
                        if self.verify_subtask(subtask):
                            verified = True
                            break
                        last_cause = "verify"
                    except OracleError:
                        last_cause = "oracle"
                if outcome is not None:
                    break
                if not verified:
                    outcome = {
                        "verify": OUTCOME_BUDGET_TRIES,
                        "program": OUTCOME_BUDGET_TRIES,
                        "oracle": OUTCOME_ORACLE,
                        "no_candidates": OUTCOME_NO_CANDIDATES,
                    }[last_cause]
                    break

        if outcome is None:
            outcome = (
                OUTCOME_SUCCESS
                if check_success(self.handle.state, self.task)
                else OUTCOME_FINAL_CHECK
            )

        return EpisodeRecord(
            task_id=self.task.id,
            instruction=self.task.instruction,
            seed=self.seed,
            outcome=outcome,
            budgets=self.budgets,
            plan=plan_entries,
            steps=tuple(self.steps),
            try_counts=tuple(try_counts),
            transcript=tuple(self.transcript),
            initial_ee_pos=initial["ee_pos"],
            initial_ee_quat=initial["ee_quat"],
            initial_objects=initial["objects"],
            final_objects=_object_snapshot(self.handle.state),
            views=tuple(self.views),
        )


def run_episode(task: TaskSpec, backend, budgets: Budgets = Budgets(), seed: int = 0,
                rig=None, record_views: bool = False,
                workspace=DEFAULT_WORKSPACE) -> EpisodeRecord:
    """Run one episode; deterministic given (task, seed, backend determinism)."""
    return _EpisodeRunner(task, backend, budgets, seed, rig, record_views, workspace).run()


@dataclass
class DatasetManifest:
    format_version: int
    task_id: str
    target_successes: int
    episodes: list[dict]  # {"path", "seed", "outcome", "step_count", "try_counts", "retained_failure"}
    created_unix: float
    root: str = ""

    def success_entries(self) -> list[dict]:
        return [e for e in self.episodes if not e["retained_failure"]]


def generate_dataset(task: TaskSpec, backend, budgets: Budgets, target_successes: int,
                     out_dir, seed_start: int = 0, cap_factor: int = 20,
                     rig=None, record_views: bool = False) -> DatasetManifest:
    """Run episodes over consecutive seeds until enough successes are stored.

    Successful episodes land in episode_####/; failures are retained under
    failures/ and flagged in the manifest. Raises GenerationExhaustedError if
    the episode cap (cap_factor * target) passes first.
    """
    from pathlib import Path

    from filelock import FileLock

    from . import datakit

    if target_successes < 1:
        raise ValueError("target_successes must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(out_dir / ".dataset.lock"))
    entries: list[dict] = []
    successes = 0
    cap = cap_factor * target_successes
    manifest = DatasetManifest(
        format_version=datakit.FORMAT_VERSION,
        task_id=task.id,
        target_successes=target_successes,
        episodes=entries,
        created_unix=time.time(),
        root=str(out_dir),
    )
    for i in range(cap):
        seed = seed_start + i
        record = run_episode(task, backend, budgets, seed, rig=rig, record_views=record_views)
        if record.outcome == OUTCOME_SUCCESS:
            rel = f"episode_{successes:04d}"
            successes += 1
        else:
            rel = f"failures/episode_{i:04d}"
        # exclusive writer lock; the manifest is rewritten atomically per episode
        with lock:
            datakit.write_episode(record, out_dir / rel)
            entries.append({
                "path": rel,
                "seed": seed,
                "outcome": record.outcome,
                "step_count": len(record.steps),
                "try_counts": list(record.try_counts),
                "retained_failure": record.outcome != OUTCOME_SUCCESS,
            })
            datakit.write_manifest(manifest, out_dir)
        if successes >= target_successes:
            break
    if successes < target_successes:
        raise GenerationExhaustedError(
            f"{successes}/{target_successes} successes after {cap} episodes"
        )
    return manifest


@dataclass
class AttributionReport:
    n_episodes: int
    rates: dict
    success_base: float
    success_perception_zeroed: float
    success_reasoning_zeroed: float
    outcomes_base: list[str]
    outcomes_perception_zeroed: list[str]
    outcomes_reasoning_zeroed: list[str]
    digests_base: list[str]
    digests_perception_zeroed: list[str]
    digests_reasoning_zeroed: list[str]

    @property
    def perception_attribution(self) -> float:
        return self.success_perception_zeroed - self.success_base

    @property
    def reasoning_attribution(self) -> float:
        return self.success_reasoning_zeroed - self.success_base


def error_breakdown(task: TaskSpec, budgets: Budgets, base_rates, n_episodes: int,
                    seed_start: int = 0, rig=None) -> AttributionReport:
    """Three seeded scripted batches: base rates, perception zeroed, reasoning zeroed."""
    from .oracle.injection import ErrorInjection

    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if not isinstance(base_rates, ErrorInjection):
        base_rates = ErrorInjection(rates=dict(base_rates))

    def batch(injection):
        outcomes, digests = [], []
        for i in range(n_episodes):
            seed = seed_start + i
            handle = WorldHandle(task, spawn_scene(task, seed))
            backend = make_scripted(handle, injection, episode_seed=seed)
            record = run_episode(task, backend, budgets, seed, rig=rig)
            outcomes.append(record.outcome)
            digests.append(record.digest())
        rate = sum(1 for o in outcomes if o == OUTCOME_SUCCESS) / n_episodes
        return rate, outcomes, digests

    base = batch(base_rates)
    no_perc = batch(base_rates.zero_perception())
    no_reas = batch(base_rates.zero_reasoning())
    return AttributionReport(
        n_episodes=n_episodes,
        rates=dict(base_rates.rates),
        success_base=base[0],
        success_perception_zeroed=no_perc[0],
        success_reasoning_zeroed=no_reas[0],
        outcomes_base=base[1],
        outcomes_perception_zeroed=no_perc[1],
        outcomes_reasoning_zeroed=no_reas[1],
        digests_base=base[2],
        digests_perception_zeroed=no_perc[2],
        digests_reasoning_zeroed=no_reas[2],
    )


def scripted_episode(task_id: str, seed: int = 0, injection=None, budgets: Budgets = Budgets(),
                     rig=None, record_views: bool = False) -> EpisodeRecord:
    """Convenience wrapper: builtin task + scripted backend in one call."""
    from .oracle.injection import NO_INJECTION

    task = load_builtin(task_id)
    handle = WorldHandle(task, spawn_scene(task, seed))
    backend = make_scripted(handle, injection or NO_INJECTION, episode_seed=seed)
    return run_episode(task, backend, budgets, seed, rig=rig, record_views=record_views)
