import numpy as np
import pytest

from conftest import single_subtask_task, small_rig
from demoforge.engine import (
    Budgets,
    OUTCOME_BUDGET_STEPS,
    OUTCOME_BUDGET_TRIES,
    OUTCOME_NO_CANDIDATES,
    OUTCOME_ORACLE,
    OUTCOME_SUCCESS,
    error_breakdown,
    generate_dataset,
    run_episode,
    scripted_episode,
)
from demoforge.errors import GenerationExhaustedError, OracleError, OracleTransportError
from demoforge.oracle import ErrorInjection, WorldHandle, make_scripted
from demoforge.taskfile import load_builtin
from demoforge.world import check_success, spawn_scene


def scripted_run(task, seed=0, rates=None, budgets=Budgets(), inj_seed=0, rig=small_rig,
                 record_views=False):
    injection = ErrorInjection(rates=rates or {}, seed=inj_seed)
    handle = WorldHandle(task, spawn_scene(task, seed))
    backend = make_scripted(handle, injection, episode_seed=seed)
    return run_episode(task, backend, budgets, seed, rig=rig, record_views=record_views)


# -- happy paths ---------------------------------------------------------------


def test_pick_and_lift_perfect_oracle():
    record = scripted_episode("pick_and_lift", seed=1)
    assert record.outcome == OUTCOME_SUCCESS
    assert record.try_counts == (1, 1)
    assert [s.description for s in record.plan] == [
        "grasp the red block", "lift the block straight up"
    ]
    # transcript completeness: every query logged in order
    kinds = [t.kind for t in record.transcript]
    assert kinds[0] == "list_objects" and kinds[1] == "decompose"
    assert kinds.count("verify") == 2
    assert all(t.backend_id == "scripted" for t in record.transcript)


def test_all_waypoint_sources_tagged():
    record = scripted_episode("pick_and_lift", seed=1)
    sources = {s.source for s in record.steps}
    assert sources == {"grasp", "program"}


def test_deterministic_episodes():
    a = scripted_episode("put_block", seed=5)
    b = scripted_episode("put_block", seed=5)
    assert a.digest() == b.digest()
    assert a == b


# -- budget semantics -------------------------------------------------------------


def test_verify_flip_burns_exactly_30_tries():
    task = single_subtask_task()
    record = scripted_run(task, seed=0, rates={"verify": 1.0})
    assert record.outcome == OUTCOME_BUDGET_TRIES
    assert record.try_counts == (30,)
    # one rotate waypoint per try
    assert len(record.steps) == 30
    assert [t.kind for t in record.transcript].count("verify") == 30


def test_51_waypoints_trips_step_budget_at_50():
    program = "; ".join(["rotate(yaw=1)"] * 51)
    task = single_subtask_task(program=program)
    record = scripted_run(task, seed=0)
    assert record.outcome == OUTCOME_BUDGET_STEPS
    assert len(record.steps) == 50
    assert record.steps[-1].index == 50


def test_50_waypoints_fits_budget():
    program = "; ".join(["rotate(yaw=1)"] * 50)
    task = single_subtask_task(program=program)
    record = scripted_run(task, seed=0)
    assert record.outcome == OUTCOME_SUCCESS
    assert len(record.steps) == 50


def test_budget_never_exceeded_under_retries():
    task = load_builtin("pick_and_lift")
    record = scripted_run(task, seed=3, rates={"verify": 0.7}, inj_seed=11)
    assert len(record.steps) <= record.budgets.max_action_steps
    assert all(t <= record.budgets.max_verify_tries for t in record.try_counts)


def test_flip_rate_one_never_false_succeeds_on_grasp_tasks():
    # a retry of a grasp sub-task that still holds its target must regrasp,
    # not place-and-drop (which would let a flipped verdict "pass" the task)
    task = load_builtin("pick_and_lift")
    for seed in range(4):
        record = scripted_run(task, seed=seed, rates={"verify": 1.0}, inj_seed=seed)
        assert record.outcome in (OUTCOME_BUDGET_STEPS, OUTCOME_BUDGET_TRIES)
        steps_per_regrasp = 4  # open, pre-grasp, grasp, close
        assert record.try_counts[0] >= (
            record.budgets.max_action_steps // steps_per_regrasp - 1
        )


# -- recovery ---------------------------------------------------------------------


def test_retry_recovers_from_flipped_verify():
    task = single_subtask_task()
    record = scripted_run(task, seed=0, rates={"verify": 0.5}, inj_seed=1)
    assert record.outcome == OUTCOME_SUCCESS
    assert record.try_counts[0] >= 1
    recovery_steps = [s for s in record.steps if s.source == "recovery"]
    if record.try_counts[0] > 1:
        assert recovery_steps


def test_monte_carlo_recovery_matches_closed_form():
    # per-sub-task success ~ 1 - p^tries over seeded episodes
    task = single_subtask_task()
    p = 0.5
    n = 120
    tries = 4
    budgets = Budgets(max_action_steps=50, max_verify_tries=tries)
    wins = 0
    for seed in range(n):
        record = scripted_run(task, seed=seed, rates={"verify": p}, budgets=budgets)
        wins += record.outcome == OUTCOME_SUCCESS
    expect = 1 - p ** tries
    se = (expect * (1 - expect) / n) ** 0.5
    assert abs(wins / n - expect) <= 3 * se + 1e-9


def test_oracle_error_exhaustion_is_fail_oracle():
    task = single_subtask_task()

    class FailingBackend:
        backend_id = "broken"

        def bind_episode(self, handle, episode_id, seed):
            self.inner = make_scripted(handle, ErrorInjection(), seed)

        def query(self, q):
            if q.kind == "generate_action":
                raise OracleTransportError("endpoint down")
            return self.inner.query(q)

    record = run_episode(task, FailingBackend(), Budgets(max_verify_tries=3), 0,
                         rig=small_rig)
    assert record.outcome == OUTCOME_ORACLE
    assert record.try_counts == (3,)


def test_empty_candidate_exhaustion_is_fail_no_candidates():
    task = load_builtin("pick_and_lift")

    class TinyBoxBackend:
        backend_id = "tiny"

        def bind_episode(self, handle, episode_id, seed):
            self.inner = make_scripted(handle, ErrorInjection(), seed)

        def query(self, q):
            dec = self.inner.query(q)
            if q.kind == "detect_part":
                from demoforge.grasp import BBox2D
                from demoforge.oracle.types import PartBox

                return PartBox(BBox2D(dec.bbox.view, 0.0, 0.0, 1.0, 1.0))
            return dec

    record = run_episode(task, TinyBoxBackend(), Budgets(max_verify_tries=2), 0,
                         rig=small_rig)
    assert record.outcome == OUTCOME_NO_CANDIDATES
    assert record.try_counts[0] == 2


def test_corrupted_program_counts_as_failed_attempt():
    task = single_subtask_task()
    record = scripted_run(task, seed=0, rates={"generate_action": 1.0}, inj_seed=2,
                          budgets=Budgets(max_verify_tries=5))
    assert record.outcome == OUTCOME_BUDGET_TRIES
    assert record.try_counts == (5,)
    assert len(record.steps) == 0  # nothing ever executed


# -- recording -----------------------------------------------------------------------


def test_steps_monotone_and_attempt_tagged():
    record = scripted_episode("open_drawer", seed=2)
    indices = [s.index for s in record.steps]
    assert indices == sorted(indices)
    assert all(s.attempt >= 1 for s in record.steps)
    assert all(s.objects for s in record.steps)


def test_view_snapshots_recorded_when_enabled():
    task = single_subtask_task()
    record = scripted_run(task, seed=0, record_views=True)
    assert record.views
    labels = {v.label for v in record.views}
    assert any("action" in l for l in labels) and any("verify" in l for l in labels)
    assert record.views[0].rgb.dtype == np.uint8
    assert record.views[0].depth_mm.dtype == np.uint16


def test_success_implies_check_success_on_replay():
    from demoforge import datakit

    task = load_builtin("push_block")
    record = scripted_run(task, seed=4)
    assert record.outcome == OUTCOME_SUCCESS
    final = datakit.replay_episode(task, record)
    assert check_success(final, task)


# -- generate_dataset ------------------------------------------------------------------


def test_generate_dataset_ten_successes(tmp_path):
    task = single_subtask_task()
    handle = WorldHandle(task, spawn_scene(task, 0))
    backend = make_scripted(handle, ErrorInjection(), 0)
    manifest = generate_dataset(task, backend, Budgets(), 10, tmp_path / "ds",
                                rig=small_rig)
    assert len(manifest.success_entries()) == 10
    assert len(manifest.episodes) == 10  # perfect oracle: no failures needed
    assert (tmp_path / "ds" / "manifest.json").exists()
    assert (tmp_path / "ds" / "episode_0009" / "meta.json").exists()


def test_generate_dataset_retains_failures(tmp_path):
    task = single_subtask_task()
    handle = WorldHandle(task, spawn_scene(task, 0))
    backend = make_scripted(handle, ErrorInjection(rates={"verify": 0.4}, seed=5), 0)
    manifest = generate_dataset(task, backend, Budgets(max_verify_tries=1), 3,
                                tmp_path / "ds", rig=small_rig)
    assert len(manifest.success_entries()) == 3
    failures = [e for e in manifest.episodes if e["retained_failure"]]
    for f in failures:
        assert (tmp_path / "ds" / f["path"] / "meta.json").exists()
        assert f["path"].startswith("failures/")


def test_generate_dataset_exhaustion(tmp_path):
    task = single_subtask_task()
    handle = WorldHandle(task, spawn_scene(task, 0))
    backend = make_scripted(handle, ErrorInjection(rates={"verify": 1.0}), 0)
    with pytest.raises(GenerationExhaustedError):
        generate_dataset(task, backend, Budgets(max_verify_tries=2), 2,
                         tmp_path / "ds", cap_factor=2, rig=small_rig)


# -- error breakdown --------------------------------------------------------------------


def test_breakdown_zero_rates_all_identical():
    task = single_subtask_task()
    report = error_breakdown(task, Budgets(), ErrorInjection(), 4, rig=small_rig)
    assert report.success_base == report.success_perception_zeroed == 1.0
    assert report.digests_base == report.digests_perception_zeroed
    assert report.digests_base == report.digests_reasoning_zeroed
    assert report.perception_attribution == 0.0


def test_breakdown_perception_only_shared_seeds():
    task = load_builtin("pick_and_lift")
    rates = ErrorInjection(rates={"detect_part": 0.5, "select_view": 0.5}, seed=3)
    report = error_breakdown(task, Budgets(), rates, 6, rig=small_rig)
    # reasoning-zeroed batch has identical rates -> bit-identical episodes
    assert report.digests_reasoning_zeroed == report.digests_base
    assert report.outcomes_reasoning_zeroed == report.outcomes_base
    # perception-zeroed batch recovers to the perfect-oracle result
    assert report.success_perception_zeroed == 1.0


def test_breakdown_reasoning_rate_one():
    task = single_subtask_task()
    rates = ErrorInjection(rates={"verify": 1.0}, seed=0)
    report = error_breakdown(task, Budgets(max_verify_tries=3), rates, 3, rig=small_rig)
    assert report.success_base == 0.0
    assert report.success_perception_zeroed == 0.0  # perception was already clean
    assert report.success_reasoning_zeroed == 1.0   # zeroing verify recovers
    assert report.reasoning_attribution == 1.0
