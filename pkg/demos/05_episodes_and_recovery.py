"""Episodes end to end: perfect runs, injected errors, bounded retry, budgets.

Run: python demos/05_episodes_and_recovery.py
"""
from demoforge.engine import Budgets, run_episode, scripted_episode
from demoforge.oracle import ErrorInjection, WorldHandle, make_scripted
from demoforge.taskfile import BUILTIN_TASKS, load_builtin
from demoforge.world import spawn_scene

print("perfect oracle across the shipped suite (seed 0):")
for task_id in BUILTIN_TASKS:
    record = scripted_episode(task_id, seed=0)
    print(f"  {task_id:14s} {record.outcome:8s} steps={len(record.steps):2d} "
          f"tries={record.try_counts} queries={len(record.transcript)}")

print("\nverification errors force retries (flip rate 0.5 on pick_and_lift):")
task = load_builtin("pick_and_lift")
handle = WorldHandle(task, spawn_scene(task, 2))
backend = make_scripted(handle, ErrorInjection(rates={"verify": 0.5}, seed=8), 2)
record = run_episode(task, backend, Budgets(), seed=2)
print(f"  outcome {record.outcome}, per-sub-task tries {record.try_counts}")
for step in record.steps:
    tag = "RECOVERY" if step.source == "recovery" else step.source
    print(f"    step {step.index:2d} [{tag:8s}] sub-task {step.subtask_index} "
          f"attempt {step.attempt} {step.kind}")

print("\nbudget exhaustion (flip rate 1.0, 30-try budget):")
handle = WorldHandle(task, spawn_scene(task, 3))
backend = make_scripted(handle, ErrorInjection(rates={"verify": 1.0}, seed=1), 3)
record = run_episode(task, backend, Budgets(), seed=3)
print(f"  outcome {record.outcome} after tries={record.try_counts}, "
      f"steps={len(record.steps)} (step budget can bind first on grasp macros)")
