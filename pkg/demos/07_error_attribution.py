"""Perception-vs-reasoning error attribution via role-zeroed batches.

Run: python demos/07_error_attribution.py
"""
from demoforge.engine import Budgets, error_breakdown
from demoforge.oracle import ErrorInjection
from demoforge.taskfile import load_builtin

task = load_builtin("pick_and_lift")
rates = ErrorInjection(
    rates={"detect_part": 0.4, "select_view": 0.3, "verify": 0.2}, seed=5
)
report = error_breakdown(task, Budgets(), rates, n_episodes=12)

print(f"base rates: {report.rates}")
print(f"success base:               {report.success_base:.2f}")
print(f"success perception zeroed:  {report.success_perception_zeroed:.2f}")
print(f"success reasoning zeroed:   {report.success_reasoning_zeroed:.2f}")
print(f"attributed to perception:   {report.perception_attribution:+.2f}")
print(f"attributed to reasoning:    {report.reasoning_attribution:+.2f}")
print("\nper-episode outcomes (base):", report.outcomes_base)
