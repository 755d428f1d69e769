"""demoforge: oracle-driven manipulation planning and demonstration synthesis.

A desk-scale pipeline: language tasks are decomposed into verified sub-tasks
by a pluggable decision oracle, executed in a built-in kinematic simulator
through grasp sampling or a small action DSL, retried on verification failure,
and recorded into success-filtered demonstration datasets with analysis and
replay-policy tooling.
"""
from . import actionlang, datakit, engine, grasp, oracle, render, taskfile, world
from .engine import (
    AttributionReport,
    Budgets,
    EpisodeRecord,
    SubTask,
    SubTaskPlan,
    error_breakdown,
    generate_dataset,
    run_episode,
    scripted_episode,
)
from .geometry import Pose6D
from .taskfile import BUILTIN_TASKS, load_builtin, load_task
from .world import TaskSpec, WorldState, check_success, spawn_scene

__version__ = "0.1.0"

__all__ = [
    "AttributionReport", "BUILTIN_TASKS", "Budgets", "EpisodeRecord", "Pose6D",
    "SubTask", "SubTaskPlan", "TaskSpec", "WorldState", "actionlang", "check_success",
    "datakit", "engine", "error_breakdown", "generate_dataset", "grasp", "load_builtin",
    "load_task", "oracle", "render", "run_episode", "scripted_episode", "spawn_scene",
    "taskfile", "world",
]
