"""Dataset generation, keyframes, Chamfer analysis, and the kNN replay policy.

Writes a dataset under demos/out/dataset/.

Run: python demos/06_datasets_and_policies.py
"""
import shutil
from pathlib import Path

from demoforge import datakit
from demoforge.engine import Budgets, generate_dataset
from demoforge.oracle import ErrorInjection, WorldHandle, make_scripted
from demoforge.taskfile import load_builtin
from demoforge.world import spawn_scene

out = Path(__file__).parent / "out" / "dataset"
shutil.rmtree(out, ignore_errors=True)

task = load_builtin("pick_and_lift")
handle = WorldHandle(task, spawn_scene(task, 0))
backend = make_scripted(handle, ErrorInjection(), 0)
manifest = generate_dataset(task, backend, Budgets(), target_successes=10, out_dir=out)
print(f"stored {len(manifest.success_entries())} successes "
      f"({len(manifest.episodes)} episodes run) under {out}")

record = datakit.read_episode(out / "episode_0000")
keyframes = datakit.extract_keyframes(record)
print(f"\nepisode_0000: {len(record.steps)} steps -> {len(keyframes)} keyframes")
for kf in keyframes:
    print(f"  kf step {kf.step_index} [{kf.kind:7s}] gripper={kf.gripper} "
          f"pos={tuple(round(c, 3) for c in kf.ee_pos)}")

other = datakit.read_episode(out / "episode_0001")
cd = datakit.chamfer_distance(
    datakit.episode_positions(record), datakit.episode_positions(other)
)
print(f"\nChamfer distance between episode 0 and 1 keyframe tracks: {cd:.4f} m")

policy = datakit.knn_policy(manifest, k=1)
table = datakit.eval_policy(policy, task, episodes_per_seed=10, seeds=(7, 8, 9))
print(f"\nkNN replay policy on unseen jitter seeds: mean {table.mean:.2f} "
      f"(per seed {table.per_seed})")
baseline = datakit.eval_policy(datakit.RandomPolicy(seed=0), task,
                               episodes_per_seed=10, seeds=(7, 8, 9))
print(f"random baseline: mean {baseline.mean:.2f}")

points = []
for count in (1, 5, 10):
    sub = datakit.DatasetManifest(
        format_version=manifest.format_version, task_id=manifest.task_id,
        target_successes=count, episodes=manifest.success_entries()[:count],
        created_unix=manifest.created_unix, root=manifest.root,
    )
    t = datakit.eval_policy(datakit.knn_policy(sub, k=1), task,
                            episodes_per_seed=10, seeds=(7, 8, 9))
    points.append((count, 100.0 * t.mean))
    print(f"  {count:2d} demos -> {t.mean:.2f}")
slope, intercept, r2 = datakit.fit_scaling(points)
print(f"scaling fit: slope {slope:.3f} %/demo, intercept {intercept:.1f}, r2 {r2:.2f}")
