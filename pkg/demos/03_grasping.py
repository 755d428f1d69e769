"""Grasp pipeline: sample candidates, filter by a detected 2D box, pick the best.

Run: python demos/03_grasping.py
"""
from demoforge.grasp import apply_offset, filter_by_bbox, sample_grasps, select_best
from demoforge.oracle import part_bbox
from demoforge.render import default_rig, render_view
from demoforge.taskfile import load_builtin
from demoforge.world import spawn_scene

state = spawn_scene(load_builtin("put_block"), seed=4)

candidates = sample_grasps(state, seed=0)
print(f"{len(candidates)} task-agnostic candidates over all graspable parts")
by_part = {}
for c in candidates:
    by_part.setdefault((c.source_object, c.source_part), []).append(c)
for (obj, part), group in sorted(by_part.items()):
    qualities = sorted((round(c.quality, 3) for c in group), reverse=True)
    print(f"  {obj}/{part}: {len(group)} candidates, qualities {qualities[:4]}...")

# condition on the task: detect the block body in the front view and filter
view = render_view(state, default_rig(state)[0])
bbox = part_bbox(view, state, "block", "body")
print(f"\ndetected block bbox in {bbox.view!r}: "
      f"({bbox.x_min:.0f},{bbox.y_min:.0f})-({bbox.x_max:.0f},{bbox.y_max:.0f})")

kept = filter_by_bbox(candidates, view, bbox)
print(f"{len(kept)} candidates survive the bbox/occlusion filter "
      f"(all {set(c.source_object for c in kept)})")

best = select_best(kept, view, bbox)
print(f"best grasp: quality {best.quality:.3f}, width {best.width:.3f} m, "
      f"approach {tuple(round(a, 2) for a in best.approach)}")
pre = apply_offset(best, (-0.10, 0.0, 0.0), "approach")
print(f"pre-grasp pose (0.10 m back along approach): "
      f"{tuple(round(c, 3) for c in pre.position)}")
