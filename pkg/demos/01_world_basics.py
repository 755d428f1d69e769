"""Tour of the kinematic world: spawning, motion, grasping, articulation.

Run: python demos/01_world_basics.py
"""
from demoforge.geometry import Pose6D
from demoforge.taskfile import load_builtin
from demoforge.world import check_success, move_to_waypoint, set_gripper, spawn_scene

TOOL_DOWN = (0.0, 1.0, 0.0, 0.0)

task = load_builtin("open_drawer")
state = spawn_scene(task, seed=3)
print(f"task: {task.instruction!r}")
for obj in state.objects:
    art = obj.articulation
    joint = f", joint {art.kind} value={art.value:.3f}" if art else ""
    print(f"  {obj.id:8s} {obj.shape.kind:8s} at {obj.pose.position}{joint}")

# reach above the drawer handle, descend, and grasp
gp = state.object("drawer").world_grasp_point("handle")
print(f"\nhandle grasp point: {tuple(round(c, 4) for c in gp)}")

state, events = move_to_waypoint(state, Pose6D((gp[0], gp[1], gp[2] + 0.10), TOOL_DOWN))
print("pre-grasp events:", [e.kind for e in events])
state, events = move_to_waypoint(state, Pose6D(gp, TOOL_DOWN))
print("descend events:", [e.kind for e in events], "(contact truncation is expected)")
state = set_gripper(state, "close")
print("attached:", state.attached)

# pull along the prismatic axis; the commanded displacement projects onto the joint
target = Pose6D((state.ee_pose.position[0] + 0.12, *state.ee_pose.position[1:]), TOOL_DOWN)
state, events = move_to_waypoint(state, target)
print("pull events:", [e.kind for e in events])
print("drawer joint value:", round(state.object("drawer").articulation.value, 4))
print("task success:", check_success(state, task))
print("steps executed:", state.steps_executed)
