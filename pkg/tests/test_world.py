import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from demoforge.geometry import Pose6D, quat_from_axis_angle, vec_norm, vec_sub
from demoforge.errors import TaskConfigError
from demoforge.taskfile import load_builtin
from demoforge.world import (
    Articulation,
    GRIPPER_SPHERE_RADIUS,
    MotionEvent,
    Part,
    Predicate,
    SceneObject,
    Shape,
    TaskSpec,
    WorldState,
    check_success,
    eval_predicate,
    move_to_waypoint,
    set_gripper,
    spawn_scene,
)

TOOL_DOWN = (0.0, 1.0, 0.0, 0.0)  # gripper pointing straight down


def simple_block(oid="block", pos=(0.0, 0.0, 0.02), graspable=True, standoff=0.025):
    return SceneObject(
        id=oid, name=oid,
        shape=Shape("box", (0.04, 0.04, 0.04)),
        pose=Pose6D(pos),
        parts={"body": Part((0, 0, 0), (0.04, 0.04, 0.04), (0, 0, 0.02 + standoff))},
        graspable=graspable,
    )


def drawer_object(value=0.0):
    return SceneObject(
        id="drawer", name="drawer",
        shape=Shape("box", (0.14, 0.16, 0.10)),
        pose=Pose6D((0.0, 0.0, 0.05)),
        articulation=Articulation("prismatic", (1, 0, 0), (0.0, 0.15), value),
        parts={"handle": Part((0.055, 0, 0.045), (0.03, 0.06, 0.01), (0.055, 0, 0.075))},
        graspable=True,
    )


def make_task(objects, success=(), jitter=None):
    return TaskSpec(
        id="t", instruction="t", scene_config=tuple(objects),
        success=tuple(success), pose_jitter=jitter or {},
    )


def state_with(objects, ee=(0.0, -0.25, 0.30)):
    return WorldState(objects=tuple(objects), ee_pose=Pose6D(ee, TOOL_DOWN))


# -- spawn_scene ---------------------------------------------------------------


def test_spawn_deterministic():
    task = load_builtin("pick_and_lift")
    a = spawn_scene(task, 7)
    b = spawn_scene(task, 7)
    assert a == b  # bit-identical dataclasses


def test_spawn_zero_jitter_identity():
    block = simple_block()
    task = make_task([block])
    state = spawn_scene(task, 13)
    assert state.object("block").pose == block.pose
    assert state.gripper_aperture == 1.0 and state.attached is None


def test_spawn_drawer_starts_closed():
    task = load_builtin("open_drawer")
    state = spawn_scene(task, 3)
    art = state.object("drawer").articulation
    assert art.value == art.limits[0] == 0.0


def test_spawn_rejects_negative_seed():
    with pytest.raises(TaskConfigError):
        spawn_scene(make_task([simple_block()]), -1)


def test_task_validation_unknown_reference():
    with pytest.raises(TaskConfigError):
        make_task([simple_block()], success=[Predicate("above", obj="ghost", z_min=0.1)])


# -- move_to_waypoint ----------------------------------------------------------


def test_free_space_move_reaches_target():
    state = state_with([simple_block(pos=(0.5, 0.5, 0.02))], ee=(0, 0, 0.3))
    new, events = move_to_waypoint(state, Pose6D((0, 0, 0.2), TOOL_DOWN))
    assert new.ee_pose.position == (0.0, 0.0, 0.2)
    assert new.steps_executed == state.steps_executed + 1
    assert events == [MotionEvent("reached")]


def test_workspace_rejection_leaves_state():
    state = state_with([])
    new, events = move_to_waypoint(state, Pose6D((2.0, 0, 0.3), TOOL_DOWN))
    assert new == state
    assert events[0].kind == "workspace_rejected"


def test_collision_truncates_at_last_free_sample():
    block = simple_block(pos=(0.0, 0.0, 0.02))
    state = state_with([block], ee=(0.0, 0.0, 0.30))
    new, events = move_to_waypoint(state, Pose6D((0.0, 0.0, 0.02), TOOL_DOWN))
    assert any(e.kind == "collision" and e.object_id == "block" for e in events)
    # sphere radius 0.04 above the 0.04-tall block: stop no deeper than that
    assert new.ee_pose.position[2] >= 0.04 + GRIPPER_SPHERE_RADIUS - 1e-9
    assert new.object("block").pose == block.pose


def test_drawer_projection_hand_checked():
    # attached to the handle, prismatic +x, commanded (0.10, 0, 0) -> value 0.10
    state = state_with([drawer_object()], ee=(0.055, 0.0, 0.125))
    state = set_gripper(state, "close")
    assert state.attached == ("drawer", "handle")
    target = Pose6D((0.155, 0.0, 0.125), TOOL_DOWN)
    new, events = move_to_waypoint(state, target)
    assert new.object("drawer").articulation.value == pytest.approx(0.10, abs=1e-12)
    # handle (and the whole drawer front) translated with the joint
    assert new.object("drawer").world_grasp_point("handle")[0] == pytest.approx(
        0.055 + 0.10, abs=1e-12
    )
    assert new.ee_pose.position[0] == pytest.approx(0.155, abs=1e-12)


def test_drawer_clamps_at_limit():
    state = state_with([drawer_object()], ee=(0.055, 0.0, 0.125))
    state = set_gripper(state, "close")
    new, events = move_to_waypoint(state, Pose6D((0.255, 0.0, 0.125), TOOL_DOWN))
    assert new.object("drawer").articulation.value == pytest.approx(0.15, abs=1e-12)
    assert any(e.kind == "joint_limit" for e in events)


def test_orthogonal_command_flags_constraint():
    state = state_with([drawer_object()], ee=(0.055, 0.0, 0.125))
    state = set_gripper(state, "close")
    new, events = move_to_waypoint(state, Pose6D((0.075, 0.03, 0.125), TOOL_DOWN))
    assert any(e.kind == "constraint" for e in events)
    # the along-axis component still moves the joint
    assert new.object("drawer").articulation.value == pytest.approx(0.02, abs=1e-12)


def test_push_closed_gripper_translates_block():
    block = simple_block(pos=(0.0, 0.0, 0.02), graspable=True)
    state = state_with([block], ee=(-0.10, 0.0, 0.045))
    state = set_gripper(state, "close")  # far from the grasp point: closes empty
    assert state.attached is None and state.gripper_aperture == 0.0
    new, events = move_to_waypoint(state, Pose6D((0.06, 0.0, 0.045), TOOL_DOWN))
    pushed = [e for e in events if e.kind == "pushed"]
    assert pushed and pushed[0].object_id == "block"
    # block face rides the sphere front; the tool center is 5 mm above the block
    # top, so the effective horizontal clearance is sqrt(r^2 - dz^2)
    clearance = math.sqrt(GRIPPER_SPHERE_RADIUS**2 - 0.005**2)
    assert new.object("block").pose.position[0] == pytest.approx(
        0.06 + clearance + 0.02, abs=1e-6
    )
    assert new.ee_pose.position[0] == pytest.approx(0.06, abs=1e-12)


# -- set_gripper -----------------------------------------------------------------


def test_close_attaches_within_tolerance():
    block = simple_block(standoff=0.025)
    gp = block.world_grasp_point("body")
    state = state_with([block], ee=(gp[0], gp[1], gp[2] + 0.01))
    new = set_gripper(state, "close")
    assert new.attached == ("block", "body")
    assert new.gripper_aperture < 1.0


def test_close_misses_beyond_tolerance():
    block = simple_block()
    gp = block.world_grasp_point("body")
    state = state_with([block], ee=(gp[0], gp[1], gp[2] + 0.05))
    new = set_gripper(state, "close")
    assert new.attached is None


def test_open_detaches_in_place():
    block = simple_block()
    gp = block.world_grasp_point("body")
    state = state_with([block], ee=gp)
    closed = set_gripper(state, "close")
    lifted, _ = move_to_waypoint(closed, Pose6D((gp[0], gp[1], gp[2] + 0.1), TOOL_DOWN))
    pose_before = lifted.object("block").pose
    opened = set_gripper(lifted, "open")
    assert opened.attached is None
    assert opened.object("block").pose == pose_before
    assert opened.gripper_aperture == 1.0


def test_close_tie_breaks_on_smaller_object_id():
    a = simple_block("aaa", pos=(0.0, 0.0, 0.02))
    b = simple_block("bbb", pos=(0.0, 0.0, 0.02))
    gp = a.world_grasp_point("body")
    state = state_with([b, a], ee=gp)
    new = set_gripper(state, "close")
    assert new.attached[0] == "aaa"


# -- check_success ----------------------------------------------------------------


def test_above_predicate():
    block = simple_block(pos=(0, 0, 0.20))
    state = state_with([block])
    assert eval_predicate(state, Predicate("above", obj="block", z_min=0.15))


def test_joint_ge_predicate_false():
    state = state_with([drawer_object(value=0.10)])
    assert not eval_predicate(state, Predicate("joint_ge", obj="drawer", q_min=0.12))


def test_joint_le_and_near_and_inside_predicates():
    a = simple_block("a", pos=(0.0, 0.0, 0.02))
    b = simple_block("b", pos=(0.03, 0.0, 0.02))
    state = state_with([a, b, drawer_object(value=0.05)])
    assert eval_predicate(state, Predicate("joint_le", obj="drawer", q_max=0.05))
    assert not eval_predicate(state, Predicate("joint_le", obj="drawer", q_max=0.04))
    assert eval_predicate(state, Predicate("near", obj="a", obj_b="b", d_max=0.03))
    assert not eval_predicate(state, Predicate("near", obj="a", obj_b="b", d_max=0.02))
    region = ((-0.01, -0.01, 0.0), (0.01, 0.01, 0.05))
    assert eval_predicate(state, Predicate("inside", obj="a", region=region))
    assert not eval_predicate(state, Predicate("inside", obj="b", region=region))


def test_conjunction_attached_and_above():
    block = simple_block(pos=(0.0, 0.0, 0.16))
    gp = block.world_grasp_point("body")
    state = state_with([block], ee=gp)
    state = set_gripper(state, "close")
    task = make_task(
        [block],
        success=[
            Predicate("attached", obj="block"),
            Predicate("above", obj="block", z_min=0.15),
        ],
    )
    assert check_success(state, task)
    assert check_success(state, task)  # idempotent, state untouched


# -- invariants --------------------------------------------------------------------


commands = st.lists(
    st.one_of(
        st.tuples(
            st.just("move"),
            st.tuples(
                st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.floats(0.01, 0.6)
            ),
        ),
        st.tuples(st.just("grip"), st.sampled_from(["open", "close"])),
    ),
    min_size=1,
    max_size=12,
)


def _apply(state, cmds):
    trace = []
    for kind, arg in cmds:
        if kind == "move":
            state, _ = move_to_waypoint(state, Pose6D(arg, TOOL_DOWN))
        else:
            state = set_gripper(state, arg)
        trace.append(state)
    return state, trace


@settings(max_examples=40, deadline=None)
@given(commands)
def test_joint_limits_never_violated(cmds):
    task = load_builtin("open_drawer")
    state, trace = _apply(spawn_scene(task, 5), cmds)
    for s in trace:
        for obj in s.objects:
            if obj.articulation is not None:
                lo, hi = obj.articulation.limits
                assert lo <= obj.articulation.value <= hi


@settings(max_examples=25, deadline=None)
@given(commands)
def test_replay_determinism(cmds):
    task = load_builtin("pick_and_lift")
    a, _ = _apply(spawn_scene(task, 11), cmds)
    b, _ = _apply(spawn_scene(task, 11), cmds)
    assert a == b


@settings(max_examples=25, deadline=None)
@given(commands)
def test_rigid_attachment_transform_constant(cmds):
    block = simple_block()
    gp = block.world_grasp_point("body")
    state = state_with([block], ee=gp)
    state = set_gripper(state, "close")
    assert state.attached is not None
    ref = state.ee_pose.inverse().compose(state.object("block").pose)
    for kind, arg in cmds:
        if kind == "move":
            state, _ = move_to_waypoint(state, Pose6D(arg, TOOL_DOWN))
            if state.attached is None:
                break
            now = state.ee_pose.inverse().compose(state.object("block").pose)
            assert vec_norm(vec_sub(now.position, ref.position)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(commands)
def test_steps_executed_counts_accepted_calls(cmds):
    task = load_builtin("pick_and_lift")
    state = spawn_scene(task, 2)
    accepted = 0
    for kind, arg in cmds:
        if kind == "move":
            new, events = move_to_waypoint(state, Pose6D(arg, TOOL_DOWN))
            if events and events[0].kind == "workspace_rejected":
                assert new.steps_executed == state.steps_executed
            else:
                accepted += 1
            state = new
        else:
            state = set_gripper(state, arg)
            accepted += 1
    assert state.steps_executed == accepted


def test_revolute_attachment_follows_arc():
    lid = SceneObject(
        id="lid", name="lid",
        shape=Shape("box", (0.2, 0.16, 0.01)),
        pose=Pose6D((0.1, 0.1, 0.09)),
        articulation=Articulation("revolute", (0, 1, 0), (-math.pi / 2, 0.0), -math.pi / 2),
        parts={"handle": Part((0.09, 0, 0), (0.02, 0.04, 0.01), (0.125, 0, 0))},
        graspable=True,
    )
    state = state_with([lid], ee=(0.1, 0.1, 0.235))
    state = set_gripper(state, "close")
    assert state.attached == ("lid", "handle")
    # a 10-degree chord at radius 0.145
    chord = (0.145 * math.sin(math.radians(10)), 0.0,
             0.145 * (math.cos(math.radians(10)) - 1.0))
    target = Pose6D((0.1 + chord[0], 0.1, 0.235 + chord[2]), TOOL_DOWN)
    new, events = move_to_waypoint(state, target)
    value = new.object("lid").articulation.value
    assert -math.pi / 2 < value < -math.pi / 2 + math.radians(12)
    assert value > -math.pi / 2 + math.radians(8)
    # ee stays on the radius-0.145 circle around the hinge
    rel = vec_sub(new.ee_pose.position, (0.1, 0.1, 0.09))
    assert math.hypot(rel[0], rel[2]) == pytest.approx(0.145, abs=1e-9)
