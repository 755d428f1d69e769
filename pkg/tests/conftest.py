import pytest

from demoforge.geometry import Pose6D
from demoforge.render import make_camera
from demoforge.world import Part, Predicate, ReferenceSubTask, SceneObject, Shape, TaskSpec


def small_rig(state=None, resolution=64):
    """Two tiny cameras: enough for the scripted oracle, fast for Monte Carlo."""
    target = (0.05, 0.05, 0.03)
    return [
        make_camera("mini_front", (0.05, -0.3, 0.55), target, resolution),
        make_camera("mini_side", (-0.3, 0.3, 0.6), target, resolution),
    ]


def single_subtask_task(program="rotate(yaw=5)", task_id="hold_station"):
    """One agent-centric sub-task whose condition is true from spawn.

    Each try costs exactly one step (a single rotate waypoint), so the
    verify-try budget is the only binding budget.
    """
    block = SceneObject(
        id="beacon", name="beacon block",
        shape=Shape("box", (0.05, 0.05, 0.05)),
        pose=Pose6D((0.05, 0.05, 0.2)),
        parts={"body": Part((0, 0, 0), (0.05, 0.05, 0.05), (0, 0, 0.05))},
        graspable=True,
    )
    pred = Predicate("above", obj="beacon", z_min=0.15)
    return TaskSpec(
        id=task_id,
        instruction="keep station above the beacon",
        scene_config=(block,),
        success=(pred,),
        reference_plan=(
            ReferenceSubTask(
                description="settle the wrist toward the beacon",
                condition="is the gripper settled above the beacon?",
                kind="agent_centric",
                predicate=pred,
                program=program,
            ),
        ),
    )


@pytest.fixture
def mini_rig():
    return small_rig
