import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from demoforge.errors import NoCandidatesError, OffsetTooLargeError
from demoforge.geometry import Pose6D, quat_rotate, quat_to_matrix
from demoforge.grasp import (
    BBox2D,
    GraspCandidate,
    apply_offset,
    filter_by_bbox,
    sample_grasps,
    select_best,
)
from demoforge.render import make_camera, render_view
from demoforge.world import Part, SceneObject, Shape, WorldState

TOOL_DOWN = (0.0, 1.0, 0.0, 0.0)


def scene(objects):
    return WorldState(objects=tuple(objects), ee_pose=Pose6D((0, -0.3, 0.35), TOOL_DOWN))


def graspable_block(oid="block", pos=(0.0, 0.0, 0.02), extents=(0.04, 0.04, 0.04)):
    return SceneObject(
        id=oid, name=oid, shape=Shape("box", extents), pose=Pose6D(pos),
        parts={"body": Part((0, 0, 0), extents, (0, 0, extents[2] / 2 + 0.025))},
        graspable=True,
    )


def test_single_part_at_most_16_candidates():
    cands = sample_grasps(scene([graspable_block()]), seed=0)
    assert 0 < len(cands) <= 16
    assert all(c.source_object == "block" and c.source_part == "body" for c in cands)
    # the sampling pattern is deterministic
    again = sample_grasps(scene([graspable_block()]), seed=5)
    assert [(c.pose, c.quality) for c in cands] == [(c.pose, c.quality) for c in again]


def test_width_filter_rejects_wide_parts():
    wide = graspable_block(extents=(0.10, 0.10, 0.04))
    assert sample_grasps(scene([wide]), seed=0) == []


def test_quality_formula_extremes():
    # top-down approach and near-zero width: quality -> 1
    thin = graspable_block(extents=(0.004, 0.004, 0.04))
    cands = sample_grasps(scene([thin]), seed=0)
    best = max(cands, key=lambda c: c.quality)
    assert best.approach == pytest.approx((0.0, 0.0, -1.0))
    assert best.quality == pytest.approx(0.5 * (1 - 0.004 / 0.08) + 0.5, abs=1e-9)


def test_candidates_collision_free_at_pre_contact():
    from demoforge.world import GRIPPER_SPHERE_RADIUS, _aabb_distance

    state = scene([graspable_block(), graspable_block("wall", pos=(0.0, 0.09, 0.06),
                                                      extents=(0.3, 0.02, 0.12))])
    for cand in sample_grasps(state, seed=0):
        pre = tuple(
            cand.pose.position[i] - 0.10 * cand.approach[i] for i in range(3)
        )
        for obj in state.objects:
            lo, hi = obj.world_aabb()
            assert _aabb_distance(pre, lo, hi) >= GRIPPER_SPHERE_RADIUS


def _fixture_view(state):
    cam = make_camera("front", (0.05, -0.35, 0.65), (0.0, 0.0, 0.03))
    return render_view(state, cam)


def brute_force_filter(candidates, view, bbox, depth_tol=0.02):
    """Independent scalar re-projection oracle for filter_by_bbox."""
    cam = view.camera
    rot = quat_to_matrix(cam.extrinsic.orientation)
    kept = []
    for cand in candidates:
        rel = [cand.pose.position[i] - cam.extrinsic.position[i] for i in range(3)]
        x = sum(rel[i] * rot[i][0] for i in range(3))
        y = sum(rel[i] * rot[i][1] for i in range(3))
        z = sum(rel[i] * rot[i][2] for i in range(3))
        if z <= 1e-9:
            continue
        u = cam.fx * x / z + cam.cx
        v = cam.fy * y / z + cam.cy
        if not (bbox.x_min <= u <= bbox.x_max and bbox.y_min <= v <= bbox.y_max):
            continue
        px, py = int(math.floor(u)), int(math.floor(v))
        if not (0 <= px < cam.width and 0 <= py < cam.height):
            continue
        rng = math.sqrt(x * x + y * y + z * z)
        surface = float(view.depth[py, px])
        if surface > 0.0 and rng - surface > depth_tol:
            continue
        kept.append(cand)
    return kept


def test_whole_image_bbox_keeps_all_in_front():
    state = scene([graspable_block()])
    view = _fixture_view(state)
    cands = sample_grasps(state, seed=0)
    bbox = BBox2D("front", 0, 0, 256, 256)
    out = filter_by_bbox(cands, view, bbox, depth_tol=1e9)
    expected = [c for c in cands
                if view.camera.project(np.asarray([c.pose.position]))[3][0]]
    assert out == expected


def test_occluded_candidate_removed():
    block = graspable_block(pos=(0.0, 0.0, 0.02))
    # wall between the camera and the block, 0.10 m in front along the view ray
    wall = SceneObject(id="wall", name="wall", shape=Shape("box", (0.4, 0.02, 0.4)),
                       pose=Pose6D((0.0, -0.12, 0.15)))
    state = scene([block, wall])
    view = _fixture_view(state)
    cands = sample_grasps(state, seed=0)
    bbox = BBox2D("front", 0, 0, 256, 256)
    kept = filter_by_bbox(cands, view, bbox, depth_tol=0.02)
    assert kept == []  # every grasp center hides behind the wall


def test_bbox_containment_removal():
    state = scene([graspable_block()])
    view = _fixture_view(state)
    cands = sample_grasps(state, seed=0)
    u, v, _, _ = view.camera.project(np.asarray([cands[0].pose.position]))
    # a box that excludes the projection
    bbox = BBox2D("front", 0, 0, max(1.0, u[0] - 10), max(1.0, v[0] - 10))
    assert cands[0] not in filter_by_bbox(cands, view, bbox)


def test_filter_matches_brute_force_on_random_scenes():
    rng = np.random.default_rng(123)
    for _ in range(30):
        objects = [graspable_block(f"b{i}",
                                   pos=(rng.uniform(-0.1, 0.15), rng.uniform(-0.05, 0.15),
                                        rng.uniform(0.02, 0.08)))
                   for i in range(rng.integers(1, 4))]
        state = scene(objects)
        view = _fixture_view(state)
        cands = sample_grasps(state, seed=0)
        x0 = rng.uniform(0, 200)
        y0 = rng.uniform(0, 200)
        bbox = BBox2D("front", x0, y0, x0 + rng.uniform(20, 56), y0 + rng.uniform(20, 56))
        assert filter_by_bbox(cands, view, bbox) == brute_force_filter(cands, view, bbox)


def test_filter_monotone_under_bbox_shrink():
    state = scene([graspable_block()])
    view = _fixture_view(state)
    cands = sample_grasps(state, seed=0)
    big = BBox2D("front", 0, 0, 256, 256)
    small = BBox2D("front", 40, 40, 200, 200)
    kept_big = filter_by_bbox(cands, view, big)
    kept_small = filter_by_bbox(cands, view, small)
    assert set(id(c) for c in kept_small) <= set(id(c) for c in kept_big)


def _mk_candidate(quality, pos=(0.0, 0.0, 0.1)):
    return GraspCandidate(
        pose=Pose6D(pos, TOOL_DOWN), width=0.04, quality=quality,
        approach=(0.0, 0.0, -1.0), source_object="o", source_part="p",
    )


def test_select_best_argmax():
    cands = [_mk_candidate(0.2), _mk_candidate(0.9), _mk_candidate(0.5)]
    assert select_best(cands) is cands[1]


def test_select_best_tie_breaks_by_bbox_center_distance():
    state = scene([graspable_block()])
    view = _fixture_view(state)
    u, v, _, _ = view.camera.project(np.asarray([(0.0, 0.0, 0.1), (0.05, 0.05, 0.1)]))
    # center the bbox on the second candidate's projection
    bbox = BBox2D("front", u[1] - 8, v[1] - 8, u[1] + 8, v[1] + 8)
    cands = [_mk_candidate(0.7, (0.0, 0.0, 0.1)), _mk_candidate(0.7, (0.05, 0.05, 0.1))]
    assert select_best(cands, view, bbox) is cands[1]


def test_select_best_empty_raises():
    with pytest.raises(NoCandidatesError):
        select_best([])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1000.0))
def test_select_best_scale_invariance(scale):
    qualities = [0.31, 0.87, 0.55, 0.87, 0.12]
    cands = [_mk_candidate(q) for q in qualities]
    base = select_best(cands)
    scaled = [
        GraspCandidate(pose=c.pose, width=c.width,
                       quality=min(c.quality * scale, 1.0) if scale > 1 else c.quality * scale,
                       approach=c.approach, source_object=c.source_object,
                       source_part=c.source_part)
        for c in cands
    ]
    # clipping at 1.0 can merge ties upward; only assert for non-clipping scales
    if scale <= 1.0 / max(qualities):
        assert select_best(scaled).pose == base.pose


def test_apply_offset_identity_and_world():
    cand = _mk_candidate(0.5)
    assert apply_offset(cand, (0, 0, 0), "world") == cand.pose
    moved = apply_offset(cand, (0, 0, 0.05), "world")
    assert moved.position[2] == pytest.approx(cand.pose.position[2] + 0.05)
    assert moved.orientation == cand.pose.orientation


def test_apply_offset_approach_frame_retreat():
    cand = _mk_candidate(0.5)  # approach straight down
    pre = apply_offset(cand, (-0.10, 0.0, 0.0), "approach")
    assert pre.position[0] == pytest.approx(cand.pose.position[0], abs=1e-12)
    assert pre.position[1] == pytest.approx(cand.pose.position[1], abs=1e-12)
    assert pre.position[2] == pytest.approx(cand.pose.position[2] + 0.10, abs=1e-12)


def test_apply_offset_closure_component():
    cand = _mk_candidate(0.5)
    closure = quat_rotate(cand.pose.orientation, (1.0, 0.0, 0.0))
    out = apply_offset(cand, (0.0, 0.0, 0.02), "approach")
    for i in range(3):
        assert out.position[i] == pytest.approx(
            cand.pose.position[i] + 0.02 * closure[i], abs=1e-12
        )


def test_apply_offset_magnitude_guard():
    with pytest.raises(OffsetTooLargeError):
        apply_offset(_mk_candidate(0.5), (0.6, 0.0, 0.0), "world")
