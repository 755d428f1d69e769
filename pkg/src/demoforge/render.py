"""Pinhole rendering of shape primitives, point-cloud unprojection, view tiling.

Flat-shaded z-buffered ray casting: no lighting, one color per object. The
depth channel stores the Euclidean range along each (unit) pixel ray, 0 where
nothing was hit. The object_mask channel is privileged ground truth for the
scripted oracle and is never serialized onto the oracle wire.

Camera convention: +x right, +y down, +z forward (optical axis); extrinsics
are camera-to-world.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .geometry import (
    Pose6D,
    Vec3,
    look_at_quat,
    quat_rotate,
    quat_to_matrix,
    vec_add,
    vec_scale,
    vec_sub,
)
from .world import SceneObject, WorldState

DEFAULT_RESOLUTION = 256
RIG_VIEW_NAMES = ("front", "wrist", "left_shoulder", "right_shoulder")
WRIST_CAMERA_SETBACK = 0.10
BACKGROUND_COLOR = (24, 24, 28)

# Fallback palette for objects without a configured color.
_PALETTE = (
    (214, 96, 77), (67, 147, 195), (90, 174, 97), (216, 179, 101),
    (153, 112, 171), (223, 194, 125), (128, 205, 193), (244, 165, 130),
)


@dataclass(frozen=True)
class CameraModel:
    name: str
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = DEFAULT_RESOLUTION
    height: int = DEFAULT_RESOLUTION
    extrinsic: Pose6D = Pose6D((0.0, 0.0, 0.0))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")

    def pixel_rays(self) -> np.ndarray:
        """Unit world-frame ray directions through pixel centers, (H, W, 3)."""
        dirs = _camera_frame_rays(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
        rot = quat_to_matrix(self.extrinsic.orientation)
        return dirs @ rot.T

    def project(self, points: np.ndarray):
        """World points (N,3) -> (u, v, range, in_front) pixel coords (float)."""
        rot = quat_to_matrix(self.extrinsic.orientation)
        rel = np.asarray(points, dtype=np.float64) - np.asarray(self.extrinsic.position)
        cam = rel @ rot  # rot.T applied row-wise
        z = cam[:, 2]
        in_front = z > 1e-9
        zsafe = np.where(in_front, z, 1.0)
        u = self.fx * cam[:, 0] / zsafe + self.cx
        v = self.fy * cam[:, 1] / zsafe + self.cy
        rng = np.linalg.norm(cam, axis=1)
        return u, v, rng, in_front


def make_camera(name: str, eye: Vec3, target: Vec3, resolution: int = DEFAULT_RESOLUTION,
                focal: float | None = None) -> CameraModel:
    f = focal if focal is not None else float(resolution)
    return CameraModel(
        name=name, fx=f, fy=f, cx=resolution / 2, cy=resolution / 2,
        width=resolution, height=resolution,
        extrinsic=Pose6D(eye, look_at_quat(eye, target)),
    )


_RAY_CACHE: dict[tuple, np.ndarray] = {}


def _camera_frame_rays(fx, fy, cx, cy, width, height) -> np.ndarray:
    key = (fx, fy, cx, cy, width, height)
    cached = _RAY_CACHE.get(key)
    if cached is None:
        u = (np.arange(width) + 0.5 - cx) / fx
        v = (np.arange(height) + 0.5 - cy) / fy
        uu, vv = np.meshgrid(u, v)
        dirs = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        dirs.setflags(write=False)
        if len(_RAY_CACHE) > 64:
            _RAY_CACHE.clear()
        _RAY_CACHE[key] = dirs
        cached = dirs
    return cached


@dataclass
class ViewFrame:
    camera: CameraModel
    rgb: np.ndarray          # (H, W, 3) uint8
    depth: np.ndarray        # (H, W) float64, meters of ray range, 0 = miss
    object_mask: np.ndarray  # (H, W) int32, 0 = background, else index+1 into mask_ids
    mask_ids: tuple[str, ...] = ()
    warning: str = ""

    def object_id_at(self, x: int, y: int) -> str | None:
        m = int(self.object_mask[y, x])
        return self.mask_ids[m - 1] if m > 0 else None


@dataclass
class PointCloud:
    points: np.ndarray  # (N, 3) world frame
    colors: np.ndarray  # (N, 3) uint8


def _ray_box(origins, dirs, half):
    """Slab test in the object frame; returns hit range or inf, (N,)."""
    # nudge exactly-parallel components so IEEE division handles the slabs
    safe = np.where(np.abs(dirs) < 1e-12, 1e-12, dirs)
    inv = 1.0 / safe
    t1 = (-half - origins) * inv
    t2 = (half - origins) * inv
    t0 = np.minimum(t1, t2).max(axis=-1)
    t1f = np.maximum(t1, t2).min(axis=-1)
    hit = (t1f >= t0) & (t0 > 1e-9)
    return np.where(hit, t0, np.inf)


def _ray_sphere(origins, dirs, radius):
    b = np.sum(origins * dirs, axis=-1)
    c = np.sum(origins * origins, axis=-1) - radius * radius
    disc = b * b - c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t = -b - sq
    hit = ok & (t > 1e-9)
    return np.where(hit, t, np.inf)


def _ray_cylinder(origins, dirs, radius, half_h):
    ox, oy, oz = origins[..., 0], origins[..., 1], origins[..., 2]
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    best = np.full(ox.shape, np.inf)
    # lateral surface
    a = dx * dx + dy * dy
    b = ox * dx + oy * dy
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - a * c
    ok = (disc >= 0) & (a > 1e-15)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    asafe = np.where(a > 1e-15, a, 1.0)
    for sign in (-1.0, 1.0):
        t = (-b + sign * sq) / asafe
        z = oz + t * dz
        hit = ok & (t > 1e-9) & (np.abs(z) <= half_h)
        best = np.where(hit & (t < best), t, best)
    # caps
    dzsafe = np.where(np.abs(dz) > 1e-15, dz, 1.0)
    for zcap in (-half_h, half_h):
        t = (zcap - oz) / dzsafe
        x = ox + t * dx
        y = oy + t * dy
        hit = (np.abs(dz) > 1e-15) & (t > 1e-9) & (x * x + y * y <= radius * radius)
        best = np.where(hit & (t < best), t, best)
    return best


def _object_hit(obj: SceneObject, eye, dirs_world):
    pose = obj.effective_pose()
    rot = quat_to_matrix(pose.orientation)
    origin_obj = rot.T @ (np.asarray(eye) - np.asarray(pose.position))
    dirs_obj = dirs_world @ rot
    origins = np.broadcast_to(origin_obj, dirs_obj.shape)
    if obj.shape.kind == "box":
        return _ray_box(origins, dirs_obj, np.array(obj.shape.half_extents()))
    if obj.shape.kind == "sphere":
        return _ray_sphere(origins, dirs_obj, obj.shape.dims[0])
    return _ray_cylinder(origins, dirs_obj, obj.shape.dims[0], obj.shape.dims[1] / 2)


def object_color(obj: SceneObject, index: int) -> tuple[int, int, int]:
    return obj.color if obj.color is not None else _PALETTE[index % len(_PALETTE)]


def _pixel_window(obj: SceneObject, camera: CameraModel) -> tuple[int, int, int, int] | None:
    """Conservative pixel rectangle covering the object, or None when off-screen.

    The projection of a box fully in front of the camera lies inside the
    convex hull of its projected corners; falls back to the full image when a
    corner is behind the camera.
    """
    lo, hi = obj.world_aabb()
    corners = np.array(
        [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
    )
    u, v, _, in_front = camera.project(corners)
    if not in_front.all():
        return (0, 0, camera.width, camera.height)
    x0 = int(np.floor(u.min()))
    x1 = int(np.ceil(u.max())) + 1
    y0 = int(np.floor(v.min()))
    y1 = int(np.ceil(v.max())) + 1
    x0, x1 = max(x0, 0), min(x1, camera.width)
    y0, y1 = max(y0, 0), min(y1, camera.height)
    if x0 >= x1 or y0 >= y1:
        return None
    return (x0, y0, x1, y1)


def render_view(state: WorldState, camera: CameraModel) -> ViewFrame:
    """Rasterize the scene into RGB, ray-range depth, and the privileged id mask."""
    dirs = camera.pixel_rays()
    eye = camera.extrinsic.position
    depth = np.full((camera.height, camera.width), np.inf)
    mask = np.zeros((camera.height, camera.width), dtype=np.int32)
    for idx, obj in enumerate(state.objects):
        window = _pixel_window(obj, camera)
        if window is None:
            continue
        x0, y0, x1, y1 = window
        t = _object_hit(obj, eye, dirs[y0:y1, x0:x1])
        dwin = depth[y0:y1, x0:x1]
        closer = t < dwin
        depth[y0:y1, x0:x1] = np.where(closer, t, dwin)
        mwin = mask[y0:y1, x0:x1]
        mask[y0:y1, x0:x1] = np.where(closer, idx + 1, mwin)
    rgb = np.empty((camera.height, camera.width, 3), dtype=np.uint8)
    rgb[:] = BACKGROUND_COLOR
    for idx, obj in enumerate(state.objects):
        rgb[mask == idx + 1] = object_color(obj, idx)
    depth = np.where(np.isfinite(depth), depth, 0.0)
    return ViewFrame(
        camera=camera, rgb=rgb, depth=depth, object_mask=mask,
        mask_ids=tuple(o.id for o in state.objects),
    )


def unproject(view: ViewFrame) -> PointCloud:
    """One world point (with color) per pixel with depth > 0."""
    ys, xs = np.nonzero(view.depth > 0)
    cam = view.camera
    u = (xs + 0.5 - cam.cx) / cam.fx
    v = (ys + 0.5 - cam.cy) / cam.fy
    dirs = np.stack([u, v, np.ones_like(u)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    rot = quat_to_matrix(cam.extrinsic.orientation)
    pts = (dirs @ rot.T) * view.depth[ys, xs][:, None] + np.asarray(cam.extrinsic.position)
    return PointCloud(points=pts, colors=view.rgb[ys, xs].copy())


def render_virtual(cloud: PointCloud, camera: CameraModel) -> ViewFrame:
    """Re-render a cloud by single-pixel splatting with a range z-buffer."""
    h, w = camera.height, camera.width
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[:] = BACKGROUND_COLOR
    depth = np.zeros((h, w))
    mask = np.zeros((h, w), dtype=np.int32)
    if cloud.points.shape[0] == 0:
        return ViewFrame(camera=camera, rgb=rgb, depth=depth, object_mask=mask,
                         warning="empty point cloud")
    u, v, rng, in_front = camera.project(cloud.points)
    px = np.floor(u).astype(np.int64)
    py = np.floor(v).astype(np.int64)
    ok = in_front & (px >= 0) & (px < w) & (py >= 0) & (py < h)
    px, py, rng = px[ok], py[ok], rng[ok]
    colors = cloud.colors[ok]
    # write far-to-near so the nearest splat wins each pixel
    order = np.argsort(-rng, kind="stable")
    px, py, rng, colors = px[order], py[order], rng[order], colors[order]
    depth[py, px] = rng
    rgb[py, px] = colors
    return ViewFrame(camera=camera, rgb=rgb, depth=depth, object_mask=mask)


def virtual_rig(cloud: PointCloud, resolution: int = DEFAULT_RESOLUTION) -> list[CameraModel]:
    """Three virtual viewpoints on a 0.8 m arc (azimuth -45/0/+45 deg, elevation 30)."""
    centroid = tuple(cloud.points.mean(axis=0)) if cloud.points.shape[0] else (0.0, 0.0, 0.0)
    cams = []
    for i, az_deg in enumerate((-45.0, 0.0, 45.0)):
        az = math.radians(az_deg)
        el = math.radians(30.0)
        eye = vec_add(centroid, (
            -0.8 * math.cos(el) * math.cos(az),
            -0.8 * math.cos(el) * math.sin(az),
            0.8 * math.sin(el),
        ))
        cams.append(make_camera(f"virtual_{i + 1}", eye, centroid, resolution))
    return cams


def default_rig(state: WorldState | None = None,
                resolution: int = DEFAULT_RESOLUTION) -> list[CameraModel]:
    """The four-view rig: three elevated static cameras plus the wrist camera.

    The wrist camera rides 0.10 m behind the tool center along -approach and
    looks along the gripper approach axis, so it needs the current state.
    """
    target = (0.06, 0.06, 0.03)
    cams = [
        make_camera("front", (0.05, -0.35, 0.65), target, resolution),
        _wrist_camera(state, resolution),
        make_camera("left_shoulder", (-0.30, 0.38, 0.72), target, resolution),
        make_camera("right_shoulder", (-0.30, -0.28, 0.72), target, resolution),
    ]
    return cams


def _wrist_camera(state: WorldState | None, resolution: int) -> CameraModel:
    if state is None:
        return make_camera("wrist", (0.0, -0.25, 0.40), (0.0, -0.25, 0.0), resolution)
    ee = state.ee_pose
    approach = quat_rotate(ee.orientation, (0.0, 0.0, 1.0))
    eye = vec_sub(ee.position, vec_scale(approach, WRIST_CAMERA_SETBACK))
    f = float(resolution)
    return CameraModel(
        name="wrist", fx=f, fy=f, cx=resolution / 2, cy=resolution / 2,
        width=resolution, height=resolution, extrinsic=Pose6D(eye, ee.orientation),
    )


# 5x7 digit glyphs, doubled to 10x14 inside a 16 px label box.
_DIGITS = {
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": (".###.", "#....", "####.", "#...#", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."),
}
LABEL_BOX_PX = 16


def _stamp_digit(img: np.ndarray, digit: str, x0: int, y0: int):
    img[y0:y0 + LABEL_BOX_PX, x0:x0 + LABEL_BOX_PX] = (0, 0, 0)
    glyph = _DIGITS[digit]
    for r, row in enumerate(glyph):
        for c, ch in enumerate(row):
            if ch == "#":
                y, x = y0 + 1 + 2 * r, x0 + 3 + 2 * c
                img[y:y + 2, x:x + 2] = (255, 255, 255)


@dataclass
class TiledImage:
    composite: np.ndarray  # (H, k*W, 3) uint8
    tile_width: int
    tile_height: int
    count: int
    index_labels: list[tuple[int, tuple[int, int]]] = field(default_factory=list)

    def tile_origin(self, pixel: tuple[int, int]) -> tuple[int, tuple[int, int]]:
        """Composite pixel (x, y) -> (0-based tile index, tile-local pixel)."""
        x, y = pixel
        if not (0 <= x < self.count * self.tile_width and 0 <= y < self.tile_height):
            raise ValueError(f"pixel {pixel} outside composite")
        tile = x // self.tile_width
        return tile, (x - tile * self.tile_width, y)


def tile_views(views: list[ViewFrame]) -> TiledImage:
    """Concatenate frames horizontally, numbering each tile at its top-left."""
    k = len(views)
    if not 1 <= k <= 9:
        raise ValueError(f"tile count {k} outside [1, 9]")
    h, w = views[0].rgb.shape[:2]
    for v in views[1:]:
        if v.rgb.shape[:2] != (h, w):
            raise ValueError("mixed tile resolutions")
    composite = np.concatenate([v.rgb for v in views], axis=1).copy()
    labels = []
    for i in range(k):
        anchor = (i * w, 0)
        _stamp_digit(composite, str(i + 1), anchor[0], anchor[1])
        labels.append((i, anchor))
    return TiledImage(composite=composite, tile_width=w, tile_height=h,
                      count=k, index_labels=labels)


def save_view(view: ViewFrame, directory, name: str | None = None):
    """Write {name}.png (RGB) and {name}_depth.png (16-bit millimeters)."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = name or view.camera.name
    Image.fromarray(view.rgb).save(directory / f"{name}.png")
    mm = np.clip(np.round(view.depth * 1000.0), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(directory / f"{name}_depth.png")


def rgb_to_png_bytes(rgb: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(rgb).save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_rgb(data: bytes) -> np.ndarray:
    import io

    return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))
