"""Pinhole projection, coordinate patches, oriented 3D boxes and rotated IoU.

Coordinate conventions (KITTI-style camera frame):
  - x right, y down, z forward; all distances in meters.
  - Image coordinates (u, v) in pixels, u along columns, v along rows.
  - Box3D.y is the *bottom* face height; the box spans [y - h, y] vertically.
  - Yaw theta rotates about the vertical (y) axis; theta = 0 points the
    box length l along +x, width w along +z.

Bird's-eye-view (BEV) geometry lives in the ground plane (x, z).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateBoxError,
    DegenerateRoiError,
    EmptyPatchError,
    InvalidDepthError,
)

# Tolerance for collinear/parallel edges in polygon clipping (meters).
CLIP_EPS = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters: focal lengths and principal point, in pixels."""

    f_u: float
    f_v: float
    u_p: float
    v_p: float

    def __post_init__(self):
        if not (self.f_u > 0 and self.f_v > 0):
            raise ValueError(f"focal lengths must be positive, got ({self.f_u}, {self.f_v})")


@dataclass(frozen=True)
class Pixel:
    """Image location (u, v) with associated metric depth z."""

    u: float
    v: float
    z: float


@dataclass(frozen=True)
class Coordinate3D:
    """Camera-frame point (c_x, c_y, c_z) in meters."""

    c_x: float
    c_y: float
    c_z: float

    def as_array(self):
        return np.array([self.c_x, self.c_y, self.c_z], dtype=np.float64)


def _normalize_angle(theta):
    """Wrap an angle to [-pi, pi)."""
    t = math.fmod(theta + math.pi, 2.0 * math.pi)
    if t < 0:
        t += 2.0 * math.pi
    return t - math.pi


@dataclass
class Box3D:
    """Oriented 3D box: bottom-center location, dimensions, yaw, class, score."""

    x: float
    y: float
    z: float
    h: float
    w: float
    l: float
    theta: float
    class_id: int = 0
    score: float = 1.0

    def __post_init__(self):
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise ValueError(f"box dimensions must be positive, got h={self.h} w={self.w} l={self.l}")
        self.theta = _normalize_angle(self.theta)

    @property
    def center(self):
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def bev_area(self):
        return self.w * self.l

    def volume(self):
        return self.w * self.l * self.h


@dataclass(frozen=True)
class BevPolygon:
    """Convex ground-plane polygon; vertices are (x, z) pairs in CCW order."""

    vertices: tuple

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")

    def area(self):
        return _shoelace_area(self.vertices)


@dataclass
class CoordinatePatch:
    """K x K grid of back-projected 3D points with a validity mask.

    xyz has shape (3, K, K) with channels (c_x, c_y, c_z); masked-out cells
    hold zeros. mask has shape (K, K), True where the cell is valid.
    """

    xyz: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.xyz.ndim != 3 or self.xyz.shape[0] != 3 or self.xyz.shape[1:] != self.mask.shape:
            raise ValueError(f"inconsistent patch shapes {self.xyz.shape} vs {self.mask.shape}")

    @property
    def k(self):
        return self.mask.shape[0]

    def n_valid(self):
        return int(self.mask.sum())

    def as_input(self):
        """Stack xyz and mask into the (4, K, K) network input layout."""
        return np.concatenate([self.xyz, self.mask[None].astype(np.float64)], axis=0)


def pixel_to_camera(p, cam):
    """Back-project a pixel with depth to a camera-frame 3D point."""
    if not (np.isfinite(p.z) and p.z > 0):
        raise InvalidDepthError(f"depth must be positive and finite, got {p.z}")
    c_x = (p.u - cam.u_p) * p.z / cam.f_u
    c_y = (p.v - cam.v_p) * p.z / cam.f_v
    return Coordinate3D(c_x, c_y, p.z)


def camera_to_pixel(c, cam):
    """Project a camera-frame point back to a pixel with depth."""
    if not c.c_z > 0:
        raise BehindCameraError(f"point has non-positive depth z={c.c_z}")
    u = c.c_x * cam.f_u / c.c_z + cam.u_p
    v = c.c_y * cam.f_v / c.c_z + cam.v_p
    return Pixel(u, v, c.c_z)


def patch_to_coordinates(depth, roi, cam, k=16):
    """Resample a depth map over a RoI into a K x K coordinate patch.

    The RoI is divided into K x K cells; each cell takes the depth of the
    nearest source pixel (no interpolation, to avoid fabricating points
    across depth discontinuities) and back-projects that pixel's center.
    Cells whose source depth is invalid (NaN or <= 0) are masked out.
    """
    w = roi.right - roi.left
    h = roi.bottom - roi.top
    if not (w > 0 and h > 0):
        raise DegenerateRoiError(f"RoI has non-positive extent {w} x {h}")
    values = depth.values
    height, width = values.shape

    us = roi.left + (np.arange(k) + 0.5) * (w / k)
    vs = roi.top + (np.arange(k) + 0.5) * (h / k)
    ix = np.clip(np.floor(us).astype(np.int64), 0, width - 1)
    iy = np.clip(np.floor(vs).astype(np.int64), 0, height - 1)

    z = values[np.ix_(iy, ix)].astype(np.float64)
    mask = np.isfinite(z) & (z > 0)

    uu = (ix[None, :] + 0.5).astype(np.float64)
    vv = (iy[:, None] + 0.5).astype(np.float64)
    zs = np.where(mask, z, 1.0)
    c_x = (uu - cam.u_p) * zs / cam.f_u
    c_y = (vv - cam.v_p) * zs / cam.f_v
    xyz = np.stack([c_x, c_y, zs], axis=0)
    xyz[:, ~mask] = 0.0
    return CoordinatePatch(xyz=xyz, mask=mask)


def box_corners(b):
    """Eight corners of an oriented box, shape (8, 3).

    Corners 0-3 are the bottom face (y = b.y), 4-7 the top face (y = b.y - h),
    each face ordered (+l,+w), (+l,-w), (-l,-w), (-l,+w) in the box frame.
    """
    xc = np.array([1, 1, -1, -1, 1, 1, -1, -1], dtype=np.float64) * (b.l / 2.0)
    zc = np.array([1, -1, -1, 1, 1, -1, -1, 1], dtype=np.float64) * (b.w / 2.0)
    yc = np.array([0, 0, 0, 0, -b.h, -b.h, -b.h, -b.h], dtype=np.float64)
    c, s = math.cos(b.theta), math.sin(b.theta)
    x = c * xc + s * zc + b.x
    z = -s * xc + c * zc + b.z
    y = yc + b.y
    return np.stack([x, y, z], axis=1)


def bev_footprint(b):
    """Ground-plane footprint of a box as a CCW BevPolygon."""
    corners = box_corners(b)[:4]
    pts = [(float(px), float(pz)) for px, _, pz in corners]
    if _shoelace_signed(pts) < 0:
        pts.reverse()
    return BevPolygon(vertices=tuple(pts))


def _shoelace_signed(pts):
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _shoelace_area(pts):
    return abs(_shoelace_signed(pts))


def clip_convex(subject, clip):
    """Sutherland-Hodgman clipping of convex polygon `subject` by convex `clip`.

    Both polygons must be CCW. Returns the intersection vertex list (possibly
    empty). Near-parallel edge pairs (cross product below CLIP_EPS) contribute
    no intersection point, so edge-touching contact degenerates to zero area.
    """
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        input_pts = output
        output = []
        sx, sy = input_pts[-1]
        s_in = ex * (sy - ay) - ey * (sx - ax) >= 0.0
        for px, py in input_pts:
            p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
            if p_in != s_in:
                dx, dy = px - sx, py - sy
                denom = ex * dy - ey * dx
                if abs(denom) > CLIP_EPS:
                    t = (ex * (ay - sy) - ey * (ax - sx)) / denom
                    output.append((sx + t * dx, sy + t * dy))
            if p_in:
                output.append((px, py))
            sx, sy, s_in = px, py, p_in
    return output


def bev_iou(a, b):
    """Rotated-rectangle IoU of two box footprints in the ground plane."""
    area_a = a.bev_area()
    area_b = b.bev_area()
    if area_a <= 0 or area_b <= 0:
        raise DegenerateBoxError("zero-area BEV footprint")
    pa = bev_footprint(a).vertices
    pb = bev_footprint(b).vertices
    inter_pts = clip_convex(pa, pb)
    inter = _shoelace_area(inter_pts) if len(inter_pts) >= 3 else 0.0
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def iou_3d(a, b):
    """Volumetric IoU: BEV intersection area times vertical overlap over union."""
    vol_a = a.volume()
    vol_b = b.volume()
    if vol_a <= 0 or vol_b <= 0:
        raise DegenerateBoxError("zero-volume box")
    pa = bev_footprint(a).vertices
    pb = bev_footprint(b).vertices
    inter_pts = clip_convex(pa, pb)
    inter_area = _shoelace_area(inter_pts) if len(inter_pts) >= 3 else 0.0
    y_overlap = min(a.y, b.y) - max(a.y - a.h, b.y - b.h)
    inter_vol = inter_area * max(y_overlap, 0.0)
    union = vol_a + vol_b - inter_vol
    if union <= 0:
        return 0.0
    return float(min(max(inter_vol / union, 0.0), 1.0))
