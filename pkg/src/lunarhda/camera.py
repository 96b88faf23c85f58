"""Pinhole camera model, ILS-frame projection and pixel ground resolution.

Image convention: origin at the top-left pixel, u to the right, v downward,
pixel centres on integer coordinates. The camera frame has x right, y down
and z along the boresight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateGeometry

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics. Defaults reproduce the 5 MP descent camera."""

    fx: float = 7363.60
    fy: float = 7363.60
    cx: float = 1295.5
    cy: float = 971.5
    width: int = 2592
    height: int = 1944
    fov_deg: float = 45.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if not 0 < self.fov_deg < 180:
            raise ValueError("fov_deg must be in (0, 180)")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class Pose:
    """Rigid transform taking ILS-frame points into the camera frame: X_c = R X + t."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=_ORTHO_TOL, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation must have determinant +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_center(cls, rotation, center) -> "Pose":
        R = np.asarray(rotation, dtype=float)
        return cls(R, -R @ np.asarray(center, dtype=float))

    @classmethod
    def look_at(cls, center, target=(0.0, 0.0, 0.0), up=(0.0, 0.0, 1.0)) -> "Pose":
        """Camera at ``center`` with its boresight through ``target``.

        Image "up" is aligned with the projection of ``up`` so the horizon
        stays toward the top of the frame.
        """
        center = np.asarray(center, dtype=float)
        forward = np.asarray(target, dtype=float) - center
        norm = np.linalg.norm(forward)
        if norm == 0:
            raise DegenerateGeometry("camera centre coincides with the look-at target")
        forward /= norm
        right = np.cross(forward, np.asarray(up, dtype=float))
        if np.linalg.norm(right) < 1e-12:
            # looking straight along `up`; any roll will do
            right = np.cross(forward, [1.0, 0.0, 0.0])
            if np.linalg.norm(right) < 1e-12:
                right = np.cross(forward, [0.0, 1.0, 0.0])
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        R = np.vstack([right, down, forward])
        # re-orthonormalise to keep the 1e-9 invariant exact
        u, _, vt = np.linalg.svd(R)
        R = u @ vt
        return cls.from_center(R, center)

    @classmethod
    def from_quaternion(cls, position, quaternion_wxyz) -> "Pose":
        """Build from a camera position and camera-to-ILS attitude quaternion (w, x, y, z)."""
        w, x, y, z = quaternion_wxyz
        cam_to_ils = Rotation.from_quat([x, y, z, w]).as_matrix()
        u, _, vt = np.linalg.svd(cam_to_ils.T)
        return cls.from_center(u @ vt, position)

    @property
    def center(self) -> np.ndarray:
        """Camera centre in the ILS frame."""
        return -self.rotation.T @ self.translation

    @property
    def boresight(self) -> np.ndarray:
        """Unit viewing direction in the ILS frame."""
        return self.rotation[2].copy()

    def quaternion_wxyz(self) -> np.ndarray:
        x, y, z, w = Rotation.from_matrix(self.rotation.T).as_quat()
        q = np.array([w, x, y, z])
        return q if q[0] >= 0 else -q

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, self.center)

    def transform(self, points) -> np.ndarray:
        """ILS -> camera frame for an (N, 3) or (3,) array."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True)
class GroundResolutionQuery:
    pix_location: float
    altitude: float
    cam_angle_deg: float
    fov_deg: float
    num_pixels: int

    def __post_init__(self):
        if not 0 <= self.pix_location < self.num_pixels:
            raise ValueError("pix_location must lie in [0, num_pixels)")
        if not self.altitude > 0:
            raise ValueError("altitude must be positive")


def projection_matrix(intr: CameraIntrinsics, pose: Pose) -> np.ndarray:
    """Return the 3x4 matrix K [R | t]."""
    return intr.K @ np.hstack([pose.rotation, pose.translation[:, None]])


def project_points(points, intr: CameraIntrinsics, pose: Pose):
    """Vectorised projection.

    Returns ``(uv, depth, visible)`` for an (N, 3) array of ILS-frame points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cam = pose.transform(pts)
    depth = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * cam[:, 0] / depth + intr.cx
        v = intr.fy * cam[:, 1] / depth + intr.cy
    uv = np.column_stack([u, v])
    visible = (
        (depth > 0)
        & (u >= 0)
        & (u < intr.width)
        & (v >= 0)
        & (v < intr.height)
    )
    return uv, depth, visible


def project(point, intr: CameraIntrinsics, pose: Pose):
    """Project a single ILS point; returns ``(u, v, visible)``."""
    uv, _, visible = project_points(np.asarray(point, dtype=float)[None, :], intr, pose)
    return float(uv[0, 0]), float(uv[0, 1]), bool(visible[0])


def pixel_rays(uv, intr: CameraIntrinsics, pose: Pose) -> np.ndarray:
    """Unit ILS-frame ray directions through pixel coordinates (N, 2)."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    d_cam = np.column_stack(
        [(uv[:, 0] - intr.cx) / intr.fx, (uv[:, 1] - intr.cy) / intr.fy, np.ones(len(uv))]
    )
    d = d_cam @ pose.rotation  # R^T applied row-wise
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def unproject(uv, depth, intr: CameraIntrinsics, pose: Pose) -> np.ndarray:
    """Inverse of :func:`project` for a known camera-frame depth (z_cam)."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    depth = np.broadcast_to(np.asarray(depth, dtype=float), (len(uv),))
    cam = np.column_stack(
        [
            (uv[:, 0] - intr.cx) / intr.fx * depth,
            (uv[:, 1] - intr.cy) / intr.fy * depth,
            depth,
        ]
    )
    return (cam - pose.translation) @ pose.rotation


def ground_resolution(q: GroundResolutionQuery) -> float:
    """Metres per pixel at a pixel of a canted camera.

    ``pix_location`` counts from the image edge nearest nadir. The angular
    location of the pixel is its fraction of the field of view.
    """
    fov = math.radians(q.fov_deg)
    ang_location = (q.pix_location / q.num_pixels) * fov
    off_nadir = math.radians(q.cam_angle_deg) - fov / 2 + ang_location
    if not -math.pi / 2 < off_nadir < math.pi / 2:
        raise DegenerateGeometry(
            f"line of sight {math.degrees(off_nadir):.3f} deg from nadir does not reach the ground"
        )
    rho = q.altitude / math.cos(off_nadir)
    horizontal = math.sqrt(max(rho * rho - q.altitude * q.altitude, 0.0))
    return 2.0 * horizontal * math.tan(fov / 2) / q.num_pixels


def required_pixels(vfde_side_m: float, res: float) -> int:
    """Pixels needed to span ``vfde_side_m`` at ``res`` metres per pixel."""
    if res <= 0:
        raise DegenerateGeometry("ground resolution must be positive")
    # guard against 10/0.1 -> 100.00000000000001
    return int(math.ceil(round(vfde_side_m / res, 9)))
