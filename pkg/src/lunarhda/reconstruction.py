"""Two-view triangulation of feature correspondences into an ILS-frame point cloud."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundsError, DegenerateGeometry, ParseError
from .hazard_map import CandidateRegion

RANK_TOL = 1e-10
CORRESPONDENCE_HEADER = ["ua", "va", "ub", "vb"]


@dataclass(frozen=True)
class Correspondence:
    pixel_a: tuple
    pixel_b: tuple

    def as_array(self) -> np.ndarray:
        return np.array([*self.pixel_a, *self.pixel_b], dtype=float)


@dataclass
class PointCloud:
    points: np.ndarray  # (N, 3) ILS metres
    reproj_err: np.ndarray  # (N,) pixels
    source_index: np.ndarray | None = None  # input row of each surviving point
    rejected: Counter = field(default_factory=Counter)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.reproj_err = np.asarray(self.reproj_err, dtype=float).reshape(-1)
        if len(self.points) != len(self.reproj_err):
            raise ValueError("points and reproj_err lengths differ")
        if np.any(self.reproj_err < 0):
            raise ValueError("reprojection error must be non-negative")
        if self.source_index is None:
            self.source_index = np.arange(len(self.points))

    def __len__(self):
        return len(self.points)


@dataclass
class ROICloud:
    region: CandidateRegion
    points: np.ndarray
    reproj_err: np.ndarray
    source_index: np.ndarray

    def __len__(self):
        return len(self.points)


def _as_correspondence_array(correspondences) -> np.ndarray:
    if isinstance(correspondences, np.ndarray):
        arr = correspondences
    else:
        arr = [
            c.as_array() if isinstance(c, Correspondence) else np.asarray(c, dtype=float)
            for c in correspondences
        ]
    return np.asarray(arr, dtype=float).reshape(-1, 4)


def _depth_sign(P) -> float:
    return float(np.sign(np.linalg.det(P[:, :3])) or 1.0)


def _reproject(P, X):
    h = X @ P[:, :3].T + P[:, 3]
    return h[:, :2] / h[:, 2:3], h[:, 2] * _depth_sign(P)


def _camera_center(P) -> np.ndarray:
    return -np.linalg.solve(P[:, :3], P[:, 3])


def _conditioning(P_a, P_b) -> np.ndarray:
    """World-to-solver transform: origin midway between the cameras, unit = baseline.

    Built from the cameras themselves, so any similarity applied to the world
    cancels and the solve is identical in every frame.
    """
    try:
        c_a, c_b = _camera_center(P_a), _camera_center(P_b)
    except np.linalg.LinAlgError:
        return np.eye(4)
    baseline = float(np.linalg.norm(c_a - c_b))
    T = np.eye(4)
    T[:3, :3] *= baseline if baseline > 0 else 1.0
    T[:3, 3] = 0.5 * (c_a + c_b)
    return T


def _dlt(uv_a, uv_b, P_a, P_b):
    """Stacked homogeneous DLT. Returns (X (N,3), degenerate (N,) bool)."""
    n = len(uv_a)
    T = _conditioning(P_a, P_b)
    Qa, Qb = P_a @ T, P_b @ T
    A = np.empty((n, 4, 4))
    A[:, 0] = uv_a[:, 0:1] * Qa[2] - Qa[0]
    A[:, 1] = uv_a[:, 1:2] * Qa[2] - Qa[1]
    A[:, 2] = uv_b[:, 0:1] * Qb[2] - Qb[0]
    A[:, 3] = uv_b[:, 1:2] * Qb[2] - Qb[1]
    A /= np.linalg.norm(A, axis=2, keepdims=True)
    _, s, vt = np.linalg.svd(A)
    Yh = vt[:, 3, :]
    degenerate = s[:, 2] <= RANK_TOL * s[:, 0]
    w = Yh[:, 3]
    degenerate |= np.abs(w) <= RANK_TOL * np.linalg.norm(Yh[:, :3], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        X = (Yh[:, :3] / w[:, None]) @ T[:3, :3].T + T[:3, 3]
    return X, degenerate


def fundamental_from_projections(P_a, P_b) -> np.ndarray:
    """F with ``x_b^T F x_a = 0``."""
    _, _, vt = np.linalg.svd(P_a)
    C_a = vt[-1]
    e_b = P_b @ C_a
    ex = np.array([[0, -e_b[2], e_b[1]], [e_b[2], 0, -e_b[0]], [-e_b[1], e_b[0], 0]])
    F = ex @ P_b @ np.linalg.pinv(P_a)
    return F / np.linalg.norm(F)


def lindstrom_correct(uv_a, uv_b, F):
    """Two-iteration optimal correction (Lindstrom, niter2) of pixel pairs.

    Moves each pair minimally so that it satisfies the epipolar constraint.
    """
    E = F.T  # x_a^T E x_b = 0
    xa = np.column_stack([uv_a, np.ones(len(uv_a))])
    xb = np.column_stack([uv_b, np.ones(len(uv_b))])
    Et = E[:2, :2]
    n = (xb @ E.T)[:, :2]
    n_ = (xa @ E)[:, :2]
    a = np.einsum("ni,ij,nj->n", n, Et, n_)
    b = 0.5 * (np.sum(n * n, axis=1) + np.sum(n_ * n_, axis=1))
    c = np.einsum("ni,ij,nj->n", xa, E, xb)
    d = np.sqrt(np.maximum(b * b - a * c, 0.0))
    lam = c / (b + d)
    dx = lam[:, None] * n
    dx_ = lam[:, None] * n_
    n = n - dx_ @ Et.T
    n_ = n_ - dx @ Et
    lam = lam * 2.0 * d / (np.sum(n * n, axis=1) + np.sum(n_ * n_, axis=1))
    return uv_a - lam[:, None] * n, uv_b - lam[:, None] * n_


def _triangulate_many(corr, P_a, P_b, refine=False):
    uv_a, uv_b = corr[:, :2], corr[:, 2:]
    if refine:
        F = fundamental_from_projections(P_a, P_b)
        ca, cb = lindstrom_correct(uv_a, uv_b, F)
        X, degenerate = _dlt(ca, cb, P_a, P_b)
    else:
        X, degenerate = _dlt(uv_a, uv_b, P_a, P_b)
    pa, depth_a = _reproject(P_a, X)
    pb, depth_b = _reproject(P_b, X)
    err = 0.5 * (np.linalg.norm(pa - uv_a, axis=1) + np.linalg.norm(pb - uv_b, axis=1))
    return X, err, depth_a, depth_b, degenerate


def triangulate(c, P_a, P_b, refine: bool = False):
    """Triangulate one correspondence; returns ``(X, reprojection_error_px)``.

    ``c`` is a :class:`Correspondence` or ``(ua, va, ub, vb)``. Raises
    :class:`DegenerateGeometry` for parallel rays or coincident views.
    """
    corr = _as_correspondence_array([c])
    P_a = np.asarray(P_a, dtype=float)
    P_b = np.asarray(P_b, dtype=float)
    X, err, _, _, degenerate = _triangulate_many(corr, P_a, P_b, refine)
    if degenerate[0] or not np.all(np.isfinite(X[0])):
        raise DegenerateGeometry("rank-deficient triangulation system")
    return X[0], float(err[0])


def build_point_cloud(
    correspondences, P_a, P_b, max_reproj_px: float = 2.0, refine: bool = False
) -> PointCloud:
    """Triangulate every correspondence, dropping degenerate, behind-camera
    and high-residual points. Survivors keep input order; drop counts are
    kept in ``rejected``."""
    if max_reproj_px <= 0:
        raise ValueError("max_reproj_px must be positive")
    corr = _as_correspondence_array(correspondences)
    P_a = np.asarray(P_a, dtype=float)
    P_b = np.asarray(P_b, dtype=float)
    if len(corr) == 0:
        return PointCloud(np.empty((0, 3)), np.empty(0), np.empty(0, dtype=int))
    X, err, depth_a, depth_b, degenerate = _triangulate_many(corr, P_a, P_b, refine)
    degenerate |= ~np.all(np.isfinite(X), axis=1)
    behind = ~degenerate & ((depth_a <= 0) | (depth_b <= 0))
    residual = ~degenerate & ~behind & ~(err <= max_reproj_px)
    keep = ~(degenerate | behind | residual)
    rejected = Counter(
        degenerate=int(degenerate.sum()), behind_camera=int(behind.sum()), reprojection=int(residual.sum())
    )
    idx = np.flatnonzero(keep)
    return PointCloud(X[idx], err[idx], idx, rejected)


def segment_roi(cloud: PointCloud, region: CandidateRegion, P_ref) -> ROICloud:
    """Points whose projection in the reference view falls in ``region``."""
    P_ref = np.asarray(P_ref, dtype=float)
    if len(cloud) == 0:
        sel = np.zeros(0, dtype=bool)
    else:
        uv, depth = _reproject(P_ref, cloud.points)
        sel = (depth > 0) & region.contains(uv[:, 0], uv[:, 1])
    return ROICloud(region, cloud.points[sel], cloud.reproj_err[sel], cloud.source_index[sel])


def load_correspondences(path, width: int | None = None, height: int | None = None) -> np.ndarray:
    """Read a ``ua,va,ub,vb`` CSV into an (N, 4) array."""
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CORRESPONDENCE_HEADER:
            raise ParseError(f"expected header {','.join(CORRESPONDENCE_HEADER)}", 1, path)
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", reader.line_num, path)
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise ParseError(f"non-numeric field in {row}", reader.line_num, path) from None
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    if not np.all(np.isfinite(arr)):
        raise ParseError("non-finite pixel coordinate", None, path)
    if width is not None and height is not None and len(arr):
        u, v = arr[:, [0, 2]], arr[:, [1, 3]]
        if np.any(u < 0) or np.any(u >= width) or np.any(v < 0) or np.any(v >= height):
            raise BoundsError(f"{path}: correspondence outside the {width}x{height} image")
    return arr


def save_correspondences(corr, path) -> None:
    corr = _as_correspondence_array(corr)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CORRESPONDENCE_HEADER) + "\n")
        for row in corr:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
