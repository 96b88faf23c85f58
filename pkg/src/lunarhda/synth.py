"""Synthetic lunar scenes: terrain, rocks and craters, descent views, and the
detections and correspondences a camera on that trajectory would produce.

Every generator is a pure function of its parameters and seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraIntrinsics, Pose, pixel_rays, project_points
from .errors import InsufficientOverlap
from .hazard_map import Detection, HazardClass, HazardMask

log = logging.getLogger(__name__)

ROCK_HEIGHT_RATIO = 0.25
CRATER_DEPTH_RATIO = 0.2
CRATER_RIM_RATIO = 0.04

# independent random streams per operation
STREAM_DEM, STREAM_HAZARDS, STREAM_CORR, STREAM_DETECT = range(4)


@dataclass(frozen=True)
class DEM:
    """Regular height grid. Cell (r, c) sits at ``x = x0 + c*cellsize``,
    ``y = y0 - r*cellsize``; row 0 is the northern (top) row."""

    ncols: int
    nrows: int
    cellsize: float
    heights: np.ndarray
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        h = np.array(self.heights, dtype=float)
        if h.shape != (self.nrows, self.ncols):
            raise ValueError(f"heights shape {h.shape} != ({self.nrows}, {self.ncols})")
        if not self.cellsize > 0:
            raise ValueError("cellsize must be positive")
        if not np.all(np.isfinite(h)):
            raise ValueError("heights must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def centered(cls, heights, cellsize) -> "DEM":
        nrows, ncols = np.shape(heights)
        x0 = -(ncols - 1) * cellsize / 2.0
        y0 = (nrows - 1) * cellsize / 2.0
        return cls(ncols, nrows, cellsize, heights, (x0, y0))

    @property
    def extent(self) -> tuple:
        """(x_min, x_max, y_min, y_max) of the cell centres."""
        x0, y0 = self.origin
        return (x0, x0 + (self.ncols - 1) * self.cellsize, y0 - (self.nrows - 1) * self.cellsize, y0)

    def grid(self):
        x0, y0 = self.origin
        xs = x0 + np.arange(self.ncols) * self.cellsize
        ys = y0 - np.arange(self.nrows) * self.cellsize
        return np.meshgrid(xs, ys)

    def with_heights(self, heights) -> "DEM":
        return replace(self, heights=heights)

    def height_at(self, x, y) -> np.ndarray:
        """Bilinear height; NaN outside the grid."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        col = (x - self.origin[0]) / self.cellsize
        row = (self.origin[1] - y) / self.cellsize
        inside = (col >= 0) & (col <= self.ncols - 1) & (row >= 0) & (row <= self.nrows - 1)
        c0 = np.clip(np.floor(col), 0, self.ncols - 2).astype(np.intp)
        r0 = np.clip(np.floor(row), 0, self.nrows - 2).astype(np.intp)
        fc = np.where(inside, col - c0, 0.0)
        fr = np.where(inside, row - r0, 0.0)
        H = self.heights
        z = (
            H[r0, c0] * (1 - fr) * (1 - fc)
            + H[r0, c0 + 1] * (1 - fr) * fc
            + H[r0 + 1, c0] * fr * (1 - fc)
            + H[r0 + 1, c0 + 1] * fr * fc
        )
        return np.where(inside, z, np.nan)


@dataclass(frozen=True)
class RockSpec:
    x: float
    y: float
    diameter: float
    height: float

    def __post_init__(self):
        if not self.diameter > 0:
            raise ValueError("rock diameter must be positive")
        if not 0 <= self.height <= self.diameter:
            raise ValueError("rock height must lie in [0, diameter]")

    @property
    def center(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class CraterSpec:
    x: float
    y: float
    diameter: float
    depth: float

    def __post_init__(self):
        if not self.diameter > 0:
            raise ValueError("crater diameter must be positive")
        if not 0 <= self.depth <= self.diameter / 2:
            raise ValueError("crater depth must lie in [0, diameter/2]")

    @property
    def center(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class DescentParams:
    start_altitude: float = 400.0
    start_downrange: float = 400.0
    n_frames: int = 2
    acquisition_window_s: float = 5.0
    approach_speed_mps: float = 40.0
    # the straight path runs from the start point to (0, 0, aim_altitude_m)
    aim_altitude_m: float = 0.0

    def __post_init__(self):
        if self.n_frames < 2:
            raise ValueError("n_frames must be >= 2")
        if not (self.start_altitude > 0 and self.acquisition_window_s > 0 and self.approach_speed_mps > 0):
            raise ValueError("altitude, acquisition window and speed must be positive")
        if self.aim_altitude_m < 0:
            raise ValueError("aim_altitude_m must be >= 0")


@dataclass
class Scene:
    dem: DEM  # terrain surface including stamped hazards
    rocks: list
    craters: list
    poses: list
    seed: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def hazards(self) -> list:
        return list(self.rocks) + list(self.craters)


def generate_dem(ncols: int, nrows: int, cellsize: float, amplitude_m: float,
                 smoothness: float = 3.0, seed=0) -> DEM:
    """Spectral smooth-noise heightfield centred on the ILS.

    White noise is shaped by a ``f**-smoothness`` amplitude spectrum and scaled
    so that ``max|height| == amplitude_m``.
    """
    if ncols < 2 or nrows < 2:
        raise ValueError("DEM needs at least 2x2 cells")
    if amplitude_m < 0:
        raise ValueError("amplitude_m must be >= 0")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((nrows, ncols))
    fy = np.fft.fftfreq(nrows, d=cellsize)[:, None]
    fx = np.fft.fftfreq(ncols, d=cellsize)[None, :]
    f = np.hypot(fx, fy)
    with np.errstate(divide="ignore"):
        filt = np.where(f > 0, f ** (-float(smoothness)), 0.0)
    h = np.real(np.fft.ifft2(np.fft.fft2(noise) * filt))
    peak = np.abs(h).max()
    if amplitude_m == 0 or peak == 0:
        h = np.zeros_like(h)
    else:
        h *= amplitude_m / peak
    return DEM.centered(h, cellsize)


def truncated_power_law(rng, n: int, q: float, d_min: float, d_max: float) -> np.ndarray:
    """Diameters with cumulative count ``N(>D) ~ D**-q`` on ``[d_min, d_max]``."""
    if not 0 < d_min < d_max:
        raise ValueError("need 0 < d_min < d_max")
    u = rng.random(n)
    lo, hi = d_min ** -q, d_max ** -q
    return (lo - u * (lo - hi)) ** (-1.0 / q)


def place_hazards(dem: DEM, rock_density: float, crater_density: float, q_exponent: float = 2.0,
                  d_min: float = 0.3, d_max: float = 3.0, seed=0, *,
                  rock_count: int | None = None, crater_count: int | None = None,
                  crater_d_range: tuple | None = None, half_extent_m: float | None = None,
                  rock_height_ratio: float = ROCK_HEIGHT_RATIO,
                  crater_depth_ratio: float = CRATER_DEPTH_RATIO):
    """Scatter rocks and craters uniformly over the DEM.

    Counts are Poisson(density * area) unless given explicitly. Hazards are
    kept a full radius inside the placement area. Returns ``(rocks, craters)``.
    """
    if rock_density < 0 or crater_density < 0:
        raise ValueError("densities must be >= 0")
    rng = np.random.default_rng(seed)
    xmin, xmax, ymin, ymax = dem.extent
    if half_extent_m is not None:
        xmin, xmax = max(xmin, -half_extent_m), min(xmax, half_extent_m)
        ymin, ymax = max(ymin, -half_extent_m), min(ymax, half_extent_m)
    area = (xmax - xmin) * (ymax - ymin)

    def scatter(density, count, lo, hi):
        n = int(rng.poisson(density * area)) if count is None else int(count)
        d = truncated_power_law(rng, n, q_exponent, lo, hi)
        r = d / 2
        x = rng.uniform(xmin + r, xmax - r) if n else np.empty(0)
        y = rng.uniform(ymin + r, ymax - r) if n else np.empty(0)
        return x, y, d

    x, y, d = scatter(rock_density, rock_count, d_min, d_max)
    rocks = [RockSpec(float(a), float(b), float(c), float(c * rock_height_ratio)) for a, b, c in zip(x, y, d)]
    c_lo, c_hi = crater_d_range if crater_d_range is not None else (d_min, d_max)
    x, y, d = scatter(crater_density, crater_count, c_lo, c_hi)
    craters = [CraterSpec(float(a), float(b), float(c), float(c * crater_depth_ratio)) for a, b, c in zip(x, y, d)]
    return rocks, craters


def rock_profile(r, rock: RockSpec):
    """Gaussian bump, sigma = diameter/4, truncated at one diameter."""
    sigma = rock.diameter / 4.0
    return np.where(r <= rock.diameter, rock.height * np.exp(-0.5 * (r / sigma) ** 2), 0.0)


def crater_profile(r, crater: CraterSpec, rim_ratio: float = CRATER_RIM_RATIO):
    """Parabolic bowl rising to a rim at r = R, then a Gaussian rim decay."""
    R = crater.diameter / 2.0
    rim = rim_ratio * crater.diameter
    inside = -crater.depth + (crater.depth + rim) * (r / R) ** 2
    outside = rim * np.exp(-(((r - R) / (0.25 * R)) ** 2))
    return np.where(r <= R, inside, np.where(r <= 2 * R, outside, 0.0))


def stamp_hazards(dem: DEM, rocks=(), craters=()) -> DEM:
    """Copy of ``dem`` with rock bumps added and crater bowls carved in."""
    X, Y = dem.grid()
    H = dem.heights.copy()
    cs = dem.cellsize
    x0, y0 = dem.origin

    def window(cx, cy, radius):
        c0 = max(int(math.floor((cx - radius - x0) / cs)), 0)
        c1 = min(int(math.ceil((cx + radius - x0) / cs)) + 1, dem.ncols)
        r0 = max(int(math.floor((y0 - (cy + radius)) / cs)), 0)
        r1 = min(int(math.ceil((y0 - (cy - radius)) / cs)) + 1, dem.nrows)
        return slice(r0, r1), slice(c0, c1)

    for rock in rocks:
        rs, cs_ = window(rock.x, rock.y, rock.diameter)
        r = np.hypot(X[rs, cs_] - rock.x, Y[rs, cs_] - rock.y)
        H[rs, cs_] += rock_profile(r, rock)
    for crater in craters:
        rs, cs_ = window(crater.x, crater.y, crater.diameter)
        r = np.hypot(X[rs, cs_] - crater.x, Y[rs, cs_] - crater.y)
        H[rs, cs_] += crater_profile(r, crater)
    return dem.with_heights(H)


def descent_poses(p: DescentParams = DescentParams(), cant_deg: float = 45.0) -> list:
    """Camera poses sampled evenly over the acquisition window.

    The vehicle flies a straight line from ``(downrange, 0, altitude)`` toward
    ``(0, 0, aim_altitude_m)``; every boresight passes through the ILS origin.
    """
    start = np.array([p.start_downrange, 0.0, p.start_altitude])
    aim = np.array([0.0, 0.0, p.aim_altitude_m])
    path = aim - start
    length = np.linalg.norm(path)
    travel = p.approach_speed_mps * p.acquisition_window_s
    if travel >= length:
        raise ValueError("acquisition window reaches the end of the approach path")
    direction = path / length
    poses = []
    for k in range(p.n_frames):
        t = p.acquisition_window_s * k / (p.n_frames - 1)
        center = start + p.approach_speed_mps * t * direction
        poses.append(Pose.look_at(center, (0.0, 0.0, 0.0)))
    off_nadir = math.degrees(math.acos(-poses[0].boresight[2]))
    if abs(off_nadir - cant_deg) > 1.0:
        log.info("boresight %.1f deg off nadir; vehicle must tilt %.1f deg to hold a %.1f deg cant",
                 off_nadir, off_nadir - cant_deg, cant_deg)
    return poses


def intersect_terrain(origin, dirs, dem: DEM, n_coarse: int = 64, n_bisect: int = 40,
                      chunk: int = 16384):
    """First crossing of rays with the bilinear terrain surface.

    Marches each ray through the DEM height band in ``n_coarse`` steps, then
    bisects the first bracketed crossing. Returns ``(points, hit)``; rays that
    never meet the surface inside the grid get NaN points.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    origins = np.broadcast_to(np.asarray(origin, dtype=float), dirs.shape)
    n = len(dirs)
    out = np.full((n, 3), np.nan)
    hit = np.zeros(n, dtype=bool)
    hmin = float(dem.heights.min()) - 1e-3
    hmax = float(dem.heights.max()) + 1e-3
    ts = np.linspace(0.0, 1.0, n_coarse)

    def f(o, d, s):
        p = o[..., :] + s[..., None] * d
        h = dem.height_at(p[..., 0], p[..., 1])
        return p[..., 2] - h

    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        o, d = origins[sl], dirs[sl]
        dz = d[:, 2]
        down = dz < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            s_top = np.where(down, np.maximum((hmax - o[:, 2]) / dz, 0.0), 0.0)
            s_bot = np.where(down, (hmin - o[:, 2]) / dz, 0.0)
        s = s_top[:, None] + (s_bot - s_top)[:, None] * ts[None, :]
        fv = f(o[:, None, :], d[:, None, :], s)
        below = np.nan_to_num(fv, nan=1.0) <= 0
        below[~down] = False
        has = below.any(axis=1)
        k = np.argmax(below, axis=1)
        rows = np.flatnonzero(has & (k > 0))
        if rows.size == 0:
            continue
        a = s[rows, k[rows] - 1]
        b = s[rows, k[rows]]
        orow, drow = o[rows], d[rows]
        for _ in range(n_bisect):
            m = 0.5 * (a + b)
            fm = f(orow, drow, m)
            above = np.nan_to_num(fm, nan=1.0) > 0
            a = np.where(above, m, a)
            b = np.where(above, b, m)
        sm = 0.5 * (a + b)
        pts = orow + sm[:, None] * drow
        idx = rows + lo
        out[idx] = pts
        hit[idx] = True
    return out, hit


def _hazard_radius(h):
    return h.diameter / 2.0


def _footprint_samples(h, dem: DEM | None, n_rings: int = 6, n_angles: int = 48) -> np.ndarray:
    """Surface points sampled over a hazard's footprint disk."""
    R = _hazard_radius(h)
    radii = np.linspace(0.0, R, n_rings)
    ang = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    rr, aa = np.meshgrid(radii, ang)
    x = h.x + rr.ravel() * np.cos(aa.ravel())
    y = h.y + rr.ravel() * np.sin(aa.ravel())
    if dem is None:
        z = np.zeros_like(x)
    else:
        z = dem.height_at(x, y)
        z = np.where(np.isfinite(z), z, 0.0)
    return np.column_stack([x, y, z])


def projected_box(hazard, pose: Pose, intr: CameraIntrinsics, dem: DEM | None = None):
    """Unclipped image-plane bounding box ``(u0, v0, u1, v1)`` of a hazard's
    footprint surface, or None if any part lies behind the camera."""
    pts = _footprint_samples(hazard, dem)
    uv, depth, _ = project_points(pts, intr, pose)
    if np.any(depth <= 0):
        return None
    return (float(uv[:, 0].min()), float(uv[:, 1].min()), float(uv[:, 0].max()), float(uv[:, 1].max()))


def ground_truth_mask(scene: Scene, pose: Pose, intr: CameraIntrinsics, window_pad_px: int = 3) -> HazardMask:
    """Hazard iff the ray through the pixel centre meets the terrain inside a
    hazard footprint disk.

    Rays are only cast inside each hazard's projected box plus a small pad;
    pixels elsewhere cannot see a footprint.
    """
    W, H = intr.width, intr.height
    bits = np.zeros((H, W), dtype=np.uint8)
    center = pose.center
    for hz in scene.hazards:
        box = projected_box(hz, pose, intr, scene.dem)
        if box is None:
            continue
        u0 = max(int(math.floor(box[0])) - window_pad_px, 0)
        v0 = max(int(math.floor(box[1])) - window_pad_px, 0)
        u1 = min(int(math.ceil(box[2])) + window_pad_px + 1, W)
        v1 = min(int(math.ceil(box[3])) + window_pad_px + 1, H)
        if u0 >= u1 or v0 >= v1:
            continue
        vv, uu = np.mgrid[v0:v1, u0:u1]
        uv = np.column_stack([uu.ravel(), vv.ravel()]).astype(float)
        pts, hit = intersect_terrain(center, pixel_rays(uv, intr, pose), scene.dem)
        r2 = (pts[:, 0] - hz.x) ** 2 + (pts[:, 1] - hz.y) ** 2
        inside = hit & (r2 <= _hazard_radius(hz) ** 2)
        bits[vv.ravel()[inside], uu.ravel()[inside]] = 1
    return HazardMask(W, H, bits)


def _unoccluded(points, pose: Pose, intr: CameraIntrinsics, dem: DEM, tol_m: float = 0.05):
    c = pose.center
    rays = points - c
    dist = np.linalg.norm(rays, axis=1)
    hits, hit = intersect_terrain(c, rays / dist[:, None], dem)
    first = np.where(hit, np.linalg.norm(hits - c, axis=1), np.inf)
    return first >= dist - tol_m


def synth_correspondences(scene: Scene, pose_a: Pose, pose_b: Pose, intr: CameraIntrinsics,
                          n: int, noise_px: float = 0.0, seed=0, check_occlusion: bool = True):
    """Sample ``n`` terrain points seen by both views and their noisy pixel pairs.

    Returns ``(correspondences (n, 4), points (n, 3))``. Pixel pairs that the
    noise pushes outside the image are discarded and resampled.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise_px < 0:
        raise ValueError("noise_px must be >= 0")
    rng = np.random.default_rng(seed)
    dem = scene.dem
    xmin, xmax, ymin, ymax = dem.extent
    budget = 10 * n
    attempts = 0
    corr_parts, pt_parts = [], []
    found = 0
    while found < n and attempts < budget:
        batch = min(max(2 * (n - found), 256), budget - attempts)
        attempts += batch
        x = rng.uniform(xmin, xmax, batch)
        y = rng.uniform(ymin, ymax, batch)
        noise = rng.normal(0.0, noise_px, (batch, 4)) if noise_px > 0 else np.zeros((batch, 4))
        pts = np.column_stack([x, y, dem.height_at(x, y)])
        uva, _, vis_a = project_points(pts, intr, pose_a)
        uvb, _, vis_b = project_points(pts, intr, pose_b)
        c = np.column_stack([uva, uvb]) + noise
        ok = vis_a & vis_b & np.isfinite(pts[:, 2])
        ok &= (c[:, [0, 2]] >= 0).all(axis=1) & (c[:, [0, 2]] < intr.width).all(axis=1)
        ok &= (c[:, [1, 3]] >= 0).all(axis=1) & (c[:, [1, 3]] < intr.height).all(axis=1)
        if check_occlusion and ok.any():
            idx = np.flatnonzero(ok)
            vis = _unoccluded(pts[idx], pose_a, intr, dem) & _unoccluded(pts[idx], pose_b, intr, dem)
            ok[idx[~vis]] = False
        corr_parts.append(c[ok])
        pt_parts.append(pts[ok])
        found += int(ok.sum())
    if found < n:
        raise InsufficientOverlap(f"only {found} of {n} points co-visible after {attempts} attempts")
    return np.concatenate(corr_parts)[:n], np.concatenate(pt_parts)[:n]


def simulate_detector(rocks, craters, pose: Pose, intr: CameraIntrinsics, miss_rate: float = 0.0,
                      jitter_px: float = 0.0, seed=0, dem: DEM | None = None) -> list:
    """Stand-in for the neural detector.

    Each visible hazard's projected box is reported with probability
    ``1 - miss_rate``, corners jittered by ``U(-jitter_px, jitter_px)`` and a
    score drawn from ``U(0.5, 1)``. Boxes are clipped to the image.
    """
    if not 0 <= miss_rate < 1:
        raise ValueError("miss_rate must be in [0, 1)")
    hazards = [(HazardClass.ROCK, h) for h in rocks] + [(HazardClass.CRATER, h) for h in craters]
    rng = np.random.default_rng(seed)
    keep = rng.random(len(hazards)) >= miss_rate
    jitter = rng.uniform(-jitter_px, jitter_px, (len(hazards), 4)) if jitter_px > 0 else np.zeros((len(hazards), 4))
    scores = rng.uniform(0.5, 1.0, len(hazards))
    W, H = intr.width, intr.height
    out = []
    for i, (cls, hz) in enumerate(hazards):
        if not keep[i]:
            continue
        box = projected_box(hz, pose, intr, dem)
        if box is None:
            continue
        u0, v0, u1, v1 = np.asarray(box) + jitter[i]
        u0, u1 = sorted((u0, u1))
        v0, v1 = sorted((v0, v1))
        u0, u1 = max(u0, 0.0), min(u1, float(W))
        v0, v1 = max(v0, 0.0), min(v1, float(H))
        if u0 >= u1 or v0 >= v1:
            continue
        out.append(Detection(cls, (float(u0), float(v0), float(u1), float(v1)), float(scores[i])))
    return out
