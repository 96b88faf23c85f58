"""Plane fit, slope, roughness and cost ranking of candidate landing sites."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateFit, InsufficientPoints
from .hazard_map import CandidateRegion

CONDITIONING_OFFSET_M = 10.0
MAX_CONDITION = 1e8


class Status(str, enum.Enum):
    ASSESSED = "assessed"
    INSUFFICIENT_POINTS = "insufficient_points"
    DEGENERATE_FIT = "degenerate_fit"


@dataclass(frozen=True)
class AssessConfig:
    gravity_axis: tuple = (0.0, 0.0, 1.0)
    slope_max_deg: float = 10.0
    roughness_max_m: float = 0.3
    area_min_m2: float = 10.0
    n_min: int = 20
    roughness_aggregate: str = "max"

    def __post_init__(self):
        g = np.asarray(self.gravity_axis, dtype=float)
        if g.shape != (3,) or not np.isclose(np.linalg.norm(g), 1.0):
            raise ValueError("gravity_axis must be a unit 3-vector")
        object.__setattr__(self, "gravity_axis", tuple(float(x) for x in g))
        if not (self.slope_max_deg > 0 and self.roughness_max_m > 0 and self.area_min_m2 > 0):
            raise ValueError("slope_max_deg, roughness_max_m and area_min_m2 must be positive")
        if self.n_min < 3:
            raise ValueError("n_min must be at least 3")
        if self.roughness_aggregate not in ("max", "rms"):
            raise ValueError("roughness_aggregate must be 'max' or 'rms'")

    @property
    def gravity(self) -> np.ndarray:
        return np.asarray(self.gravity_axis, dtype=float)


@dataclass(frozen=True)
class PlaneFit:
    """Plane ``a x + b y + c z = 1`` in the conditioned frame ``X + offset``."""

    a: float
    b: float
    c: float
    offset: tuple
    condition_number: float
    n_points: int

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def in_input_frame(self) -> np.ndarray:
        """Coefficients of the same plane written for un-translated points.

        Raises :class:`DegenerateFit` if that plane passes through the origin,
        where the ``= 1`` form has no solution.
        """
        p = self.normal
        denom = 1.0 - float(p @ np.asarray(self.offset))
        if abs(denom) < 1e-12 * np.linalg.norm(p):
            raise DegenerateFit("plane passes through the origin")
        return p / denom

    def distances(self, points) -> np.ndarray:
        """Orthogonal point-to-plane distances (metres) for un-translated points."""
        q = np.asarray(points, dtype=float).reshape(-1, 3) + np.asarray(self.offset)
        p = self.normal
        return np.abs(q @ p - 1.0) / np.linalg.norm(p)


@dataclass(frozen=True)
class SiteAssessment:
    region: CandidateRegion
    area_m2: float
    slope_deg: float | None
    roughness_m: float | None
    cost: float | None
    status: Status
    n_points: int = 0

    def safe(self, cfg: AssessConfig) -> bool:
        return (
            self.status is Status.ASSESSED
            and self.slope_deg <= cfg.slope_max_deg
            and self.roughness_m <= cfg.roughness_max_m
        )


def _points_of(points) -> np.ndarray:
    pts = getattr(points, "points", points)
    return np.asarray(pts, dtype=float).reshape(-1, 3)


def conditioning_offset(pts: np.ndarray, cfg: AssessConfig) -> np.ndarray:
    """Translation moving the centroid to ``+10 m`` along the gravity axis."""
    return CONDITIONING_OFFSET_M * cfg.gravity - pts.mean(axis=0)


def fit_plane(points, cfg: AssessConfig = AssessConfig()) -> PlaneFit:
    """Least-squares solution of ``G p = 1`` for the conditioned point matrix G.

    Solved with an SVD-based least-squares routine rather than by inverting
    ``G^T G``; its condition number is reported.
    """
    pts = _points_of(points)
    n = len(pts)
    if n < cfg.n_min:
        raise InsufficientPoints(f"{n} points < n_min={cfg.n_min}")
    offset = conditioning_offset(pts, cfg)
    G = pts + offset
    d = np.ones(n)
    p, _, rank, sv = np.linalg.lstsq(G, d, rcond=None)
    cond = math.inf if sv[-1] == 0 else float((sv[0] / sv[-1]) ** 2)
    if rank < 3 or cond > MAX_CONDITION:
        raise DegenerateFit(f"condition number {cond:.3g} of G^T G exceeds {MAX_CONDITION:g}")
    return PlaneFit(float(p[0]), float(p[1]), float(p[2]), tuple(offset.tolist()), cond, n)


def slope_angle(fit: PlaneFit, cfg: AssessConfig = AssessConfig()) -> float:
    """Angle in degrees between the plane normal and the gravity axis, in [0, 90].

    Same angle as ``acos(|p.g| / (|p||g|))``, evaluated with atan2 so it stays
    accurate for nearly level planes where acos loses half its digits.
    """
    p = fit.normal
    g = cfg.gravity
    beta = math.degrees(math.atan2(float(np.linalg.norm(np.cross(p, g))), abs(float(p @ g))))
    if beta > 90.0:
        # cannot happen with |p.g| as the second argument
        raise AssertionError("slope above 90 deg")
    return beta


def roughness(points, fit: PlaneFit, cfg: AssessConfig = AssessConfig()) -> float:
    """Aggregate point-to-plane distance (``max`` or ``rms``) in metres."""
    dist = fit.distances(_points_of(points))
    if dist.size == 0:
        return 0.0
    if cfg.roughness_aggregate == "rms":
        return float(np.sqrt(np.mean(dist * dist)))
    return float(dist.max())


def cost(area_m2: float, slope_deg: float, roughness_m: float, cfg: AssessConfig = AssessConfig()) -> float:
    """Site cost; 0 is ideal, 3 sits on every vehicle limit at once."""
    if not area_m2 > 0:
        raise ValueError("area_m2 must be positive")
    if slope_deg < 0 or roughness_m < 0:
        raise ValueError("slope and roughness must be non-negative")
    return cfg.area_min_m2 / area_m2 + slope_deg / cfg.slope_max_deg + roughness_m / cfg.roughness_max_m


def assess_site(region: CandidateRegion, roi_cloud, cfg: AssessConfig = AssessConfig(),
                area_m2: float | None = None) -> SiteAssessment:
    area = region.area_m2 if area_m2 is None else area_m2
    pts = _points_of(roi_cloud)
    n = len(pts)
    try:
        fit = fit_plane(pts, cfg)
    except InsufficientPoints:
        return SiteAssessment(region, area, None, None, None, Status.INSUFFICIENT_POINTS, n)
    except DegenerateFit:
        return SiteAssessment(region, area, None, None, None, Status.DEGENERATE_FIT, n)
    slope = slope_angle(fit, cfg)
    rough = roughness(pts, fit, cfg)
    if not area > 0:
        # zero ground resolution (nadir line of sight): the site cannot be scored
        return SiteAssessment(region, area, slope, rough, None, Status.DEGENERATE_FIT, n)
    return SiteAssessment(region, area, slope, rough, cost(area, slope, rough, cfg), Status.ASSESSED, n)


def _rank_key(s: SiteAssessment):
    return (s.cost, -s.area_m2, s.region.y, s.region.x)


def rank_sites(assessments: Sequence[SiteAssessment]) -> list:
    """Assessed sites by cost, then larger area, then (y, x); unassessed sites
    follow in (y, x) order."""
    scored = sorted((s for s in assessments if s.status is Status.ASSESSED), key=_rank_key)
    rest = sorted(
        (s for s in assessments if s.status is not Status.ASSESSED),
        key=lambda s: (s.region.y, s.region.x, s.region.side),
    )
    return scored + rest
