"""Stage orchestration behind the ``synth``, ``assess`` and ``bench`` commands."""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import formats
from .camera import GroundResolutionQuery, Pose, ground_resolution, projection_matrix, required_pixels
from .config import PipelineConfig, SceneConfig
from .errors import NoCandidates
from .hazard_map import (
    build_mask,
    extract_candidates,
    load_detections,
    quadtree_decompose,
    save_detections,
)
from .overlay import render_overlay
from .reconstruction import build_point_cloud, load_correspondences, save_correspondences, segment_roi
from .site_assess import SiteAssessment, Status, assess_site, rank_sites
from .synth import (
    STREAM_CORR,
    STREAM_DEM,
    STREAM_DETECT,
    STREAM_HAZARDS,
    Scene,
    descent_poses,
    generate_dem,
    ground_truth_mask,
    place_hazards,
    simulate_detector,
    stamp_hazards,
    synth_correspondences,
)

log = logging.getLogger(__name__)

SCENE_FILE = "scene.json"
DEM_FILE = "dem.asc"
TRUTH_MASK_FILE = "truth_mask.pgm"
DETECTIONS_FILE = "detections.json"
CORRESPONDENCES_FILE = "correspondences.csv"
REPORT_FILE = "report.json"
OVERLAY_FILE = "overlay.ppm"
TIMINGS_FILE = "timings.json"
MASK_FILE = "mask.pgm"
CLOUD_FILE = "cloud.ply"


@dataclass(frozen=True)
class StageTiming:
    stage: str
    ms: float


class Timer:
    """Collects per-stage wall-clock times; tags escaping errors with the stage name."""

    def __init__(self):
        self.timings = []

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        except Exception as exc:
            if not hasattr(exc, "stage"):
                exc.stage = name
            raise
        finally:
            self.timings.append(StageTiming(name, (time.perf_counter() - t0) * 1e3))


def make_scene(scfg: SceneConfig, cant_deg: float = 45.0, seed: int = 0) -> Scene:
    dem = generate_dem(scfg.ncols, scfg.nrows, scfg.cellsize, scfg.amplitude_m, scfg.smoothness,
                       seed=[seed, STREAM_DEM])
    rocks, craters = place_hazards(
        dem, scfg.rock_density, scfg.crater_density, scfg.q_exponent, scfg.d_min, scfg.d_max,
        seed=[seed, STREAM_HAZARDS], rock_count=scfg.rock_count, crater_count=scfg.crater_count,
        crater_d_range=(scfg.crater_d_min, scfg.crater_d_max), half_extent_m=scfg.hazard_half_extent_m,
    )
    surface = stamp_hazards(dem, rocks, craters)
    return Scene(surface, rocks, craters, descent_poses(scfg.descent, cant_deg), seed)


def resolution_fn(cfg: PipelineConfig, altitude: float):
    """Metres per pixel at an image location, from the vertical image axis.

    Pixel locations are counted up from the bottom row, the edge nearest nadir.
    """
    cam = cfg.camera
    height = cam.height

    def res(u, v):
        pix = min(max((height - 1) - v, 0.0), height - 1)
        return ground_resolution(GroundResolutionQuery(pix, altitude, cam.cant_deg, cam.fov_deg, height))

    return res


def view_poses(scene: Scene):
    """Views A (earlier) and B (later, reference) for two-view reconstruction."""
    return scene.poses[0], scene.poses[-1]


def run_synth(cfg: PipelineConfig, seed: int, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scfg = cfg.synth
    intr = cfg.camera.intrinsics()
    scene = make_scene(scfg, cfg.camera.cant_deg, seed)
    pose_a, pose_b = view_poses(scene)
    paths = {
        "scene": out / SCENE_FILE,
        "dem": out / DEM_FILE,
        "truth_mask": out / TRUTH_MASK_FILE,
        "detections": out / DETECTIONS_FILE,
        "correspondences": out / CORRESPONDENCES_FILE,
    }
    formats.write_scene(scene, paths["scene"], DEM_FILE)
    formats.write_pgm(ground_truth_mask(scene, pose_b, intr), paths["truth_mask"])
    dets = simulate_detector(scene.rocks, scene.craters, pose_b, intr, scfg.miss_rate, scfg.jitter_px,
                             seed=[seed, STREAM_DETECT], dem=scene.dem)
    save_detections(dets, paths["detections"])
    corr, _ = synth_correspondences(scene, pose_a, pose_b, intr, scfg.n_correspondences, scfg.noise_px,
                                    seed=[seed, STREAM_CORR])
    save_correspondences(corr, paths["correspondences"])
    log.info("synth: %d rocks, %d craters, %d detections, %d correspondences",
             len(scene.rocks), len(scene.craters), len(dets), len(corr))
    return paths


@dataclass
class AssessResult:
    ranked: list
    candidates: list
    required_px: int
    mask: object
    cloud: object
    detections: list
    timings: list = field(default_factory=list)


def assess(cfg: PipelineConfig, detections, correspondences, pose_a: Pose, pose_b: Pose,
           timer: Timer | None = None) -> AssessResult:
    """Mask -> quadtree -> candidates -> reconstruction -> per-site assessment -> ranking.

    View B is the reference view for the mask and for ROI segmentation.
    Raises :class:`NoCandidates` (carrying the partial result) when no free
    region is large enough.
    """
    timer = timer or Timer()
    intr = cfg.camera.intrinsics()
    m = cfg.mask
    with timer.stage("mask"):
        mask = build_mask(detections, intr.width, intr.height, m.margin, m.score_threshold)
    with timer.stage("quadtree"):
        leaves = quadtree_decompose(mask, m.min_leaf)
    with timer.stage("candidates"):
        res = resolution_fn(cfg, float(pose_b.center[2]))
        required = required_pixels(cfg.vfde_side_m, res(intr.cx, intr.cy))
        candidates = extract_candidates(leaves, required, res)
    with timer.stage("reconstruction"):
        P_a = projection_matrix(intr, pose_a)
        P_b = projection_matrix(intr, pose_b)
        cloud = build_point_cloud(correspondences, P_a, P_b, cfg.reconstruction.max_reproj_px,
                                  cfg.reconstruction.refine)
    with timer.stage("assessment"):
        assessments = [assess_site(r, segment_roi(cloud, r, P_b), cfg.assess) for r in candidates]
    with timer.stage("ranking"):
        ranked = rank_sites(assessments)
    result = AssessResult(ranked, candidates, required, mask, cloud, list(detections), timer.timings)
    if not candidates:
        err = NoCandidates(f"no free region of at least {required} px")
        err.result = result
        err.stage = "candidates"
        raise err
    return result


def report_records(ranked, cfg: PipelineConfig) -> list:
    def num(x):
        return None if x is None else float(x)

    return [
        {
            "rank": i + 1,
            "region": {"x": s.region.x, "y": s.region.y, "side": s.region.side},
            "area_m2": num(s.area_m2),
            "slope_deg": num(s.slope_deg),
            "roughness_m": num(s.roughness_m),
            "cost": num(s.cost),
            "safe": s.safe(cfg.assess),
            "status": s.status.value,
        }
        for i, s in enumerate(ranked)
    ]


def top_site(ranked) -> SiteAssessment | None:
    if ranked and ranked[0].status is Status.ASSESSED:
        return ranked[0]
    return None


def _input_paths(cfg: PipelineConfig, out: Path):
    p = cfg.paths
    detections = cfg.resolve(p.detections) or out / DETECTIONS_FILE
    correspondences = cfg.resolve(p.correspondences) or out / CORRESPONDENCES_FILE
    scene = cfg.resolve(p.scene) or out / SCENE_FILE
    return detections, correspondences, scene


def write_outputs(result: AssessResult, cfg: PipelineConfig, out: Path) -> None:
    (out / REPORT_FILE).write_text(json.dumps(report_records(result.ranked, cfg), indent=1) + "\n",
                                   encoding="utf-8")
    (out / TIMINGS_FILE).write_text(
        json.dumps([{"stage": t.stage, "ms": t.ms} for t in result.timings], indent=1) + "\n",
        encoding="utf-8",
    )
    formats.write_pgm(result.mask, out / MASK_FILE)
    formats.write_ply(result.cloud, out / CLOUD_FILE)
    best = top_site(result.ranked)
    img = render_overlay(result.mask, result.detections, result.candidates,
                         best.region if best else None, result.required_px)
    formats.write_ppm(img, out / OVERLAY_FILE)


def run_assess(cfg: PipelineConfig, out_dir) -> AssessResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    intr = cfg.camera.intrinsics()
    det_path, corr_path, scene_path = _input_paths(cfg, out)
    timer = Timer()
    with timer.stage("load"):
        detections = load_detections(det_path, intr.width, intr.height)
        correspondences = load_correspondences(corr_path, intr.width, intr.height)
        scene = formats.read_scene(scene_path)
        pose_a, pose_b = view_poses(scene)
    try:
        result = assess(cfg, detections, correspondences, pose_a, pose_b, timer)
    except NoCandidates as exc:
        write_outputs(exc.result, cfg, out)
        raise
    write_outputs(result, cfg, out)
    return result


def bench_detections(cfg: PipelineConfig, seed: int):
    """Detections of a stress scene with ``bench.n_hazards`` rocks and craters inside view B."""
    b = cfg.bench
    scfg = cfg.synth
    n_craters = b.n_hazards // 5
    stress = replace(scfg, rock_count=b.n_hazards - n_craters, crater_count=n_craters,
                     hazard_half_extent_m=b.hazard_half_extent_m)
    scene = make_scene(stress, cfg.camera.cant_deg, seed)
    intr = cfg.camera.intrinsics()
    _, pose_b = view_poses(scene)
    return simulate_detector(scene.rocks, scene.craters, pose_b, intr, 0.0, 0.0,
                             seed=[seed, STREAM_DETECT], dem=scene.dem)


def run_bench(cfg: PipelineConfig, seed: int, repeats: int | None = None) -> dict:
    """Median and p95 wall-clock per stage for mask + quadtree at full resolution."""
    repeats = cfg.bench.repeats if repeats is None else repeats
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    intr = cfg.camera.intrinsics()
    m = cfg.mask
    dets = bench_detections(cfg, seed)
    samples = {"mask": [], "quadtree": [], "mask+quadtree": []}
    for _ in range(repeats):
        t0 = time.perf_counter()
        mask = build_mask(dets, intr.width, intr.height, m.margin, m.score_threshold)
        t1 = time.perf_counter()
        quadtree_decompose(mask, m.min_leaf)
        t2 = time.perf_counter()
        samples["mask"].append((t1 - t0) * 1e3)
        samples["quadtree"].append((t2 - t1) * 1e3)
        samples["mask+quadtree"].append((t2 - t0) * 1e3)
    stats = {
        stage: {
            "samples": len(v),
            "median_ms": float(np.median(v)),
            "p95_ms": float(np.percentile(v, 95)),
        }
        for stage, v in samples.items()
    }
    return {"width": intr.width, "height": intr.height, "detections": len(dets), "stages": stats}
