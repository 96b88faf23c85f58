import numpy as np
import pytest

from lunarhda.camera import CameraIntrinsics, projection_matrix
from lunarhda.config import PipelineConfig
from lunarhda.pipeline import make_scene, view_poses
from lunarhda.synth import DescentParams, descent_poses


@pytest.fixture(scope="session")
def intr():
    return CameraIntrinsics()


@pytest.fixture(scope="session")
def descent(intr):
    """The two default descent views and their projection matrices."""
    pose_a, pose_b = descent_poses(DescentParams())
    return pose_a, pose_b, projection_matrix(intr, pose_a), projection_matrix(intr, pose_b)


@pytest.fixture(scope="session")
def scene():
    cfg = PipelineConfig()
    return make_scene(cfg.synth, cfg.camera.cant_deg, seed=11)


@pytest.fixture(scope="session")
def scene_views(scene):
    return view_poses(scene)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[2:])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
