"""Small scene builders shared by several test modules."""

import numpy as np

from lunarhda.camera import pixel_rays, project_points


def ground_points(rng, n, intr, pose_ref, pose_other, relief=1.0):
    """Points near z = 0 seen by the reference view and inside the other view's image."""
    out = []
    while sum(len(o) for o in out) < n:
        uv = rng.uniform([0, 0], [intr.width - 1, intr.height - 1], size=(4 * n, 2))
        d = pixel_rays(uv, intr, pose_ref)
        z = rng.uniform(-relief, relief, size=len(uv))
        s = (z - pose_ref.center[2]) / d[:, 2]
        X = pose_ref.center + s[:, None] * d
        _, _, vis = project_points(X, intr, pose_other)
        out.append(X[(s > 0) & vis])
    return np.concatenate(out)[:n]


def pixel_pairs(X, intr, pose_a, pose_b):
    ua, _, _ = project_points(X, intr, pose_a)
    ub, _, _ = project_points(X, intr, pose_b)
    return np.hstack([ua, ub])
