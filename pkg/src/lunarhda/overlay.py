"""RGB overlay of hazards, candidate regions and the selected site."""

from __future__ import annotations

import numpy as np

from .hazard_map import HazardClass

RED = (230, 40, 40)
YELLOW = (240, 220, 40)
GREEN = (40, 220, 60)
WHITE = (255, 255, 255)


def draw_rect(img, x0, y0, x1, y1, color, thickness=2):
    """Outline of the pixel box [x0, x1) x [y0, y1), clipped to the image."""
    h, w, _ = img.shape
    x0, y0 = max(int(x0), 0), max(int(y0), 0)
    x1, y1 = min(int(np.ceil(x1)), w), min(int(np.ceil(y1)), h)
    if x0 >= x1 or y0 >= y1:
        return
    t = thickness
    img[y0 : min(y0 + t, y1), x0:x1] = color
    img[max(y1 - t, y0) : y1, x0:x1] = color
    img[y0:y1, x0 : min(x0 + t, x1)] = color
    img[y0:y1, max(x1 - t, x0) : x1] = color


def draw_circle(img, cx, cy, radius, color, thickness=2):
    h, w, _ = img.shape
    r_out = radius + thickness / 2
    x0, x1 = max(int(cx - r_out) - 1, 0), min(int(cx + r_out) + 2, w)
    y0, y1 = max(int(cy - r_out) - 1, 0), min(int(cy + r_out) + 2, h)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    d = np.hypot(xx - cx, yy - cy)
    ring = np.abs(d - radius) <= thickness / 2
    img[y0:y1, x0:x1][ring] = color


def render_overlay(mask, detections, candidates, top=None, vfde_px=None):
    """Grey hazard mask with red rock/shadow boxes, yellow crater boxes,
    green candidate squares, and the top site drawn heavy with its VFDE circle."""
    img = np.where(mask.bits[..., None] == 1, 110, 35).astype(np.uint8).repeat(3, axis=2)
    for det in detections:
        color = YELLOW if det.cls is HazardClass.CRATER else RED
        draw_rect(img, *det.bbox, color, thickness=2)
    for region in candidates:
        draw_rect(img, region.x, region.y, region.x + region.side, region.y + region.side, GREEN, 2)
    if top is not None:
        draw_rect(img, top.x, top.y, top.x + top.side, top.y + top.side, GREEN, 8)
        cx, cy = top.center
        radius = (vfde_px if vfde_px else top.side) / 2
        draw_circle(img, cx, cy, radius, WHITE, 4)
    return img
