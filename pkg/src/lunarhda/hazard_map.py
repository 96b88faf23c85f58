"""Hazard masks from detections, quadtree free-space decomposition, candidate regions."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from .errors import BoundsError, ParseError


class HazardClass(str, enum.Enum):
    ROCK = "rock"
    CRATER = "crater"
    SHADOW = "shadow"


@dataclass(frozen=True)
class Detection:
    cls: HazardClass
    bbox: tuple  # (x_min, y_min, x_max, y_max) in pixels
    score: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "cls", HazardClass(self.cls))
        bbox = tuple(float(b) for b in self.bbox)
        if len(bbox) != 4:
            raise BoundsError("bbox must have four values")
        object.__setattr__(self, "bbox", bbox)
        x0, y0, x1, y1 = bbox
        if not (x0 < x1 and y0 < y1):
            raise BoundsError(f"degenerate bbox {bbox}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")

    def to_json(self) -> dict:
        return {"class": self.cls.value, "bbox": list(self.bbox), "score": self.score}


@dataclass(frozen=True)
class HazardMask:
    """Binary hazard bitmap; ``bits[row, col] == 1`` marks a hazard pixel."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.shape != (self.height, self.width):
            raise ValueError(f"bits shape {bits.shape} != ({self.height}, {self.width})")
        if bits.size and bits.max() > 1:
            bits = (bits > 0).astype(np.uint8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def hazard_count(self) -> int:
        return int(self.bits.sum(dtype=np.int64))


class QuadLeaf(NamedTuple):
    x: int
    y: int
    side: int
    state: str  # "free", "hazard" or "mixed"


@dataclass(frozen=True)
class CandidateRegion:
    x: int
    y: int
    side: int
    area_m2: float = math.nan

    @property
    def center(self) -> tuple:
        half = (self.side - 1) / 2.0
        return (self.x + half, self.y + half)

    @property
    def area_px(self) -> int:
        return self.side * self.side

    def contains(self, u, v):
        """Membership in the pixel rectangle ``[x, x+side) x [y, y+side)``."""
        return (u >= self.x) & (u < self.x + self.side) & (v >= self.y) & (v < self.y + self.side)


def _parse_detection(obj, line, path, width, height):
    if not isinstance(obj, dict):
        raise ParseError("detection must be a JSON object", line, path)
    try:
        cls = obj["class"]
        bbox = obj["bbox"]
        score = obj.get("score", 1.0)
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}", line, path) from None
    try:
        cls = HazardClass(cls)
    except ValueError:
        raise ParseError(f"unknown hazard class {cls!r}", line, path) from None
    if (
        not isinstance(bbox, list)
        or len(bbox) != 4
        or not all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in bbox)
    ):
        raise ParseError("bbox must be an array of four numbers", line, path)
    if not isinstance(score, (int, float)) or isinstance(score, bool) or not 0 <= score <= 1:
        raise ParseError(f"score must be a number in [0, 1], got {score!r}", line, path)
    x0, y0, x1, y1 = bbox
    if not (x0 < x1 and y0 < y1):
        raise BoundsError(f"{path}:{line}: degenerate bbox {bbox}")
    if width is not None and (x0 < 0 or x1 > width):
        raise BoundsError(f"{path}:{line}: bbox {bbox} outside image width {width}")
    if height is not None and (y0 < 0 or y1 > height):
        raise BoundsError(f"{path}:{line}: bbox {bbox} outside image height {height}")
    return Detection(cls, tuple(bbox), float(score))


def load_detections(path, width: int | None = None, height: int | None = None) -> list:
    """Read a detections JSON array, validating each record.

    Records are decoded one at a time so errors carry the line number of the
    offending object.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    decoder = json.JSONDecoder()

    def line_of(pos):
        return text.count("\n", 0, pos) + 1

    def skip_ws(pos):
        while pos < len(text) and text[pos] in " \t\r\n":
            pos += 1
        return pos

    pos = skip_ws(0)
    if pos >= len(text) or text[pos] != "[":
        raise ParseError("expected a JSON array", line_of(pos), path)
    pos = skip_ws(pos + 1)
    detections = []
    if pos < len(text) and text[pos] == "]":
        pos += 1
    else:
        while True:
            try:
                obj, end = decoder.raw_decode(text, pos)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, exc.lineno, path) from None
            detections.append(_parse_detection(obj, line_of(pos), path, width, height))
            pos = skip_ws(end)
            if pos < len(text) and text[pos] == ",":
                pos = skip_ws(pos + 1)
                continue
            if pos < len(text) and text[pos] == "]":
                pos += 1
                break
            raise ParseError("expected ',' or ']'", line_of(pos), path)
    if skip_ws(pos) != len(text):
        raise ParseError("trailing data after array", line_of(pos), path)
    return detections


def save_detections(detections: Sequence[Detection], path) -> None:
    records = [d.to_json() for d in detections]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("[\n")
        fh.write(",\n".join("  " + json.dumps(r) for r in records))
        fh.write("\n]\n" if records else "]\n")


def build_mask(
    detections: Sequence[Detection],
    width: int,
    height: int,
    margin_px: float = 0,
    score_threshold: float = 0.5,
) -> HazardMask:
    """Rasterise detections into a hazard mask.

    Pixel (row i, col j) is a hazard when ``x_min - m <= j < x_max + m`` and
    ``y_min - m <= i < y_max + m`` for some detection scoring at least
    ``score_threshold``. All classes rasterise identically.
    """
    if margin_px < 0:
        raise ValueError("margin_px must be >= 0")
    bits = np.zeros((height, width), dtype=np.uint8)
    for det in detections:
        if det.score < score_threshold:
            continue
        x0, y0, x1, y1 = det.bbox
        c0 = max(math.ceil(x0 - margin_px), 0)
        c1 = min(math.ceil(x1 + margin_px), width)
        r0 = max(math.ceil(y0 - margin_px), 0)
        r1 = min(math.ceil(y1 + margin_px), height)
        if c0 < c1 and r0 < r1:
            bits[r0:r1, c0:c1] = 1
    return HazardMask(width, height, bits)


def padded_side(width: int, height: int) -> int:
    n = max(width, height, 1)
    return 1 << (n - 1).bit_length()


def summed_area_table(bits: np.ndarray) -> np.ndarray:
    """(h+1, w+1) inclusive prefix sums with a zero first row and column."""
    h, w = bits.shape
    sat = np.zeros((h + 1, w + 1), dtype=np.int64 if bits.size >= 2**31 else np.int32)
    np.cumsum(bits, axis=0, dtype=sat.dtype, out=sat[1:, 1:])
    np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
    return sat


def quadtree_decompose(mask: HazardMask, min_leaf_px: int = 8) -> list:
    """Split the power-of-two padded mask into uniform square leaves.

    Padding (right/bottom) counts as hazard. A node stops splitting when it is
    all free, all hazard, or its side has reached ``min_leaf_px``. Nodes are
    processed a whole level at a time with O(1) summed-area lookups.
    Leaves are returned ordered by (y, x).
    """
    if min_leaf_px < 1:
        raise ValueError("min_leaf_px must be >= 1")
    w, h = mask.width, mask.height
    sat = summed_area_table(mask.bits)
    side = padded_side(w, h)

    xs = np.zeros(1, dtype=np.int64)
    ys = np.zeros(1, dtype=np.int64)
    out_x, out_y, out_s, out_state = [], [], [], []
    while xs.size:
        x0 = np.minimum(xs, w)
        x1 = np.minimum(xs + side, w)
        y0 = np.minimum(ys, h)
        y1 = np.minimum(ys + side, h)
        inside = sat[y1, x1] - sat[y0, x1] - sat[y1, x0] + sat[y0, x0]
        hazards = inside.astype(np.int64) + side * side - (x1 - x0) * (y1 - y0)
        free = hazards == 0
        full = hazards == side * side
        stop = free | full | (side <= min_leaf_px)
        if stop.any():
            state = np.where(free, 0, np.where(full, 1, 2))[stop]
            out_x.append(xs[stop])
            out_y.append(ys[stop])
            out_s.append(np.full(int(stop.sum()), side, dtype=np.int64))
            out_state.append(state)
        split = ~stop
        if not split.any():
            break
        half = side // 2
        px, py = xs[split], ys[split]
        xs = np.concatenate([px, px + half, px, px + half])
        ys = np.concatenate([py, py, py + half, py + half])
        side = half

    lx = np.concatenate(out_x)
    ly = np.concatenate(out_y)
    ls = np.concatenate(out_s)
    lstate = np.concatenate(out_state)
    order = np.lexsort((lx, ly))
    names = ("free", "hazard", "mixed")
    return [
        QuadLeaf(int(lx[i]), int(ly[i]), int(ls[i]), names[lstate[i]]) for i in order
    ]


Resolution = Union[float, Callable[[float, float], float], None]


def extract_candidates(leaves, required_px: int, resolution: Resolution = None) -> list:
    """Free leaves at least ``required_px`` on a side, as candidate regions.

    ``resolution`` gives metres per pixel, either as a constant or as a
    function of the region centre ``(u, v)``; without it ``area_m2`` is NaN.
    Sorted by side descending, then (y, x).
    """
    if required_px < 1:
        raise ValueError("required_px must be >= 1")
    out = []
    for leaf in leaves:
        if leaf.state != "free" or leaf.side < required_px:
            continue
        region = CandidateRegion(leaf.x, leaf.y, leaf.side)
        if resolution is None:
            area_m2 = math.nan
        elif callable(resolution):
            res = resolution(*region.center)
            area_m2 = (leaf.side * res) ** 2
        else:
            area_m2 = (leaf.side * float(resolution)) ** 2
        out.append(CandidateRegion(leaf.x, leaf.y, leaf.side, area_m2))
    out.sort(key=lambda r: (-r.side, r.y, r.x))
    return out
