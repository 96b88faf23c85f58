"""Readers and writers for the pipeline's file formats (PGM/PPM, ASCII PLY,
ASCII DEM grid, scene manifest)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .camera import Pose
from .errors import ParseError
from .hazard_map import HazardMask
from .reconstruction import PointCloud
from .synth import DEM, CraterSpec, RockSpec, Scene


def _read_netpbm_header(data: bytes, magic: bytes, path):
    if not data.startswith(magic):
        raise ParseError(f"not a {magic.decode()} file", 1, path)
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated header", None, path)
        fields.append(int(data[start:pos]))
    return fields, pos + 1  # one whitespace byte separates header and raster


def write_pgm(mask: HazardMask, path) -> None:
    """Binary P5, maxval 255, hazard = 255."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write((mask.bits * 255).astype(np.uint8).tobytes())


def read_pgm(path) -> HazardMask:
    data = Path(path).read_bytes()
    (w, h, maxval), pos = _read_netpbm_header(data, b"P5", path)
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval}", None, path)
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return HazardMask(w, h, (raster.reshape(h, w) > 127).astype(np.uint8))


def write_ppm(rgb: np.ndarray, path) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (w, h, _), pos = _read_netpbm_header(data, b"P6", path)
    return np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos).reshape(h, w, 3)


def write_ply(cloud: PointCloud, path) -> None:
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property double x",
        "property double y",
        "property double z",
        "property double reproj_err",
        "end_header",
    ]
    body = [
        f"{p[0]!r} {p[1]!r} {p[2]!r} {e!r}"
        for p, e in zip(cloud.points.tolist(), cloud.reproj_err.tolist())
    ]
    Path(path).write_text("\n".join(lines + body) + "\n", encoding="ascii")


def read_ply(path) -> PointCloud:
    with open(path, encoding="ascii") as fh:
        if fh.readline().strip() != "ply":
            raise ParseError("missing 'ply' magic", 1, path)
        n = None
        props = []
        lineno = 1
        for line in fh:
            lineno += 1
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise ParseError("only ASCII PLY is supported", lineno, path)
            if tok[0] == "element" and tok[1] == "vertex":
                n = int(tok[2])
            elif tok[0] == "property":
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if n is None or props[:3] != ["x", "y", "z"]:
            raise ParseError("expected vertex element with x, y, z", lineno, path)
        rows = []
        for _ in range(n):
            lineno += 1
            parts = fh.readline().split()
            if len(parts) != len(props):
                raise ParseError(f"expected {len(props)} values", lineno, path)
            rows.append([float(v) for v in parts])
    arr = np.array(rows, dtype=float).reshape(n, len(props))
    err = arr[:, props.index("reproj_err")] if "reproj_err" in props else np.zeros(n)
    return PointCloud(arr[:, :3], err)


def write_dem(dem: DEM, path) -> None:
    x0, y0 = dem.origin
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"ncols {dem.ncols}\nnrows {dem.nrows}\ncellsize {dem.cellsize!r}\n")
        fh.write(f"origin {x0!r} {y0!r}\n")
        for row in dem.heights.tolist():
            fh.write(" ".join(repr(v) for v in row))
            fh.write("\n")


def read_dem(path) -> DEM:
    with open(path, encoding="ascii") as fh:
        header = {}
        for lineno in range(1, 5):
            tok = fh.readline().split()
            if not tok:
                raise ParseError("truncated header", lineno, path)
            header[tok[0]] = tok[1:]
        try:
            ncols = int(header["ncols"][0])
            nrows = int(header["nrows"][0])
            cellsize = float(header["cellsize"][0])
            origin = (float(header["origin"][0]), float(header["origin"][1]))
        except (KeyError, IndexError, ValueError) as exc:
            raise ParseError(f"bad DEM header: {exc}", None, path) from None
        rows = []
        for i in range(nrows):
            parts = fh.readline().split()
            if len(parts) != ncols:
                raise ParseError(f"expected {ncols} heights, got {len(parts)}", 5 + i, path)
            rows.append([float(v) for v in parts])
    return DEM(ncols, nrows, cellsize, np.array(rows), origin)


def write_scene(scene: Scene, manifest_path, dem_filename: str = "dem.asc") -> None:
    """Write the DEM next to the manifest and the manifest itself."""
    manifest_path = Path(manifest_path)
    write_dem(scene.dem, manifest_path.parent / dem_filename)
    doc = {
        "dem_path": dem_filename,
        "rocks": [{"x": r.x, "y": r.y, "diameter": r.diameter, "height": r.height} for r in scene.rocks],
        "craters": [{"x": c.x, "y": c.y, "diameter": c.diameter, "depth": c.depth} for c in scene.craters],
        "poses": [
            {"position": p.center.tolist(), "quaternion": p.quaternion_wxyz().tolist()} for p in scene.poses
        ],
        "seed": scene.seed,
    }
    manifest_path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_scene(manifest_path) -> Scene:
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, manifest_path) from None
    try:
        dem_path = Path(doc["dem_path"])
        if not dem_path.is_absolute():
            dem_path = manifest_path.parent / dem_path
        rocks = [RockSpec(r["x"], r["y"], r["diameter"], r["height"]) for r in doc["rocks"]]
        craters = [CraterSpec(c["x"], c["y"], c["diameter"], c["depth"]) for c in doc["craters"]]
        poses = [Pose.from_quaternion(p["position"], p["quaternion"]) for p in doc["poses"]]
        seed = doc.get("seed", 0)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad scene manifest: {exc!r}", None, manifest_path) from None
    return Scene(read_dem(dem_path), rocks, craters, poses, seed)
