"""Required square side in pixels for a 10 m footprint across the image rows
and a range of altitudes."""

import argparse

from lunarhda.camera import GroundResolutionQuery, ground_resolution, required_pixels
from lunarhda.config import CameraConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--side", type=float, default=10.0, help="footprint side in metres")
    ap.add_argument("--altitudes", type=float, nargs="+", default=[100, 200, 258.6, 400])
    args = ap.parse_args()

    cam = CameraConfig()
    rows = [0, cam.height // 4, cam.height // 2, 3 * cam.height // 4, cam.height - 1]
    print("pixels per side (rows counted from the top of the image)")
    print(f"{'altitude m':>11} " + " ".join(f"{'v=' + str(v):>9}" for v in rows))
    for alt in args.altitudes:
        cells = []
        for v in rows:
            res = ground_resolution(GroundResolutionQuery(cam.height - 1 - v, alt, cam.cant_deg, cam.fov_deg,
                                                          cam.height))
            cells.append(f"{required_pixels(args.side, res) if res > 0 else 'inf':>9}")
        print(f"{alt:>11.1f} " + " ".join(cells))
    print(f"at 0.078 m/px: {required_pixels(args.side, 0.078)} px")


if __name__ == "__main__":
    main()
