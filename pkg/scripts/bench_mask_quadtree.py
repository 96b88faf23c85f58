"""Time mask rasterisation and quadtree decomposition at full sensor size
against the number of detections."""

import argparse
import dataclasses

from lunarhda.config import PipelineConfig
from lunarhda.pipeline import run_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--hazards", type=int, nargs="+", default=[10, 50, 250, 1000])
    args = ap.parse_args()

    base = PipelineConfig()
    print(f"{'hazards':>8} {'detections':>10} {'mask ms':>9} {'quadtree ms':>12} {'total ms':>9} {'p95 ms':>8}")
    for n in args.hazards:
        base.bench = dataclasses.replace(base.bench, n_hazards=n)
        s = run_bench(base, args.seed, args.repeats)
        st = s["stages"]
        print(f"{n:>8} {s['detections']:>10} {st['mask']['median_ms']:>9.1f} {st['quadtree']['median_ms']:>12.1f} "
              f"{st['mask+quadtree']['median_ms']:>9.1f} {st['mask+quadtree']['p95_ms']:>8.1f}")


if __name__ == "__main__":
    main()
