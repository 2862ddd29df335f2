"""Write full-size synthetic fine-tuning files (183 hotels, 398 viewpoints) to a directory.

Useful for checking split sizes and byte-stability without the original crawls.
"""

import argparse
import random
from pathlib import Path

from dualgen import dataset
from dualgen.config import load_config
from dualgen.dataset import HotelRecord
from dualgen.geo import GeoPoint, ViewpointRecord


def synthetic(n_hotels, n_viewpoints, seed):
    rng = random.Random(seed)
    bounds = load_config().bounds
    def point():
        return GeoPoint(rng.uniform(bounds.lat_min, bounds.lat_max), rng.uniform(bounds.lon_min, bounds.lon_max))
    hotels = [HotelRecord(f"Hotel {i:03d}", point()) for i in range(n_hotels)]
    viewpoints = [
        ViewpointRecord(f"Viewpoint {i:03d}", point(), f"Viewpoint {i:03d} sits at altitude; history and visitor notes.")
        for i in range(n_viewpoints)
    ]
    return hotels, viewpoints


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--hotels", type=int, default=183)
    ap.add_argument("--viewpoints", type=int, default=398)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--split", type=float, default=0.8)
    args = ap.parse_args()

    cfg = load_config()
    hotels, viewpoints = synthetic(args.hotels, args.viewpoints, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    dataset.write_hotels_csv(args.out / "hotels.csv", hotels)
    dataset.write_viewpoints_csv(args.out / "viewpoints.csv", viewpoints)

    train, test = dataset.emit_sft_keyword_dataset(hotels, cfg.templates, args.split, args.seed)
    dataset.write_examples(args.out / "sft_keyword.json", train, {"seed": args.seed, "split": args.split})
    dataset.write_hotels_csv(args.out / "sft_keyword.test.csv", test)

    gen, _ = dataset.emit_sft_generation_dataset(viewpoints)
    dataset.write_examples(args.out / "sft_generation.json", gen)
    baseline = {v.name: f"{v.name} is a popular place to visit." for v in viewpoints}
    orpo, _ = dataset.emit_orpo_dataset(viewpoints, baseline)
    dataset.write_examples(args.out / "orpo.json", orpo)

    print(f"keyword SFT: {len(train)} train / {len(test)} test hotels")
    print(f"generation SFT: {len(gen)} examples; ORPO: {len(orpo)} pairs -> {args.out}")


if __name__ == "__main__":
    main()
