"""Recompute the composite score for every published generation row and show the residuals."""

import argparse
import csv
from pathlib import Path

from dualgen.scoring import CompositeWeights, ScoreComponents, composite_score

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "table2.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--table", default=str(FIXTURE))
    ap.add_argument("--d", type=float, nargs=3, default=(0.3, 0.3, 0.4), metavar=("D1", "D2", "D3"))
    args = ap.parse_args()

    weights = CompositeWeights("unstructured", d=tuple(args.d))
    with open(args.table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'model':<14}{'method':<7}{'type':<6}{'raw':>8}{'printed':>9}{'pct':>8}{'printed':>9}")
    worst_raw = worst_pct = 0.0
    for r in rows:
        comp = ScoreComponents(fluency=float(r["fluency"]), accuracy=float(r["accuracy"]), relevance=float(r["relevance"]))
        raw, pct = composite_score(comp, weights)
        worst_raw = max(worst_raw, abs(raw - float(r["overall"])))
        worst_pct = max(worst_pct, abs(pct - float(r["overall_pct"])))
        print(f"{r['model']:<14}{r['method']:<7}{r['compute_type']:<6}{raw:8.4f}{r['overall']:>9}{pct:8.2f}{r['overall_pct']:>9}")
    print(f"\nmax |raw diff| = {worst_raw:.4f}   max |pct diff| = {worst_pct:.3f}   ({len(rows)} rows)")


if __name__ == "__main__":
    main()
