#!/usr/bin/env python3
"""Export per-cluster average cumulative percent change over the
historical window as CSV, for plotting cluster trajectories.

Usage: python scripts/trend_export.py --data-dir artifacts/data \
           --cluster-model artifacts/cluster_model.json --out trends.csv
"""

import argparse
import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from taxfund import clustering, dataio
from taxfund.types import SERIES_YEARS


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--data-dir", default="artifacts/data")
    parser.add_argument("--cluster-model", default="artifacts/cluster_model.json")
    parser.add_argument("--out", default="trends.csv")
    args = parser.parse_args()

    dataset = dataio.load_dataset(dataio.DatasetPaths.in_dir(args.data_dir))
    model = clustering.cluster_model_from_json(Path(args.cluster_model).read_text())
    assess = dataset.assessments_by_id()

    # mean cumulative change per cluster across every labeled series
    by_cluster: dict[int, list[np.ndarray]] = {}
    for pid, cluster in model.labels.items():
        pct = clustering.to_pct_changes(assess[pid])
        cumulative = np.cumprod([1.0 + s.pct_change for s in pct.steps]) - 1.0
        by_cluster.setdefault(cluster, []).append(cumulative)

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster", "size"] + [f"to_{y}" for y in SERIES_YEARS[1:]])
        for cluster in sorted(by_cluster):
            mean = np.mean(by_cluster[cluster], axis=0)
            w.writerow([cluster, len(by_cluster[cluster])]
                       + [f"{v:.6f}" for v in mean])
    print(f"wrote {args.out} ({len(by_cluster)} clusters)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
