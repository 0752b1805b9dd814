"""Rebuild the published result tables from the transcribed CSVs in data/.

Prints the GZSL aggregate table (with Mean/Std rows), the supervised-vs-GZSL
degradation summary, and the split and filtering statistics.

    python scripts/reproduce_tables.py [--data DIR]
"""

import argparse
from pathlib import Path

from gzsl_age import audit, metrics
from gzsl_age.cli import load_gzsl, read_rows, load_supervised
from gzsl_age.ingest import FilterStats

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data", type=Path, default=ROOT / "data")
    args = parser.parse_args()

    results = load_gzsl([args.data / "gzsl_test_mae.csv"])
    agg = metrics.aggregate(results)
    print("GZSL test MAE (H recomputed from S and U)\n")
    print(metrics.format_aggregate(agg))

    sup_all, sup_cells = load_supervised(args.data / "supervised_test_mae.csv")
    printed_h = {r["row"]: float(r["harmonic"]) for r in read_rows(args.data / "gzsl_test_mae_summary.csv")}
    per_cell = {k: (sup_cells[k], r.harmonic) for k, r in results.items()}
    for label, h in (("printed", {m: printed_h[m] for m in agg.methods}),
                     ("recomputed", {m: agg.all_column[m].harmonic for m in agg.methods})):
        print(f"Degradation using {label} All-column H\n")
        print(metrics.format_degradation(metrics.degradation(h, sup_all, per_cell)))

    splits = {}
    for row in read_rows(args.data / "split_stats.csv"):
        counts = {f: int(row[c]) for f, c in zip(audit.TABLE_FOLDER_ORDER, audit.SPLIT_TABLE_COLUMNS)}
        splits[row["dataset"]] = audit.split_stats(counts)
    print("Split statistics\n")
    print(audit.format_split_table(splits))

    filters = {r["dataset"]: FilterStats(int(r["available"]), int(r["exclusivity"]), int(r["no_face"]))
               for r in read_rows(args.data / "filtering_stats.csv")}
    print("Sample filtering\n")
    print(audit.format_filter_table(audit.filter_report(filters)))


if __name__ == "__main__":
    main()
