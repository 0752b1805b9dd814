"""Command-line entry point: split, verify, stats, histogram, evaluate, report, kernels."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import audit, heads, metrics
from .ingest import AgeGroupConfig, FilterStats, ManifestError, filter_no_face, histogram, read_manifest, write_histogram
from .splitter import Folder, SplitFractions, build_split, read_split, split_to_csv, summary_json

DEFAULTS = {"a_min": 18, "a_max": 60, "alpha": 0.8, "beta": 0.1, "seed": 0}


@dataclass(frozen=True)
class RunConfig:
    a_min: int = 18
    a_max: int = 60
    alpha: float = 0.8
    beta: float = 0.1
    seed: int = 0

    def age_config(self) -> AgeGroupConfig:
        return AgeGroupConfig(self.a_min, self.a_max)

    def fractions(self) -> SplitFractions:
        return SplitFractions(self.alpha, self.beta)


def load_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the optional JSON config file, then explicit flags."""
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        values.update(doc)
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    cfg = RunConfig(**values)
    cfg.age_config(), cfg.fractions()  # validate
    return cfg


def _emit(args, text: str, doc) -> None:
    if args.format == "structured":
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)


def cmd_split(args) -> int:
    cfg = load_config(args)
    raw = read_manifest(args.input, args.dataset_name)
    manifest, fstats = filter_no_face(raw)
    split = build_split(manifest, cfg.age_config(), cfg.fractions(), cfg.seed)

    violations = audit.verify(split, manifest, cfg.age_config())
    if violations:
        for v in violations:
            print(f"{v.kind.value}: {v.detail} ({v.subject_id or ''} {v.sample_id or ''})", file=sys.stderr)
        return 2

    fstats = FilterStats(
        available=fstats.available,
        filtered_exclusivity=len(split.discarded),
        filtered_no_face=fstats.filtered_no_face,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "split.csv").write_text(split_to_csv(split))
    extra = {"filter": asdict(fstats), "has_subject_ids": manifest.has_subject_ids}
    (out / "summary.json").write_text(summary_json(split, extra))

    stats = audit.split_stats(split)
    _emit(args, audit.format_split_table({split.dataset_name: stats}), stats.to_dict())
    return 0


def _load_split(args):
    summary = None
    if args.summary:
        summary = json.loads(Path(args.summary).read_text())
    with open(args.split, newline="") as f:
        return read_split(f, summary)


def cmd_verify(args) -> int:
    cfg = load_config(args)
    manifest, _ = filter_no_face(read_manifest(args.input))
    split = _load_split(args)
    violations = audit.verify(split, manifest, cfg.age_config())
    text = "".join(
        f"{v.kind.value}\tsubject={v.subject_id or '-'}\tsample={v.sample_id or '-'}\t{v.detail}\n" for v in violations
    ) or "ok: no violations\n"
    _emit(args, text, {"violations": [v.to_dict() for v in violations]})
    return 1 if violations else 0


def read_rows(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def cmd_stats(args) -> int:
    split_tables: dict[str, audit.SplitStats] = {}
    filters: dict[str, FilterStats] = {}
    for path in args.input:
        path = Path(path)
        if path.suffix == ".json":
            doc = json.loads(path.read_text())
            name = doc.get("dataset") or path.stem
            counts = {Folder(int(k)): v for k, v in doc["counts"].items()}
            split_tables[name] = audit.split_stats(counts)
            if "filter" in doc:
                filters[name] = FilterStats(**doc["filter"])
            continue
        for row in read_rows(path):
            name = row["dataset"]
            if "available" in row:
                filters[name] = FilterStats(
                    available=int(row["available"]),
                    filtered_exclusivity=int(row["exclusivity"]),
                    filtered_no_face=int(row["no_face"]),
                    selected=int(row["selected"]) if row.get("selected") else None,
                )
            else:
                counts = {f: int(row[col]) for f, col in zip(audit.TABLE_FOLDER_ORDER, audit.SPLIT_TABLE_COLUMNS)}
                split_tables[name] = audit.split_stats(counts)
    text, doc = "", {}
    if split_tables:
        text += audit.format_split_table(split_tables)
        doc["split"] = {n: s.to_dict() for n, s in sorted(split_tables.items())}
    if filters:
        rows = audit.filter_report(filters)
        text += ("\n" if text else "") + audit.format_filter_table(rows)
        doc["filter"] = rows
    _emit(args, text, doc)
    return 0


def cmd_histogram(args) -> int:
    manifest = read_manifest(args.input)
    if args.face_filtered:
        manifest, _ = filter_no_face(manifest)
    bins = histogram(manifest, args.bin_width)
    if args.output:
        with open(args.output, "w", newline="") as f:
            write_histogram(bins, f)
    if args.format == "structured":
        _emit(args, "", [{"bin_start": s, "count": c} for s, c in bins])
    else:
        write_histogram(bins, sys.stdout)
    return 0


def cmd_evaluate(args) -> int:
    manifest, _ = filter_no_face(read_manifest(args.truth))
    truths = {r.sample_id: r.age for r in manifest.records}
    with open(args.manifest, newline="") as f:
        split = read_split(f)
    with open(args.pred, newline="") as f:
        preds = metrics.read_predictions(
            f, method_name=args.method, dataset_name=args.dataset or manifest.dataset_name,
            split=metrics.EvalSplit(args.split),
        )
    result = metrics.evaluate(preds, split, truths)
    doc = {"method": preds.method_name, "dataset": preds.dataset_name, "split": args.split, **result.to_dict()}
    if args.output:
        Path(args.output).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    text = (f"{preds.method_name or '-'} / {preds.dataset_name} [{args.split}]  "
            f"S={result.seen_mae:.2f} (n={result.n_seen})  U={result.unseen_mae:.2f} (n={result.n_unseen})  "
            f"H={result.harmonic:.2f}\n")
    _emit(args, text, doc)
    return 0


def load_gzsl(paths) -> dict[tuple[str, str], metrics.EvalResult]:
    results = {}
    for path in paths:
        path = Path(path)
        if path.suffix == ".json":
            docs = json.loads(path.read_text())
            docs = docs if isinstance(docs, list) else [docs]
            rows = [(d["method"], d["dataset"], d["seen_mae"], d["unseen_mae"]) for d in docs]
        else:
            rows = [(r["method"], r["dataset"], r["seen_mae"], r["unseen_mae"]) for r in read_rows(path)]
        for m, d, s, u in rows:
            if (m, d) in results:
                raise ValueError(f"duplicate result for {m} / {d}")
            results[m, d] = metrics.EvalResult.from_maes(float(s), float(u))
    return results


def load_supervised(path) -> tuple[dict[str, float], dict[tuple[str, str], float]]:
    """Supervised MAE table, either long (method,dataset,mae) or wide (method,<datasets>...,All)."""
    rows = read_rows(path)
    cells: dict[tuple[str, str], float] = {}
    overall: dict[str, float] = {}
    for r in rows:
        if "dataset" in r:
            cells[r["method"], r["dataset"]] = float(r["mae"])
        else:
            for col, v in r.items():
                if col == "All":
                    overall[r["method"]] = float(v)
                elif col != "method":
                    cells[r["method"], col] = float(v)
    for m in {m for m, _ in cells} - set(overall):
        vals = [v for (mm, _), v in cells.items() if mm == m]
        overall[m] = sum(vals) / len(vals)
    return overall, cells


def cmd_report(args) -> int:
    results = load_gzsl(args.gzsl)
    agg = metrics.aggregate(results)
    text = metrics.format_aggregate(agg)
    doc = {"aggregate": agg.to_dict()}
    if args.supervised:
        sup_all, sup_cells = load_supervised(args.supervised)
        per_cell = {k: (sup_cells[k], r.harmonic) for k, r in results.items() if k in sup_cells}
        deg = metrics.degradation({m: agg.all_column[m].harmonic for m in agg.methods},
                                  {m: sup_all[m] for m in agg.methods}, per_cell)
        text += "\n" + metrics.format_degradation(deg)
        doc["degradation"] = deg.to_dict()
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        (out / "report.txt").write_text(text)
    _emit(args, text, doc)
    return 0


def cmd_kernels(args) -> int:
    if args.input:
        doc = json.loads(Path(args.input).read_text())
        calls = doc if isinstance(doc, list) else [doc]
        out = [{"kernel": c["kernel"], "result": heads.run_kernel(c["kernel"], c.get("args", {}))} for c in calls]
        _emit(args, "".join(f"{o['kernel']}: {o['result']}\n" for o in out), out)
        return 0
    rows = heads.self_test(points=args.points, seed=args.seed or 0)
    width = max(len(n) for n, _, _ in rows)
    text = "".join(f"{'PASS' if ok else 'FAIL'}  {n:<{width}}  {d}\n" for n, ok, d in rows)
    _emit(args, text, [{"check": n, "passed": ok, "detail": d} for n, ok, d in rows])
    return 0 if all(ok for _, ok, _ in rows) else 1


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--a-min", dest="a_min", type=int)
    p.add_argument("--a-max", dest="a_max", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON file with a_min/a_max/alpha/beta/seed; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gzsl-age", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "structured"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", parents=[common], help="build the five-folder split of a manifest")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="directory for split.csv and summary.json")
    p.add_argument("--dataset-name")
    _add_config_flags(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("verify", parents=[common], help="check a split against its manifest")
    p.add_argument("--input", required=True, help="annotation manifest")
    p.add_argument("--split", required=True)
    p.add_argument("--summary", help="summary.json written next to the split")
    _add_config_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", parents=[common], help="split statistics and filtering tables")
    p.add_argument("--input", required=True, nargs="+",
                   help="summary.json files, or CSV tables of split counts / filter counts")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("histogram", parents=[common], help="age histogram of a manifest")
    p.add_argument("--input", required=True)
    p.add_argument("--bin-width", type=int, default=1)
    p.add_argument("--face-filtered", action="store_true", help="drop face_ok=0 rows first")
    p.add_argument("--output")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("evaluate", parents=[common], help="seen/unseen MAE and harmonic mean")
    p.add_argument("--split", choices=("val", "test"), default="test")
    p.add_argument("--manifest", required=True, help="split table (split.csv)")
    p.add_argument("--truth", required=True, help="annotation manifest with true ages")
    p.add_argument("--pred", required=True, help="CSV sample_id,predicted_age")
    p.add_argument("--method", default="")
    p.add_argument("--dataset")
    p.add_argument("--output", help="write the result JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="aggregate results and degradation")
    p.add_argument("--gzsl", required=True, nargs="+",
                   help="CSV method,dataset,seen_mae,unseen_mae or evaluate JSON outputs")
    p.add_argument("--supervised", help="supervised MAE table (long or wide)")
    p.add_argument("--output", help="directory for report.json and report.txt")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("kernels", parents=[common], help="head kernel self-tests or single kernel calls")
    p.add_argument("--input", help="JSON {kernel, args} or a list of them")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_kernels)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, ManifestError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
