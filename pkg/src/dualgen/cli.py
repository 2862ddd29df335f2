"""Command-line entry point: ``dualgen <command>``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import dataset, scoring
from .config import load_config
from .errors import ConfigError, DataError, DualGenError, NotFoundError, StageError
from .geo import GeoPoint, bridge_lookup
from .jsonfmt import Fixed, dumps
from .pipeline import TABLE_COLUMNS, Pipeline, table_row

log = logging.getLogger("dualgen")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _print(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# -- commands ------------------------------------------------------------------


def cmd_ingest(args, cfg):
    result = dataset.ingest(
        cfg.bounds,
        encyclopedia=args.encyclopedia,
        travel_site=args.travel_site,
        coords=args.coords,
        hotels=args.hotels,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset.write_viewpoints_csv(out / "viewpoints.csv", result.viewpoints)
    if args.hotels:
        dataset.write_hotels_csv(out / "hotels.csv", result.hotels)
    _write_json(out / "stats.json", result.stats_dict())
    dataset.write_rejections(out / "rejected.csv", result.rejections)
    _print(json.dumps(result.stats_dict(), indent=2))
    return 0


def _read_baselines(path) -> dict[str, str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise DataError(f"{path}: baseline file must be a JSON object name -> text")
    return data


def cmd_emit(args, cfg):
    split, seed = cfg.split
    split = args.split if args.split is not None else split
    seed = args.seed if args.seed is not None else seed
    meta = {"mode": args.mode, "config_hash": cfg.snapshot_hash}
    if args.mode == "sft-keyword":
        hotels = dataset.load_hotels(args.hotels or cfg.path("hotels", required=True))
        train, test = dataset.emit_sft_keyword_dataset(
            hotels, cfg.templates, split, seed, cfg.prompts["extract_instruction"]
        )
        meta.update(seed=seed, split=split, n_train=len(train), n_test=len(test))
        dataset.write_examples(args.out, train, meta)
        test_path = Path(args.out).with_name(Path(args.out).stem + ".test.csv")
        dataset.write_hotels_csv(test_path, test)
        _print(f"{len(train)} training examples -> {args.out}; {len(test)} test hotels -> {test_path}")
        return 0

    viewpoints = dataset.load_viewpoints(args.viewpoints or cfg.path("viewpoints", required=True))
    instruction = cfg.prompts["generate_instruction"]
    if args.mode == "sft-gen":
        examples, report = dataset.emit_sft_generation_dataset(viewpoints, instruction)
    else:
        if not args.baseline:
            raise ConfigError("--baseline is required for orpo")
        examples, report = dataset.emit_orpo_dataset(viewpoints, _read_baselines(args.baseline), instruction)
    meta.update(n_examples=len(examples), excluded=[{"row": r.row, "reason": r.reason} for r in report])
    dataset.write_examples(args.out, examples, meta)
    _print(f"{len(examples)} examples -> {args.out} ({len(report)} excluded)")
    return 0


def cmd_geocode(args, cfg):
    pipe = Pipeline(cfg, load=False)
    geocoder = pipe.build_geocoder()
    p = geocoder.geocode(args.keyword)
    _print(dumps({"keyword": args.keyword, "lat": Fixed(p.lat, 6), "lon": Fixed(p.lon, 6)}))
    return 0


def cmd_nearest(args, cfg):
    pipe = Pipeline(cfg)
    k = args.k or cfg.k
    if args.keyword:
        doc = bridge_lookup(args.keyword, pipe.catalog, pipe.geocoder, k, cfg.earth)
        _print(doc)
        return 2 if "error" in json.loads(doc) else 0
    if args.lat is None or args.lon is None:
        raise ConfigError("give a keyword or both --lat and --lon")
    results = pipe.nearest(GeoPoint(args.lat, args.lon), k)
    _print(dumps([r.to_dict() for r in results]))
    return 0


def cmd_query(args, cfg):
    pipe = Pipeline(cfg)
    try:
        resp = pipe.run_query(args.prompt, args.k)
    except StageError as exc:
        _print(dumps(exc.to_dict()))
        return exc.exit_code
    _print(resp.to_json(include_timing=args.timing))
    return 0


def _load_test_set(path) -> list[tuple[str, str]]:
    path = Path(path)
    if path.suffix == ".csv":
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        return [(r[0], r[1]) for r in rows[1:]]
    data = json.loads(path.read_text(encoding="utf-8"))
    return [(item[0], item[1]) if isinstance(item, list) else (item["input"], item["expected"]) for item in data]


def cmd_experiment(args, cfg):
    pipe = Pipeline(cfg)
    if args.test_set:
        test_set = _load_test_set(args.test_set)
    elif args.mode == "extraction":
        if not pipe.hotels:
            raise ConfigError("extraction experiment needs --test-set or data.hotels")
        split, seed = cfg.split
        _, test_hotels = dataset.emit_sft_keyword_dataset(pipe.hotels, cfg.templates, split, seed)
        test_set = [(dataset.STANDARD_TEMPLATE.format(name=h.name), h.name) for h in test_hotels]
    else:
        test_set = [(vp.name, vp.intro) for vp in pipe.catalog]
    run = pipe.run_experiment(test_set, args.mode)
    if args.out:
        _write_json(args.out, run.to_dict())
    row = table_row(run, args.model, args.method, args.compute_type)
    if args.csv:
        new = not Path(args.csv).exists()
        with open(args.csv, "a", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
            if new:
                w.writeheader()
            w.writerow(row)
    _print(json.dumps({"run_id": run.run_id, "config_hash": run.config_hash, **run.summary}, indent=2))
    return 0


def cmd_score(args, cfg):
    weights = cfg.weights.with_branch(args.mode)
    if args.mode == scoring.STRUCTURED:
        comp = scoring.structured_components(args.candidate, args.reference)
    else:
        pipe = Pipeline(cfg)
        comp = scoring.unstructured_components(args.candidate, args.reference, pipe.scorers())
    raw, pct = scoring.composite_score(comp, weights)
    _print(json.dumps({"mode": args.mode, "components": comp.present(), "raw": raw, "percent": pct}, indent=2))
    return 0


def _read_scores(path) -> list[float]:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        return [float(x) for x in json.loads(text)]
    out = []
    for line in text.splitlines():
        cell = line.split(",")[-1].strip()
        try:
            out.append(float(cell))
        except ValueError:
            if out:  # only a header line may be non-numeric
                raise DataError(f"{path}: non-numeric score {cell!r}") from None
    return out


def cmd_distribution(args, cfg):
    report = scoring.distribution_report(_read_scores(args.system), _read_scores(args.human), args.bins)
    if args.json:
        _write_json(args.json, report)
    _print(scoring.format_distribution(report))
    return 0


def cmd_serve(args, cfg):
    from .service import serve

    serve(cfg, args.host, args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dualgen", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML config (default: $DBA_CONFIG)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="merge, clean and validate raw POI CSVs")
    s.add_argument("--encyclopedia")
    s.add_argument("--travel-site")
    s.add_argument("--coords")
    s.add_argument("--hotels")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("emit-finetune", help="write SFT or ORPO training files")
    s.add_argument("--mode", required=True, choices=("sft-keyword", "sft-gen", "orpo"))
    s.add_argument("--out", required=True)
    s.add_argument("--hotels")
    s.add_argument("--viewpoints")
    s.add_argument("--baseline", help="JSON object: viewpoint name -> untuned model output")
    s.add_argument("--split", type=float)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_emit)

    s = sub.add_parser("geocode", help="resolve a place name")
    s.add_argument("keyword")
    s.set_defaults(func=cmd_geocode)

    s = sub.add_parser("nearest", help="nearest viewpoints to a keyword or coordinate")
    s.add_argument("keyword", nargs="?")
    s.add_argument("--lat", type=float)
    s.add_argument("--lon", type=float)
    s.add_argument("-k", type=int)
    s.set_defaults(func=cmd_nearest)

    s = sub.add_parser("query", help="run the full pipeline on one prompt")
    s.add_argument("prompt")
    s.add_argument("-k", type=int)
    s.add_argument("--timing", action="store_true", help="include per-stage timings")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("experiment", help="batch extraction or generation experiment")
    s.add_argument("--mode", required=True, choices=("extraction", "generation"))
    s.add_argument("--test-set", help="JSON [[input, expected], ...] or two-column CSV")
    s.add_argument("--out", help="full JSON report")
    s.add_argument("--csv", help="append a summary row to this CSV")
    s.add_argument("--model", default="")
    s.add_argument("--method", default="")
    s.add_argument("--compute-type", default="")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("score", help="composite score for one candidate/reference pair")
    s.add_argument("--candidate", required=True)
    s.add_argument("--reference", required=True)
    s.add_argument("--mode", choices=scoring.BRANCHES, default=scoring.STRUCTURED)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("report-distribution", help="compare system and human score distributions")
    s.add_argument("system", help="scores file (JSON array, one per line, or CSV last column)")
    s.add_argument("human")
    s.add_argument("--bins", type=int, default=10)
    s.add_argument("--json", help="also write the report as JSON")
    s.set_defaults(func=cmd_distribution)

    s = sub.add_parser("serve", help="start the HTTP service")
    s.add_argument("--host")
    s.add_argument("--port", type=int)
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except NotFoundError as exc:
        _print(dumps({"error": "not_found", "keyword": exc.keyword}))
        return exc.exit_code
    except DualGenError as exc:
        print(f"dualgen: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"dualgen: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"dualgen: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
