"""``notchbench`` command line.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from itertools import combinations
from pathlib import Path

import numpy as np

from ..dataset import apply_preprocessor, load_csv, synthesize, write_csv
from ..errors import (
    ConfigError,
    CorruptModel,
    EmptyDataset,
    EmptyJoin,
    NotchBenchError,
    ParseError,
    ScaleMismatch,
    UnknownLabel,
    VersionMismatch,
)
from ..evaluation import agency_comparison
from ..rating_scale import RatingScale
from .config import ExperimentConfig, load_config
from .persistence import load_bundle
from .runner import format_table, run, write_report_files

logger = logging.getLogger("notchbench")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

AGENCY_HEADER = ["pair", "E", "sd", "E_abs", "cond_E", "cond_sd", "cond_E_abs", "n_joined"]

_DATA_ERRORS = (ParseError, UnknownLabel, EmptyDataset, EmptyJoin, CorruptModel, VersionMismatch,
                ScaleMismatch, FileNotFoundError)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def compare_agencies(paths, scale: RatingScale | None = None) -> list[list[str]]:
    """One row per pair of files, first file of the pair playing the prediction."""
    streams = [(Path(p).stem, load_csv(p, scale)) for p in paths]
    rows = []
    for (name_a, a), (name_b, b) in combinations(streams, 2):
        cmp = agency_comparison(a, b)
        s = cmp.stats
        rows.append([f"{name_a} and {name_b}", _fmt(s.dc), _fmt(s.sd), _fmt(s.adc),
                     _fmt(s.cond_dc), _fmt(s.cond_sd), _fmt(s.cond_adc), str(cmp.n_joined)])
    return rows


def _agency_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGENCY_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def _overrides(args) -> list[tuple[str, str]]:
    pairs = []
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    if getattr(args, "seed", None) is not None:
        pairs.append(("seed", str(args.seed)))
    if getattr(args, "svg", None) is not None:
        pairs.append(("output.svg", str(args.svg)))
    return pairs


def _config(args) -> ExperimentConfig:
    return load_config(args.config, _overrides(args))


def cmd_run(args) -> int:
    cfg = _config(args)
    out = args.out or cfg.out_dir
    report = run(cfg, out_dir=out)
    if not args.quiet:
        print(format_table(report.to_dict()))
        print(f"wrote results to {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    scale = _config(args).scale if args.config else None
    if len(args.files) < 2:
        raise ConfigError("compare-agencies needs at least two files")
    text = _agency_csv(compare_agencies(args.files, scale))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if not args.quiet or not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    d = synthesize(cfg.synth, seed=cfg.seed, scale=cfg.scale)
    out = Path(args.out or "synthetic.csv")
    write_csv(d, out)
    if not args.quiet:
        print(f"wrote {len(d)} rows to {out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = load_bundle(args.model)
    if bundle.scale is None:
        raise ConfigError("model file carries no rating scale")
    d = load_csv(args.data, bundle.scale)
    if bundle.feature_names and tuple(d.feature_names) != bundle.feature_names:
        raise ParseError("CSV feature columns differ from the model's training columns")
    if bundle.preprocessor is not None:
        d = apply_preprocessor(bundle.preprocessor, d)
    pred = np.asarray(bundle.model.predict(d.X), dtype=np.int64)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["company_id", "period", "rating", "predicted"])
    for cid, per, y, p in zip(d.company_ids, d.periods, d.y, pred):
        w.writerow([cid, str(per), bundle.scale.label(int(y)), bundle.scale.label(int(p))])
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    if not args.quiet:
        acc = float(np.mean(pred == d.y)) if len(d) else float("nan")
        print(f"accuracy {acc:.4f} on {len(d)} rows", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.report)
    path = src / "report.json" if src.is_dir() else src
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if args.out:
        write_report_files(data, args.out)
    if not args.quiet:
        print(format_table(data))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="notchbench", description="Credit-rating classifiers scored by notch distance.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="flat key=value experiment config")
            p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
            p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("run", help="train and evaluate the configured methods")
    common(p)
    p.add_argument("--svg", dest="svg", action="store_true", default=None)
    p.add_argument("--no-svg", dest="svg", action="store_false")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare-agencies", help="notch statistics between rating files")
    p.add_argument("files", nargs="+")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("predict", help="score a CSV with a saved model")
    p.add_argument("model")
    p.add_argument("data")
    common(p, config=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="re-render a saved report")
    p.add_argument("report", help="run output directory or report.json")
    common(p, config=False)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else (logging.ERROR if getattr(args, "quiet", False) else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NotchBenchError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
