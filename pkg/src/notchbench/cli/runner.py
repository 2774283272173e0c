"""Experiment pipeline: data -> splits -> preprocessing -> models -> notch metrics."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..dataset import (
    Dataset,
    Preprocessor,
    fit_preprocessor,
    kfold_indices,
    load_csv,
    majority_rating,
    previous_rating_baseline,
    random_split_indices,
    synthesize,
    temporal_split_indices,
)
from ..ensemble import EnsembleParams, fit_bagged, fit_random_forest
from ..errors import EmptyDataset, NoChanges, SingleClass
from ..evaluation import (
    BucketSummary,
    CapturedChanges,
    NotchDistribution,
    NotchStats,
    bucket_summary,
    captured_changes_detail,
    notch_distribution,
    stats,
)
from ..mlp import MLPParams, fit_mlp
from ..svm import Kernel, fit_ova, fit_ovo
from .config import METHODS, ExperimentConfig
from .persistence import save_model

logger = logging.getLogger(__name__)

METRIC_FILES = (
    "report_metrics.csv",
    "report_buckets.csv",
    "report_conditional.csv",
    "captured_changes.csv",
)

_TREE_GRID = (50, 100, 200)
_C_GRID = (0.1, 1.0, 10.0)
_GAMMA_SCALES = (0.1, 1.0, 10.0)


def derive_seed(master: int, *parts: int) -> int:
    return int(np.random.SeedSequence([int(master), *[int(p) for p in parts]]).generate_state(1)[0])


@dataclass
class Fold:
    fold: int
    train_index: np.ndarray
    test_index: np.ndarray
    validation_index: np.ndarray
    preprocessor: Preprocessor | None = None


@dataclass
class FoldResult:
    method: str
    fold: int
    stats: NotchStats
    buckets: BucketSummary
    changes: CapturedChanges | None
    distribution: NotchDistribution


@dataclass
class EvalReport:
    """Per-method, per-fold notch metrics plus the data needed to audit them.

    Aggregates are unweighted means of the per-fold values.
    """

    config: ExperimentConfig
    dataset: Dataset
    folds: list[Fold]
    results: list[FoldResult]
    predictions: dict[tuple[str, int], np.ndarray]
    models: dict[tuple[str, int], object] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def methods(self) -> list[str]:
        return [m for m in METHODS if any(r.method == m for r in self.results)]

    def to_dict(self) -> dict:
        return {
            "split_mode": self.config.split_mode,
            "seed": self.config.seed,
            "methods": self.methods(),
            "sector": self.dataset.sector,
            "scale": list(self.dataset.scale.labels),
            "n_observations": len(self.dataset),
            "results": [
                {
                    "method": r.method,
                    "fold": r.fold,
                    "stats": asdict(r.stats),
                    "buckets": asdict(r.buckets),
                    "changes": asdict(r.changes) if r.changes else None,
                    "distribution": {str(k): v for k, v in sorted(r.distribution.counts.items())},
                }
                for r in self.results
            ],
        }


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------

def load_data(cfg: ExperimentConfig) -> Dataset:
    if cfg.source == "csv":
        return load_csv(cfg.csv_path, cfg.scale, sector=cfg.sector or Path(cfg.csv_path).stem)
    spec = replace(cfg.synth, sector=cfg.sector) if cfg.sector else cfg.synth
    return synthesize(spec, seed=cfg.seed, scale=cfg.scale)


def _carve_validation(train: np.ndarray, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    n_val = int(math.floor(len(train) * fraction + 0.5))
    if n_val == 0 or n_val >= len(train):
        return train, np.zeros(0, dtype=np.int64)
    perm = np.random.default_rng(seed).permutation(len(train))
    return np.sort(train[perm[n_val:]]), np.sort(train[perm[:n_val]])


def make_folds(cfg: ExperimentConfig, d: Dataset) -> list[Fold]:
    n = len(d)
    if n == 0:
        raise EmptyDataset("dataset has no observations")
    split_seed = derive_seed(cfg.seed, 1000)
    if cfg.split_mode == "random":
        train, val, test = random_split_indices(n, cfg.fractions, split_seed)
        return [Fold(0, train, test, val)]
    if cfg.split_mode == "temporal":
        train, test = temporal_split_indices(d, cfg.cutoff)
        if len(train) == 0 or len(test) == 0:
            raise EmptyDataset(f"temporal cutoff {cfg.cutoff} leaves an empty train or test side")
        return [Fold(0, train, test, np.zeros(0, dtype=np.int64))]
    return [Fold(k, tr, te, np.zeros(0, dtype=np.int64)) for k, (tr, te) in enumerate(kfold_indices(n, cfg.k, split_seed))]


def _kernel(cfg: ExperimentConfig, p: int, gamma: float | None = None) -> Kernel:
    s = cfg.svm
    g = gamma if gamma is not None else (s.gamma if s.gamma is not None else 1.0 / p)
    return Kernel(s.kernel, gamma=g, coef0=s.coef0, degree=s.degree)


def _ensemble_params(tc, n_rows: int, seed: int, n_jobs: int, n_trees: int | None = None) -> EnsembleParams:
    size = max(1, int(math.floor(tc.sample_fraction * n_rows + 0.5)))
    return EnsembleParams(
        n_trees=n_trees or tc.n_trees,
        sample_size=min(size, n_rows),
        mtry=tc.mtry,
        min_samples_split=tc.min_samples_split,
        max_depth=tc.max_depth,
        seed=seed,
        n_jobs=n_jobs,
    )


def _accuracy(model, X, y) -> float:
    return float(np.mean(model.predict(X) == y)) if len(y) else 0.0


def fit_method(method: str, cfg: ExperimentConfig, Xtr, ytr, Xval, yval, seed: int):
    """Train one method. ``Xval`` drives MLP early stopping and the optional grids."""
    p = Xtr.shape[1]
    can_tune = cfg.tune and len(yval) > 0
    if method in ("bdt", "rf"):
        tc = cfg.bdt if method == "bdt" else cfg.rf
        fit = fit_bagged if method == "bdt" else fit_random_forest
        if can_tune:
            scored = []
            for B in _TREE_GRID:
                model = fit(Xtr, ytr, _ensemble_params(tc, len(ytr), seed, cfg.n_jobs, B))
                scored.append((_accuracy(model, Xval, yval), -B, model))
            best = max(scored, key=lambda s: (s[0], s[1]))
            logger.info("%s: validation picked n_trees=%d", method, -best[1])
            return best[2]
        return fit(Xtr, ytr, _ensemble_params(tc, len(ytr), seed, cfg.n_jobs))
    if method == "mlp":
        mc = cfg.mlp
        params = MLPParams(hidden=mc.hidden, learning_rate=mc.learning_rate, epochs=mc.epochs,
                           patience=mc.patience, seed=seed)
        return fit_mlp(Xtr, ytr, Xval, yval, params)
    if method in ("svm_ovo", "svm_ova"):
        fit = fit_ovo if method == "svm_ovo" else fit_ova
        s = cfg.svm
        if can_tune:
            best = None
            for C in _C_GRID:
                for gs in _GAMMA_SCALES:
                    model = fit(Xtr, ytr, C, _kernel(cfg, p, gs / p), s.tol, s.max_passes, cfg.n_jobs)
                    acc = _accuracy(model, Xval, yval)
                    if best is None or acc > best[0]:
                        best = (acc, model)
            return best[1]
        return fit(Xtr, ytr, s.C, _kernel(cfg, p), s.tol, s.max_passes, cfg.n_jobs)
    raise ValueError(f"not a trainable method: {method}")


def _evaluate(method: str, fold: int, pred: np.ndarray, test: Dataset) -> FoldResult:
    dist = notch_distribution(pred, test.y)
    try:
        changes = captured_changes_detail(pred, test.y, test.prev)
    except NoChanges:
        changes = None
    return FoldResult(method, fold, stats(dist), bucket_summary(dist), changes, dist)


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> EvalReport:
    """Run every configured method on every fold; nothing is written to disk."""
    started = datetime.now(timezone.utc)
    d = dataset if dataset is not None else load_data(cfg)
    folds = make_folds(cfg, d)
    results: list[FoldResult] = []
    predictions: dict[tuple[str, int], np.ndarray] = {}
    models: dict[tuple[str, int], object] = {}
    method_ids = {m: i for i, m in enumerate(METHODS)}

    for fold in folds:
        train_rows = fold.train_index
        fold.preprocessor = fit_preprocessor(d.subset(train_rows))
        Xall = fold.preprocessor.transform(d.X)
        test = d.subset(fold.test_index)

        fit_rows, val_rows = train_rows, fold.validation_index

        def train_one(method: str):
            seed = derive_seed(cfg.seed, method_ids[method], fold.fold)
            if method == "baseline":
                fallback = majority_rating(d.subset(train_rows))
                return method, None, previous_rating_baseline(test, fallback)
            rows, vrows = fit_rows, val_rows
            if not len(vrows) and (method == "mlp" or cfg.tune):
                # No validation part in this split mode: hold out a slice of the fold's training rows.
                rows, vrows = _carve_validation(train_rows, cfg.mlp.validation_fraction, derive_seed(seed, 7))
            try:
                model = fit_method(method, cfg, Xall[rows], d.y[rows], Xall[vrows], d.y[vrows], seed)
            except SingleClass:
                logger.warning("%s: training rows hold a single class; predicting it everywhere", method)
                only = int(d.y[rows][0])
                return method, None, np.full(len(test), only, dtype=np.int64)
            return method, model, model.predict(Xall[fold.test_index]).astype(np.int64)

        if cfg.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
                outputs = list(pool.map(train_one, cfg.methods))
        else:
            outputs = [train_one(m) for m in cfg.methods]

        for method, model, pred in outputs:
            predictions[(method, fold.fold)] = pred
            if model is not None:
                models[(method, fold.fold)] = model
            results.append(_evaluate(method, fold.fold, pred, test))
        logger.info("fold %d done", fold.fold)

    order = {m: i for i, m in enumerate(METHODS)}
    results.sort(key=lambda r: (order[r.method], r.fold))
    finished = datetime.now(timezone.utc)
    metadata = {
        "seed": cfg.seed,
        "config_hash": cfg.digest(),
        "started": started.isoformat(),
        "finished": finished.isoformat(),
        "n_observations": len(d),
        "n_folds": len(folds),
    }
    return EvalReport(cfg, d, folds, results, predictions, models, metadata)


# --------------------------------------------------------------------------
# Report files
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def aggregate_rows(report: dict) -> list[dict]:
    """Unweighted means over folds, one row per method."""
    out = []
    for method in report["methods"]:
        rows = [r for r in report["results"] if r["method"] == method]
        agg = {"method": method, "fold": "mean"}
        for key in ("accuracy", "dc", "adc", "sd", "cond_dc", "cond_sd", "cond_adc"):
            agg[key] = _mean(r["stats"][key] for r in rows)
        agg["n"] = sum(r["stats"]["n"] for r in rows)
        for key in ("zero", "one_abs", "gt_one_abs"):
            agg[key] = _mean(r["buckets"][key] for r in rows)
        agg["captured"] = _mean(r["changes"]["captured"] if r["changes"] else None for r in rows)
        agg["direction_captured"] = _mean(r["changes"]["direction_captured"] if r["changes"] else None for r in rows)
        agg["n_changes"] = sum(r["changes"]["n_changes"] if r["changes"] else 0 for r in rows)
        out.append(agg)
    return out


def _flat_rows(report: dict) -> list[dict]:
    rows = []
    for r in report["results"]:
        row = {"method": r["method"], "fold": r["fold"], **r["stats"], **r["buckets"]}
        ch = r["changes"]
        row["captured"] = ch["captured"] if ch else None
        row["direction_captured"] = ch["direction_captured"] if ch else None
        row["n_changes"] = ch["n_changes"] if ch else 0
        rows.append(row)
    return rows + aggregate_rows(report)


def _write(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_report_files(report: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = _flat_rows(report)
    written = []
    spec = {
        "report_metrics.csv": (["method", "fold", "n", "accuracy", "E", "sd", "E_abs"],
                               ["method", "fold", "n", "accuracy", "dc", "sd", "adc"]),
        "report_buckets.csv": (["method", "fold", "zero", "one_abs", "gt_one_abs"],
                               ["method", "fold", "zero", "one_abs", "gt_one_abs"]),
        "report_conditional.csv": (["method", "fold", "cond_E", "cond_sd", "cond_E_abs"],
                                   ["method", "fold", "cond_dc", "cond_sd", "cond_adc"]),
        "captured_changes.csv": (["method", "fold", "n_changes", "captured", "direction_captured"],
                                 ["method", "fold", "n_changes", "captured", "direction_captured"]),
    }
    for name, (header, keys) in spec.items():
        _write(out / name, header, [[row[k] for k in keys] for row in rows])
        written.append(out / name)
    for method in report["methods"]:
        counts: dict[int, int] = {}
        for r in report["results"]:
            if r["method"] == method:
                for k, v in r["distribution"].items():
                    counts[int(k)] = counts.get(int(k), 0) + v
        n = sum(counts.values())
        path = out / f"notch_hist_{method}.csv"
        _write(path, ["notch", "F"], [[i, counts[i] / n] for i in sorted(counts)])
        written.append(path)
    return written


def format_table(report: dict) -> str:
    """Human-readable summary of the aggregate rows."""
    cols = [("method", "method", 9), ("accuracy", "acc", 8), ("zero", "zero", 8), ("one_abs", "one", 8),
            ("gt_one_abs", ">one", 8), ("dc", "E", 8), ("sd", "sd", 8), ("adc", "E|.|", 8),
            ("cond_dc", "cE", 8), ("cond_sd", "csd", 8), ("cond_adc", "cE|.|", 8), ("captured", "capt", 8)]
    lines = [" ".join(h.rjust(w) for _, h, w in cols)]
    for agg in aggregate_rows(report):
        cells = []
        for key, _, w in cols:
            v = agg[key]
            cells.append((v if isinstance(v, str) else ("-" if v is None else f"{v:.4f}")).rjust(w))
        lines.append(" ".join(cells))
    return "\n".join(lines)


def write_run_outputs(report: EvalReport, out_dir: str | Path, svg: bool = True) -> list[Path]:
    """Metric CSVs, the JSON report, fold preprocessors, models, figures, metadata."""
    from .figures import emit_figures

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = report.to_dict()
    written = write_report_files(data, out)
    (out / "report.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    folds = [
        {
            "fold": f.fold,
            "n_train": int(len(f.train_index)),
            "n_validation": int(len(f.validation_index)),
            "n_test": int(len(f.test_index)),
            "preprocessor": f.preprocessor.to_dict() if f.preprocessor else None,
        }
        for f in report.folds
    ]
    (out / "fold_preprocessors.json").write_text(json.dumps(folds, indent=1) + "\n", encoding="utf-8")
    written += [out / "report.json", out / "fold_preprocessors.json"]

    if report.config.save_models and report.models:
        mdir = out / "models"
        mdir.mkdir(exist_ok=True)
        last = {}
        for (method, fold), model in report.models.items():
            last[method] = (fold, model)
        fold_pre = {f.fold: f.preprocessor for f in report.folds}
        for method, (fold, model) in last.items():
            path = mdir / f"{method}.nbm"
            save_model(path, model, fold_pre[fold], report.dataset.scale, report.dataset.feature_names, method)
            written.append(path)

    written += emit_figures(report, out, svg=svg)
    (out / "run_metadata.json").write_text(json.dumps(report.metadata, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    written.append(out / "run_metadata.json")
    return written


def run(cfg: ExperimentConfig, dataset: Dataset | None = None, out_dir: str | Path | None = None) -> EvalReport:
    report = run_experiment(cfg, dataset)
    write_run_outputs(report, out_dir or cfg.out_dir, svg=cfg.svg)
    return report
