"""Experiment configuration in flat ``section.key = value`` text.

Example::

    data.source = synthetic
    synth.persistence = 0.9
    split.mode = kfold
    split.k = 10
    methods = bdt, rf, baseline
    rf.n_trees = 100
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..dataset import SECTOR_MARGINALS, Period, SyntheticSpec, parse_period
from ..errors import ConfigError
from ..rating_scale import RatingScale, default_sp_scale, make_scale

METHODS = ("bdt", "rf", "mlp", "svm_ovo", "svm_ova", "baseline")
SPLIT_MODES = ("random", "temporal", "kfold")


@dataclass(frozen=True)
class TreeConfig:
    n_trees: int = 100
    sample_fraction: float = 1.0
    mtry: int | None = None
    min_samples_split: int = 2
    max_depth: int | None = None


@dataclass(frozen=True)
class MLPConfig:
    hidden: int = 32
    learning_rate: float = 0.1
    epochs: int = 500
    patience: int = 25
    validation_fraction: float = 0.125


@dataclass(frozen=True)
class SVMConfig:
    C: float = 1.0
    kernel: str = "rbf"
    gamma: float | None = None      # None means 1 / p
    coef0: float = 0.0
    degree: int = 3
    tol: float = 1e-3
    max_passes: int = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    source: str = "synthetic"
    csv_path: str | None = None
    sector: str = ""
    scale: RatingScale = field(default_factory=default_sp_scale)
    synth: SyntheticSpec = field(default_factory=SyntheticSpec)
    split_mode: str = "random"
    fractions: tuple[float, float, float] = (0.70, 0.10, 0.20)
    cutoff: Period | None = None
    k: int = 10
    methods: tuple[str, ...] = ("bdt", "rf", "mlp", "svm_ovo", "svm_ova", "baseline")
    bdt: TreeConfig = field(default_factory=TreeConfig)
    rf: TreeConfig = field(default_factory=TreeConfig)
    mlp: MLPConfig = field(default_factory=MLPConfig)
    svm: SVMConfig = field(default_factory=SVMConfig)
    tune: bool = False
    seed: int = 0
    out_dir: str = "out"
    svg: bool = True
    save_models: bool = True
    n_jobs: int = 1
    timeline_companies: tuple[str, ...] = ()
    raw: tuple[tuple[str, str], ...] = ()

    def validate(self) -> None:
        if not self.methods:
            raise ConfigError("select at least one method")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods: {', '.join(bad)}")
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be synthetic or csv, not {self.source!r}")
        if self.source == "csv" and not self.csv_path:
            raise ConfigError("data.path is required when data.source = csv")
        if self.split_mode not in SPLIT_MODES:
            raise ConfigError(f"split.mode must be one of {', '.join(SPLIT_MODES)}")
        if self.split_mode == "temporal" and self.cutoff is None:
            raise ConfigError("split.cutoff is required for temporal splits")
        if self.split_mode == "kfold" and self.k < 2:
            raise ConfigError("split.k must be at least 2")
        if self.split_mode == "random" and (len(self.fractions) != 3 or abs(sum(self.fractions) - 1) > 1e-9):
            raise ConfigError("split.fractions must be three numbers summing to 1")
        if not 0 <= self.mlp.validation_fraction < 1:
            raise ConfigError("mlp.validation_fraction must lie in [0, 1)")
        for name in ("bdt", "rf"):
            tc = getattr(self, name)
            if tc.n_trees < 1:
                raise ConfigError(f"{name}.n_trees must be at least 1")
            if not 0 < tc.sample_fraction <= 1:
                raise ConfigError(f"{name}.sample_fraction must lie in (0, 1]")
        if self.rf.mtry is not None and self.rf.mtry < 1:
            raise ConfigError("rf.mtry must be at least 1")

    def digest(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in sorted(self.raw))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_int(v: str) -> int | None:
    return None if v.strip().lower() in ("", "none", "inf") else int(v)


def _opt_float(v: str) -> float | None:
    return None if v.strip().lower() in ("", "none", "auto") else float(v)


def _list(v: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in v.split(",") if s.strip())


def _marginals(v: str) -> tuple[float, ...]:
    if v.strip() in SECTOR_MARGINALS:
        return tuple(float(c) for c in SECTOR_MARGINALS[v.strip()])
    if v.strip() == "uniform":
        return ()
    return tuple(float(x) for x in _list(v))


def parse_lines(text: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


_SECTION_TYPES = {"bdt": TreeConfig, "rf": TreeConfig, "mlp": MLPConfig, "svm": SVMConfig}


def build_config(pairs: list[tuple[str, str]]) -> ExperimentConfig:
    top: dict = {}
    sections: dict[str, dict] = {name: {} for name in _SECTION_TYPES}
    synth: dict = {}
    scale_labels = None
    scale_name = "custom"
    marginals = None
    try:
        for key, value in pairs:
            if key == "data.source":
                top["source"] = value
            elif key == "data.path":
                top["csv_path"] = value
            elif key == "data.sector":
                top["sector"] = value
            elif key == "scale.labels":
                scale_labels = _list(value)
            elif key == "scale.name":
                scale_name = value
            elif key == "split.mode":
                top["split_mode"] = value
            elif key == "split.fractions":
                top["fractions"] = tuple(float(x) for x in _list(value))
            elif key == "split.cutoff":
                top["cutoff"] = parse_period(value)
            elif key == "split.k":
                top["k"] = int(value)
            elif key == "methods":
                top["methods"] = _list(value)
            elif key == "tune":
                top["tune"] = _bool(value)
            elif key == "seed":
                top["seed"] = int(value)
            elif key in ("output.dir", "out"):
                top["out_dir"] = value
            elif key == "output.svg":
                top["svg"] = _bool(value)
            elif key == "output.save_models":
                top["save_models"] = _bool(value)
            elif key == "output.timeline_companies":
                top["timeline_companies"] = _list(value)
            elif key == "n_jobs":
                top["n_jobs"] = int(value)
            elif key.startswith("synth."):
                name = key[len("synth."):]
                if name == "marginals":
                    marginals = _marginals(value)
                elif name == "companies":
                    synth["n_companies"] = int(value)
                elif name == "quarters":
                    synth["n_quarters"] = int(value)
                elif name == "persistence":
                    synth["persistence"] = float(value)
                elif name == "n_features":
                    synth["n_features"] = int(value)
                elif name == "separation":
                    synth["separation"] = float(value)
                elif name == "missing_rate":
                    synth["missing_rate"] = float(value)
                elif name == "start":
                    synth["start"] = parse_period(value)
                else:
                    raise ConfigError(f"unknown key {key!r}")
            elif "." in key and key.split(".", 1)[0] in _SECTION_TYPES:
                section, name = key.split(".", 1)
                cls = _SECTION_TYPES[section]
                ftypes = {f.name: f.type for f in fields(cls)}
                if name not in ftypes:
                    raise ConfigError(f"unknown key {key!r}")
                ftype = str(ftypes[name])
                if ftype == "int":
                    sections[section][name] = int(value)
                elif ftype == "float":
                    sections[section][name] = float(value)
                elif ftype == "int | None":
                    sections[section][name] = _opt_int(value)
                elif ftype == "float | None":
                    sections[section][name] = _opt_float(value)
                else:
                    sections[section][name] = value
            else:
                raise ConfigError(f"unknown key {key!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None

    scale = make_scale(scale_labels, scale_name) if scale_labels else default_sp_scale()
    if marginals is not None:
        synth["marginals"] = marginals if marginals else tuple(1.0 for _ in range(scale.size))
    elif scale.size != len(SyntheticSpec().marginals):
        synth["marginals"] = tuple(1.0 for _ in range(scale.size))
    cfg = ExperimentConfig(
        **top,
        scale=scale,
        synth=SyntheticSpec(**synth),
        **{name: _SECTION_TYPES[name](**vals) for name, vals in sections.items()},
        raw=tuple(pairs),
    )
    cfg.validate()
    return cfg


def load_config(path: str | Path | None, overrides: list[tuple[str, str]] | None = None) -> ExperimentConfig:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(parse_lines(text) + list(overrides or []))
