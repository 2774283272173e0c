"""Quarterly company observations: loading, preprocessing, splitting, synthesis.

A :class:`Dataset` is stored column-wise (a float feature matrix with NaN for
missing values and integer rating indices) so that learners can consume it
directly; :attr:`Dataset.observations` materialises row objects on demand.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import (
    BadFractions,
    BadK,
    BadSpec,
    DimensionMismatch,
    DuplicateKey,
    EmptyDataset,
    NotFitted,
    ParseError,
    UnknownLabel,
)
from .rating_scale import Rating, RatingScale, default_sp_scale

logger = logging.getLogger(__name__)

SD_FLOOR = 1e-12

_PERIOD_RE = re.compile(r"^(\d{4})Q(\d)$")


class Period(NamedTuple):
    year: int
    quarter: int

    def __str__(self) -> str:
        return f"{self.year}Q{self.quarter}"

    def next(self) -> Period:
        if self.quarter == 4:
            return Period(self.year + 1, 1)
        return Period(self.year, self.quarter + 1)

    def previous(self) -> Period:
        if self.quarter == 1:
            return Period(self.year - 1, 4)
        return Period(self.year, self.quarter - 1)


def parse_period(token: str) -> Period:
    m = _PERIOD_RE.match(token.strip())
    if not m:
        raise ValueError(f"bad period token {token!r}, expected YYYYQn")
    year, quarter = int(m.group(1)), int(m.group(2))
    if not 1 <= quarter <= 4:
        raise ValueError(f"quarter out of range in {token!r}")
    return Period(year, quarter)


@dataclass(frozen=True)
class Observation:
    company_id: str
    period: Period
    features: tuple[float, ...]
    rating: Rating
    prev_rating: Rating | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-wise collection of company-quarter observations.

    ``y`` holds rating indices on ``scale``; ``prev`` holds the previous
    quarter's rating index or 0 when unknown. ``X`` uses NaN for missing.
    """

    company_ids: tuple[str, ...]
    periods: tuple[Period, ...]
    X: np.ndarray
    y: np.ndarray
    prev: np.ndarray
    feature_names: tuple[str, ...]
    scale: RatingScale
    sector: str = ""

    def __post_init__(self):
        n = len(self.company_ids)
        X = np.asarray(self.X, dtype=float).reshape(n, len(self.feature_names))
        y = np.asarray(self.y, dtype=np.int64).reshape(n)
        prev = np.asarray(self.prev, dtype=np.int64).reshape(n)
        if len(self.periods) != n:
            raise DimensionMismatch("periods and company_ids differ in length")
        if n and (y.min() < 1 or y.max() > self.scale.size):
            raise UnknownLabel("rating index outside the scale")
        for arr in (X, y, prev):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "prev", prev)
        object.__setattr__(self, "company_ids", tuple(self.company_ids))
        object.__setattr__(self, "periods", tuple(Period(*p) for p in self.periods))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return len(self.company_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def keys(self) -> list[tuple[str, Period]]:
        return list(zip(self.company_ids, self.periods))

    def observation(self, i: int) -> Observation:
        prev = int(self.prev[i])
        return Observation(
            company_id=self.company_ids[i],
            period=self.periods[i],
            features=tuple(float(v) for v in self.X[i]),
            rating=self.scale.rating(int(self.y[i])),
            prev_rating=self.scale.rating(prev) if prev else None,
        )

    @property
    def observations(self) -> list[Observation]:
        return [self.observation(i) for i in range(len(self))]

    def __iter__(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield self.observation(i)

    def subset(self, indices: Sequence[int] | np.ndarray) -> Dataset:
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            company_ids=tuple(self.company_ids[i] for i in idx),
            periods=tuple(self.periods[i] for i in idx),
            X=self.X[idx],
            y=self.y[idx],
            prev=self.prev[idx],
            feature_names=self.feature_names,
            scale=self.scale,
            sector=self.sector,
        )

    def with_features(self, X: np.ndarray) -> Dataset:
        return Dataset(
            company_ids=self.company_ids,
            periods=self.periods,
            X=X,
            y=self.y,
            prev=self.prev,
            feature_names=self.feature_names,
            scale=self.scale,
            sector=self.sector,
        )


def from_observations(
    observations: Sequence[Observation],
    feature_names: Sequence[str],
    scale: RatingScale,
    sector: str = "",
) -> Dataset:
    p = len(feature_names)
    X = np.empty((len(observations), p))
    for i, ob in enumerate(observations):
        if len(ob.features) != p:
            raise DimensionMismatch(f"observation {i} has {len(ob.features)} features, expected {p}")
        X[i] = ob.features
    ds = Dataset(
        company_ids=tuple(ob.company_id for ob in observations),
        periods=tuple(ob.period for ob in observations),
        X=X,
        y=np.array([ob.rating.index for ob in observations], dtype=np.int64),
        prev=np.array([ob.prev_rating.index if ob.prev_rating else 0 for ob in observations], dtype=np.int64),
        feature_names=tuple(feature_names),
        scale=scale,
        sector=sector,
    )
    _check_unique_keys(ds.keys())
    return ds


def _check_unique_keys(keys: Sequence[tuple[str, Period]]) -> None:
    seen: dict[tuple[str, Period], int] = {}
    for i, key in enumerate(keys):
        if key in seen:
            raise DuplicateKey(f"duplicate (company_id, period) {key[0]!r} {key[1]}", row=i + 2)
        seen[key] = i


def join_previous(company_ids: Sequence[str], periods: Sequence[Period], y: np.ndarray) -> np.ndarray:
    """Previous-quarter rating index per row (0 when that quarter is absent)."""
    lookup = {(c, p): int(r) for c, p, r in zip(company_ids, periods, y)}
    return np.array([lookup.get((c, p.previous()), 0) for c, p in zip(company_ids, periods)], dtype=np.int64)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def load_csv(path: str | Path, scale: RatingScale | None = None, sector: str = "") -> Dataset:
    """Read ``company_id,period,rating,<features...>`` rows.

    Empty feature fields become NaN. Row numbers in errors are 1-based file
    lines (the header is line 1).
    """
    scale = scale or default_sp_scale()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("missing header row", row=1) from None
        header = [h.strip() for h in header]
        if header[:3] != ["company_id", "period", "rating"]:
            raise ParseError("header must start with company_id,period,rating", row=1)
        feature_names = tuple(header[3:])
        p = len(feature_names)

        companies: list[str] = []
        periods: list[Period] = []
        ratings: list[int] = []
        rows: list[list[float]] = []
        seen: set[tuple[str, Period]] = set()
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != p + 3:
                raise ParseError(f"expected {p + 3} fields, got {len(rec)}", row=lineno)
            company = rec[0].strip()
            if not company:
                raise ParseError("empty company_id", row=lineno)
            try:
                period = parse_period(rec[1])
            except ValueError as exc:
                raise ParseError(str(exc), row=lineno) from None
            try:
                rating = scale.index(rec[2].strip())
            except UnknownLabel:
                raise ParseError(f"unknown rating label {rec[2].strip()!r}", row=lineno) from None
            values = []
            for name, raw in zip(feature_names, rec[3:]):
                raw = raw.strip()
                if not raw:
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(raw))
                except ValueError:
                    raise ParseError(f"non-numeric value {raw!r} in column {name!r}", row=lineno) from None
            key = (company, period)
            if key in seen:
                raise DuplicateKey(f"duplicate (company_id, period) {company!r} {period}", row=lineno)
            seen.add(key)
            companies.append(company)
            periods.append(period)
            ratings.append(rating)
            rows.append(values)

    y = np.array(ratings, dtype=np.int64)
    return Dataset(
        company_ids=tuple(companies),
        periods=tuple(periods),
        X=np.array(rows, dtype=float).reshape(len(rows), p),
        y=y,
        prev=join_previous(companies, periods, y),
        feature_names=feature_names,
        scale=scale,
        sector=sector,
    )


def write_csv(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["company_id", "period", "rating", *dataset.feature_names])
        for i in range(len(dataset)):
            feats = ["" if math.isnan(v) else repr(float(v)) for v in dataset.X[i]]
            w.writerow([dataset.company_ids[i], str(dataset.periods[i]), dataset.scale.label(int(dataset.y[i])), *feats])


# --------------------------------------------------------------------------
# Preprocessing
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Preprocessor:
    """Median imputation followed by z-scoring, fitted on training rows."""

    impute: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    all_missing: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    fitted: bool = True

    @property
    def n_features(self) -> int:
        return len(self.impute)

    def transform(self, X: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise NotFitted("preprocessor has not been fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        filled = np.where(np.isnan(X), self.impute, X)
        return (filled - self.mean) / self.sd

    def to_dict(self) -> dict:
        return {
            "impute": self.impute.tolist(),
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "all_missing": self.all_missing.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Preprocessor:
        return cls(
            impute=np.array(d["impute"], dtype=float),
            mean=np.array(d["mean"], dtype=float),
            sd=np.array(d["sd"], dtype=float),
            all_missing=np.array(d.get("all_missing", []), dtype=bool),
        )


def fit_preprocessor(train: Dataset) -> Preprocessor:
    if len(train) == 0:
        raise EmptyDataset("cannot fit a preprocessor on an empty dataset")
    X = train.X
    missing = np.isnan(X)
    all_missing = missing.all(axis=0)
    impute = np.zeros(X.shape[1])
    for j in np.flatnonzero(~all_missing):
        impute[j] = float(np.median(X[~missing[:, j], j]))
    for j in np.flatnonzero(all_missing):
        logger.warning("feature %r is missing in every training row; imputing 0", train.feature_names[j])
    filled = np.where(missing, impute, X)
    mean = filled.mean(axis=0)
    sd = np.maximum(filled.std(axis=0), SD_FLOOR)
    return Preprocessor(impute=impute, mean=mean, sd=sd, all_missing=all_missing)


def apply_preprocessor(p: Preprocessor, d: Dataset) -> Dataset:
    if not p.fitted:
        raise NotFitted("preprocessor has not been fitted")
    if d.n_features != p.n_features:
        raise DimensionMismatch(f"dataset has {d.n_features} features, preprocessor {p.n_features}")
    return d.with_features(p.transform(d.X))


# --------------------------------------------------------------------------
# Splits
# --------------------------------------------------------------------------

def split_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    """Part sizes for ``n`` rows: the held-out parts get ``round(n * f)`` rows
    and the first (training) part absorbs the remainder.

    6029 rows at (0.7, 0.1, 0.2) give (4220, 603, 1206).
    """
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions {tuple(fractions)} must be non-negative and sum to 1")
    rest = [math.floor(n * f + 0.5) for f in fractions[1:]]
    if sum(rest) > n:
        rest = [math.floor(n * f) for f in fractions[1:]]
    return [n - sum(rest), *rest]


def random_split(
    d: Dataset, fractions: Sequence[float] = (0.70, 0.10, 0.20), seed: int = 0
) -> tuple[Dataset, ...]:
    parts = [d.subset(idx) for idx in random_split_indices(len(d), fractions, seed)]
    test = parts[-1]
    missing = sorted(set(d.y.tolist()) - set(test.y.tolist()))
    if missing and len(test):
        logger.warning("classes absent from the test part: %s", ", ".join(d.scale.label(i) for i in missing))
    return tuple(parts)


def random_split_indices(n: int, fractions: Sequence[float], seed: int) -> list[np.ndarray]:
    sizes = split_sizes(n, fractions)
    order = np.random.default_rng(seed).permutation(n)
    out, start = [], 0
    for size in sizes:
        out.append(np.sort(order[start:start + size]))
        start += size
    return out


def temporal_split_indices(d: Dataset, cutoff: Period) -> tuple[np.ndarray, np.ndarray]:
    cutoff = Period(*cutoff)
    is_train = np.array([p <= cutoff for p in d.periods], dtype=bool)
    train, test = np.flatnonzero(is_train), np.flatnonzero(~is_train)
    if len(train) == 0 or len(test) == 0:
        logger.warning("temporal split at %s leaves an empty %s side", cutoff, "train" if len(train) == 0 else "test")
    return train, test


def temporal_split(d: Dataset, cutoff: Period | str) -> tuple[Dataset, Dataset]:
    if isinstance(cutoff, str):
        cutoff = parse_period(cutoff)
    train, test = temporal_split_indices(d, cutoff)
    return d.subset(train), d.subset(test)


def kfold_indices(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if not 2 <= k <= n:
        raise BadK(f"k={k} must satisfy 2 <= k <= {n}")
    order = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds, start = [], 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        test = np.sort(order[start:start + size])
        train = np.sort(np.concatenate([order[:start], order[start + size:]]))
        folds.append((train, test))
        start += size
    return folds


def kfold(d: Dataset, k: int, seed: int = 0) -> list[tuple[Dataset, Dataset]]:
    return [(d.subset(tr), d.subset(te)) for tr, te in kfold_indices(len(d), k, seed)]


# --------------------------------------------------------------------------
# Naive baseline
# --------------------------------------------------------------------------

def majority_rating(d: Dataset) -> int:
    """Most frequent rating index; ties go to the better rating."""
    if len(d) == 0:
        raise EmptyDataset("no ratings to take a majority over")
    counts = np.bincount(d.y, minlength=d.scale.size + 1)
    return int(np.argmax(counts))


def previous_rating_baseline(test: Dataset, fallback: int | Rating) -> np.ndarray:
    """Predict last quarter's rating; rows without one get ``fallback``."""
    fb = fallback.index if isinstance(fallback, Rating) else int(fallback)
    return np.where(test.prev > 0, test.prev, fb).astype(np.int64)


# --------------------------------------------------------------------------
# Synthetic data
# --------------------------------------------------------------------------

# Company counts per rating class in December 2018, AAA..CC.
SECTOR_MARGINALS: dict[str, tuple[int, ...]] = {
    "financial": (1, 3, 12, 24, 30, 34, 36, 33, 18, 12, 6, 4, 2, 1, 1, 1, 1, 1, 0, 1),
    "energy": (1, 1, 1, 4, 4, 7, 11, 15, 18, 16, 10, 9, 5, 3, 1, 0, 0, 0, 0, 0),
    "healthcare": (6, 1, 5, 5, 10, 16, 18, 19, 20, 17, 14, 13, 6, 3, 2, 0, 0, 0, 0, 0),
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic company-quarter generator.

    ``marginals`` are non-negative weights over the scale (best first) used
    to draw each company's starting rating. Features are Gaussian clusters
    whose centres move ``separation`` unit-variance standard deviations per
    notch along a common quality direction.
    """

    marginals: tuple[float, ...] = SECTOR_MARGINALS["healthcare"]
    n_companies: int = 50
    n_quarters: int = 40
    persistence: float = 0.9
    n_features: int = 20
    separation: float = 3.0
    missing_rate: float = 0.0
    start: Period = Period(2009, 1)
    sector: str = "synthetic"


def synthesize(spec: SyntheticSpec, seed: int = 0, scale: RatingScale | None = None) -> Dataset:
    """Generate rated company histories.

    Each company's rating follows a Markov chain that keeps its rating with
    probability ``persistence`` and otherwise moves one notch up or down with
    equal probability, clamped at the scale ends. The chain is started one
    quarter before ``spec.start`` so every emitted row carries a previous
    rating.
    """
    scale = scale or default_sp_scale()
    M = scale.size
    weights = np.asarray(spec.marginals, dtype=float)
    if len(weights) != M:
        raise BadSpec(f"marginals have {len(weights)} entries, scale has {M}")
    if (weights < 0).any() or weights.sum() <= 0:
        raise BadSpec("marginal counts must be non-negative with a positive total")
    if not 0.0 <= spec.persistence <= 1.0:
        raise BadSpec("persistence must lie in [0, 1]")
    if spec.n_companies < 1 or spec.n_quarters < 1 or spec.n_features < 1:
        raise BadSpec("companies, quarters and features must be positive")
    if not 0.0 <= spec.missing_rate < 1.0:
        raise BadSpec("missing_rate must lie in [0, 1)")

    rng = np.random.default_rng(seed)
    probs = weights / weights.sum()
    p = spec.n_features

    direction = rng.normal(size=p)
    direction /= np.linalg.norm(direction)
    # Class-specific offsets break collinearity without disturbing the ordering.
    offsets = rng.normal(scale=0.5 / math.sqrt(p), size=(M, p))
    centres = spec.separation * (np.arange(M)[:, None] * direction + offsets)

    n = spec.n_companies * spec.n_quarters
    companies: list[str] = []
    periods: list[Period] = []
    y = np.empty(n, dtype=np.int64)
    prev = np.empty(n, dtype=np.int64)
    width = len(str(spec.n_companies))
    row = 0
    for c in range(spec.n_companies):
        state = int(rng.choice(M, p=probs)) + 1
        period = Period(*spec.start)
        cid = f"C{c + 1:0{width}d}"
        for _ in range(spec.n_quarters):
            before = state
            if rng.random() >= spec.persistence:
                step = 1 if rng.random() < 0.5 else -1
                state = min(max(state + step, 1), M)
            companies.append(cid)
            periods.append(period)
            y[row], prev[row] = state, before
            period = period.next()
            row += 1

    X = centres[y - 1] + rng.normal(size=(n, p))
    if spec.missing_rate > 0:
        X[rng.random(size=X.shape) < spec.missing_rate] = np.nan
    return Dataset(
        company_ids=tuple(companies),
        periods=tuple(periods),
        X=X,
        y=y,
        prev=prev,
        feature_names=tuple(f"f{j + 1}" for j in range(p)),
        scale=scale,
        sector=spec.sector,
    )
