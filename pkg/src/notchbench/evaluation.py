"""Notch-distance statistics for comparing predicted and true ratings.

The notch distance of one prediction is ``Y = predicted index - true index``.
Its empirical distribution ``F`` gives the accuracy ``F(0)``, the mean
``E[Y]`` (dissimilarity coefficient), the mean absolute distance ``E[|Y|]``,
the standard deviation, and the same moments restricted to ``Y != 0``.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyDistribution, EmptyJoin, LengthMismatch, NoChanges, ScaleMismatch
from .rating_scale import Rating


def _indices(seq) -> tuple[np.ndarray, object]:
    """Rating indices of ``seq`` plus its scale (``None`` for raw integers)."""
    items = list(seq)
    if items and isinstance(items[0], Rating):
        scale = items[0].scale
        if any(r.scale != scale for r in items):
            raise ScaleMismatch("ratings come from more than one scale")
        return np.array([r.index for r in items], dtype=np.int64), scale
    return np.asarray(items, dtype=np.int64).reshape(-1), None


@dataclass(frozen=True)
class NotchDistribution:
    counts: dict[int, int]
    n: int

    @property
    def frequencies(self) -> dict[int, float]:
        return {i: c / self.n for i, c in sorted(self.counts.items())}

    def F(self, i: int) -> float:
        return self.counts.get(i, 0) / self.n

    def support(self) -> list[int]:
        return sorted(self.counts)


@dataclass(frozen=True)
class NotchStats:
    accuracy: float
    dc: float
    adc: float
    sd: float
    cond_dc: float | None = None
    cond_sd: float | None = None
    cond_adc: float | None = None
    n: int = 0


@dataclass(frozen=True)
class BucketSummary:
    zero: float
    one_abs: float
    gt_one_abs: float


def notch_distribution(preds, truths) -> NotchDistribution:
    p, ps = _indices(preds)
    t, ts = _indices(truths)
    if len(p) != len(t):
        raise LengthMismatch(f"{len(p)} predictions vs {len(t)} truths")
    if len(p) == 0:
        raise EmptyDistribution("no predictions to compare")
    if ps is not None and ts is not None and ps != ts:
        raise ScaleMismatch("predictions and truths use different scales")
    diffs, counts = np.unique(p - t, return_counts=True)
    return NotchDistribution({int(i): int(c) for i, c in zip(diffs, counts)}, len(p))


def stats(d: NotchDistribution) -> NotchStats:
    if d.n <= 0:
        raise EmptyDistribution("distribution has no observations")
    i = np.array(sorted(d.counts), dtype=float)
    F = np.array([d.counts[int(k)] for k in i], dtype=float) / d.n
    dc = float(i @ F)
    adc = float(np.abs(i) @ F)
    sd = math.sqrt(float(((i - dc) ** 2) @ F))
    wrong = i != 0
    mass = float(F[wrong].sum())
    if not wrong.any():
        return NotchStats(accuracy=d.F(0), dc=dc, adc=adc, sd=sd, n=d.n)
    Fc = F[wrong] / mass
    ic = i[wrong]
    cond_dc = float(ic @ Fc)
    return NotchStats(
        accuracy=d.F(0),
        dc=dc,
        adc=adc,
        sd=sd,
        cond_dc=cond_dc,
        cond_sd=math.sqrt(float(((ic - cond_dc) ** 2) @ Fc)),
        cond_adc=float(np.abs(ic) @ Fc),
        n=d.n,
    )


def bucket_summary(d: NotchDistribution) -> BucketSummary:
    if d.n <= 0:
        raise EmptyDistribution("distribution has no observations")
    zero = d.counts.get(0, 0)
    one = d.counts.get(1, 0) + d.counts.get(-1, 0)
    return BucketSummary(zero / d.n, one / d.n, (d.n - zero - one) / d.n)


def bucket_summary_from_frequencies(freqs: dict[int, float]) -> BucketSummary:
    """Buckets of a distribution given directly as ``{notch: F(notch)}``."""
    zero = freqs.get(0, 0.0)
    one = freqs.get(1, 0.0) + freqs.get(-1, 0.0)
    return BucketSummary(zero, one, sum(freqs.values()) - zero - one)


@dataclass(frozen=True)
class CapturedChanges:
    captured: float
    direction_captured: float
    n_changes: int


def captured_changes_detail(preds, truths, prev_ratings) -> CapturedChanges:
    """Rate of exact hits and of same-direction moves on quarters whose true
    rating differs from the previous quarter's. Missing previous ratings
    (``None`` or 0) are ignored."""
    p, _ = _indices(preds)
    t, _ = _indices(truths)
    prev_items = list(prev_ratings)
    q = np.array([0 if r is None else (r.index if isinstance(r, Rating) else int(r)) for r in prev_items], dtype=np.int64)
    if not len(p) == len(t) == len(q):
        raise LengthMismatch("preds, truths and previous ratings differ in length")
    changed = (q > 0) & (t != q)
    if not changed.any():
        raise NoChanges("no observation has a rating change")
    pc, tc, qc = p[changed], t[changed], q[changed]
    return CapturedChanges(
        captured=float(np.mean(pc == tc)),
        direction_captured=float(np.mean(np.sign(pc - qc) == np.sign(tc - qc))),
        n_changes=int(changed.sum()),
    )


def captured_changes(preds, truths, prev_ratings) -> float:
    return captured_changes_detail(preds, truths, prev_ratings).captured


@dataclass(frozen=True)
class AgencyComparison:
    stats: NotchStats
    n_joined: int


def agency_comparison(stream_a, stream_b) -> AgencyComparison:
    """Join two rated streams on (company_id, period) and treat ``stream_a``
    as the prediction and ``stream_b`` as the truth.

    Streams are :class:`~notchbench.dataset.Dataset` objects or iterables of
    ``(company_id, period, rating_index)`` triples.
    """
    a, sa = _keyed(stream_a)
    b, sb = _keyed(stream_b)
    if sa is not None and sb is not None and sa != sb:
        raise ScaleMismatch("agency streams must share one rating scale")
    keys = [k for k in a if k in b]
    if not keys:
        raise EmptyJoin("the two streams share no (company_id, period) keys")
    d = notch_distribution([a[k] for k in keys], [b[k] for k in keys])
    return AgencyComparison(stats(d), len(keys))


def _keyed(stream):
    if hasattr(stream, "company_ids") and hasattr(stream, "y"):
        keys = zip(stream.company_ids, stream.periods)
        return {k: int(r) for k, r in zip(keys, stream.y)}, stream.scale
    out = {}
    for cid, period, rating in stream:
        out[(cid, period)] = rating.index if isinstance(rating, Rating) else int(rating)
    return out, None


def write_histogram(d: NotchDistribution, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["notch", "F"])
        for i in d.support():
            w.writerow([i, repr(d.F(i))])


def pooled(distributions: Sequence[NotchDistribution]) -> NotchDistribution:
    total: Counter = Counter()
    for d in distributions:
        total.update(d.counts)
    return NotchDistribution(dict(total), sum(d.n for d in distributions))
