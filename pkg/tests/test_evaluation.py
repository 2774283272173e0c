import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from notchbench import default_sp_scale
from notchbench.errors import EmptyDistribution, EmptyJoin, LengthMismatch, NoChanges, ScaleMismatch
from notchbench.evaluation import (
    agency_comparison,
    bucket_summary,
    bucket_summary_from_frequencies,
    captured_changes,
    captured_changes_detail,
    notch_distribution,
    pooled,
    stats,
    write_histogram,
)
from notchbench.rating_scale import make_scale

from oracles import brute_notch_stats

SP = default_sp_scale()


def test_two_thirds_exact_one_third_one_notch_worse():
    d = notch_distribution([3, 3, 4], [3, 3, 3])
    s = stats(d)
    assert s.accuracy == pytest.approx(2 / 3, abs=1e-12)
    assert s.dc == pytest.approx(1 / 3, abs=1e-12)
    assert s.adc == pytest.approx(1 / 3, abs=1e-12)
    assert s.sd == pytest.approx(math.sqrt(2) / 3, abs=1e-12)  # 0.4714
    assert s.cond_dc == 1.0 and s.cond_adc == 1.0 and s.cond_sd == 0.0


def test_perfect_predictions_have_no_conditional_stats():
    s = stats(notch_distribution([1, 5, 7], [1, 5, 7]))
    assert s.accuracy == 1.0 and s.dc == 0.0 and s.sd == 0.0
    assert s.cond_dc is None and s.cond_sd is None and s.cond_adc is None


def test_accepts_rating_objects():
    p = [SP.rating(2), SP.rating(4)]
    t = [SP.rating(3), SP.rating(4)]
    d = notch_distribution(p, t)
    assert d.counts == {-1: 1, 0: 1}


def test_errors():
    with pytest.raises(EmptyDistribution):
        notch_distribution([], [])
    with pytest.raises(LengthMismatch):
        notch_distribution([1, 2], [1])
    other = make_scale(["X", "Y"])
    with pytest.raises(ScaleMismatch):
        notch_distribution([SP.rating(1)], [other.rating(1)])


def test_bucket_table_row_sums_to_one():
    # A bucket row: 84.21% exact, 12.01% within one notch, 3.78% beyond.
    b = bucket_summary_from_frequencies({0: 0.8421, 1: 0.06, -1: 0.0601, 2: 0.02, -3: 0.0178})
    assert b.zero == pytest.approx(0.8421)
    assert b.one_abs == pytest.approx(0.1201)
    assert b.gt_one_abs == pytest.approx(0.0378)
    assert b.zero + b.one_abs + b.gt_one_abs == pytest.approx(1.0, abs=1e-12)


def test_captured_changes_hand_example():
    truths = [5, 6, 6, 4, 4]
    prev = [5, 5, 6, 6, 0]   # changes at rows 1 and 3; row 4 has no history
    preds = [5, 6, 7, 5, 1]  # hit row 1; row 3 moves the right way but misses
    det = captured_changes_detail(preds, truths, prev)
    assert det.n_changes == 2
    assert det.captured == 0.5
    assert det.direction_captured == 1.0
    assert captured_changes(prev, truths, prev) == 0.0


def test_captured_changes_without_changes():
    with pytest.raises(NoChanges):
        captured_changes([1, 2], [1, 2], [1, 2])


def test_agency_offset_stream():
    a = [("C1", "2018Q4", 3), ("C2", "2018Q4", 7), ("C3", "2018Q4", 10)]
    b = [("C1", "2018Q4", 2), ("C2", "2018Q4", 6), ("C3", "2018Q4", 9), ("C4", "2018Q4", 1)]
    cmp = agency_comparison(a, b)
    assert cmp.n_joined == 3
    assert cmp.stats.dc == 1.0 and cmp.stats.sd == 0.0
    with pytest.raises(EmptyJoin):
        agency_comparison(a, [("Z", "2018Q4", 1)])


def test_histogram_csv(tmp_path):
    d = notch_distribution([1, 2, 2, 5], [1, 1, 3, 3])
    write_histogram(d, tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "notch,F"
    assert lines[1:] == ["-1,0.25", "0,0.25", "1,0.25", "2,0.25"]


def test_pooled_adds_counts():
    a = notch_distribution([1, 2], [1, 1])
    b = notch_distribution([3], [1])
    p = pooled([a, b])
    assert p.n == 3 and p.counts == {0: 1, 1: 1, 2: 1}


pairs = st.lists(st.tuples(st.integers(1, 20), st.integers(1, 20)), min_size=1, max_size=200)


@given(pairs)
@settings(max_examples=200)
def test_matches_brute_force(ps):
    preds = [p for p, _ in ps]
    truths = [t for _, t in ps]
    d = notch_distribution(preds, truths)
    s = stats(d)
    o = brute_notch_stats(preds, truths)
    for i, f in o["F"].items():
        assert d.F(i) == pytest.approx(f, abs=1e-12)
    assert sum(d.frequencies.values()) == pytest.approx(1.0, abs=1e-12)
    for key in ("accuracy", "dc", "adc", "sd"):
        assert getattr(s, key) == pytest.approx(o[key], abs=1e-12)
    for key in ("cond_dc", "cond_sd", "cond_adc"):
        if o[key] is None:
            assert getattr(s, key) is None
        else:
            assert getattr(s, key) == pytest.approx(o[key], abs=1e-12)
    b = bucket_summary(d)
    assert (b.zero, b.one_abs, b.gt_one_abs) == pytest.approx((o["zero"], o["one_abs"], o["gt_one_abs"]), abs=1e-12)


@given(pairs)
def test_distribution_invariants(ps):
    preds = [p for p, _ in ps]
    truths = [t for _, t in ps]
    d = notch_distribution(preds, truths)
    s = stats(d)
    assert all(0 <= f <= 1 for f in d.frequencies.values())
    assert d.F(0) == pytest.approx(np.mean(np.array(preds) == np.array(truths)), abs=1e-12)
    assert abs(s.dc) <= s.adc + 1e-12
    assert s.adc ** 2 <= s.dc ** 2 + s.sd ** 2 + 1e-12
    assert s.sd >= 0
    if s.cond_adc is not None:
        assert s.cond_adc >= 1.0
        assert s.adc == pytest.approx((1 - s.accuracy) * s.cond_adc, abs=1e-12)
        assert s.dc == pytest.approx((1 - s.accuracy) * s.cond_dc, abs=1e-12)


@given(pairs)
def test_swapping_flips_sign(ps):
    preds = [p for p, _ in ps]
    truths = [t for _, t in ps]
    a = stats(notch_distribution(preds, truths))
    b = stats(notch_distribution(truths, preds))
    assert b.dc == pytest.approx(-a.dc, abs=1e-12)
    assert b.adc == pytest.approx(a.adc, abs=1e-12)
    assert b.sd == pytest.approx(a.sd, abs=1e-12)


@given(pairs, st.integers(-3, 3))
def test_shifting_both_leaves_stats_unchanged(ps, k):
    preds = [p for p, _ in ps]
    truths = [t for _, t in ps]
    a = stats(notch_distribution(preds, truths))
    b = stats(notch_distribution([p + k for p in preds], [t + k for t in truths]))
    assert (a.dc, a.adc, a.sd) == pytest.approx((b.dc, b.adc, b.sd), abs=1e-12)


def test_distribution_from_labels():
    r = lambda lab: SP.rating(SP.index(lab))
    d = notch_distribution([r("A"), r("A-"), r("BBB")], [r("A"), r("A"), r("BBB")])
    assert d.F(0) == pytest.approx(2 / 3) and d.F(1) == pytest.approx(1 / 3)
    same = notch_distribution([r("A"), r("B")], [r("A"), r("B")])
    assert same.F(0) == 1.0 and same.support() == [0]


def test_bucket_vectors():
    p = bucket_summary(notch_distribution([4, 9], [4, 9]))
    assert (p.zero, p.one_abs, p.gt_one_abs) == (1.0, 0.0, 0.0)
    b = bucket_summary(notch_distribution([5, 6], [3, 4]))
    assert (b.zero, b.one_abs, b.gt_one_abs) == (0.0, 0.0, 1.0)


def test_captured_two_of_three():
    truths = [4, 5, 6, 7]
    prev = [3, 4, 5, 7]
    preds = [4, 5, 9, 1]
    assert captured_changes(preds, truths, prev) == pytest.approx(2 / 3)
    assert captured_changes(truths, truths, prev) == 1.0


def test_identical_streams():
    s = [("C1", "2018Q4", 3), ("C2", "2018Q4", 8)]
    cmp = agency_comparison(s, s)
    assert cmp.stats.dc == 0.0 and cmp.stats.accuracy == 1.0


def test_offset_stream_absolute_mean():
    a = [(f"C{i}", "2018Q4", i + 1) for i in range(1, 15)]
    b = [(f"C{i}", "2018Q4", i) for i in range(1, 15)]
    s = agency_comparison(a, b).stats
    assert (s.dc, s.adc, s.sd) == (1.0, 1.0, 0.0)
