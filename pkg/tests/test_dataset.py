import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from notchbench import default_sp_scale
from notchbench.dataset import (
    Period,
    SyntheticSpec,
    apply_preprocessor,
    fit_preprocessor,
    kfold,
    kfold_indices,
    load_csv,
    majority_rating,
    parse_period,
    previous_rating_baseline,
    random_split,
    random_split_indices,
    split_sizes,
    synthesize,
    temporal_split,
    write_csv,
)
from notchbench.errors import BadFractions, BadK, BadSpec, DuplicateKey, ParseError

SP = default_sp_scale()

CSV = """company_id,period,rating,roa,leverage
C1,2018Q3,A,0.05,1.2
C1,2018Q4,A-,0.04,
C2,2018Q4,BBB,,2.0
C2,2019Q1, BBB ,0.01,2.5
"""


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_periods():
    assert parse_period("2018Q4") == Period(2018, 4)
    assert Period(2018, 4).next() == Period(2019, 1)
    assert Period(2019, 1).previous() == Period(2018, 4)
    assert str(Period(2009, 2)) == "2009Q2"
    for bad in ("2018Q5", "2018-Q1", "18Q1"):
        with pytest.raises(ValueError):
            parse_period(bad)


def test_load_csv_basic(tmp_path):
    d = load_csv(write(tmp_path, CSV), sector="financial")
    assert len(d) == 4 and d.feature_names == ("roa", "leverage")
    assert d.y.tolist() == [6, 7, 9, 9]
    assert math.isnan(d.X[1, 1]) and math.isnan(d.X[2, 0])
    # Previous-quarter ratings are joined by (company, period - 1).
    assert d.prev.tolist() == [0, 6, 0, 9]
    ob = d.observation(1)
    assert ob.prev_rating.label == "A" and ob.rating.label == "A-"


def test_csv_round_trip(tmp_path):
    d = load_csv(write(tmp_path, CSV))
    write_csv(d, tmp_path / "out.csv")
    e = load_csv(tmp_path / "out.csv")
    assert e.keys() == d.keys()
    assert np.array_equal(e.y, d.y)
    assert np.array_equal(np.isnan(e.X), np.isnan(d.X))
    assert np.array_equal(np.nan_to_num(e.X), np.nan_to_num(d.X))


@pytest.mark.parametrize(
    "body, row",
    [
        ("C1,2018Q4,ZZZ,1,2\n", 2),
        ("C1,2018Q4,A,1\n", 2),
        ("C1,2018Q4,A,1,x\n", 2),
        ("C1,2018Q9,A,1,2\n", 2),
        ("C1,2018Q4,A,1,2\nC2,2018Q4,A,1,2\nC1,2018Q4,AA,1,2\n", 4),
    ],
)
def test_parse_errors_carry_row(tmp_path, body, row):
    p = write(tmp_path, "company_id,period,rating,a,b\n" + body)
    with pytest.raises(ParseError) as info:
        load_csv(p)
    assert info.value.row == row
    assert str(info.value).startswith(f"row {row}:")


def test_duplicate_key_is_its_own_error(tmp_path):
    p = write(tmp_path, "company_id,period,rating,a\nC1,2018Q4,A,1\nC1,2018Q4,A,2\n")
    with pytest.raises(DuplicateKey):
        load_csv(p)


def test_bad_header(tmp_path):
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "id,period,rating\nC1,2018Q4,A\n"))


def test_preprocessor_uses_train_statistics_only(tmp_path):
    d = load_csv(write(tmp_path, CSV))
    train, test = d.subset([0, 1, 2]), d.subset([3])
    p = fit_preprocessor(train)
    assert p.impute.tolist() == [0.045, pytest.approx(1.6)]
    filled = np.array([[0.05, 1.2], [0.04, 1.6], [0.045, 2.0]])
    assert np.allclose(p.mean, filled.mean(axis=0))
    assert np.allclose(p.sd, filled.std(axis=0))
    out = apply_preprocessor(p, test)
    assert np.allclose(out.X, (np.array([[0.01, 2.5]]) - p.mean) / p.sd)
    z = apply_preprocessor(p, train).X
    assert np.allclose(z.mean(axis=0), 0) and np.allclose(z.std(axis=0), 1)


def test_preprocessor_all_missing_and_constant_columns(caplog):
    spec = SyntheticSpec(n_companies=3, n_quarters=4, n_features=3)
    d = synthesize(spec, seed=0)
    X = d.X.copy()
    X[:, 0] = np.nan
    X[:, 1] = 7.0
    d = d.with_features(X)
    p = fit_preprocessor(d)
    assert "missing in every training row" in caplog.text
    out = apply_preprocessor(p, d).X
    assert np.isfinite(out).all()
    assert np.all(out[:, 0] == 0.0) and np.all(out[:, 1] == 0.0)


def test_preprocessor_dict_round_trip():
    d = synthesize(SyntheticSpec(n_companies=4, n_quarters=5, n_features=4), seed=2)
    p = fit_preprocessor(d)
    q = type(p).from_dict(p.to_dict())
    assert np.array_equal(p.transform(d.X), q.transform(d.X))


def test_split_sizes_example():
    assert split_sizes(6029, (0.7, 0.1, 0.2)) == [4220, 603, 1206]
    with pytest.raises(BadFractions):
        split_sizes(10, (0.5, 0.6))
    with pytest.raises(BadFractions):
        split_sizes(10, (1.2, -0.2))


@given(st.integers(1, 5000), st.sampled_from([(0.7, 0.1, 0.2), (0.8, 0.2), (0.5, 0.25, 0.25), (1.0,)]))
def test_split_sizes_partition(n, fr):
    sizes = split_sizes(n, fr)
    assert sum(sizes) == n and min(sizes) >= 0
    for s, f in zip(sizes[1:], fr[1:]):
        assert abs(s - n * f) <= 0.5 + 1e-9


@given(st.integers(3, 300), st.integers(0, 10 ** 6))
def test_random_split_disjoint_and_covering(n, seed):
    parts = random_split_indices(n, (0.7, 0.1, 0.2), seed)
    allidx = np.concatenate(parts)
    assert sorted(allidx.tolist()) == list(range(n))


def test_random_split_is_seeded():
    d = synthesize(SyntheticSpec(n_companies=5, n_quarters=6), seed=0)
    a = random_split(d, seed=3)
    b = random_split(d, seed=3)
    c = random_split(d, seed=4)
    assert all(x.keys() == y.keys() for x, y in zip(a, b))
    assert a[2].keys() != c[2].keys()


def test_temporal_split_respects_cutoff():
    d = synthesize(SyntheticSpec(n_companies=3, n_quarters=8), seed=0)
    train, test = temporal_split(d, "2010Q2")
    assert max(train.periods) <= Period(2010, 2) < min(test.periods)
    assert len(train) + len(test) == len(d)


def test_kfold_sizes_example():
    sizes = [len(te) for _, te in kfold_indices(103, 10, seed=0)]
    assert sizes == [11, 11, 11] + [10] * 7


@given(st.integers(2, 200), st.integers(2, 12), st.integers(0, 1000))
@settings(max_examples=60)
def test_kfold_partition(n, k, seed):
    if k > n:
        with pytest.raises(BadK):
            kfold_indices(n, k, seed)
        return
    folds = kfold_indices(n, k, seed)
    tests = np.concatenate([te for _, te in folds])
    assert sorted(tests.tolist()) == list(range(n))
    for tr, te in folds:
        assert not set(tr.tolist()) & set(te.tolist())
        assert len(tr) + len(te) == n
    sizes = [len(te) for _, te in folds]
    assert max(sizes) - min(sizes) <= 1


def test_kfold_datasets():
    d = synthesize(SyntheticSpec(n_companies=3, n_quarters=4), seed=0)
    pairs = kfold(d, 3, seed=1)
    assert sum(len(te) for _, te in pairs) == len(d)
    with pytest.raises(BadK):
        kfold(d, 1)


def test_majority_and_baseline():
    d = synthesize(SyntheticSpec(n_companies=4, n_quarters=10), seed=5)
    counts = np.bincount(d.y)
    assert majority_rating(d) == int(np.argmax(counts))
    pred = previous_rating_baseline(d, fallback=1)
    assert np.array_equal(pred, np.where(d.prev > 0, d.prev, 1))


def test_synthesize_shape_and_reproducibility():
    spec = SyntheticSpec(n_companies=7, n_quarters=9, n_features=5, missing_rate=0.1)
    a, b = synthesize(spec, seed=11), synthesize(spec, seed=11)
    assert len(a) == 63 and a.n_features == 5
    assert a.keys() == b.keys()
    assert np.array_equal(np.isnan(a.X), np.isnan(b.X))
    assert np.array_equal(np.nan_to_num(a.X), np.nan_to_num(b.X))
    assert np.isnan(a.X).any()
    # Every row has a previous rating, one notch away at most.
    assert (a.prev > 0).all() and (np.abs(a.y - a.prev) <= 1).all()
    assert len(set(a.keys())) == len(a)


def test_synthesize_rejects_bad_specs():
    with pytest.raises(BadSpec):
        synthesize(SyntheticSpec(marginals=(1.0, 2.0)))
    with pytest.raises(BadSpec):
        synthesize(SyntheticSpec(persistence=1.5))


def test_three_row_file(tmp_path):
    p = write(tmp_path, "company_id,period,rating,x\nC1,2018Q1,A,1\nC1,2018Q2,A-,2\nC2,2018Q1,BB,3\n")
    d = load_csv(p)
    assert len(d) == 3
    assert d.observation(1).prev_rating.label == "A"
    assert d.observation(0).prev_rating is None


def test_imputation_vector(tmp_path):
    d = load_csv(write(tmp_path, "company_id,period,rating,x\nC1,2018Q1,A,1\nC2,2018Q1,A,3\nC3,2018Q1,A,\n"))
    p = fit_preprocessor(d)
    assert p.impute[0] == 2.0 and p.mean[0] == 2.0
    assert p.sd[0] == pytest.approx(np.std([1.0, 3.0, 2.0]))


def test_constant_column_floor():
    d = synthesize(SyntheticSpec(n_companies=1, n_quarters=3, n_features=1), seed=0)
    d = d.with_features(np.full((3, 1), 5.0))
    p = fit_preprocessor(d)
    assert p.sd[0] == 1e-12
    assert np.all(p.transform(d.X) == 0.0)


def test_transform_vectors():
    from notchbench.dataset import Preprocessor

    p = Preprocessor(impute=np.array([2.0]), mean=np.array([2.0]), sd=np.array([1.0]))
    assert p.transform(np.array([[3.0], [np.nan]])).ravel().tolist() == [1.0, 0.0]


def test_temporal_boundaries():
    d = synthesize(SyntheticSpec(n_companies=1, n_quarters=2, start=Period(2016, 2)), seed=0)
    train, test = temporal_split(d, "2016Q2")
    assert train.periods == (Period(2016, 2),) and test.periods == (Period(2016, 3),)
    train, test = temporal_split(d, "2015Q1")
    assert len(train) == 0 and len(test) == 2


def test_even_kfold():
    assert [len(te) for _, te in kfold_indices(100, 10, seed=0)] == [10] * 10


def test_repeated_random_split_identical():
    a = random_split_indices(10, (0.7, 0.1, 0.2), seed=9)
    b = random_split_indices(10, (0.7, 0.1, 0.2), seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_baseline_vectors(tmp_path):
    p = write(tmp_path, "company_id,period,rating,x\nC1,2018Q1,A,1\nC1,2018Q2,AA,2\nC2,2018Q1,B,3\n")
    d = load_csv(p)
    pred = previous_rating_baseline(d, fallback=SP.rating(SP.index("BBB")))
    assert [SP.label(int(i)) for i in pred] == ["BBB", "A", "BBB"]


def test_baseline_scores_share_of_unchanged_rows():
    d = synthesize(SyntheticSpec(n_companies=20, n_quarters=10), seed=1)
    pred = previous_rating_baseline(d, fallback=1)
    assert np.mean(pred == d.y) == np.mean(d.prev == d.y)


def test_full_persistence_freezes_ratings():
    d = synthesize(SyntheticSpec(n_companies=10, n_quarters=12, persistence=1.0), seed=4)
    for c in set(d.company_ids):
        rows = [i for i, cid in enumerate(d.company_ids) if cid == c]
        assert len(set(d.y[rows].tolist())) == 1


def test_stay_fraction_near_persistence():
    d = synthesize(SyntheticSpec(n_companies=50, n_quarters=40, persistence=0.9), seed=0)
    assert abs(np.mean(d.y == d.prev) - 0.9) <= 0.02


def test_marginals_drive_the_rating_histogram():
    from notchbench.dataset import SECTOR_MARGINALS

    w = np.array(SECTOR_MARGINALS["healthcare"], dtype=float)
    n = 4000
    d = synthesize(SyntheticSpec(n_companies=n, n_quarters=1, persistence=1.0, n_features=1), seed=0)
    counts = np.bincount(d.y, minlength=21)[1:]
    p = w / w.sum()
    sd = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 4 * sd + 1e-9)
