import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ganfair.data import GroupAssigner, two_mode_mixture
from ganfair.fairness import (GroupRateReport, aggregate_runs, conditional_purity, group_rates,
                              read_report_csv, tv_distance, write_report_csv)
from ganfair.numerics import Rng

simplex3 = st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda v: sum(v) > 0).map(
    lambda v: np.array(v) / sum(v))


def report(tv, k=2):
    rates = tuple([1.0 / k] * k)
    return GroupRateReport(tuple([1] * k), rates, k, "x", rates, tv)


def test_group_rates_examples():
    white = np.full((10, 64), 0.8)
    r = group_rates(white, GroupAssigner.mean_threshold(), 2, (0.5, 0.5))
    assert r.rates == (0.0, 1.0)
    mixed = np.vstack([np.full((6, 4), 0.9), np.full((4, 4), 0.1)])
    r = group_rates(mixed, GroupAssigner.mean_threshold(), 2, (0.5, 0.5))
    assert r.rates == (0.4, 0.6) and r.counts == (4, 6) and sum(r.counts) == r.n
    with pytest.raises(ValueError):
        group_rates(np.empty((0, 2)), GroupAssigner.mean_threshold())


def test_training_set_measures_its_declared_split():
    ds = two_mode_mixture((0.7, 0.3), 1000, Rng(0))
    r = group_rates(ds.samples, GroupAssigner.nearest_center([[-3, 0], [3, 0]]), 2, ds.proportions)
    assert r.rates == (0.7, 0.3)
    assert r.tv == 0.0


def test_tv_examples():
    assert tv_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert tv_distance([1, 0], [0.5, 0.5]) == 0.5
    assert tv_distance([0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(ValueError):
        tv_distance([1.0], [0.5, 0.5])


@given(simplex3, simplex3, simplex3)
def test_tv_is_a_metric(p, q, r):
    assert 0 <= tv_distance(p, q) <= 1 + 1e-12
    assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=1e-15)
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12
    assert tv_distance(p, p) == 0


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200))
def test_group_rates_permutation_invariant(seed, n):
    rng = Rng(seed)
    x = rng.normal((n, 2)) * 4
    a = GroupAssigner.nearest_center([[-3, 0], [3, 0], [0, 3]])
    r1 = group_rates(x, a)
    r2 = group_rates(x[rng.gen.permutation(n)], a)
    assert r1.counts == r2.counts
    assert abs(sum(r1.rates) - 1) < 1e-12


def test_conditional_purity():
    a = GroupAssigner.nearest_center([[-3, 0], [3, 0]])
    x = np.array([[3.0, 0], [2.5, 1], [-3, 0], [4, 0]])
    assert conditional_purity(x, 1, a) == 0.75


def test_aggregate_examples():
    one = GroupRateReport((3, 7), (0.3, 0.7), 10, "x", (0.5, 0.5), 0.2)
    agg = aggregate_runs([one])
    assert agg.rate_median == (0.3, 0.7) and agg.tv_median == 0.2 and agg.runs == 1
    agg = aggregate_runs([report(0.1), report(0.5), report(0.3)])
    assert agg.tv_median == 0.3 and agg.tv_max == 0.5
    assert aggregate_runs([report(0.1), report(0.4)]).tv_median == 0.1  # lower median
    with pytest.raises(ValueError):
        aggregate_runs([report(0.1, 2), report(0.1, 3)])
    with pytest.raises(ValueError):
        aggregate_runs([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=15), st.floats(0, 1))
def test_median_tv_monotone_under_larger_report(tvs, extra):
    agg = aggregate_runs([report(t) for t in tvs])
    bigger = max(tvs) + extra
    assert aggregate_runs([report(t) for t in tvs] + [report(bigger)]).tv_median >= agg.tv_median
    assert min(tvs) <= agg.tv_median <= max(tvs)


def test_report_csv(tmp_path):
    path = tmp_path / "m.csv"
    write_report_csv([], path)
    assert path.read_text() == ("run_id,seed,model,dataset,group_id,target_prop,count,rate,"
                                "tv_distance,status\n")
    r = GroupRateReport((1, 2), (1 / 3, 2 / 3), 3, "x", (0.5, 0.5), 1 / 6, "seed4", 4, "gan", "ds")
    write_report_csv(r.rows()[:1], path)
    lines = path.read_bytes().split(b"\n")
    assert len(lines) == 3 and lines[-1] == b"" and b"\r" not in path.read_bytes()
    assert lines[1].decode().split(",")[7] == "0.333333"
    write_report_csv(r.rows(), path)
    back = read_report_csv(path)
    for row, rate in zip(back, r.rates):
        assert abs(row["rate"] - rate) < 1e-6
