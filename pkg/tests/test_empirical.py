import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from bregdecomp.empirical import (
    Convention,
    RegimeTable,
    SampleFrame,
    WeightedSample,
    build_regime_table,
    cluster_bootstrap,
    dr_mean,
    effective_sample_size,
    empirical_lower_bound,
    ess_guardrail,
    estimate_components,
    ipw_mean,
    read_samples_csv,
    sutva_interval,
    truncation_bias_bound,
    write_samples_csv,
)


def samples(y, w, mhat=None, regime="00", clusters=None):
    n = len(y)
    mhat = [None] * n if mhat is None else mhat
    clusters = list(range(n)) if clusters is None else clusters
    return [WeightedSample(float(y[i]), float(w[i]), 1.0, regime, clusters[i], mhat[i]) for i in range(n)]


def frame_2x2(rng, n_per=50, n_clusters=10, shift=(0.0, 0.3, 0.2, 0.6)):
    regime = np.repeat(np.arange(4), n_per)
    y = np.asarray(shift)[regime] + rng.normal(size=4 * n_per)
    cluster = np.arange(4 * n_per) % n_clusters
    return SampleFrame(regime, y, rng.uniform(1, 3, 4 * n_per), np.ones(4 * n_per), cluster)


# -- weighted means --------------------------------------------------------


def test_unit_weights_give_plain_mean():
    m = ipw_mean(samples([1, 2, 3], [1, 1, 1]))
    assert m.estimate == pytest.approx(2.0)
    assert m.ess == pytest.approx(3.0)
    assert m.clipping_pct == 0


def test_hajek_mean_and_ess():
    m = ipw_mean(samples([0, 0, 3], [1, 1, 2]), trunc_c=2)
    assert m.estimate == pytest.approx(1.5, abs=1e-15)
    assert m.ess == pytest.approx(16 / 6, abs=1e-15)
    assert m.clipping_pct == 0


def test_truncation():
    m = ipw_mean(samples([0, 0, 3], [1, 1, 10]), trunc_c=2)
    assert m.clipping_pct == pytest.approx(1 / 3)
    assert m.estimate == pytest.approx(1.5)  # weights became (1, 1, 2)
    assert m.untruncated_estimate == pytest.approx(30 / 12)
    assert m.trunc_threshold == 2


def test_weight_is_selection_times_censoring():
    s = [WeightedSample(0.0, 1.0, 1.0, "00", 0), WeightedSample(3.0, 0.5, 4.0, "00", 1)]
    assert ipw_mean(s, trunc_c=100).estimate == pytest.approx(2.0)


def test_default_threshold_is_high_percentile():
    w = np.arange(1, 201, dtype=float)
    m = ipw_mean(samples(np.zeros(200), w))
    assert m.trunc_threshold == pytest.approx(np.percentile(w, 99.5))
    assert m.clipping_pct == pytest.approx(1 / 200)


def test_mean_input_errors():
    with pytest.raises(ValueError):
        ipw_mean([])
    with pytest.raises(ValueError):
        ipw_mean(samples([1.0], [1.0]), trunc_c=0.5)
    with pytest.raises(ValueError):
        WeightedSample(1.0, math.inf, 1.0, "00", 0)
    with pytest.raises(ValueError):
        WeightedSample(1.0, 1.0, 0.0, "00", 0)
    with pytest.raises(ValueError):
        WeightedSample(1.0, 1.0, 1.0, "2", 0)


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=30))
def test_ess_bounds(w):
    ess = effective_sample_size(w)
    assert 1 - 1e-12 <= ess <= len(w) * (1 + 1e-12)
    if max(w) - min(w) > 1e-6 * max(w):
        assert ess < len(w)


def test_ess_equals_n_for_equal_weights():
    assert effective_sample_size([3.0] * 7) == pytest.approx(7, abs=1e-12)


@given(st.lists(st.floats(1, 50), min_size=1, max_size=30), st.floats(1, 60), st.floats(1, 60))
def test_clipping_nonincreasing_in_threshold(w, c1, c2):
    lo, hi = sorted((c1, c2))
    s = samples(np.zeros(len(w)), w)
    assert ipw_mean(s, hi).clipping_pct <= ipw_mean(s, lo).clipping_pct


def test_dr_reductions():
    y, w = [1.0, 4.0, 2.0], [1.0, 5.0, 2.0]
    assert dr_mean(samples(y, w, mhat=y), trunc_c=10).estimate == pytest.approx(np.mean(y))
    assert dr_mean(samples(y, w, mhat=[0.0] * 3), trunc_c=10).estimate == pytest.approx(
        ipw_mean(samples(y, w), trunc_c=10).estimate)
    with pytest.raises(ValueError):
        dr_mean(samples(y, w), trunc_c=10)


def _selected_population(rng, n=2000):
    # stratum x with selection probability 0.8 / 0.2; target E[y] = 2
    x = rng.integers(0, 2, n)
    y = 1 + 2 * x + rng.normal(size=n)
    p = np.where(x == 1, 0.2, 0.8)
    keep = rng.random(n) < p
    return y[keep], 1 / p[keep]


def test_ipw_unbiased_with_known_propensities():
    rng = np.random.default_rng(11)
    est = []
    for _ in range(500):
        y, w = _selected_population(rng)
        f = SampleFrame(np.zeros(y.size), y, w, np.ones(y.size), np.arange(y.size))
        est.append(ipw_mean(f, trunc_c=1e6).estimate)
    est = np.array(est)
    assert abs(est.mean() - 2.0) <= 3 * est.std(ddof=1) / math.sqrt(est.size)


def test_dr_unbiased_with_wrong_outcome_model():
    rng = np.random.default_rng(12)
    est = []
    for _ in range(200):
        y, w = _selected_population(rng)
        f = SampleFrame(np.zeros(y.size), y, w, np.ones(y.size), np.arange(y.size), np.full(y.size, 0.5))
        est.append(dr_mean(f, trunc_c=1e6).estimate)
    est = np.array(est)
    assert abs(est.mean() - 2.0) <= 3 * est.std(ddof=1) / math.sqrt(est.size)


# -- truncation bias -------------------------------------------------------


def test_truncation_bias_bound():
    w = [20.0] + [1.0] * 9
    y = [5.0] + [0.0] * 9
    assert truncation_bias_bound(samples(y, w), 10, 5, tail_kappa=1) == pytest.approx(0.6)
    assert truncation_bias_bound(samples(y, [1.0] * 10), 10, 5, tail_kappa=1) == pytest.approx(0.1)
    assert truncation_bias_bound(samples(y, w), 1e12, 5, tail_kappa=1) < 1e-11
    with pytest.raises(ValueError):
        truncation_bias_bound(samples(y, w), 10, 4.9, tail_kappa=1)
    with pytest.raises(ValueError):
        truncation_bias_bound(samples(y, w), 10, 5, tail_kappa=-1)


def test_truncation_bias_warns_without_kappa():
    with pytest.warns(UserWarning, match="tail_kappa"):
        assert truncation_bias_bound(samples([1.0], [1.0]), 10, 1) == 0


# -- components -------------------------------------------------------------


def test_conventions():
    table = RegimeTable(1.0, 1.3, 1.2, 1.6)
    seq = estimate_components(table, Convention.SEQUENTIAL)
    assert (seq.g2_hat, seq.g1_hat, seq.g12_hat) == pytest.approx((0.3, 0.3, 0.1), abs=1e-12)
    base = estimate_components(table, "baseline")
    assert (base.g2_hat, base.g1_hat, base.g12_hat) == pytest.approx((0.3, 0.2, 0.1), abs=1e-12)
    assert seq.lower_bound == pytest.approx(0.7)
    flat = estimate_components(RegimeTable(2.0, 2.0, 2.0, 2.0), "sequential")
    assert flat.g1_hat == flat.g2_hat == flat.g12_hat == 0


def test_convention_is_required():
    with pytest.raises(TypeError):
        estimate_components(RegimeTable(1, 1, 1, 1))  # type: ignore[call-arg]
    with pytest.raises(ValueError):
        estimate_components(RegimeTable(1, 1, 1, 1), "other")


@given(st.lists(st.floats(-100, 100), min_size=4, max_size=4))
def test_convention_identities(L):
    t = RegimeTable(*L)
    seq = estimate_components(t, "sequential")
    assert abs(seq.g2_hat + seq.g1_hat - (t.L11 - t.L00)) <= 1e-12 * max(1, max(map(abs, L)))
    base = estimate_components(t, "baseline")
    assert abs(base.g2_hat + base.g1_hat + base.g12_hat - (t.L11 - t.L00)) <= 1e-12 * max(1, max(map(abs, L)))
    assert seq.g12_clipped >= 0
    assert seq.g12_clipped == max(0.0, seq.g12_hat)


def test_lower_bound_clips_and_floors():
    est = estimate_components(RegimeTable(1.0, 1.3, 1.25, 1.5), "sequential")
    assert est.g12_hat == pytest.approx(-0.05)
    assert est.lower_bound == pytest.approx(0.5)
    assert empirical_lower_bound(est, 0.2) == pytest.approx(0.3)
    assert empirical_lower_bound(est, 5.0) == 0
    with pytest.raises(ValueError):
        empirical_lower_bound(est, -1)


def test_sutva_interval():
    assert sutva_interval(0.1, 0.05) == pytest.approx((0.05, 0.15))
    assert sutva_interval(0.1, 0.0) == (0.1, 0.1)
    assert sutva_interval(-0.02, 0.1) == pytest.approx((-0.12, 0.08))
    est = estimate_components(RegimeTable(1.0, 1.3, 1.2, 1.6), "sequential", delta_sutva=0.05)
    assert est.sutva_interval == pytest.approx((0.05, 0.15))
    assert est.lower_bound == pytest.approx(0.65)
    with pytest.raises(ValueError):
        sutva_interval(0.1, -0.1)


def test_ess_guardrail():
    assert ess_guardrail({r: 500.0 for r in "abcd"}, 100) == "guarantee"
    assert ess_guardrail({"00": 500.0, "01": 50.0}, 100) == "monitoring_only"
    assert ess_guardrail({"00": 100.0}, 100) == "guarantee"
    assert ess_guardrail({"00": {"ess": 99.0}}) == "monitoring_only"
    with pytest.raises(ValueError):
        ess_guardrail({"00": 1.0}, 0)


def test_regime_table_diagnostics():
    f = frame_2x2(np.random.default_rng(0))
    t = build_regime_table(f, trunc_c={"00": 2.0})
    assert set(t.diagnostics) == {"00", "01", "10", "11"}
    assert t.diagnostics["00"].trunc_threshold == 2.0
    for d in t.diagnostics.values():
        assert d.ess <= d.n
    assert ess_guardrail(t, 10) == "guarantee"
    d = t.to_dict()
    assert set(d["losses"]) == {"00", "01", "10", "11"}
    with pytest.raises(ValueError):
        build_regime_table(f.take(f.regime != 3))
    with pytest.raises(ValueError):
        build_regime_table(f, estimator="tmle")


# -- bootstrap -------------------------------------------------------------


def test_bootstrap_constant_statistic():
    f = frame_2x2(np.random.default_rng(1))
    lo, hi = cluster_bootstrap(f, lambda t: 3.0, n_boot=100, seed=0)
    assert lo == hi == 3.0


def test_bootstrap_identical_clusters():
    rng = np.random.default_rng(2)
    one = frame_2x2(rng, n_per=5, n_clusters=1)
    f = SampleFrame(np.tile(one.regime, 2), np.tile(one.y, 2), np.tile(one.w_sel, 2), np.tile(one.w_cens, 2),
                    np.repeat([0, 1], len(one)))
    point = estimate_components(build_regime_table(f), "sequential").g1_hat
    lo, hi = cluster_bootstrap(f, "g1", n_boot=200, convention="sequential")
    assert hi - lo <= 1e-12
    assert lo - 1e-12 <= point <= hi + 1e-12


def test_bootstrap_errors():
    f = frame_2x2(np.random.default_rng(3), n_clusters=1)
    with pytest.raises(ValueError, match="two distinct clusters"):
        cluster_bootstrap(f, "L00")
    f = frame_2x2(np.random.default_rng(3))
    with pytest.raises(ValueError):
        cluster_bootstrap(f, "L00", n_boot=10)
    with pytest.raises(ValueError):
        cluster_bootstrap(f, "g1", n_boot=100)  # no convention
    with pytest.raises(ValueError):
        cluster_bootstrap(f, "nope", n_boot=100, convention="baseline")


def test_bootstrap_deterministic_and_sensible():
    f = frame_2x2(np.random.default_rng(4), n_per=400, n_clusters=40)
    a = cluster_bootstrap(f, "g2", n_boot=300, seed=9, convention="baseline")
    b = cluster_bootstrap(f, "g2", n_boot=300, seed=9, convention="baseline")
    assert a == b
    assert a != cluster_bootstrap(f, "g2", n_boot=300, seed=10, convention="baseline")
    point = estimate_components(build_regime_table(f), "baseline").g2_hat
    assert a.lo < point < a.hi


def test_bootstrap_vectorised_path_matches_callable():
    f = frame_2x2(np.random.default_rng(5), n_per=60, n_clusters=12)
    named = cluster_bootstrap(f, "L11", n_boot=150, seed=3, trunc_c=2.5)
    called = cluster_bootstrap(f, lambda t: t.L11, n_boot=150, seed=3, trunc_c=2.5)
    assert named == pytest.approx(called, abs=1e-12)


def test_bootstrap_replicate_equals_recomputed_pipeline():
    # weight the clusters by multiplicities and rerun the estimator on the expanded data
    f = frame_2x2(np.random.default_rng(6), n_per=30, n_clusters=6)
    thresholds = {r: d.trunc_threshold for r, d in build_regime_table(f).diagnostics.items()}
    from bregdecomp.empirical import _cluster_sums, _losses_from_counts

    counts = np.array([[2.0, 0, 1, 1, 0, 2]])
    got = _losses_from_counts(counts, _cluster_sums(f, thresholds), "ipw")[0]
    idx = np.concatenate([np.flatnonzero(f.cluster == k) for k, m in enumerate(counts[0]) for _ in range(int(m))])
    expanded = f.take(idx)
    want = build_regime_table(expanded, trunc_c=thresholds)
    assert got == pytest.approx([want.L00, want.L01, want.L10, want.L11], rel=1e-12)


# -- CSV -------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    s = [WeightedSample(0.25, 1.5, 2.0, "01", "c1", 0.1), WeightedSample(1e-17, 1.0, 1.0, "11", "c2", None)]
    path = tmp_path / "s.csv"
    write_samples_csv(SampleFrame.from_samples(s), path)
    assert path.read_text().splitlines()[0] == "regime,y,w_sel,w_cens,mhat,cluster_id"
    back = read_samples_csv(path)
    assert back.to_samples() == s
    assert_array_equal(back.y, [0.25, 1e-17])


def test_csv_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("regime,y,w_sel,w_cens,mhat,cluster_id\n00,1,1,1,,a\n00,x,1,1,,a\n")
    with pytest.raises(ValueError, match="line 3"):
        read_samples_csv(path)
    path.write_text("regime,y,w_sel,w_cens,mhat,cluster_id\n00,1,-1,1,,a\n")
    with pytest.raises(ValueError, match="positive"):
        read_samples_csv(path)
    path.write_text("regime,y\n00,1\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_samples_csv(path)


def test_frame_from_samples_no_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        f = SampleFrame.from_samples(samples([1, 2], [1, 1], clusters=["b", "a"]))
    assert f.n_clusters == 2
    assert not f.has_mhat
