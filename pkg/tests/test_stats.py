import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from trapwalk.env import Environment, GapLaw, compute_records
from trapwalk.errors import ValidationError
from trapwalk.limit import LimitParams, limit_cdf
from trapwalk.stats import (
    ExperimentConfig,
    content_hash,
    convergence_experiment,
    dkw_band,
    gap_score_profile,
    ks_distance,
    ks_two_sample,
    lambda_estimate,
    record_counts,
    record_product_check,
    records_statistics,
    report_to_csv,
)
from trapwalk.survival import crossing_costs, small_ball_rate


class TestKs:
    def test_one_sample_against_scipy(self):
        rng = np.random.default_rng(1)
        for size in (5, 100, 3000):
            x = np.sort(rng.exponential(size=size))
            ours = ks_distance(x, lambda u: 1 - np.exp(-u)).statistic
            assert ours == pytest.approx(sps.kstest(x, "expon").statistic, abs=1e-14)

    def test_two_sample_against_scipy(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=300), rng.normal(0.1, size=170)
        ours = ks_two_sample(a, b)
        assert ours.statistic == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-14)
        assert ks_two_sample(b, a).statistic == ours.statistic
        assert ks_two_sample(b, a).band == ours.band

    def test_band(self):
        assert dkw_band(100_000) == pytest.approx(0.0051468, abs=1e-6)
        assert dkw_band(100_000) <= 0.0052

    def test_validation(self):
        with pytest.raises(ValidationError):
            ks_distance([2.0, 1.0], lambda u: u)
        with pytest.raises(ValidationError):
            ks_distance([], lambda u: u)
        with pytest.raises(ValidationError):
            ks_two_sample([], [1.0])

    def test_limit_law_rational_grid(self):
        # inverse-transform the closed form at the points (i - 1/2)/m: KS is exactly 1/(2m)
        params = LimitParams(2.0, 2.0, 1.0)
        m = 400
        p = (np.arange(1, m + 1) - 0.5) / m
        e = -np.log1p(-p)
        u = 0.5 * (e / params.tail_scale) ** (2.0 / (params.gamma + 2.0))
        assert ks_distance(u, lambda v: limit_cdf(params, v)).statistic == pytest.approx(0.5 / m, abs=1e-12)


class TestRecords:
    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.integers(1, 9), min_size=1, max_size=30))
    def test_counts_match_records(self, gaps):
        env = Environment.from_gaps(gaps)
        assert record_counts(np.asarray(gaps)) == len(compute_records(env))

    def test_batch_counts(self):
        g = np.array([[1, 2, 3], [3, 2, 1], [2, 2, 5]])
        np.testing.assert_array_equal(record_counts(g), [3, 1, 2])

    def test_product_bound(self):
        worst, subsets = record_product_check()
        assert subsets == 31
        assert isinstance(worst, Fraction) and worst <= 0

    def test_product_bound_two_values(self):
        worst, _ = record_product_check(values=(1, 2), n=4)
        assert worst <= 0

    def test_statistics_report(self):
        rep = records_statistics(GapLaw(0.5), 200, 300, 4)
        assert sum(rep["distribution"].values()) == 300
        assert rep["harmonic"] == pytest.approx(sum(1 / k for k in range(1, 201)))
        assert rep["mean"] <= rep["harmonic"] + 0.5
        for tail in rep["tail"]:
            assert tail["exponent"] == pytest.approx(1 + tail["b"] * (math.log(tail["b"]) - 1))
        again = records_statistics(GapLaw(0.5), 200, 300, 4)
        assert again["distribution"] == rep["distribution"]


class TestGapScores:
    def test_profile(self):
        env = Environment.from_gaps([2, 5, 1, 9, 3, 9, 12], GapLaw(2.0))
        beta, n = 1.0, 400
        prof = gap_score_profile(env, beta, n)
        assert [s.ell for s in prof] == [1, 2, 4, 7]
        big_n = math.sqrt(n)
        costs = crossing_costs(env, beta)
        assert prof[0].score == math.inf  # a gap of 2 cannot hold the walk
        want = costs[2] / big_n + small_ball_rate(9) * n / big_n
        assert prof[2].score == pytest.approx(want, rel=1e-12)
        assert sum(s.is_argmin for s in prof) == 1
        alt = gap_score_profile(env, beta, n, lambda_fn=lambda l: 2.0)
        assert alt[2].score == pytest.approx(3 * 2.0 / big_n + small_ball_rate(9) * n / big_n)


class TestExperiment:
    def test_lambda_estimate(self):
        a = lambda_estimate(GapLaw(2.0), 1.0, 2000, 4, 3)
        b = lambda_estimate(GapLaw(2.0), 1.0, 2000, 4, 3)
        np.testing.assert_array_equal(a.values, b.values)
        assert 1.0 <= a.value and a.stderr > 0

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(2.0, 1.0, (100, 50), 5, 1)
        with pytest.raises(ValidationError):
            ExperimentConfig(2.0, 1.0, (100,), 1, 1)
        with pytest.raises(ValidationError):
            ExperimentConfig(2.0, 1.0, (100,), 5, 1, lambda_source="provided")
        with pytest.raises(ValidationError):
            ExperimentConfig(2.0, 1.0, (100,), 5, 1, law="uniform")

    def test_hash_is_canonical(self):
        assert content_hash({"a": 1, "b": [1, 2]}) == content_hash({"b": [1, 2], "a": 1})
        assert content_hash({"a": 1}) != content_hash({"a": 2})

    def test_small_run_is_worker_independent(self):
        cfg = ExperimentConfig(2.0, 1.0, (200, 800), 12, 5, lambda_ell=500, lambda_envs=3)
        serial = convergence_experiment(cfg, jobs=1)
        parallel = convergence_experiment(cfg, jobs=2)
        assert serial["hash"] == parallel["hash"]
        assert serial["environments"] == parallel["environments"]
        assert [r["ks"] for r in serial["per_n"]] == [r["ks"] for r in parallel["per_n"]]
        assert serial["failures"] == 0
        csv_text = report_to_csv(serial)
        assert csv_text.splitlines()[0].startswith("n,N,count,ks")
        assert len(csv_text.splitlines()) == 3

    def test_provided_lambda(self):
        cfg = ExperimentConfig(2.0, 1.0, (100,), 4, 5, lambda_source="provided", lambda_value=1.9)
        rep = convergence_experiment(cfg)
        assert rep["lambda"] == {"source": "provided", "value": 1.9}
        assert rep["limit"]["lam"] == 1.9


def test_single_gap_always_one_record():
    rep = records_statistics(GapLaw(1.0), 1, 50, 2)
    assert rep["distribution"] == {1: 50}
