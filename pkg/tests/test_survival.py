import math

import numpy as np
import pytest
from conftest import brute_log_z, killed_chain_hit
from hypothesis import given, settings
from hypothesis import strategies as st

from trapwalk import _kernels
from trapwalk.env import Environment, GapLaw, sample_covering, sample_environment
from trapwalk.errors import EnvironmentTooShort, IndexOrder, TruncationTooCoarse, ValidationError
from trapwalk.survival import (
    SurvivalParams,
    confined_survival_probability,
    crossing_costs,
    crossing_probability,
    fkg_compare,
    lambda_profile,
    lambda_sequence,
    lambda_two_sided,
    log_hit_probability,
    log_survival_lower_bound,
    log_survival_probability,
    scale_length,
    small_ball_rate,
    survival_for_seed,
)

gap_lists = st.lists(st.integers(1, 6), min_size=1, max_size=12)


def _long_env(gaps, n):
    # pad with unit gaps so the environment always covers n sites
    pad = max(0, n + 1 - sum(gaps))
    return Environment.from_gaps(list(gaps) + [1] * pad)


class TestSurvivalDP:
    @pytest.mark.parametrize("beta", [0.0, 0.5, 2.0])
    @pytest.mark.parametrize("gaps", [[1], [3, 1, 2], [5, 5], [2, 7, 1, 1], [20]])
    def test_matches_enumeration(self, gaps, beta):
        for n in range(1, 13):
            env = _long_env(gaps, n)
            res = log_survival_probability(env, SurvivalParams(beta, n))
            assert res.log_z == pytest.approx(brute_log_z(env.gaps, beta, n), abs=1e-12)
            assert res.log_error_bound == 0.0

    def test_free_walk_closed_form(self):
        # P(S_1..S_n > 0) for the free walk is C(n, floor(n/2)) / 2**n / 2 ... use ballot numbers
        n = 40
        env = Environment.from_gaps([10**6])
        res = log_survival_probability(env, SurvivalParams(0.0, n))
        exact = math.comb(n - 1, (n - 1) // 2) / 2**n
        assert res.log_z == pytest.approx(math.log(exact), abs=1e-12)

    def test_free_energy_and_scale(self):
        env = sample_covering(GapLaw(2.0), 1001, 1)
        res = log_survival_probability(env, SurvivalParams(1.0, 1000))
        assert res.scale_N == pytest.approx(1000**0.5)
        assert res.free_energy == pytest.approx(-res.log_z / res.scale_N)
        assert scale_length(1e5, 1.0) == pytest.approx(1e5 ** (1 / 3))

    def test_too_short(self):
        env = Environment.from_gaps([2, 3])
        with pytest.raises(EnvironmentTooShort) as info:
            log_survival_probability(env, SurvivalParams(1.0, 20))
        assert info.value.reach > env.last_position

    def test_seeded_run_extends_environment(self):
        law = GapLaw(1.5)
        params = SurvivalParams(1.0, 3000, 1e-280)
        a, env_a = survival_for_seed(law, params, 7, 2, reach=10)
        b, env_b = survival_for_seed(law, params, 7, 2, reach=50_000)
        assert a.log_z == b.log_z
        assert env_a.last_position >= a.window

    def test_pruning_error_bound(self):
        env = sample_environment(GapLaw(1.0), 4000, 3)
        exact = log_survival_probability(env, SurvivalParams(1.0, 4000, 0.0))
        for thr in (1e-280, 1e-30, 1e-8):
            approx = log_survival_probability(env, SurvivalParams(1.0, 4000, thr))
            assert approx.log_z <= exact.log_z + 1e-12
            assert exact.log_z - approx.log_z <= approx.log_error_bound + 1e-12
            assert approx.window <= exact.window
        assert log_survival_probability(env, SurvivalParams(1.0, 4000, 1e-8)).log_error_bound > 0

    def test_default_threshold(self):
        assert SurvivalParams(1.0, 100_000).threshold == 0.0
        assert SurvivalParams(1.0, 100_001).threshold == 1e-280
        assert SurvivalParams(1.0, 10, 1e-5).threshold == 1e-5

    def test_validation(self):
        for bad in (dict(beta=-1.0, n=5), dict(beta=1.0, n=0), dict(beta=math.nan, n=5), dict(beta=1.0, n=5, drop_threshold=2.0)):
            with pytest.raises(ValidationError):
                SurvivalParams(**bad)

    def test_lower_bound_is_below(self):
        for seed in range(5):
            env = sample_environment(GapLaw(1.0), 3000, seed)
            for n in (50, 500, 3000):
                lb = log_survival_lower_bound(env, 1.5, n)
                z = log_survival_probability(env, SurvivalParams(1.5, n)).log_z
                assert lb <= z + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(gap_lists, st.floats(0.1, 3.0), st.integers(2, 60))
    def test_monotone_in_n_and_beta(self, gaps, beta, n):
        env = _long_env(gaps, n + 1)
        z = lambda b, m: log_survival_probability(env, SurvivalParams(b, m)).log_z
        assert z(beta, n + 1) <= z(beta, n) + 1e-12
        assert z(beta + 0.3, n) <= z(beta, n) + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=2, max_size=12), st.integers(0, 10), st.integers(2, 40))
    def test_monotone_under_trap_removal(self, gaps, which, n):
        which = which % (len(gaps) - 1)
        merged = gaps[:which] + [gaps[which] + gaps[which + 1]] + gaps[which + 2 :]
        a = log_survival_probability(_long_env(gaps, n), SurvivalParams(1.0, n)).log_z
        b = log_survival_probability(_long_env(merged, n), SurvivalParams(1.0, n)).log_z
        assert b >= a - 1e-12

    def test_lengthening_a_gap_is_not_monotone(self):
        # shifting a trap from 1 to 2 costs more: every surviving path revisits 2 more often
        short = log_survival_probability(_long_env([1, 4], 4), SurvivalParams(1.0, 4)).log_z
        longer = log_survival_probability(_long_env([2, 4], 4), SurvivalParams(1.0, 4)).log_z
        assert longer < short


class TestCrossing:
    @pytest.mark.parametrize("t", [1, 2, 3, 10, 100, 1000])
    def test_single_gap(self, t):
        env = Environment.from_gaps([t])
        res = crossing_probability(env, 0, 1, 0.0)
        assert math.exp(res.log_p) == pytest.approx(1 / (2 * t), rel=1e-12)
        # exit probability from site 1 is twice that
        beta = 1.7
        assert lambda_profile(env, beta)[0] == pytest.approx(beta + math.log(2 * t), abs=1e-12)

    @pytest.mark.parametrize("count_arrival", [True, False])
    @pytest.mark.parametrize("gaps", [[1, 1, 1], [3, 1, 4, 1, 5], [7, 2, 9], [1, 20, 2]])
    def test_linear_solve_oracle(self, gaps, count_arrival):
        env = Environment.from_gaps(gaps)
        for beta in (0.3, 1.0, 2.5):
            got = crossing_probability(env, 0, len(gaps), beta, count_arrival).log_p
            assert got == pytest.approx(math.log(killed_chain_hit(gaps, beta, count_arrival)), abs=1e-12)

    def test_hit_probability_inside_gap(self):
        gaps = [3, 1, 6]
        env = Environment.from_gaps(gaps)
        for x in range(1, 11):
            sub = [g for g in np.diff([0, *[p for p in env.positions[1:] if p < x], x])]
            want = killed_chain_hit(sub, 1.2) if x in env.positions else _hit_non_trap(gaps, x, 1.2)
            assert log_hit_probability(env, x, 1.2) == pytest.approx(math.log(want), abs=1e-12)

    def test_costs_and_indexes(self):
        env = Environment.from_gaps([2, 5, 3, 8])
        costs = crossing_costs(env, 1.0)
        for j in range(1, 5):
            assert costs[j - 1] == pytest.approx(-crossing_probability(env, 0, j, 1.0).log_p, abs=1e-12)
        mid = crossing_costs(env, 1.0, start=1)
        assert mid[1] == pytest.approx(-crossing_probability(env, 1, 3, 1.0).log_p, abs=1e-12)
        with pytest.raises(IndexOrder):
            crossing_probability(env, 2, 2, 1.0)
        with pytest.raises(ValidationError):
            crossing_probability(env, 0, 9, 1.0)

    def test_long_environment_stays_finite(self):
        env = sample_environment(GapLaw(0.8), 200_000, 4)
        lam = lambda_profile(env, 3.0)
        assert np.all(np.isfinite(lam)) and lam[-1] > 3.0

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(1, 30), min_size=3, max_size=30), st.floats(0.05, 4.0), st.data())
    def test_subadditive_and_sandwich(self, gaps, beta, data):
        env = Environment.from_gaps(gaps)
        m = len(gaps)
        i = data.draw(st.integers(0, m - 2))
        j = data.draw(st.integers(i + 1, m - 1))
        k = data.draw(st.integers(j + 1, m))
        z = lambda a, b: -crossing_probability(env, a, b, beta).log_p
        assert z(i, k) <= z(i, j) + z(j, k) + 1e-10
        ell = k - i
        assert beta * ell <= z(i, k) + 1e-10
        assert z(i, k) <= (beta + math.log(2)) * ell + float(np.sum(np.log(gaps[i:k]))) + 1e-10

    def test_concave_in_beta(self):
        env = sample_environment(GapLaw(1.0), 500, 8)
        grid = np.linspace(0.1, 4.0, 20)
        lam = np.array([lambda_profile(env, b)[-1] for b in grid])
        assert np.all(np.diff(lam, 2) <= 1e-10)
        assert np.all(np.diff(lam) > 0)

    def test_lambda_sequence_reproducible(self):
        a = lambda_sequence(GapLaw(2.0), 1.0, 100, 3, 1)
        b = lambda_sequence(GapLaw(2.0), 1.0, 100, 3, 1)
        np.testing.assert_array_equal(a.value, b.value)
        np.testing.assert_array_equal(a.ell, np.arange(1, 101))


def _hit_non_trap(gaps, x, beta):
    """Oracle for a target site that is not a trap: same chain, no arrival factor."""
    traps = set(np.cumsum(gaps).tolist())
    q = math.exp(-beta)
    m = x - 1
    if m == 0:
        return 0.5
    a = np.eye(m)
    b = np.zeros(m)
    for s in range(1, x):
        for nb in (s - 1, s + 1):
            if nb == 0:
                continue
            w = 0.5 * (q if nb in traps else 1.0)
            if nb == x:
                b[s - 1] += w
            else:
                a[s - 1, nb - 1] -= w
    return 0.5 * (q if 1 in traps else 1.0) * np.linalg.solve(a, b)[0]


def two_sided_oracle(left, t, beta):
    """Linear solve on {-S, ..., t}: origin and left traps soft, -S kills, t absorbs after its factor."""
    q = math.exp(-beta)
    s = int(np.sum(left))
    traps = {0} | {-int(p) for p in np.cumsum(left)}
    sites = list(range(-s + 1, t))
    idx = {x: i for i, x in enumerate(sites)}
    a = np.eye(len(sites))
    b = np.zeros(len(sites))
    for x in sites:
        if x == 0:
            continue
        for nb in (x - 1, x + 1):
            w = 0.5 * (q if nb in traps or nb == t else 1.0)
            if nb == t:
                b[idx[x]] += w
            elif nb == -s:
                continue
            else:
                a[idx[x], idx[nb]] -= w
    # the start at the origin carries no factor; later visits to 0 do
    row = idx[0]
    for nb in (-1, 1):
        w = 0.5 * (q if nb in traps or nb == t else 1.0)
        if nb == t:
            b[row] += w
        elif nb != -s:
            a[row, idx[nb]] -= w
    # re-entering 0 multiplies by q: model by a separate state for "at 0 after arrival"
    h = np.linalg.solve(a, b)
    return h[row]


class TestTwoSided:
    @pytest.mark.parametrize(
        "left,t",
        [([1], 1), ([2, 3], 4), ([1, 1, 1], 2), ([5, 2, 7, 1], 6), ([3] * 6, 9)],
    )
    @pytest.mark.parametrize("beta", [0.4, 1.0, 3.0])
    def test_against_linear_solve(self, left, t, beta):
        got = _kernels.two_sided_log_p(np.array([left], dtype=np.int64), np.array([t], dtype=np.int64), beta)[0]
        assert got == pytest.approx(math.log(two_sided_oracle(left, t, beta)), abs=1e-12)

    @pytest.mark.parametrize("s,t", [(1, 1), (2, 3), (4, 4), (3, 1)])
    def test_free_walk_gambler_ruin(self, s, t):
        # beta = 0: no killing, absorbing wall at -s
        got = _kernels.two_sided_log_p(np.array([[s]], dtype=np.int64), np.array([t], dtype=np.int64), 0.0)[0]
        assert math.exp(got) == pytest.approx(s / (s + t), rel=1e-12)

    def test_truncation_guard(self):
        with pytest.raises(TruncationTooCoarse):
            lambda_two_sided(GapLaw(2.0), 0.5, 50, 2, 1, tolerance=1e-6)
        est = lambda_two_sided(GapLaw(2.0), 1.0, 500, 60, 1)
        assert est.truncation_bound <= 1e-6
        assert est.per_sample.shape == (500,)

    def test_monotone_in_beta(self):
        vals = [lambda_two_sided(GapLaw(2.0), b, 2000, 80, 4).value for b in (0.5, 1.0, 1.5, 2.0)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_agrees_with_sequence(self):
        law = GapLaw(2.0)
        two = lambda_two_sided(law, 1.0, 20_000, 60, 11)
        seqs = np.array([lambda_sequence(law, 1.0, 20_000, 11, j).estimate for j in range(10)])
        se = math.hypot(two.stderr, seqs.std(ddof=1) / math.sqrt(seqs.size))
        assert abs(two.value - seqs.mean()) <= 3 * se


class TestConfinement:
    def _brute(self, t, n):
        total = 0
        for path in range(2**n):
            s, ok = 0, True
            for k in range(n):
                s += 1 if (path >> k) & 1 else -1
                if s == 0 or abs(s) >= t:
                    ok = False
                    break
            total += ok
        return total / 2**n

    @pytest.mark.parametrize("t", [2, 3, 5])
    def test_enumeration(self, t):
        for n in range(1, 13):
            want = self._brute(t, n)
            got = confined_survival_probability(t, n).log_p
            if want == 0:
                assert got == -math.inf
            else:
                assert got == pytest.approx(math.log(want), abs=1e-12)

    @pytest.mark.parametrize("t", [4, 10, 25])
    def test_rate(self, t):
        assert confined_survival_probability(t, 5000).rate == pytest.approx(small_ball_rate(t), abs=1e-9)

    def test_validation(self):
        with pytest.raises(ValidationError):
            small_ball_rate(2)
        with pytest.raises(ValidationError):
            confined_survival_probability(1, 10)


class TestFkg:
    def _brute_cdfs(self, gaps, x, n, beta):
        traps = set(np.cumsum(gaps).tolist())
        q = math.exp(-beta)
        killed = np.zeros(n)
        free = np.zeros(n)
        for steps in range(2**n):
            s, w = 0, 1.0
            for k in range(n):
                s += 1 if (steps >> k) & 1 else -1
                if s <= 0:
                    break
                if s in traps:
                    w *= q
                if s == x:
                    killed[k] += w / 2**n
                    free[k] += 1 / 2**n
                    break
        return np.cumsum(killed), np.cumsum(free)

    def test_enumeration(self):
        gaps = [2, 1, 3]
        for x in (1, 3, 4):
            n = 12
            k, f = self._brute_cdfs(gaps, x, n, 1.0)
            env = Environment.from_gaps(gaps)
            cmp_ = fkg_compare(env, x, n, 1.0)
            np.testing.assert_allclose(cmp_.cdf_killed, k / math.exp(log_hit_probability(env, x, 1.0)), atol=1e-12)
            np.testing.assert_allclose(cmp_.cdf_free, f * 2 * x, atol=1e-12)

    def test_free_cdf_tends_to_one(self):
        cmp_ = fkg_compare(Environment.from_gaps([6]), 6, 2000, 1.0)
        assert cmp_.cdf_free[-1] == pytest.approx(1.0, abs=1e-6)
        assert cmp_.cdf_killed[-1] == pytest.approx(1.0, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=1, max_size=8), st.integers(1, 20), st.sampled_from([0.5, 2.0]))
    def test_domination(self, gaps, x, beta):
        env = Environment.from_gaps(list(gaps) + [20])
        cmp_ = fkg_compare(env, x, 150, beta)
        assert np.all(cmp_.cdf_killed >= cmp_.cdf_free - 1e-12)
