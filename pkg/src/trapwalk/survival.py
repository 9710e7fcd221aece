"""Quenched survival of a simple random walk among soft traps.

Every visit to a trap site costs a factor ``exp(-beta)``.  The survival mass

    Z_n = E[exp(-beta * #{1 <= k <= n : S_k is a trap}) ; S_k > 0 for k <= n]

is computed exactly by forward dynamic programming, crossing costs by a
gap-wise sweep of the harmonic recurrence, and the remaining routines provide
the confinement and hitting-time quantities used by the diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .env import Environment, GapLaw, sample_covering, sample_environment
from .errors import EnvironmentTooShort, IndexOrder, TruncationTooCoarse, ValidationError
from .seeding import stream

__all__ = [
    "SurvivalParams",
    "SurvivalResult",
    "CrossingResult",
    "ConfinedResult",
    "FkgComparison",
    "LambdaSequence",
    "TwoSidedEstimate",
    "log_survival_probability",
    "survival_for_seed",
    "log_survival_lower_bound",
    "crossing_probability",
    "crossing_costs",
    "lambda_profile",
    "lambda_sequence",
    "log_hit_probability",
    "confined_survival_probability",
    "small_ball_rate",
    "fkg_compare",
    "lambda_two_sided",
    "scale_length",
]

EXACT_HORIZON = 100_000
DEFAULT_PRUNED_THRESHOLD = 1e-280
_BETA_MAX = 700.0


def _check_beta(beta, allow_zero=True):
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0 or (beta == 0 and not allow_zero):
        raise ValidationError(f"beta must be {'non-negative' if allow_zero else 'positive'} and finite, got {beta}")
    if beta > _BETA_MAX:
        raise ValidationError(f"beta above {_BETA_MAX} is not supported")
    return beta


@dataclass(frozen=True)
class SurvivalParams:
    """Inputs of :func:`log_survival_probability`.

    ``drop_threshold`` is relative to a certified lower bound on ``Z_n``: a
    window end is discarded once its mass is below ``drop_threshold`` times
    that bound.  ``None`` selects exact evaluation up to ``n = 1e5`` and
    ``1e-280`` beyond.
    """

    beta: float
    n: int
    drop_threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_beta(self.beta))
        n = int(self.n)
        if n != self.n or n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", n)
        if self.drop_threshold is not None:
            thr = float(self.drop_threshold)
            if not (0.0 <= thr < 1.0):
                raise ValidationError("drop_threshold must lie in [0, 1)")
            object.__setattr__(self, "drop_threshold", thr)

    @property
    def threshold(self) -> float:
        if self.drop_threshold is not None:
            return self.drop_threshold
        return 0.0 if self.n <= EXACT_HORIZON else DEFAULT_PRUNED_THRESHOLD


@dataclass(frozen=True)
class SurvivalResult:
    log_z: float
    free_energy: float
    scale_N: float
    log_error_bound: float
    n: int
    beta: float
    window: int

    def to_record(self, gamma=None, seed=None) -> dict:
        return {
            "gamma": gamma,
            "beta": self.beta,
            "n": self.n,
            "N": self.scale_N,
            "log_z": self.log_z,
            "free_energy": self.free_energy,
            "log_error_bound": self.log_error_bound,
            "seed": seed,
        }


@dataclass(frozen=True)
class CrossingResult:
    log_p: float
    per_trap_cost: float


@dataclass(frozen=True)
class ConfinedResult:
    log_p: float
    rate: float


@dataclass(frozen=True, eq=False)
class FkgComparison:
    """Conditional CDFs of the hitting time of ``x`` for ``m = 1 .. n``."""

    m: np.ndarray
    cdf_killed: np.ndarray
    cdf_free: np.ndarray


@dataclass(frozen=True, eq=False)
class LambdaSequence:
    ell: np.ndarray
    value: np.ndarray

    @property
    def estimate(self) -> float:
        return float(self.value[-1])


@dataclass(frozen=True, eq=False)
class TwoSidedEstimate:
    value: float
    stderr: float
    truncation_bound: float
    samples: int
    left_truncation: int
    per_sample: np.ndarray


def scale_length(n: float, gamma: float) -> float:
    """``n ** (gamma / (gamma + 2))``, the free-energy normalisation."""
    return float(n) ** (gamma / (gamma + 2.0))


def _trap_factors(env: Environment, beta: float, upto: int) -> np.ndarray:
    c = np.ones(upto + 1)
    pos = env.positions[env.positions <= upto]
    c[pos] = math.exp(-beta)
    return c


def _block_size(beta: float) -> int:
    # keeps the spread inside one block below ~300 nats
    return int(min(64, max(4, int(300.0 / (math.log(2.0) + beta)))))


def crossing_costs(env: Environment, beta: float, start: int = 0, count_arrival: bool = True) -> np.ndarray:
    """``Z(start, start + k) = -log P`` for ``k = 1 .. m - start``.

    ``P`` is the probability, from trap ``start``, to reach trap
    ``start + k`` before returning to ``start`` and before being killed.
    """
    beta = _check_beta(beta)
    gaps = np.ascontiguousarray(env.gaps[start:])
    if gaps.size == 0:
        raise ValidationError("no gaps to the right of the start index")
    log_u = _kernels.crossing_sweep(gaps, math.exp(beta))[0]
    arrival = beta if count_arrival else 0.0
    return math.log(2.0) + arrival + log_u


def crossing_probability(
    env: Environment, i: int, j: int, beta: float, count_arrival: bool = True
) -> CrossingResult:
    """Probability to reach trap ``j`` from trap ``i`` before returning or dying.

    With ``count_arrival`` (the default) the arrival at trap ``j`` must itself be
    survived, so a single gap of length ``t`` costs ``beta + log(2t)``.
    """
    i, j = int(i), int(j)
    if i >= j:
        raise IndexOrder(f"need i < j, got i={i}, j={j}")
    if i < 0 or j > env.count:
        raise ValidationError(f"indexes must satisfy 0 <= i < j <= {env.count}")
    beta = _check_beta(beta)
    gaps = np.ascontiguousarray(env.gaps[i:j])
    log_u = _kernels.crossing_sweep(gaps, math.exp(beta))[0][-1]
    log_p = -math.log(2.0) - (beta if count_arrival else 0.0) - log_u
    return CrossingResult(log_p, -log_p / (j - i))


def lambda_profile(env: Environment, beta: float, count_arrival: bool = True) -> np.ndarray:
    """Per-trap crossing costs ``lambda(l, beta)`` for ``l = 1 .. m``."""
    z = crossing_costs(env, beta, 0, count_arrival)
    return z / np.arange(1, z.size + 1)


def lambda_sequence(
    law: GapLaw, beta: float, ell_max: int, seed: int, *index: int, count_arrival: bool = True
) -> LambdaSequence:
    """Crossing costs ``lambda(l, beta)`` along the environment of ``(seed, *index)``."""
    ell_max = int(ell_max)
    if ell_max < 1:
        raise ValidationError("ell_max must be at least 1")
    env = sample_environment(law, ell_max, seed, *index)
    return LambdaSequence(np.arange(1, ell_max + 1), lambda_profile(env, beta, count_arrival))


def log_hit_probability(env: Environment, x: int, beta: float, count_arrival: bool = True) -> float:
    """``log P_0(H_x < H_0, survive)`` for any site ``x >= 1``.

    Arrival at ``x`` costs ``exp(-beta)`` when ``x`` is a trap and
    ``count_arrival`` is set.
    """
    x = int(x)
    if x < 1:
        raise ValidationError("x must be at least 1")
    if x > env.last_position:
        raise EnvironmentTooShort(f"site {x} lies beyond the last trap {env.last_position}", x)
    beta = _check_beta(beta)
    j = int(np.searchsorted(env.positions, x, side="right")) - 1
    if env.positions[j] == x:
        gaps = np.ascontiguousarray(env.gaps[:j])
        log_u = _kernels.crossing_sweep(gaps, math.exp(beta))[0][-1]
        return -math.log(2.0) - (beta if count_arrival else 0.0) - log_u
    gaps = np.ascontiguousarray(env.gaps[: j + 1])
    _, log_scale, ps, qs = _kernels.crossing_sweep(gaps, math.exp(beta))
    d = x - int(env.positions[j])
    u = ps[j] + d * (qs[j] - ps[j])
    return -math.log(2.0) - log_scale[j] - math.log(u)


def log_survival_lower_bound(env: Environment, beta: float, n: int) -> float:
    """Certified lower bound on ``log Z_n`` from single-gap strategies.

    For each gap ``l`` the walk first reaches ``x = tau_{l-1}`` before time
    ``n`` and then stays inside gap ``l``.  Hitting ``x`` before returning to
    0 costs ``exp(-Z(0, l-1))``; given that event the killed hitting time is
    stochastically smaller than the free one, whose conditional mean is
    ``1 + (x**2 - 1)/3``, so Markov's inequality bounds the probability of
    arriving by time ``n``.  Staying ``k`` steps in a gap of length ``T``
    after entering at its edge has probability at least
    ``sin(pi/T) * cos(pi/T)**k``.  Returns ``-inf`` when no strategy applies.
    """
    beta = _check_beta(beta)
    n = int(n)
    if n == 1:
        return math.log(0.5) - (beta if env.gaps[0] == 1 else 0.0)
    reach = math.sqrt(3.0 * (n + 1)) + 1.0
    cnt = int(np.searchsorted(env.positions, reach, side="right"))
    cnt = max(1, min(cnt, env.count))
    gaps = env.gaps[:cnt].astype(float)
    x = env.positions[:cnt].astype(float)
    cost = np.zeros(cnt)
    if cnt > 1:
        cost[1:] = crossing_costs(env.prefix(cnt - 1), beta)
    mean_hit = 1.0 + (x * x - 1.0) / 3.0
    markov = np.where(np.arange(cnt) == 0, 1.0, 1.0 - mean_hit / (n + 1.0))
    ok = (gaps >= 3) & (markov > 0)
    if not np.any(ok):
        return -math.inf
    g, mk, cs = gaps[ok], markov[ok], cost[ok]
    vals = -cs + np.log(mk) + np.log(0.5 * np.sin(np.pi / g)) + (n - 1) * np.log(np.cos(np.pi / g))
    return float(np.max(vals))


def log_survival_probability(
    env: Environment, params: SurvivalParams, gamma: float | None = None
) -> SurvivalResult:
    """Exact ``log Z_n`` for a fixed environment.

    The forward recursion only touches sites of the parity of the current
    step and keeps one log-scale per block of sites.  With a positive
    threshold, window ends whose mass falls below ``threshold`` times a
    certified lower bound on ``Z_n`` are dropped; the dropped mass can only
    shrink afterwards, so ``log_error_bound = log(1 + dropped / Z)`` bounds the
    error of ``log_z``.

    Raises
    ------
    EnvironmentTooShort
        If the walk can reach sites beyond the last sampled trap.
    """
    n, beta = params.n, params.beta
    if gamma is None:
        gamma = env.gamma
    upto = min(env.last_position, n)
    c = _trap_factors(env, beta, upto)
    thr = params.threshold
    log_cut = -math.inf
    if thr > 0.0:
        log_cut = math.log(thr) + log_survival_lower_bound(env, beta, n)
    if n == 1:
        log_z, log_lost, reach = math.log(0.5 * c[1]), -math.inf, 1
    else:
        log_z, log_lost, reach = _kernels.survival_dp(c, n, _block_size(beta), log_cut)
    if math.isnan(log_z):
        raise EnvironmentTooShort(
            f"the walk reaches site {reach} beyond the last trap {env.last_position}", reach
        )
    bound = 0.0 if log_lost == -math.inf else float(np.logaddexp(0.0, log_lost - log_z))
    N = scale_length(n, gamma) if gamma is not None else math.nan
    return SurvivalResult(
        log_z=float(log_z),
        free_energy=-float(log_z) / N,
        scale_N=N,
        log_error_bound=bound,
        n=n,
        beta=beta,
        window=int(reach),
    )


def survival_for_seed(
    law: GapLaw, params: SurvivalParams, seed: int, *index: int, reach: int | None = None
) -> tuple[SurvivalResult, Environment]:
    """Sample the environment of ``(seed, *index)`` and evaluate ``log Z_n`` on it.

    The environment is drawn long enough to cover ``reach`` sites (default:
    ``n + 1`` in exact mode, a few thousand sites otherwise) and extended from
    the same stream whenever the walk could see past its last trap, so the
    result never depends on the initial length.
    """
    if reach is None:
        n = params.n
        reach = n + 1 if params.threshold == 0.0 else int(min(n + 1, max(2000, 10 * math.isqrt(n))))
    env = sample_covering(law, reach, seed, *index)
    while True:
        try:
            return log_survival_probability(env, params), env
        except EnvironmentTooShort as exc:
            reach = max(2 * reach, exc.reach + 1)
            env = sample_covering(law, reach, seed, *index)


def small_ball_rate(t: int) -> float:
    """Decay rate ``-log cos(pi/t)`` of staying strictly inside a gap of length ``t``."""
    if int(t) != t or t < 3:
        raise ValidationError(f"t must be an integer >= 3, got {t!r}")
    return -math.log(math.cos(math.pi / t))


def _confinement_rate(t) -> np.ndarray:
    """Vectorised small-ball rate, ``inf`` for gaps of length 1 or 2."""
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, np.inf)
    ok = t >= 3
    out[ok] = -np.log(np.cos(np.pi / t[ok]))
    return out


def confined_survival_probability(t: int, n: int) -> ConfinedResult:
    """Probability that the walk from 0 avoids ``0`` and ``+-t`` during steps ``1..n``.

    Also returns the two-step ratio estimate ``-log(P_n / P_{n-2}) / 2`` of
    the exponential decay rate (``nan`` for ``n < 2``).
    """
    if int(t) != t or t < 2:
        raise ValidationError("t must be an integer >= 2")
    if int(n) != n or n < 1:
        raise ValidationError("n must be a positive integer")
    t, n = int(t), int(n)
    logs = _kernels.interval_log_mass(t, n)
    rate = math.nan
    if n >= 2:
        if logs[n] == -math.inf:
            rate = math.inf
        else:
            rate = -0.5 * (logs[n] - logs[n - 2])
    return ConfinedResult(float(logs[n]), float(rate))


def _arrival_log_profile(c: np.ndarray, n: int) -> np.ndarray:
    """``log P(H_x = m, survive, no return to 0)`` for ``m = 1..n``; ``x = len(c) - 1``."""
    x = c.size - 1
    w = np.zeros(x + 1)
    w[0] = 1.0
    log_scale = 0.0
    out = np.full(n, -np.inf)
    for m in range(1, n + 1):
        arrive = 0.5 * w[x - 1] * c[x]
        new = np.zeros(x + 1)
        new[1:x] = 0.5 * (w[0 : x - 1] + w[2 : x + 1]) * c[1:x]
        if arrive > 0:
            out[m - 1] = math.log(arrive) + log_scale
        top = new.max()
        if top == 0.0:
            break
        w = new / top
        log_scale += math.log(top)
    return out


def fkg_compare(env: Environment, x: int, n: int, beta: float) -> FkgComparison:
    """Hitting-time CDFs of ``x`` with and without killing, each conditioned on success.

    ``cdf_killed[m-1] = P(H_x <= m | H_x < H_0 and survive)`` and
    ``cdf_free[m-1] = P(H_x <= m | H_x < H_0)`` for the free walk.
    """
    x, n = int(x), int(n)
    if x < 1:
        raise ValidationError("x must be at least 1")
    if n < 1:
        raise ValidationError("n must be at least 1")
    if x > env.last_position:
        raise EnvironmentTooShort(f"site {x} lies beyond the last trap", x)
    beta = _check_beta(beta)
    c = _trap_factors(env, beta, x)
    killed = np.exp(np.logaddexp.accumulate(_arrival_log_profile(c, n)) - log_hit_probability(env, x, beta))
    free = np.exp(np.logaddexp.accumulate(_arrival_log_profile(np.ones(x + 1), n)) + math.log(2.0 * x))
    return FkgComparison(np.arange(1, n + 1), killed, free)


def lambda_two_sided(
    law: GapLaw,
    beta: float,
    samples: int,
    left_truncation: int,
    seed: int,
    tolerance: float = 1e-6,
) -> TwoSidedEstimate:
    """Monte Carlo estimate of the crossing cost from a stationary two-sided view.

    Each sample draws one right gap ``t`` and ``left_truncation`` gaps to the
    left of the origin.  The walk starts at the origin (itself a trap) and must
    reach ``t`` before being killed; every left trap, the origin included, is
    soft and the left-most one is made absorbing.  Escaping past it requires
    ``left_truncation`` trap visits, so the ignored mass is at most
    ``exp(-beta * left_truncation)``; the per-sample error on ``-log P`` is
    therefore at most ``log(1 + exp(-beta*K) / P)``.

    Raises
    ------
    TruncationTooCoarse
        If that bound exceeds ``tolerance`` for any sample.
    """
    beta = _check_beta(beta, allow_zero=False)
    samples, k = int(samples), int(left_truncation)
    if samples < 1 or k < 1:
        raise ValidationError("samples and left_truncation must be positive")
    rng = stream(seed, "mc")
    right = law.sample(rng, samples)
    left = law.sample(rng, samples * k).reshape(samples, k)
    log_p = _kernels.two_sided_log_p(left, right, beta)
    bound = float(np.max(np.logaddexp(0.0, -beta * k - log_p)))
    if bound > tolerance:
        raise TruncationTooCoarse(
            f"left truncation {k} leaves an error up to {bound:.3g} > tolerance {tolerance:.3g}"
        )
    costs = -log_p
    stderr = float(costs.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return TwoSidedEstimate(float(costs.mean()), stderr, bound, samples, k, costs)
