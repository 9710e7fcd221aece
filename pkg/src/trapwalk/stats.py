"""Experiments and statistical checks built on the numerical modules."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .env import Environment, GapLaw, compute_records
from .errors import NumericalGuaranteeError, ValidationError
from .limit import LimitParams, limit_cdf, limit_quantile
from .seeding import stream
from .survival import (
    SurvivalParams,
    _confinement_rate,
    crossing_costs,
    lambda_profile,
    scale_length,
    survival_for_seed,
)

__all__ = [
    "KsResult",
    "dkw_band",
    "ks_distance",
    "ks_two_sample",
    "LambdaEstimate",
    "lambda_estimate",
    "GapScore",
    "gap_score_profile",
    "record_counts",
    "records_statistics",
    "record_product_check",
    "ExperimentConfig",
    "convergence_experiment",
    "report_to_csv",
    "content_hash",
]


# -- KS / DKW ---------------------------------------------------------------


@dataclass(frozen=True)
class KsResult:
    statistic: float
    band: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.band


def dkw_band(m: int, alpha: float = 0.01) -> float:
    """Half-width ``sqrt(log(2/alpha) / (2m))`` of the DKW confidence band."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * m))


def ks_distance(sample, cdf, alpha: float = 0.01) -> KsResult:
    """Sup distance between the empirical CDF of a sorted sample and ``cdf``.

    Raises
    ------
    ValidationError
        If the sample is empty or not sorted in non-decreasing order.
    """
    x = np.asarray(sample, dtype=float)
    m = x.size
    if m == 0:
        raise ValidationError("sample must be non-empty")
    if np.any(np.diff(x) < 0):
        raise ValidationError("sample must be sorted")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, m + 1)
    d = max(float(np.max(i / m - f)), float(np.max(f - (i - 1) / m)))
    return KsResult(d, dkw_band(m, alpha))


def ks_two_sample(a, b, alpha: float = 0.01) -> KsResult:
    """Two-sample KS statistic with its asymptotic critical value.

    The critical value is ``sqrt(log(2/alpha) (n+m) / (2 n m))``; the result
    is symmetric in its arguments.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValidationError("samples must be non-empty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n, m = a.size, b.size
    crit = math.sqrt(math.log(2.0 / alpha) * (n + m) / (2.0 * n * m))
    return KsResult(d, crit)


# -- crossing-cost estimation ---------------------------------------------


@dataclass(frozen=True, eq=False)
class LambdaEstimate:
    value: float
    stderr: float
    ell: int
    values: np.ndarray

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "ell": self.ell, "values": self.values.tolist()}


def lambda_estimate(law: GapLaw, beta: float, ell: int, env_count: int, seed: int) -> LambdaEstimate:
    """Average of ``lambda(ell, beta)`` over independent environments.

    Environment ``j`` comes from the ``"mc"`` stream of ``(seed, j)``, which
    keeps these draws apart from the experiment environments.
    """
    if env_count < 1:
        raise ValidationError("env_count must be positive")
    vals = np.empty(env_count)
    for j in range(env_count):
        rng = stream(seed, "mc", j)
        env = Environment.from_gaps(law.sample(rng, int(ell)), law, seed)
        vals[j] = lambda_profile(env, beta)[-1]
    se = float(vals.std(ddof=1) / math.sqrt(env_count)) if env_count > 1 else math.inf
    return LambdaEstimate(float(vals.mean()), se, int(ell), vals)


# -- gap scores -------------------------------------------------------------


@dataclass(frozen=True)
class GapScore:
    ell: int
    score: float
    is_argmin: bool


def gap_score_profile(env: Environment, beta: float, n: int, lambda_fn=None, gamma=None) -> list[GapScore]:
    """Scores ``Z(0, l-1)/N + g(T_l) n/N`` at the gaps that set a new record.

    ``Z(0, l-1)`` is the exact cost of crossing the first ``l - 1`` gaps,
    or ``(l-1) * lambda_fn(l-1)`` when ``lambda_fn`` is given; ``g`` is the
    small-ball rate, infinite for gaps shorter than 3.  Gap ``l`` is 1-based.
    """
    if gamma is None:
        gamma = env.gamma
    if gamma is None:
        raise ValidationError("gamma is required for an environment without a law")
    rec = compute_records(env)
    ells = rec.record_indexes + 1
    big_n = scale_length(n, gamma)
    if lambda_fn is None:
        costs = np.concatenate([[0.0], crossing_costs(env, beta)])
        cross = costs[ells - 1]
    else:
        cross = np.array([0.0 if l == 1 else (l - 1) * float(lambda_fn(l - 1)) for l in ells])
    scores = cross / big_n + _confinement_rate(rec.record_gaps) * n / big_n
    best = int(np.argmin(scores))
    return [GapScore(int(l), float(s), i == best) for i, (l, s) in enumerate(zip(ells, scores))]


# -- records ----------------------------------------------------------------


def record_counts(gaps: np.ndarray) -> np.ndarray:
    """Number of strict records along the last axis (the first entry counts)."""
    g = np.asarray(gaps)
    running = np.maximum.accumulate(g, axis=-1)
    return 1 + np.sum(g[..., 1:] > running[..., :-1], axis=-1)


def _record_ratios(gaps: np.ndarray) -> np.ndarray:
    running = np.maximum.accumulate(gaps)
    is_rec = np.empty(gaps.size, dtype=bool)
    is_rec[0] = True
    is_rec[1:] = gaps[1:] > running[:-1]
    rg = gaps[is_rec].astype(float)
    return rg[:-1] / rg[1:]


def records_statistics(
    law: GapLaw,
    n: int,
    replicates: int,
    seed: int,
    b_values=(2.0, 3.0),
    ratio_u=(0.05, 0.1, 0.2),
) -> dict:
    """Distribution of the record count among ``n`` gaps over many replicates.

    Replicate ``r`` uses the ``"env"`` stream of ``(seed, r)``.  The report
    holds the empirical law of the count, its mean next to the harmonic number
    ``H_n``, tail frequencies ``P(R_n >= b log n)`` next to ``n**-c(b)`` with
    ``c(b) = 1 + b(log b - 1)``, and the frequency of record ratios
    ``T*_k / T*_{k+1} >= 1 - u`` with the smallest ``C`` such that every
    frequency is at most ``C u``.
    """
    n, replicates = int(n), int(replicates)
    if n < 1 or replicates < 1:
        raise ValidationError("n and replicates must be positive")
    counts = np.empty(replicates, dtype=np.int64)
    ratio_hits = np.zeros(len(ratio_u), dtype=np.int64)
    ratio_total = 0
    for r in range(replicates):
        g = law.sample(stream(seed, "env", r), n)
        counts[r] = record_counts(g)
        ratios = _record_ratios(g)
        ratio_total += ratios.size
        for i, u in enumerate(ratio_u):
            ratio_hits[i] += int(np.sum(ratios >= 1.0 - u))
    values, freq = np.unique(counts, return_counts=True)
    harmonic = float(np.sum(1.0 / np.arange(1, n + 1)))
    tails = []
    for b in b_values:
        c = 1.0 + b * (math.log(b) - 1.0)
        tails.append(
            {
                "b": b,
                "threshold": b * math.log(n),
                "frequency": float(np.mean(counts >= b * math.log(n))),
                "reference": n ** -c,
                "exponent": c,
            }
        )
    ratio_freq = ratio_hits / max(ratio_total, 1)
    return {
        "law": law.kind,
        "gamma": law.gamma,
        "n": n,
        "replicates": replicates,
        "seed": seed,
        "distribution": {int(v): int(f) for v, f in zip(values, freq)},
        "mean": float(counts.mean()),
        "harmonic": harmonic,
        "tail": tails,
        "ratio_tail": [{"u": u, "frequency": float(f)} for u, f in zip(ratio_u, ratio_freq)],
        "ratio_constant": float(max(f / u for u, f in zip(ratio_u, ratio_freq))),
        "ratio_pairs": int(ratio_total),
    }


def record_product_check(values=(1, 2, 3), n: int = 5):
    """Exact check of ``E[I_{n_1} ... I_{n_p}] <= 1/(n_1 ... n_p)``.

    ``I_j`` indicates that gap ``j`` (1-based) strictly exceeds every earlier
    gap.  Gaps are uniform on ``values``; every sequence of length ``n`` and
    every non-empty index subset is enumerated in rational arithmetic.

    Returns
    -------
    worst : Fraction
        Largest value of ``E[prod I] - prod 1/n_j`` over all subsets.
    subsets : int
        Number of subsets checked.
    """
    total = Fraction(0)
    sums = {}
    prob = Fraction(1, len(values) ** n)
    subsets = [s for k in range(1, n + 1) for s in itertools.combinations(range(1, n + 1), k)]
    for seq in itertools.product(values, repeat=n):
        rec = set()
        best = -math.inf
        for j, t in enumerate(seq, start=1):
            if t > best:
                rec.add(j)
                best = t
        for s in subsets:
            if rec.issuperset(s):
                sums[s] = sums.get(s, Fraction(0)) + prob
        total += prob
    worst = None
    for s in subsets:
        bound = Fraction(1)
        for j in s:
            bound /= j
        diff = sums.get(s, Fraction(0)) - bound
        worst = diff if worst is None or diff > worst else worst
    return worst, len(subsets)


# -- convergence experiment -----------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of :func:`convergence_experiment`.

    With ``lambda_source="estimated"`` the crossing cost fed to the limit law
    is the mean of ``lambda(lambda_ell, beta)`` over ``lambda_envs``
    environments; with ``"provided"`` it is ``lambda_value``.
    """

    gamma: float
    beta: float
    n_grid: tuple
    env_count: int
    seed: int
    lambda_source: str = "estimated"
    lambda_value: float | None = None
    law: str = "pareto"
    lambda_ell: int = 10_000
    lambda_envs: int = 8
    drop_threshold: float = 1e-280
    alpha: float = 0.01

    def __post_init__(self):
        grid = tuple(int(v) for v in self.n_grid)
        if len(grid) == 0 or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ValidationError("n_grid must be a strictly increasing list of positive integers")
        object.__setattr__(self, "n_grid", grid)
        if int(self.env_count) < 2:
            raise ValidationError("env_count must be at least 2")
        if not (float(self.beta) > 0) or not np.isfinite(self.beta):
            raise ValidationError("beta must be positive")
        if self.lambda_source not in ("estimated", "provided"):
            raise ValidationError("lambda_source must be 'estimated' or 'provided'")
        if self.lambda_source == "provided" and (self.lambda_value is None or not self.lambda_value > 0):
            raise ValidationError("a positive lambda_value is required when lambda_source='provided'")
        GapLaw(self.gamma, self.law)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        return d


def content_hash(obj) -> str:
    """SHA-256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _run_environment(task):
    cfg, index = task
    law = GapLaw(cfg.gamma, cfg.law)
    out = {"index": index, "free_energy": [], "log_error_bound": [], "min_gap_score": [], "argmin_ell": []}
    reach = None
    try:
        for n in cfg.n_grid:
            params = SurvivalParams(cfg.beta, n, cfg.drop_threshold)
            res, env = survival_for_seed(law, params, cfg.seed, index, reach=reach)
            reach = env.last_position
            scores = gap_score_profile(env, cfg.beta, n)
            best = min(scores, key=lambda s: s.score)
            out["free_energy"].append(res.free_energy)
            out["log_error_bound"].append(res.log_error_bound)
            out["min_gap_score"].append(best.score)
            out["argmin_ell"].append(best.ell)
    except NumericalGuaranteeError as exc:  # partial results are kept
        out["error"] = str(exc)
    return out


def convergence_experiment(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Compare the law of ``F_n`` over environments with the limit law.

    For every environment index ``j < env_count`` the environment is the
    ``"env"`` stream of ``(seed, j)``, extended on demand, and ``F_n`` is
    computed for every ``n`` in the grid.  Results are keyed by ``j`` and
    therefore identical for any number of worker processes.
    """
    law = GapLaw(config.gamma, config.law)
    if config.lambda_source == "estimated":
        lam_est = lambda_estimate(law, config.beta, config.lambda_ell, config.lambda_envs, config.seed)
        lam = lam_est.value
        lam_info = {"source": "estimated", **lam_est.to_dict()}
    else:
        lam = float(config.lambda_value)
        lam_info = {"source": "provided", "value": lam}
    params = LimitParams(lam, config.gamma, law.tail_constant)

    tasks = [(config, j) for j in range(config.env_count)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_environment, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_run_environment(t) for t in tasks]
    rows.sort(key=lambda r: r["index"])
    failures = [r for r in rows if "error" in r]

    q_lo, q_hi = limit_quantile(params, [0.2, 0.8])
    per_n = []
    for k, n in enumerate(config.n_grid):
        vals = np.sort([r["free_energy"][k] for r in rows if len(r["free_energy"]) > k])
        ks = ks_distance(vals, lambda u: limit_cdf(params, u), config.alpha)
        gaps = [r["min_gap_score"][k] - r["free_energy"][k] for r in rows if len(r["free_energy"]) > k]
        per_n.append(
            {
                "n": n,
                "N": scale_length(n, config.gamma),
                "count": int(vals.size),
                "ks": ks.statistic,
                "dkw_band": ks.band,
                "mean": float(vals.mean()),
                "median": float(np.median(vals)),
                "limit_q20": float(q_lo),
                "limit_q80": float(q_hi),
                "max_log_error_bound": float(max(r["log_error_bound"][k] for r in rows if len(r["free_energy"]) > k)),
                "min_gap_score_minus_F": float(np.min(gaps)),
            }
        )
    cfg = config.to_dict()
    return {
        "config": cfg,
        "hash": content_hash(cfg),
        "seeds": {"master": config.seed, "env_indexes": [0, config.env_count - 1]},
        "lambda": lam_info,
        "limit": {"lam": params.lam, "gamma": params.gamma, "c": params.c_tau},
        "per_n": per_n,
        "environments": rows,
        "failures": len(failures),
        "note": "KS thresholds are calibrations; no convergence rate is known",
    }


def report_to_csv(report: dict) -> str:
    """One CSV row per horizon of a convergence report."""
    buf = io.StringIO()
    keys = list(report["per_n"][0].keys()) + ["hash"]
    writer = csv.DictWriter(buf, fieldnames=keys)
    writer.writeheader()
    for row in report["per_n"]:
        writer.writerow({**row, "hash": report["hash"]})
    return buf.getvalue()
