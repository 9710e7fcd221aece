"""Limiting law of the rescaled free energy.

The limit is ``F = min over points (x, y) of a Poisson process`` of the score
``psi(x, y) = lam * x + pi**2 / (2 * y**2)``, where the process has intensity
``dx * c * gamma * y**-(gamma+1) dy`` on ``[0, inf) x (0, inf)``.  Here ``c`` is
the ``c_tau`` field of :class:`LimitParams`: the mass of the process above level
``y`` per unit length of ``x`` is ``c * y**-gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import PointMeasure
from .errors import EmptyMeasure, ValidationError
from .seeding import stream

__all__ = [
    "LimitParams",
    "LimitSample",
    "LimitBatch",
    "psi_value",
    "infimum_over_measure",
    "sample_ppp",
    "sample_limit_F",
    "sample_limit_many",
    "limit_tail_cdf",
    "limit_cdf",
    "limit_quantile",
    "limit_inverse_sample",
]

_PI2_HALF = math.pi**2 / 2.0


@dataclass(frozen=True)
class LimitParams:
    lam: float
    gamma: float
    c_tau: float

    def __post_init__(self):
        for name in ("lam", "gamma", "c_tau"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(f"{name} must be positive and finite, got {v}")
            object.__setattr__(self, name, v)

    @property
    def tail_scale(self) -> float:
        """``c / (lam * pi**gamma * (gamma + 2))``, the constant of the closed-form tail."""
        return self.c_tau / (self.lam * math.pi**self.gamma * (self.gamma + 2.0))


@dataclass(frozen=True)
class LimitSample:
    f_value: float
    minimizer: tuple[float, float]
    points_examined: int
    ties: int = 0


@dataclass(frozen=True, eq=False)
class LimitBatch:
    """Vectorised output of :func:`sample_limit_many`."""

    f: np.ndarray
    x_star: np.ndarray
    y_star: np.ndarray
    points_examined: np.ndarray
    ties: np.ndarray


def psi_value(params: LimitParams, x, y):
    """Score ``lam * x + pi**2 / (2 y**2)``; vectorised over ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise ValidationError("y must be positive")
    out = params.lam * x + _PI2_HALF / (y * y)
    return float(out) if out.ndim == 0 else out


def infimum_over_measure(params: LimitParams, mu: PointMeasure, window=None):
    """Minimum score over the points of ``mu``.

    Parameters
    ----------
    window : tuple, optional
        ``(x_lo, x_hi, y_lo, y_hi)``; only points inside the closed box count.

    Returns
    -------
    value : float
    argmin : tuple of float
        Minimiser; ties are broken by smallest ``x`` then smallest ``y``.
    ties : int
        Number of other points attaining exactly the same score.
    """
    if window is not None:
        mu = mu.restrict(*window)
    if len(mu) == 0:
        raise EmptyMeasure("no points in the measure (or in the window)")
    vals = psi_value(params, mu.x, mu.y)
    vals = np.atleast_1d(vals)
    best = vals.min()
    cand = np.flatnonzero(vals == best)
    order = np.lexsort((mu.y[cand], mu.x[cand]))
    k = cand[order[0]]
    return float(best), (float(mu.x[k]), float(mu.y[k])), int(cand.size - 1)


def _pareto_between(rng, y_lo, y_hi, gamma, size):
    """Inverse transform for density proportional to ``y**-(gamma+1)`` on ``[y_lo, y_hi)``."""
    a = y_lo ** -gamma
    b = 0.0 if np.all(np.isinf(y_hi)) else np.where(np.isinf(y_hi), 0.0, y_hi ** -gamma)
    u = rng.random(size)
    return (a - u * (a - b)) ** (-1.0 / gamma)


def sample_ppp(params: LimitParams, x_max: float, y_min: float, rng: np.random.Generator) -> PointMeasure:
    """All points of the Poisson process inside ``[0, x_max) x [y_min, inf)``."""
    if x_max <= 0 or y_min <= 0:
        raise ValidationError("x_max and y_min must be positive")
    count = rng.poisson(params.c_tau * x_max * y_min ** -params.gamma)
    x = rng.random(count) * x_max
    y = _pareto_between(rng, y_min, np.inf, params.gamma, count)
    return PointMeasure(x, y)


def _reveal_points(params, count, rng, box_scale):
    """Revealed points of ``count`` independent samples.

    Returns ``(owner, x, y, u0)`` where ``owner`` tells which sample each
    point belongs to; the first ``count`` points are the stage-one points.
    """
    lam, g, c = params.lam, params.gamma, params.c_tau
    x1 = rng.exponential(1.0 / c, count)
    y1 = (1.0 - rng.random(count)) ** (-1.0 / g)
    u0 = lam * x1 + _PI2_HALF / (y1 * y1)

    x_hi = box_scale * u0 / lam
    y_lo = math.pi / np.sqrt(2.0 * box_scale * u0)
    # rectangle A: [0, x1) x [y_lo, 1), only where y_lo < 1
    has_a = y_lo < 1.0
    mass_a = np.where(has_a, c * x1 * (np.minimum(y_lo, 1.0) ** -g - 1.0), 0.0)
    # rectangle B: [x1, x_hi) x [y_lo, inf)
    mass_b = c * (x_hi - x1) * y_lo ** -g
    n_a = rng.poisson(mass_a)
    n_b = rng.poisson(mass_b)

    own_a = np.repeat(np.arange(count), n_a)
    xa = rng.random(own_a.size) * x1[own_a]
    ya = _pareto_between(rng, y_lo[own_a], np.ones(own_a.size), g, own_a.size)
    own_b = np.repeat(np.arange(count), n_b)
    xb = x1[own_b] + rng.random(own_b.size) * (x_hi[own_b] - x1[own_b])
    yb = _pareto_between(rng, y_lo[own_b], np.full(own_b.size, np.inf), g, own_b.size)

    owner = np.concatenate([np.arange(count), own_a, own_b])
    xs = np.concatenate([x1, xa, xb])
    ys = np.concatenate([y1, ya, yb])
    return owner, xs, ys, u0


def sample_limit_many(params: LimitParams, count: int, seed: int, box_scale: float = 1.0) -> LimitBatch:
    """``count`` exact independent samples of the limit ``F``.

    Stage one reveals, for each sample, the left-most point with ``y >= 1``;
    its score ``u0`` bounds ``F`` from above.  Any point beating ``u0`` lies in
    the box ``[0, u0/lam] x [pi/sqrt(2 u0), inf)``.  Of that box, the part
    ``[0, x1) x [1, inf)`` is known to be empty, so stage two samples the
    Poisson points of at most two rectangles:

    * ``[0, x1) x [y_lo, 1)`` when ``y_lo < 1``,
    * ``[x1, x_hi) x [y_lo, inf)``,

    with ``x_hi = box_scale * u0 / lam`` and
    ``y_lo = pi / sqrt(2 * box_scale * u0)``.  ``box_scale >= 1`` enlarges the
    box, which cannot change the result.  The closed-form law is not used.
    """
    count = int(count)
    if count < 1:
        raise ValidationError("count must be at least 1")
    if box_scale < 1:
        raise ValidationError("box_scale must be at least 1")
    owner, xs, ys, _ = _reveal_points(params, count, stream(seed, "limit"), box_scale)
    lam = params.lam
    vals = lam * xs + _PI2_HALF / (ys * ys)
    # sort by sample, then score, then x, then y; the first entry per sample wins
    order = np.lexsort((ys, xs, vals, owner))
    first = np.searchsorted(owner[order], np.arange(count))
    win = order[first]
    f = vals[win]
    ties = np.zeros(count, dtype=np.int64)
    np.add.at(ties, owner, (vals == f[owner]).astype(np.int64))
    examined = np.bincount(owner, minlength=count)
    return LimitBatch(f, xs[win], ys[win], examined, ties - 1)


def sample_limit_F(params: LimitParams, seed: int, box_scale: float = 1.0) -> LimitSample:
    """One exact sample of the limit ``F`` (see :func:`sample_limit_many`)."""
    b = sample_limit_many(params, 1, seed, box_scale)
    return LimitSample(float(b.f[0]), (float(b.x_star[0]), float(b.y_star[0])), int(b.points_examined[0]), int(b.ties[0]))


def limit_tail_cdf(params: LimitParams, u):
    """Closed form ``P(F >= u) = exp(-tail_scale * (2u)**(gamma/2 + 1))``."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(np.isnan(u)):
        raise ValidationError("u must be non-negative")
    out = np.exp(-params.tail_scale * (2.0 * u) ** (params.gamma / 2.0 + 1.0))
    return float(out) if out.ndim == 0 else out


def limit_cdf(params: LimitParams, u):
    """``P(F <= u)``; the law is continuous so this is ``1 - P(F >= u)``."""
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    out = -np.expm1(-params.tail_scale * (2.0 * u) ** (params.gamma / 2.0 + 1.0))
    return float(out) if out.ndim == 0 else out


def limit_quantile(params: LimitParams, prob):
    """Inverse of :func:`limit_cdf`."""
    prob = np.asarray(prob, dtype=float)
    if np.any((prob < 0) | (prob >= 1)):
        raise ValidationError("probabilities must lie in [0, 1)")
    e = -np.log1p(-prob)
    out = 0.5 * (e / params.tail_scale) ** (2.0 / (params.gamma + 2.0))
    return float(out) if out.ndim == 0 else out


def limit_inverse_sample(params: LimitParams, count: int, seed: int) -> np.ndarray:
    """Samples of ``F`` by inverting the closed-form tail (cross-check route)."""
    rng = stream(seed, "mc")
    e = rng.standard_exponential(int(count))
    return 0.5 * (e / params.tail_scale) ** (2.0 / (params.gamma + 2.0))
