"""Survival among periodically placed traps.

For a periodic trap set with gap pattern ``(t_1, ..., t_p)`` the survival
probability of the free walk decays like ``exp(-phi * n)``.  The rate solves
``Lambda(phi) = exp(beta)``, where ``Lambda`` is the Perron root of the
matrix of Laplace transforms of the excursion time between consecutive trap
visits.  With ``Delta = arccos(exp(-phi))``, an excursion across a gap of
length ``T`` has transform ``tan(Delta) / (2 sin(T Delta))`` and an excursion
returning to its starting trap through a gap of length ``T`` has transform
``1/2 - tan(Delta) cot(T Delta) / 2``.  Both are finite while
``T * Delta < pi``, i.e. while ``phi < -log cos(pi / T)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import PhiOutOfRange, ValidationError

__all__ = [
    "PeriodicSpec",
    "LaplaceMatrix",
    "PhiResult",
    "DecayRate",
    "delta_of_phi",
    "phi_of_delta",
    "confinement_rate",
    "laplace_matrix",
    "perron_root",
    "phi_periodic",
    "phi_homogeneous",
    "periodic_decay_rate",
]

_PHI_TOL = 1e-12
_RAYLEIGH_TOL = 1e-14


@dataclass(frozen=True)
class PeriodicSpec:
    """Gap pattern ``(t_1, ..., t_p)`` repeated forever."""

    gaps: tuple

    def __post_init__(self):
        gaps = tuple(int(t) for t in np.atleast_1d(self.gaps))
        if len(gaps) == 0:
            raise ValidationError("a periodic pattern needs at least one gap")
        if any(t < 1 for t in gaps) or any(int(t) != t for t in np.atleast_1d(self.gaps)):
            raise ValidationError("gaps must be positive integers")
        object.__setattr__(self, "gaps", gaps)

    @classmethod
    def parse(cls, text: str) -> "PeriodicSpec":
        """Build from a comma-separated list such as ``"2,3,10"``."""
        try:
            return cls(tuple(int(s) for s in text.split(",") if s.strip()))
        except ValueError as exc:
            raise ValidationError(f"cannot parse gap pattern {text!r}") from exc

    @property
    def p(self) -> int:
        return len(self.gaps)

    @property
    def period(self) -> int:
        return int(sum(self.gaps))

    @property
    def t_max(self) -> int:
        return int(max(self.gaps))

    def label(self) -> str:
        return ",".join(str(t) for t in self.gaps)


@dataclass(frozen=True, eq=False)
class LaplaceMatrix:
    phi: float
    delta: float
    entries: np.ndarray


@dataclass(frozen=True)
class PhiResult:
    phi: float
    bracket: tuple[float, float]
    perron_residual: float


@dataclass(frozen=True)
class DecayRate:
    rate: float
    error_estimate: float
    n: int


def delta_of_phi(phi: float) -> float:
    """``arctan(sqrt(exp(2 phi) - 1))``, equivalently ``arccos(exp(-phi))``."""
    return math.atan(math.sqrt(math.expm1(2.0 * phi)))


def phi_of_delta(delta: float) -> float:
    return -math.log(math.cos(delta))


def confinement_rate(t: int) -> float:
    """``-log cos(pi / t)``; infinite for ``t <= 2``."""
    return math.inf if t <= 2 else -math.log(math.cos(math.pi / t))


def _cross(t, delta):
    if delta == 0.0:
        return 0.5 / t
    return math.tan(delta) / (2.0 * math.sin(t * delta))


def _back(t, delta):
    # cos / sin rather than 1 / tan keeps the value continuous through t*delta = pi/2
    if delta == 0.0:
        return 0.5 / t
    return 0.5 * math.tan(delta) * math.cos(t * delta) / math.sin(t * delta)


def _matrix_from_delta(gaps, delta) -> np.ndarray:
    p = len(gaps)
    q = np.zeros((p, p))
    for i in range(p):
        right = gaps[i]
        left = gaps[i - 1]
        q[i, i] += 1.0 - _back(left, delta) - _back(right, delta)
        q[i, (i + 1) % p] += _cross(right, delta)
        q[i, (i - 1) % p] += _cross(left, delta)
    return q


def laplace_matrix(spec: PeriodicSpec, phi: float) -> LaplaceMatrix:
    """Matrix of excursion Laplace transforms between trap classes.

    Entry ``(i, j)`` is ``E[exp(phi * theta); next trap visited is in class j]``
    started from trap ``i``.  For ``p = 1`` both neighbours and the return
    collapse into the single entry ``1 + tan(Delta) tan(t Delta / 2)``.

    Raises
    ------
    PhiOutOfRange
        Unless ``0 <= phi < -log cos(pi / t_max)``.
    """
    phi = float(phi)
    if not (phi >= 0.0) or not phi < confinement_rate(spec.t_max):
        raise PhiOutOfRange(f"phi={phi} outside [0, {confinement_rate(spec.t_max)})")
    delta = delta_of_phi(phi)
    if spec.t_max * delta >= math.pi:
        raise PhiOutOfRange(f"phi={phi} too close to the singular boundary")
    return LaplaceMatrix(phi, delta, _matrix_from_delta(spec.gaps, delta))


def perron_root(matrix: np.ndarray, tol: float = _RAYLEIGH_TOL, max_iter: int = 1_000_000):
    """Largest eigenvalue of a symmetric non-negative matrix by power iteration.

    The iteration runs on ``matrix + s I`` with ``s`` the largest absolute row
    sum, which makes every eigenvalue non-negative, so the Rayleigh quotients
    increase monotonically to the shifted Perron root.

    Returns
    -------
    root : float
    residual : float
        ``|| matrix v - root v ||`` for the final unit vector ``v``.
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    shift = float(np.abs(a).sum(axis=1).max())
    b = a + shift * np.eye(n)
    v = np.full(n, 1.0 / math.sqrt(n))
    prev = -math.inf
    rq = prev
    for _ in range(max_iter):
        w = b @ v
        rq = float(v @ w)
        nrm = math.sqrt(float(w @ w))
        res = math.sqrt(max(float(w @ w) - rq * rq, 0.0))
        v = w / nrm
        if abs(rq - prev) <= tol * max(1.0, abs(rq)) and res <= 1e-7 * max(1.0, abs(rq)):
            break
        prev = rq
    root = rq - shift
    residual = float(np.linalg.norm(a @ v - root * v))
    return root, residual


def _perron_at_delta(gaps, delta):
    return perron_root(_matrix_from_delta(gaps, delta))


def _upper_delta(t_max, target, evaluate):
    """Largest usable ``Delta`` below the singularity at ``pi / t_max`` bracketing ``target``."""
    top = math.pi / t_max
    for k in range(10, 16):
        hi = top * (1.0 - 10.0**-k)
        if evaluate(hi) >= target:
            return hi, True
    return hi, False


def phi_periodic(spec: PeriodicSpec, beta: float) -> PhiResult:
    """Decay rate for a periodic pattern: the root of ``Lambda(phi) = exp(beta)``.

    Bisection runs on ``Delta`` in ``(0, pi / t_max)``, on which ``Lambda`` is
    increasing, and stops when the bracket in ``phi`` is at most ``1e-12``.
    """
    beta = float(beta)
    if not np.isfinite(beta) or beta <= 0:
        raise ValidationError("beta must be positive and finite")
    if spec.t_max < 2:
        raise ValidationError("a pattern of unit gaps has every site trapped")
    target = math.exp(beta)
    lo = 0.0
    hi, ok = _upper_delta(spec.t_max, target, lambda d: _perron_at_delta(spec.gaps, d)[0])
    if ok:
        while phi_of_delta(hi) - phi_of_delta(lo) > _PHI_TOL:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _perron_at_delta(spec.gaps, mid)[0] < target:
                lo = mid
            else:
                hi = mid
    else:
        lo = hi
    phi_lo, phi_hi = phi_of_delta(lo), phi_of_delta(hi)
    _, residual = _perron_at_delta(spec.gaps, 0.5 * (lo + hi))
    return PhiResult(0.5 * (phi_lo + phi_hi), (phi_lo, phi_hi), residual)


def phi_homogeneous(t: int, beta: float) -> float:
    """Decay rate for equally spaced traps at distance ``t``.

    Solves ``tan(Delta) tan(t Delta / 2) = exp(beta) - 1`` by bisection on
    ``Delta`` in ``(0, pi / t)`` and returns ``-log cos(Delta)``.
    """
    if int(t) != t or t < 2:
        raise ValidationError("t must be an integer >= 2")
    beta = float(beta)
    if not np.isfinite(beta) or beta <= 0:
        raise ValidationError("beta must be positive and finite")
    t = int(t)
    rhs = math.expm1(beta)

    def f(d):
        return math.tan(d) * math.tan(0.5 * t * d) - rhs

    lo, hi = 0.0, math.pi / t
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if phi_of_delta(hi) - phi_of_delta(lo) <= 1e-15:
            break
    return phi_of_delta(0.5 * (lo + hi))


def periodic_decay_rate(spec: PeriodicSpec, beta: float, n: int) -> DecayRate:
    """Decay rate read off the exact mass of the killed walk on one period.

    The walk runs on the ring ``Z / period`` with traps at the pattern's
    residues and no wall.  The rate is ``r(n) = -log(Z_n / Z_{n-2}) / 2``.
    The error estimate fits a geometric tail to ``r`` at ``n/4``, ``n/2`` and
    ``n``; it is ``inf`` when those three values are not yet in a geometric
    regime, and the rounding level of ``r`` when they agree to rounding.
    """
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise ValidationError("beta must be non-negative and finite")
    if spec.t_max < 2:
        raise ValidationError("a pattern of unit gaps has every site trapped")
    n = int(n)
    floor = max(2 * spec.period**2, 16)
    if n < floor:
        raise ValidationError(f"n must be at least max(2 * period**2, 16) = {floor}")
    c = np.ones(spec.period)
    c[np.concatenate([[0], np.cumsum(spec.gaps)[:-1]])] = math.exp(-beta)
    logs = _kernels.ring_log_mass(c, n)

    def rate(k):
        return -0.5 * (logs[k] - logs[k - 2])

    r0, r1, r2 = rate(n // 4), rate(n // 2), rate(n)
    noise = 8.0 * np.finfo(float).eps * abs(logs[n])
    d0, d1 = r1 - r0, r2 - r1
    if abs(d0) <= noise and abs(d1) <= noise:
        err = noise
    else:
        rho = d1 / d0 if d0 != 0.0 else math.inf
        err = abs(d1) * rho / (1.0 - rho) if 0.0 < rho < 1.0 else math.inf
        err = max(err, noise)
    return DecayRate(float(r2), float(err), n)
