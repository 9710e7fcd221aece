"""Heavy-tailed renewal trap environments.

An environment is a sequence of i.i.d. positive integer gaps ``T_1, T_2, ...``
whose partial sums ``tau_0 = 0 < tau_1 < ...`` are the trap positions.  Two
gap laws are provided:

``pareto``
    ``P(T >= k) = k**-gamma`` for integers ``k >= 1``, sampled exactly as
    ``floor(U**(-1/gamma))``.
``zeta``
    ``P(T = k) = k**-(1+gamma) / zeta(1+gamma)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import PositionOverflow, ValidationError
from .seeding import stream

__all__ = [
    "GapLaw",
    "Environment",
    "RecordSequence",
    "PointMeasure",
    "sample_environment",
    "sample_covering",
    "compute_records",
    "rescaled_point_measure",
    "mean_log_gap",
]

_LAW_ALIASES = {
    "pareto": "pareto",
    "discretepareto": "pareto",
    "discrete_pareto": "pareto",
    "zeta": "zeta",
}


@dataclass(frozen=True)
class GapLaw:
    """Law of a single gap.

    Parameters
    ----------
    gamma : float
        Tail exponent, strictly positive.
    kind : {"pareto", "zeta"}
        Family of the law.

    Notes
    -----
    Two constants describe the tail.  ``c_tau`` is the prefactor of the mass
    function, ``P(T = k) ~ c_tau * k**-(1+gamma)``.  ``tail_constant`` is the
    prefactor of the survival function, ``P(T >= k) ~ tail_constant * k**-gamma``,
    and equals ``c_tau / gamma``.  The rescaled gap measure converges to a
    Poisson process whose mass above level ``y`` per unit length is
    ``tail_constant * y**-gamma``.
    """

    gamma: float
    kind: str = "pareto"

    def __post_init__(self):
        g = float(self.gamma)
        if not np.isfinite(g) or g <= 0:
            raise ValidationError(f"gamma must be a positive finite number, got {self.gamma!r}")
        kind = _LAW_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ValidationError(f"unknown gap law {self.kind!r}; expected 'pareto' or 'zeta'")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "kind", kind)

    @property
    def c_tau(self) -> float:
        """Mass-function tail prefactor."""
        if self.kind == "pareto":
            return self.gamma
        return 1.0 / float(mpmath.zeta(1.0 + self.gamma))

    @property
    def tail_constant(self) -> float:
        """Survival-function tail prefactor, ``c_tau / gamma``."""
        if self.kind == "pareto":
            return 1.0
        return self.c_tau / self.gamma

    def pmf(self, k):
        """Probability ``P(T = k)`` for integer ``k >= 1`` (vectorised)."""
        k = np.asarray(k, dtype=float)
        if self.kind == "pareto":
            out = k ** -self.gamma - (k + 1.0) ** -self.gamma
        else:
            out = k ** -(1.0 + self.gamma) * (1.0 / float(mpmath.zeta(1.0 + self.gamma)))
        return np.where(k >= 1, out, 0.0)

    def sf(self, k):
        """Probability ``P(T >= k)`` (vectorised, ``k >= 1``)."""
        k = np.asarray(k, dtype=float)
        if self.kind == "pareto":
            return np.where(k <= 1, 1.0, np.maximum(k, 1.0) ** -self.gamma)
        s = 1.0 + self.gamma
        z = float(mpmath.zeta(s))
        flat = [1.0 if kk <= 1 else float(mpmath.zeta(s, kk)) / z for kk in k.ravel()]
        return np.asarray(flat).reshape(k.shape)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. gaps from ``rng`` as an int64 array.

        Draws are consumed sequentially, so two calls of sizes ``a`` and ``b``
        return the same values as one call of size ``a + b``.
        """
        if self.kind == "pareto":
            u = 1.0 - rng.random(size)  # uniform on (0, 1]
            t = np.floor(u ** (-1.0 / self.gamma))
            if t.size and not np.all(t < 2.0**63):
                raise PositionOverflow("a sampled gap exceeds the int64 range")
            return t.astype(np.int64)
        return rng.zipf(1.0 + self.gamma, size).astype(np.int64)


@dataclass(frozen=True, eq=False)
class Environment:
    """Immutable trap environment.

    ``gaps[i]`` is ``T_{i+1}`` and ``positions[i]`` is ``tau_i``, so that
    ``positions`` has one more entry than ``gaps`` and starts at 0.
    """

    gaps: np.ndarray
    law: GapLaw | None = None
    seed: int | None = None
    positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        raw = np.asarray(self.gaps).ravel()
        if raw.dtype.kind == "f" and np.any(raw != np.floor(raw)):
            raise ValidationError("gaps must be positive integers")
        gaps = raw.astype(np.int64)
        if gaps.size == 0:
            raise ValidationError("an environment needs at least one gap")
        if np.any(gaps < 1):
            raise ValidationError("gaps must be positive integers")
        if float(gaps.astype(float).sum()) >= 2.0**63:
            raise PositionOverflow("trap positions exceed the int64 range")
        positions = np.zeros(gaps.size + 1, dtype=np.int64)
        np.cumsum(gaps, out=positions[1:])
        gaps.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_gaps(cls, gaps, law: GapLaw | None = None, seed: int | None = None) -> "Environment":
        return cls(np.asarray(gaps), law, seed)

    def __len__(self) -> int:
        return int(self.gaps.size)

    @property
    def count(self) -> int:
        return int(self.gaps.size)

    @property
    def last_position(self) -> int:
        return int(self.positions[-1])

    @property
    def gamma(self) -> float | None:
        return None if self.law is None else self.law.gamma

    def prefix(self, count: int) -> "Environment":
        """Environment made of the first ``count`` gaps."""
        return Environment.from_gaps(self.gaps[:count], self.law, self.seed)

    # -- serialisation ------------------------------------------------------
    def to_text(self) -> str:
        gamma = "none" if self.law is None else repr(self.law.gamma)
        law = "none" if self.law is None else self.law.kind
        seed = "none" if self.seed is None else str(self.seed)
        lines = [f"gamma={gamma} law={law} seed={seed}"]
        lines.extend(str(int(t)) for t in self.gaps)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Environment":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise ValidationError("empty environment text")
        header = dict(item.split("=", 1) for item in lines[0].split())
        missing = {"gamma", "law", "seed"} - header.keys()
        if missing:
            raise ValidationError(f"environment header lacks {sorted(missing)}")
        law = None if header["law"] == "none" else GapLaw(float(header["gamma"]), header["law"])
        seed = None if header["seed"] == "none" else int(header["seed"])
        return cls.from_gaps([int(s) for s in lines[1:]], law, seed)

    def to_json(self) -> str:
        return json.dumps(
            {
                "gamma": None if self.law is None else self.law.gamma,
                "law": None if self.law is None else self.law.kind,
                "seed": self.seed,
                "gaps": [int(t) for t in self.gaps],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Environment":
        obj = json.loads(text)
        if isinstance(obj, list):
            return cls.from_gaps(obj)
        law = None if obj.get("law") is None else GapLaw(obj["gamma"], obj["law"])
        return cls.from_gaps(obj["gaps"], law, obj.get("seed"))


@dataclass(frozen=True, eq=False)
class RecordSequence:
    """Strict records of the gap sequence.

    ``record_indexes[k]`` is ``i(k)``, ``record_gaps[k]`` is ``T_{i(k)+1}`` and
    ``record_positions[k]`` is ``tau_{i(k)}``, the left end of the record gap.
    """

    record_indexes: np.ndarray
    record_gaps: np.ndarray
    record_positions: np.ndarray

    def __len__(self) -> int:
        return int(self.record_indexes.size)


@dataclass(frozen=True, eq=False)
class PointMeasure:
    """Finite collection of points ``(x, y)`` with ``x >= 0`` and ``y > 0``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValidationError("x and y must have the same length")
        if np.any(x < 0) or np.any(~(y > 0)):
            raise ValidationError("points need x >= 0 and y > 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.x.size)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def restrict(self, x_lo=0.0, x_hi=np.inf, y_lo=0.0, y_hi=np.inf) -> "PointMeasure":
        """Points inside the closed box ``[x_lo, x_hi] x [y_lo, y_hi]``."""
        keep = (self.x >= x_lo) & (self.x <= x_hi) & (self.y >= y_lo) & (self.y <= y_hi)
        return PointMeasure(self.x[keep], self.y[keep])


def sample_environment(law: GapLaw, count: int, seed: int, *index: int) -> Environment:
    """Sample ``count`` i.i.d. gaps from the ``"env"`` stream of ``(seed, *index)``.

    Longer environments with the same seed extend shorter ones: the first
    ``count`` gaps never depend on how many are requested.
    """
    count = int(count)
    if count < 1:
        raise ValidationError("count must be at least 1")
    rng = stream(seed, "env", *index)
    return Environment.from_gaps(law.sample(rng, count), law, seed)


def _sample_stream_covering(law, rng, min_position, chunk=1024):
    parts, total = [], 0
    while True:
        g = law.sample(rng, chunk)
        parts.append(g)
        total += float(g.astype(float).sum())
        if total >= min_position:
            return np.concatenate(parts)
        chunk = min(chunk * 2, 1 << 20)


def sample_covering(law: GapLaw, min_position: int, seed: int, *index: int) -> Environment:
    """Sample gaps until the last trap lies at or beyond ``min_position``.

    Gaps come in chunks from the ``"env"`` stream of ``(seed, *index)``; the
    result is a prefix-consistent extension of any shorter draw from the same
    stream.
    """
    rng = stream(seed, "env", *index)
    gaps = _sample_stream_covering(law, rng, max(int(min_position), 1))
    return Environment.from_gaps(gaps, law, seed)


def compute_records(env: Environment) -> RecordSequence:
    """Record indexes ``i(0) = 0 < i(1) < ...`` of the gap sequence.

    ``i(k)`` is the smallest index after ``i(k-1)`` whose following gap is
    strictly larger than ``T_{i(k-1)+1}``; ties never create records.
    """
    gaps = np.asarray(env.gaps)
    if gaps.size == 0:
        raise ValidationError("environment is empty")
    running = np.maximum.accumulate(gaps)
    is_record = np.empty(gaps.size, dtype=bool)
    is_record[0] = True
    is_record[1:] = gaps[1:] > running[:-1]
    idx = np.flatnonzero(is_record).astype(np.int64)
    return RecordSequence(idx, gaps[idx].copy(), np.asarray(env.positions)[idx].copy())


def rescaled_point_measure(
    env: Environment,
    scale_n: float,
    gamma: float | None = None,
    x_max: float | None = None,
    y_min: float | None = None,
) -> PointMeasure:
    """Points ``((i-1)/scale_n, T_i / scale_n**(1/gamma))`` for every gap.

    Parameters
    ----------
    env : Environment
    scale_n : float
        Rescaling length, at least 1.
    gamma : float, optional
        Tail exponent; defaults to the one of ``env.law``.
    x_max, y_min : float, optional
        Keep only points with ``x <= x_max`` and ``y >= y_min``.
    """
    if scale_n < 1:
        raise ValidationError("scale_n must be at least 1")
    if gamma is None:
        if env.law is None:
            raise ValidationError("gamma is required for an environment without a law")
        gamma = env.law.gamma
    i = np.arange(env.count, dtype=float)
    x = i / scale_n
    y = env.gaps.astype(float) / float(scale_n) ** (1.0 / gamma)
    keep = np.ones(x.size, dtype=bool)
    if x_max is not None:
        keep &= x <= x_max
    if y_min is not None:
        keep &= y >= y_min
    return PointMeasure(x[keep], y[keep])


def mean_log_gap(law: GapLaw) -> float:
    """Expectation of ``log T`` for one gap.

    For the zeta law this is ``-zeta'(s) / zeta(s)`` with ``s = 1 + gamma``.
    For the Pareto law it is the series ``sum_{k>=2} k**-gamma * log(k/(k-1))``
    (summation by parts of ``sum P(T = k) log k``), evaluated with
    Euler-Maclaurin tail summation in 30-digit arithmetic.
    """
    with mpmath.workdps(30):
        s = mpmath.mpf(law.gamma) + 1
        if law.kind == "zeta":
            return float(-mpmath.zeta(s, 1, 1) / mpmath.zeta(s))
        g = mpmath.mpf(law.gamma)
        head_end = 64
        head = mpmath.fsum(mpmath.power(k, -g) * mpmath.log(mpmath.mpf(k) / (k - 1)) for k in range(2, head_end))
        tail = mpmath.nsum(
            lambda k: mpmath.power(k, -g) * mpmath.log(k / (k - 1)),
            [head_end, mpmath.inf],
            method="euler-maclaurin",
        )
        return float(head + tail)
