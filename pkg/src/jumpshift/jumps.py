"""Finite-activity pure-jump paths and their determinant products.

A path is a finite, chronologically ordered list of (time, size) jump
events on a horizon.  Two scalar functionals drive everything downstream:

* the regularized (Carleman-Fredholm style) determinant product
  ``prod (1 + size) * exp(-size)`` over the jumps up to a time, which is
  the det2 of the diagonal operator whose eigenvalues are the jump sizes;
* the stochastic exponential of the pure-jump process,
  ``exp(sum sizes) * prod (1 + size) * exp(-size)``.

A jump of size exactly -1 is legal input: it makes the determinant
exactly zero and is propagated as a degeneracy downstream, never as an
error.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

# Plain products are kept for small, well-conditioned factor lists so that
# exact small cases stay exact; otherwise accumulate log|.| plus a sign.
_MAX_PLAIN_FACTORS = 64
_TINY_FACTOR = 1e-8

_REDRAW_ATTEMPTS = 64


@dataclass(frozen=True)
class JumpEvent:
    """A single jump of the driving process: occurrence time and size."""

    time: float
    size: float

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "size", float(self.size))
        if not math.isfinite(self.time) or self.time < 0.0:
            raise DomainError(f"jump time must be finite and >= 0, got {self.time}")
        if not math.isfinite(self.size):
            raise DomainError(f"jump size must be finite, got {self.size}")


@dataclass(frozen=True)
class JumpPath:
    """Finite, time-ordered sequence of jump events on [0, horizon].

    Event times are strictly increasing (no two jumps share a time) and
    bounded by the horizon.  Instances are immutable and safe to share
    across workers.
    """

    events: tuple[JumpEvent, ...]
    horizon: float

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "horizon", float(self.horizon))
        if not math.isfinite(self.horizon) or self.horizon < 0.0:
            raise DomainError(f"horizon must be finite and >= 0, got {self.horizon}")
        times = np.array([e.time for e in events], dtype=float)
        sizes = np.array([e.size for e in events], dtype=float)
        if times.size:
            if np.any(np.diff(times) <= 0.0):
                raise DomainError("event times must be strictly increasing")
            if times[-1] > self.horizon:
                raise DomainError("event times must not exceed the horizon")
        if not np.all(np.isfinite(sizes)):
            raise DomainError("jump sizes must be finite")
        times.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "_times", times)
        object.__setattr__(self, "_sizes", sizes)

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes

    def __len__(self) -> int:
        return len(self.events)

    def __repr__(self) -> str:
        return f"JumpPath(n_events={len(self.events)}, horizon={self.horizon})"

    def count_up_to(self, t: float) -> int:
        """Number of jumps with time <= t (t validated against [0, horizon])."""
        _check_time(self, t)
        return bisect_right(self._times.tolist(), t)

    def value_at(self, t: float) -> float:
        """Value of the pure-jump process at t: sum of sizes of jumps <= t."""
        k = self.count_up_to(t)
        return float(self._sizes[:k].sum())

    def with_scaled_sizes(self, factor: float) -> "JumpPath":
        """Same jump times, all sizes multiplied by ``factor``."""
        events = tuple(JumpEvent(e.time, factor * e.size) for e in self.events)
        return JumpPath(events, self.horizon)


def fixed_jumps(times, sizes, horizon) -> JumpPath:
    """Build a path from explicit parallel (times, sizes) sequences."""
    times = list(times)
    sizes = list(sizes)
    if len(times) != len(sizes):
        raise ConfigurationError("times and sizes must have equal length")
    return JumpPath(tuple(JumpEvent(t, s) for t, s in zip(times, sizes)), horizon)


@dataclass(frozen=True)
class SizeDistribution:
    """Jump-size law for compound Poisson sampling.

    kind is one of "fixed" (i.i.d. uniform draws from a finite value
    list), "uniform" (on [low, high]) or "normal" (mean, std).
    """

    kind: str
    values: tuple[float, ...] | None = None
    low: float | None = None
    high: float | None = None
    mean: float | None = None
    std: float | None = None

    def __post_init__(self):
        problems = []
        if self.kind == "fixed":
            vals = tuple(float(v) for v in (self.values or ()))
            object.__setattr__(self, "values", vals)
            if not vals:
                problems.append("size_dist.values: must be a nonempty list")
            elif not all(math.isfinite(v) for v in vals):
                problems.append("size_dist.values: entries must be finite")
        elif self.kind == "uniform":
            if self.low is None or self.high is None:
                problems.append("size_dist: uniform needs 'low' and 'high'")
            elif not (math.isfinite(self.low) and math.isfinite(self.high)):
                problems.append("size_dist: uniform bounds must be finite")
            elif not self.low < self.high:
                problems.append("size_dist: uniform needs low < high")
        elif self.kind == "normal":
            if self.mean is None or self.std is None:
                problems.append("size_dist: normal needs 'mean' and 'std'")
            elif not (math.isfinite(self.mean) and math.isfinite(self.std)):
                problems.append("size_dist: normal parameters must be finite")
            elif self.std <= 0.0:
                problems.append("size_dist.std: must be positive")
        else:
            problems.append(f"size_dist.kind: unknown kind {self.kind!r}")
        if problems:
            raise ConfigurationError(problems)

    @classmethod
    def fixed(cls, values) -> "SizeDistribution":
        return cls("fixed", values=tuple(values))

    @classmethod
    def uniform(cls, low, high) -> "SizeDistribution":
        return cls("uniform", low=float(low), high=float(high))

    @classmethod
    def normal(cls, mean, std) -> "SizeDistribution":
        return cls("normal", mean=float(mean), std=float(std))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return rng.choice(np.asarray(self.values, dtype=float), size=n)
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=n)
        return rng.normal(self.mean, self.std, size=n)


def sample_compound_poisson(rate, size_dist: SizeDistribution, horizon, rng) -> JumpPath:
    """Draw one compound Poisson path: Poisson(rate * horizon) many jumps,
    i.i.d. sizes, strictly increasing uniform times (ties re-drawn).
    """
    rate = float(rate)
    horizon = float(horizon)
    if not math.isfinite(rate) or rate <= 0.0:
        raise ConfigurationError(f"rate: must be positive, got {rate}")
    if not math.isfinite(horizon) or horizon < 0.0:
        raise ConfigurationError(f"horizon: must be finite and >= 0, got {horizon}")
    if not isinstance(size_dist, SizeDistribution):
        raise ConfigurationError("size_dist: expected a SizeDistribution")
    n = int(rng.poisson(rate * horizon))
    if n == 0:
        return JumpPath((), horizon)
    for _ in range(_REDRAW_ATTEMPTS):
        times = np.sort(rng.uniform(0.0, horizon, size=n))
        if not np.any(np.diff(times) <= 0.0):
            break
    else:  # pragma: no cover - probability ~0 with float64 draws
        raise RuntimeError("could not draw strictly increasing jump times")
    sizes = size_dist.draw(rng, n)
    return fixed_jumps(times, sizes, horizon)


def _check_time(path: JumpPath, t) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0.0 or t > path.horizon:
        raise DomainError(f"t must lie in [0, {path.horizon}], got {t}")
    return t


def jumps_up_to(path: JumpPath, t) -> tuple[JumpEvent, ...]:
    """All events with time <= t, in chronological order."""
    k = path.count_up_to(t)
    return path.events[:k]


def det2_product(sizes) -> float:
    """prod (1 + s) * exp(-s) over the given eigenvalues.

    Empty input gives 1.  Exactly zero when any s == -1.  Switches to
    log-magnitude plus sign accumulation for long or near-singular factor
    lists so that small exact cases are untouched while large products do
    not underflow.
    """
    s = np.asarray(sizes, dtype=float)
    if s.size == 0:
        return 1.0
    one_plus = 1.0 + s
    if np.any(one_plus == 0.0):
        return 0.0
    if s.size <= _MAX_PLAIN_FACTORS and np.min(np.abs(one_plus)) >= _TINY_FACTOR:
        return float(np.prod(one_plus * np.exp(-s)))
    sign = -1.0 if (np.count_nonzero(one_plus < 0.0) % 2) else 1.0
    return sign * math.exp(float(np.sum(np.log(np.abs(one_plus)) - s)))


def det2_sign_logabs(sizes) -> tuple[float, float]:
    """(sign, log|det2|) of the determinant product; sign 0 when singular."""
    s = np.asarray(sizes, dtype=float)
    if s.size == 0:
        return 1.0, 0.0
    one_plus = 1.0 + s
    if np.any(one_plus == 0.0):
        return 0.0, -math.inf
    sign = -1.0 if (np.count_nonzero(one_plus < 0.0) % 2) else 1.0
    return sign, float(np.sum(np.log(np.abs(one_plus)) - s))


def carleman_determinant(path: JumpPath, t, eps=0.0) -> float:
    """Determinant product over jumps with time <= t and |size| > eps.

    eps = 0 means no truncation; the empty product is 1.
    """
    t = _check_time(path, t)
    eps = float(eps)
    if not math.isfinite(eps) or eps < 0.0:
        raise DomainError(f"eps must be finite and >= 0, got {eps}")
    k = path.count_up_to(t)
    sizes = path.sizes[:k]
    if eps > 0.0:
        sizes = sizes[np.abs(sizes) > eps]
    return det2_product(sizes)


def doleans_exponential(path: JumpPath, t) -> float:
    """Stochastic exponential of the pure-jump process at time t.

    Equals exp(Z_t) times the untruncated determinant product, Z_t being
    the running sum of jump sizes.
    """
    t = _check_time(path, t)
    return math.exp(path.value_at(t)) * carleman_determinant(path, t, 0.0)
