"""Finite-dimensional Gaussian coordinate model of path space.

A point of the space is a vector of N i.i.d. standard normal coordinates.
Two basis kinds are supported:

* ``"abstract"`` -- coordinates only; no path reconstruction.
* ``"schauder"`` -- coordinates are paired with the Levy-Ciesielski basis
  of [0, 1]: e_1(tau) = tau and, for n >= 2, e_n is the integral of the
  L2-normalized Haar function in standard dyadic order (n = 2^j + k + 1
  covers the dyadic block [k 2^-j, (k+1) 2^-j]).  The partial sum
  W(tau) = sum_n xi_n e_n(tau) is then a piecewise-linear Brownian bridge
  refinement whose derivative is piecewise constant, so integrals of the
  derivative basis are exact.

The n-th coordinate of a sample is simultaneously the Gaussian divergence
of e_n, i.e. the Ito integral of the Haar derivative against the
reconstructed path; that identity is exact in this truncated model.

Basis indices are 1-based everywhere in the public API, matching the
usual enumeration e_1, e_2, ... of the basis functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, ConfigurationError, DomainError, UnsupportedOperationError

ABSTRACT = "abstract"
SCHAUDER = "schauder"
_KINDS = (ABSTRACT, SCHAUDER)


@dataclass(frozen=True)
class BasisSpec:
    """Truncation level and kind of the coordinate basis."""

    dimension: int
    kind: str = ABSTRACT

    def __post_init__(self):
        if not isinstance(self.dimension, (int, np.integer)) or isinstance(self.dimension, bool):
            raise ConfigurationError("basis.dimension: must be an integer")
        object.__setattr__(self, "dimension", int(self.dimension))
        if self.dimension < 1:
            raise ConfigurationError("basis.dimension: must be >= 1")
        if self.kind not in _KINDS:
            raise ConfigurationError(
                f"basis.kind: must be one of {_KINDS}, got {self.kind!r}"
            )


@dataclass(frozen=True)
class GaussianSample:
    """Vector of Gaussian coordinates; immutable after construction."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float, copy=True).reshape(-1)
        if xi.size == 0:
            raise DomainError("sample must have at least one coordinate")
        if not np.all(np.isfinite(xi)):
            raise DomainError("sample coordinates must be finite")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @property
    def dimension(self) -> int:
        return int(self.xi.size)

    def coord(self, n: int) -> float:
        """Coordinate with 1-based index n."""
        if not 1 <= n <= self.dimension:
            raise DomainError(f"coordinate index must lie in [1, {self.dimension}], got {n}")
        return float(self.xi[n - 1])

    def __repr__(self) -> str:
        head = np.array2string(self.xi[:4], precision=4, separator=", ")
        tail = ", ..." if self.dimension > 4 else ""
        return f"GaussianSample(dimension={self.dimension}, xi={head[:-1]}{tail}])"


@dataclass(frozen=True)
class StepBasisAssignment:
    """Injective map from jump ordinal (1-based) to basis index.

    The default (``mapping=None``) is the identity: the n-th jump in
    chronological order drives the n-th basis direction, which is the
    convention used throughout this package.
    """

    mapping: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.mapping is not None:
            mapping = tuple(int(i) for i in self.mapping)
            object.__setattr__(self, "mapping", mapping)
            if any(i < 1 for i in mapping):
                raise ConfigurationError("assignment: basis indices must be >= 1")
            if len(set(mapping)) != len(mapping):
                raise ConfigurationError("assignment: must be injective")

    def basis_index(self, jump_ordinal: int) -> int:
        if jump_ordinal < 1:
            raise DomainError(f"jump ordinal must be >= 1, got {jump_ordinal}")
        if self.mapping is None:
            return jump_ordinal
        if jump_ordinal > len(self.mapping):
            raise CapacityError(
                f"assignment covers {len(self.mapping)} jumps, ordinal {jump_ordinal} requested"
            )
        return self.mapping[jump_ordinal - 1]


def sample_gaussian(basis: BasisSpec, rng: np.random.Generator) -> GaussianSample:
    """Draw one sample: N i.i.d. standard normal coordinates."""
    return GaussianSample(rng.standard_normal(basis.dimension))


def divergence_coord(sample: GaussianSample, n: int) -> float:
    """The n-th Gaussian divergence coordinate, i.e. xi_n (1-based)."""
    return sample.coord(n)


@lru_cache(maxsize=32)
def _schauder_table(dimension: int):
    """Per-index parameters (a, mid, b, height) of the Haar derivatives.

    Index 1 is the linear function e_1(tau) = tau, encoded with a full
    [0, 1] "positive branch" of height 1 and no negative branch.
    """
    a = np.empty(dimension)
    mid = np.empty(dimension)
    b = np.empty(dimension)
    h = np.empty(dimension)
    a[0], mid[0], b[0], h[0] = 0.0, 1.0, 1.0, 1.0
    for n in range(2, dimension + 1):
        m = n - 1
        j = m.bit_length() - 1
        k = m - (1 << j)
        width = 2.0 ** (-j)
        a[n - 1] = k * width
        mid[n - 1] = (k + 0.5) * width
        b[n - 1] = (k + 1.0) * width
        h[n - 1] = 2.0 ** (j / 2.0)
    for arr in (a, mid, b, h):
        arr.setflags(write=False)
    return a, mid, b, h


def dyadic_level(dimension: int) -> int:
    """Finest dyadic level containing every breakpoint of the first
    ``dimension`` basis functions (0 for the linear function alone)."""
    if dimension < 1:
        raise DomainError("dimension must be >= 1")
    if dimension == 1:
        return 0
    return (dimension - 1).bit_length()


def dyadic_points(dimension: int) -> np.ndarray:
    """All dyadic grid points k / 2^L of the basis level, including 0 and 1."""
    level = dyadic_level(dimension)
    return np.linspace(0.0, 1.0, (1 << level) + 1)


def schauder_values(dimension: int, tau: float) -> np.ndarray:
    """Values e_n(tau) for n = 1..dimension."""
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    a, mid, b, h = _schauder_table(dimension)
    up = np.clip(tau, a, mid) - a
    down = np.clip(tau, mid, b) - mid
    return h * (up - down)


def schauder_value_matrix(dimension: int, taus) -> np.ndarray:
    """Matrix [len(taus), dimension] of basis values e_n(tau)."""
    taus = np.asarray(taus, dtype=float).reshape(-1)
    if taus.size and (taus.min() < 0.0 or taus.max() > 1.0):
        raise DomainError("taus must lie in [0, 1]")
    a, mid, b, h = _schauder_table(dimension)
    tt = taus[:, None]
    up = np.clip(tt, a, mid) - a
    down = np.clip(tt, mid, b) - mid
    return h * (up - down)


def haar_values(dimension: int, s: float) -> np.ndarray:
    """Derivative values de_n/ds at s for n = 1..dimension.

    Piecewise constant, right-continuous at breakpoints; the top endpoint
    s = 1 belongs to no half-open branch except the linear function's.
    """
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"s must lie in [0, 1], got {s}")
    a, mid, b, h = _schauder_table(dimension)
    out = np.where((s >= a) & (s < mid), h, 0.0) - np.where((s >= mid) & (s < b), h, 0.0)
    if s == 1.0:
        out[0] = 1.0  # e_1 is linear on the closed interval
    return out


def _require_schauder(basis: BasisSpec, what: str):
    if basis.kind != SCHAUDER:
        raise UnsupportedOperationError(f"{what} requires a schauder basis, got {basis.kind!r}")


def path_value(sample: GaussianSample, basis: BasisSpec, tau: float) -> float:
    """Reconstructed path value W(tau) = sum_n xi_n e_n(tau)."""
    _require_schauder(basis, "path_value")
    if sample.dimension < basis.dimension:
        raise CapacityError(
            f"sample has {sample.dimension} coordinates, basis needs {basis.dimension}"
        )
    vals = schauder_values(basis.dimension, tau)
    return float(sample.xi[: basis.dimension] @ vals)


def basis_derivative_value(basis: BasisSpec, n: int, s: float) -> float:
    """Value of the piecewise-constant derivative de_n/ds at s (1-based n)."""
    _require_schauder(basis, "basis_derivative_value")
    if not 1 <= n <= basis.dimension:
        raise DomainError(f"basis index must lie in [1, {basis.dimension}], got {n}")
    return float(haar_values(basis.dimension, s)[n - 1])
