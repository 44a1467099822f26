"""Monte Carlo estimators and quadrature oracles for the shift map.

Estimators verify, for a fixed shift operator, the integral identities of
its Gaussian Jacobian: the mean Jacobian equals the product of eigenvalue
signs, the mean absolute Jacobian equals one (invertibility), the
change-of-variables residual vanishes, and the pushforward/preimage
identity holds for bounded nonnegative test functions.

Determinism contract
--------------------
Sampling is sharded into fixed-size blocks of ``SHARD_SIZE`` draws.  The
generator of shard ``i`` is ``Philox(SeedSequence(seed, spawn_key=(1, i)))``
(counter-based; the shard index is mixed into the stream identifier), and
partial results are merged in shard order after all shards complete.
Worker count therefore affects scheduling only: identical seeds give
bit-identical estimates for any number of workers.  Setup draws (paths,
fixed samples) use the separate branch ``spawn_key=(0,)``.

Estimator variance
------------------
The square of a per-coordinate Jacobian factor is Gaussian-integrable iff
``1 + 4 lam + 2 lam^2 > 0``.  Eigenvalues inside the closed interval
``[-(2+sqrt(2))/2, -(2-sqrt(2))/2]`` therefore make second moments
infinite; estimates touching the Jacobian are then flagged
``variance_unreliable`` (the means remain correct for any lam != -1, but
reported standard errors are meaningless).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    CapacityError,
    ConfigurationError,
    DegeneracyError,
    DomainError,
    UnsupportedOperationError,
    UsageError,
)
from .shift import ShiftOperator

SHARD_SIZE = 1 << 15

VARIANCE_GUARD_LOW = -(2.0 + math.sqrt(2.0)) / 2.0
VARIANCE_GUARD_HIGH = -(2.0 - math.sqrt(2.0)) / 2.0

INTEGRANDS = ("lambda", "abs_lambda", "push_lambda", "plain", "preimage_left", "preimage_right")

_MAX_QUAD_DIMS = 3
# numpy's hermegauss weights overflow beyond ~350 nodes
_MAX_QUAD_NODES = 350


class SubstreamFactory:
    """Deterministic per-shard random streams derived from one master seed."""

    def __init__(self, seed):
        if isinstance(seed, SubstreamFactory):
            self._root = seed._root
        elif isinstance(seed, np.random.SeedSequence):
            self._root = seed
        else:
            seed = int(seed)
            if not 0 <= seed < 2**64:
                raise ConfigurationError(f"seed: must be a 64-bit unsigned integer, got {seed}")
            self._root = np.random.SeedSequence(seed)

    def _branch(self, *key) -> np.random.Generator:
        full_key = tuple(self._root.spawn_key) + key
        seq = np.random.SeedSequence(self._root.entropy, spawn_key=full_key)
        return np.random.Generator(np.random.Philox(seq))

    def setup_generator(self) -> np.random.Generator:
        """Stream for one-off draws (paths, frozen samples); branch 0."""
        return self._branch(0)

    def shard_generator(self, shard: int) -> np.random.Generator:
        """Stream for Monte Carlo shard ``shard``; branch (1, shard)."""
        return self._branch(1, int(shard))


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error and the identity's target."""

    mean: float
    stderr: float
    n: int
    target: float | None = None
    degenerate: bool = False
    variance_unreliable: bool = False

    def within(self, k: float = 3.0) -> bool:
        """|mean - target| <= k * stderr (target must be set)."""
        if self.target is None:
            raise UsageError("estimate has no target")
        return abs(self.mean - self.target) <= k * self.stderr


@dataclass(frozen=True)
class TestFunctionSpec:
    """Cylinder test function on the leading coordinates.

    * ``cosine``:      f(x) = cos(sum_j a_j x_j), bounded by 1;
    * ``polynomial``:  f(x) = (sum_j a_j x_j)^degree, degree <= 4;
    * ``box``:         f(x) = prod_j 1[lower_j <= x_j <= upper_j].
    """

    kind: str
    coefficients: tuple[float, ...] | None = None
    degree: int | None = None
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None

    def __post_init__(self):
        problems = []
        if self.kind in ("cosine", "polynomial"):
            coeffs = tuple(float(c) for c in (self.coefficients or ()))
            object.__setattr__(self, "coefficients", coeffs)
            if not coeffs:
                problems.append("test_function.coefficients: must be a nonempty list")
            elif not all(math.isfinite(c) for c in coeffs):
                problems.append("test_function.coefficients: entries must be finite")
            if self.kind == "polynomial":
                if not isinstance(self.degree, (int, np.integer)) or not 0 <= self.degree <= 4:
                    problems.append("test_function.degree: must be an integer in [0, 4]")
        elif self.kind == "box":
            lower = tuple(float(v) for v in (self.lower or ()))
            upper = tuple(float(v) for v in (self.upper or ()))
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)
            if not lower or len(lower) != len(upper):
                problems.append("test_function: box needs lower/upper of equal nonzero length")
            elif not all(math.isfinite(v) for v in lower + upper):
                problems.append("test_function: box bounds must be finite")
            elif any(lo > hi for lo, hi in zip(lower, upper)):
                problems.append("test_function: box needs lower <= upper")
        else:
            problems.append(f"test_function.kind: unknown kind {self.kind!r}")
        if problems:
            raise ConfigurationError(problems)

    @classmethod
    def cosine(cls, coefficients) -> "TestFunctionSpec":
        return cls("cosine", coefficients=tuple(coefficients))

    @classmethod
    def monomial(cls, coefficients, degree) -> "TestFunctionSpec":
        return cls("polynomial", coefficients=tuple(coefficients), degree=int(degree))

    @classmethod
    def box(cls, lower, upper) -> "TestFunctionSpec":
        return cls("box", lower=tuple(lower), upper=tuple(upper))

    @property
    def coords(self) -> tuple[int, ...]:
        m = len(self.lower) if self.kind == "box" else len(self.coefficients)
        return tuple(range(1, m + 1))

    @property
    def is_bounded(self) -> bool:
        return self.kind != "polynomial"

    @property
    def is_indicator(self) -> bool:
        return self.kind == "box"

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        m = len(self.coords)
        if X.shape[1] < m:
            raise CapacityError(f"samples have {X.shape[1]} coordinates, test function reads {m}")
        lead = X[:, :m]
        if self.kind == "cosine":
            return np.cos(lead @ np.asarray(self.coefficients))
        if self.kind == "polynomial":
            return (lead @ np.asarray(self.coefficients)) ** self.degree
        inside = (lead >= np.asarray(self.lower)) & (lead <= np.asarray(self.upper))
        return np.all(inside, axis=1).astype(float)


# -- estimator core ----------------------------------------------------------


def _shard_sizes(n: int) -> list[int]:
    full, rem = divmod(n, SHARD_SIZE)
    return [SHARD_SIZE] * full + ([rem] if rem else [])


def _merge(a, b):
    na, ma, m2a = a
    nb, mb, m2b = b
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    m2 = m2a + m2b + delta * delta * (na * nb / n)
    return (n, mean, m2)


def _mc_run(width: int, row_fn, n: int, streams, workers: int = 1) -> tuple[int, float, float]:
    """Sharded mean/M2 of row_fn over i.i.d. standard normal matrices."""
    n = int(n)
    if n < 2:
        raise DomainError(f"sample count must be >= 2, got {n}")
    streams = SubstreamFactory(streams)
    sizes = _shard_sizes(n)

    def one(i):
        rng = streams.shard_generator(i)
        X = rng.standard_normal((sizes[i], width))
        v = np.asarray(row_fn(X), dtype=float)
        m = float(v.mean())
        return (sizes[i], m, float(np.sum((v - m) ** 2)))

    if workers and int(workers) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    else:
        parts = [one(i) for i in range(len(sizes))]
    acc = parts[0]
    for part in parts[1:]:
        acc = _merge(acc, part)
    return acc


def _finish(acc, target, degenerate, unreliable) -> MCEstimate:
    n, mean, m2 = acc
    stderr = math.sqrt(m2 / (n - 1) / n)
    return MCEstimate(
        mean=mean,
        stderr=stderr,
        n=n,
        target=target,
        degenerate=degenerate,
        variance_unreliable=unreliable,
    )


def variance_guard_triggered(op: ShiftOperator) -> bool:
    """True when some eigenvalue sits in the infinite-second-moment band."""
    lam = op.lambdas_
    return bool(np.any((lam >= VARIANCE_GUARD_LOW) & (lam <= VARIANCE_GUARD_HIGH)))


def _width(op: ShiftOperator, *funcs) -> int:
    w = int(op.indices_.max()) if op.indices_.size else 0
    for f in funcs:
        if f is not None:
            w = max(w, len(f.coords))
    return max(w, 1)


def _unreliable(op: ShiftOperator) -> bool:
    return not op.degenerate_ and variance_guard_triggered(op)


def sign_target(op: ShiftOperator) -> float:
    """prod sign(1 + lambda); the degree-identity target (0 if degenerate)."""
    op._check_fitted()
    return float(np.prod(np.sign(1.0 + op.lambdas_))) if op.lambdas_.size else 1.0


def estimate_mean_jacobian(op: ShiftOperator, n, streams, workers=1) -> MCEstimate:
    """MC mean of the Jacobian; target prod sign(1 + lambda)."""
    op._check_fitted()
    acc = _mc_run(_width(op), op.lambda_values, n, streams, workers)
    return _finish(acc, sign_target(op), op.degenerate_, _unreliable(op))


def estimate_abs_jacobian(op: ShiftOperator, n, streams, workers=1) -> MCEstimate:
    """MC mean of |Jacobian|; target 1, or 0 on degenerate operators."""
    op._check_fitted()
    acc = _mc_run(_width(op), lambda X: np.abs(op.lambda_values(X)), n, streams, workers)
    return _finish(acc, 0.0 if op.degenerate_ else 1.0, op.degenerate_, _unreliable(op))


def _require_bounded(f, name):
    if f is not None and not f.is_bounded:
        raise UsageError(f"{name}: must be bounded (cosine or box), got kind 'polynomial'")


def _require_indicator(f, name):
    if f is not None and not f.is_indicator:
        raise UsageError(f"{name}: preimage checks need nonnegative bounded functions (box)")


def _const_one(X):
    return np.ones(X.shape[0])


def change_of_variables_residual(op, f: TestFunctionSpec, n, streams, workers=1) -> MCEstimate:
    """Paired residual f(U(w)) J(w) - f(w) E[J] per sample; target 0."""
    op._check_fitted()
    _require_bounded(f, "test_function")
    feval = f if f is not None else _const_one
    target = sign_target(op)

    def rows(X):
        return feval(op.transform(X)) * op.lambda_values(X) - feval(X) * target

    acc = _mc_run(_width(op, f), rows, n, streams, workers)
    return _finish(acc, 0.0, op.degenerate_, _unreliable(op))


def sum_over_preimage_check(op, f, g, n, streams, workers=1) -> MCEstimate:
    """Paired residual of the pushforward identity
    f(U(w)) |J(w)| g(w) - f(w) g(V(w)); target 0.

    The right side uses the exact coordinatewise inverse, so degenerate
    operators are rejected.
    """
    op._check_fitted()
    if op.degenerate_:
        raise DegeneracyError("preimage check undefined: eigenvalue -1 collapses a coordinate")
    _require_indicator(f, "test_function")
    _require_indicator(g, "test_function_g")
    feval = f if f is not None else _const_one
    geval = g if g is not None else _const_one

    def rows(X):
        left = feval(op.transform(X)) * np.abs(op.lambda_values(X)) * geval(X)
        right = feval(X) * geval(op.inverse_transform(X))
        return left - right

    acc = _mc_run(_width(op, f, g), rows, n, streams, workers)
    return _finish(acc, 0.0, False, _unreliable(op))


def mc_mean(op, integrand: str, n, streams, f=None, g=None, workers=1) -> MCEstimate:
    """Generic MC mean of one oracle integrand (same tokens as the
    quadrature oracle); target left unset."""
    op._check_fitted()
    row_fn = _integrand_rows(op, integrand, f, g)
    acc = _mc_run(_width(op, f, g), row_fn, n, streams, workers)
    unreliable = integrand != "plain" and _unreliable(op)
    return _finish(acc, None, op.degenerate_, unreliable)


def _integrand_rows(op, integrand, f, g):
    if integrand not in INTEGRANDS:
        raise UsageError(f"integrand: must be one of {INTEGRANDS}, got {integrand!r}")
    feval = f if f is not None else _const_one
    geval = g if g is not None else _const_one
    if integrand == "lambda":
        return op.lambda_values
    if integrand == "abs_lambda":
        return lambda X: np.abs(op.lambda_values(X))
    if integrand == "push_lambda":
        return lambda X: feval(op.transform(X)) * op.lambda_values(X)
    if integrand == "plain":
        if f is None:
            raise UsageError("integrand 'plain' needs a test function")
        return feval
    if integrand == "preimage_left":
        return lambda X: feval(op.transform(X)) * np.abs(op.lambda_values(X)) * geval(X)
    if op.degenerate_:
        raise DegeneracyError("preimage integrand undefined on a degenerate operator")
    return lambda X: feval(X) * geval(op.inverse_transform(X))


# -- quadrature oracle --------------------------------------------------------


@lru_cache(maxsize=16)
def _gh_nodes(nodes: int):
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _phi(x: float) -> float:
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def quadrature_oracle(op: ShiftOperator, integrand: str, f=None, g=None, nodes: int = 64) -> float:
    """Independent expectation of one integrand under the Gaussian law.

    Smooth integrands (no indicator factors) are integrated on a
    tensor-product Gauss-Hermite grid over the referenced coordinates;
    coordinates the integrand does not touch integrate out exactly.  When
    indicator (box) test functions appear, every factor is separable and
    each coordinate reduces to exact Gaussian interval masses, which is
    evaluated in closed form via the normal CDF (node-sampling a
    discontinuous indicator would waste the oracle's accuracy).

    At most 3 quadrature coordinates are supported.  Accuracy degrades as
    an eigenvalue approaches -1 (the integrand's Gaussian decay
    exp(-(1+lam)^2 x^2 / 2) flattens out): 64 nodes give ~1e-10 for
    |1 + lam| >= 0.5, 256 nodes give ~1e-10 down to |1 + lam| >= 0.2.
    """
    op._check_fitted()
    if integrand not in INTEGRANDS:
        raise UsageError(f"integrand: must be one of {INTEGRANDS}, got {integrand!r}")
    nodes = int(nodes)
    if not 32 <= nodes <= _MAX_QUAD_NODES:
        raise DomainError(f"nodes must lie in [32, {_MAX_QUAD_NODES}], got {nodes}")
    if op.indices_.size > _MAX_QUAD_DIMS:
        raise UnsupportedOperationError(
            f"quadrature supports at most {_MAX_QUAD_DIMS} active coordinates, "
            f"got {op.indices_.size}"
        )
    uses_f = integrand in ("push_lambda", "plain", "preimage_left", "preimage_right")
    uses_g = integrand in ("preimage_left", "preimage_right")
    if integrand == "plain" and f is None:
        raise UsageError("integrand 'plain' needs a test function")
    if uses_g:
        _require_indicator(f, "test_function")
        _require_indicator(g, "test_function_g")
        if integrand == "preimage_right" and op.degenerate_:
            raise DegeneracyError("preimage integrand undefined on a degenerate operator")
    fa = f if uses_f else None
    ga = g if uses_g else None
    has_box = (fa is not None and fa.is_indicator) or (ga is not None and ga.is_indicator)
    if has_box and fa is not None and not fa.is_indicator:
        raise UnsupportedOperationError("mixing smooth and indicator test functions")
    if has_box:
        return _oracle_boxes(op, integrand, fa, ga)
    return _oracle_smooth(op, integrand, fa, nodes)


def _active_map(op) -> dict[int, float]:
    return {int(i): float(v) for i, v in zip(op.indices_, op.lambdas_)}


def _oracle_smooth(op, integrand, f, nodes) -> float:
    active = _active_map(op)
    dims = sorted(set(active) | set(f.coords if f is not None else ()))
    if not dims:
        return 1.0
    if len(dims) > _MAX_QUAD_DIMS:
        raise UnsupportedOperationError(
            f"quadrature supports at most {_MAX_QUAD_DIMS} coordinates, got {len(dims)}"
        )
    x, w = _gh_nodes(nodes)
    with_jac = integrand in ("lambda", "abs_lambda", "push_lambda")
    # fold each dimension's Jacobian factor into its 1-d weights before the
    # tensor product: the combined factor decays like exp(-(1+lam)^2 x^2/2),
    # whereas the bare factor alone can overflow at extreme nodes
    weights_1d = []
    for d in dims:
        wd = w
        if with_jac and d in active:
            lam = active[d]
            factor = (1.0 + lam) * np.exp(-(lam + 0.5 * lam * lam) * x**2)
            wd = w * (np.abs(factor) if integrand == "abs_lambda" else factor)
        weights_1d.append(wd)
    weight = weights_1d[0]
    for wd in weights_1d[1:]:
        weight = np.multiply.outer(weight, wd)
    if f is None:
        return float(np.sum(weight))
    grids = np.meshgrid(*([x] * len(dims)), indexing="ij")
    width = max(f.coords)
    M = np.zeros((grids[0].size, width))
    for pos, d in enumerate(dims):
        if d <= width:
            col = grids[pos].ravel()
            if integrand == "push_lambda" and d in active:
                col = col * (1.0 + active[d])
            M[:, d - 1] = col
    return float(np.sum(weight * f(M).reshape(weight.shape)))


def _oracle_boxes(op, integrand, f, g) -> float:
    active = _active_map(op)
    dims = sorted(
        set(active) | set(f.coords if f is not None else ()) | set(g.coords if g is not None else ())
    )
    total = 1.0
    with_jac = integrand in ("lambda", "abs_lambda", "push_lambda", "preimage_left")
    absolute = integrand in ("abs_lambda", "preimage_left")
    for d in dims:
        lo, hi = -math.inf, math.inf
        c = 1.0 + active[d] if d in active else 1.0
        if f is not None and d <= len(f.coords):
            flo, fhi = f.lower[d - 1], f.upper[d - 1]
            if integrand in ("push_lambda", "preimage_left"):
                # constraint acts on the transformed coordinate c * x
                if c == 0.0:
                    if not flo <= 0.0 <= fhi:
                        return 0.0
                else:
                    a, b = sorted((flo / c, fhi / c))
                    lo, hi = max(lo, a), min(hi, b)
            else:
                lo, hi = max(lo, flo), min(hi, fhi)
        if g is not None and d <= len(g.coords):
            glo, ghi = g.lower[d - 1], g.upper[d - 1]
            if integrand == "preimage_right":
                # constraint acts on x / c
                a, b = sorted((glo * c, ghi * c))
                lo, hi = max(lo, a), min(hi, b)
            else:
                lo, hi = max(lo, glo), min(hi, ghi)
        if lo >= hi:
            return 0.0
        if with_jac and d in active:
            if c == 0.0:
                return 0.0  # degenerate coordinate: Jacobian factor vanishes
            mass = _phi(c * hi) - _phi(c * lo)
            if absolute:
                mass = abs(mass)
        else:
            mass = _phi(hi) - _phi(lo)
        total *= mass
    return total
