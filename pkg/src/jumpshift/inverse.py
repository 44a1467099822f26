"""Inversion of the perturbed map: exact division and Picard iteration.

The exact inverse divides each active coordinate by (1 + lambda_n); it
exists whenever no eigenvalue equals -1.  The Picard route iterates the
fixed-point map eta <- xi - lambda * eta per active coordinate, which
contracts exactly when max |lambda_n| < 1 and realizes the functional
equation of the inverse on the path level: with a schauder basis the
inverse path solves

    V(tau) = W(tau) - integral_0^tau  sum_n lambda_n eta_n de_n/ds (s) ds,

and :func:`functional_sde_residual` checks that equation pointwise,
evaluating the integral exactly (the integrand is piecewise constant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegeneracyError, DomainError, NonContractiveError
from .shift import ShiftOperator
from .wiener import BasisSpec, GaussianSample, _require_schauder, schauder_value_matrix

# Below this margin from -1 the exact inverse is still returned but
# flagged: one coordinate is divided by a near-zero factor.
_CONDITIONING_MARGIN = 1e-10


@dataclass(frozen=True)
class InverseResult:
    """Outcome of an inversion; residual is measured on the returned
    solution, in the max norm of U(solution) - target."""

    solution: GaussianSample
    iterations: int
    residual: float
    ill_conditioned: bool = False
    update_norms: tuple[float, ...] = ()


def _residual_inf(op: ShiftOperator, solution: np.ndarray, target: np.ndarray) -> float:
    return float(np.max(np.abs(op.transform(solution)[0] - target), initial=0.0))


def invert_exact(op: ShiftOperator, target: GaussianSample) -> InverseResult:
    """Coordinatewise inverse eta_n = xi_n / (1 + lambda_n)."""
    op._check_fitted()
    if op.degenerate_:
        raise DegeneracyError("eigenvalue -1: the map is not injective on that coordinate")
    eta = op.inverse_transform(target.xi)[0]
    ill = bool(op.lambdas_.size and np.min(np.abs(1.0 + op.lambdas_)) < _CONDITIONING_MARGIN)
    return InverseResult(
        solution=GaussianSample(eta),
        iterations=0,
        residual=_residual_inf(op, eta, target.xi),
        ill_conditioned=ill,
    )


def picard_inverse(op: ShiftOperator, target: GaussianSample, tol, max_iter=400) -> InverseResult:
    """Fixed-point iteration for the inverse; needs max |lambda| < 1.

    Iterates until the max-norm update drops below ``tol`` or the budget
    is exhausted (then :class:`ConvergenceError` carrying the last
    residual).  Update norms are recorded so callers can estimate the
    geometric contraction rate.
    """
    op._check_fitted()
    tol = float(tol)
    if not math.isfinite(tol) or tol <= 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    max_iter = int(max_iter)
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")
    contraction = float(np.max(np.abs(op.lambdas_), initial=0.0))
    if contraction >= 1.0:
        raise NonContractiveError(
            f"max |eigenvalue| = {contraction} >= 1; use invert_exact instead"
        )
    xi = np.array(target.xi, dtype=float)
    cols = op.indices_ - 1
    eta = xi.copy()
    updates = []
    for it in range(1, max_iter + 1):
        new_active = xi[cols] - op.lambdas_ * eta[cols]
        step = float(np.max(np.abs(new_active - eta[cols]), initial=0.0))
        eta[cols] = new_active
        updates.append(step)
        if step < tol:
            return InverseResult(
                solution=GaussianSample(eta),
                iterations=it,
                residual=_residual_inf(op, eta, xi),
                update_norms=tuple(updates),
            )
    raise ConvergenceError(
        f"picard iteration did not reach tol={tol} in {max_iter} iterations",
        residual=_residual_inf(op, eta, xi),
    )


def geometric_rate(result: InverseResult, window: int = 5) -> float:
    """Empirical contraction rate: geometric mean of the last successive
    update-norm ratios (excluding the final sub-tolerance step)."""
    norms = [u for u in result.update_norms[:-1] if u > 0.0]
    if len(norms) < 2:
        raise DomainError("not enough update history to estimate a rate")
    tail = norms[-(window + 1):]
    ratios = np.array(tail[1:]) / np.array(tail[:-1])
    return float(np.exp(np.mean(np.log(ratios))))


def functional_sde_residual(op, basis: BasisSpec, target, solution, taus) -> float:
    """Max deviation of the inverse-path equation at the given points.

    For each tau the check is |V(tau) - W(tau) + I(tau)| where V, W are
    the reconstructed paths of solution and target and I(tau) is the
    exact integral of the shift's derivative along the solution,
    sum_n lambda_n eta_n e_n(tau).
    """
    _require_schauder(basis, "functional_sde_residual")
    op._check_fitted()
    taus = np.asarray(taus, dtype=float).reshape(-1)
    E = schauder_value_matrix(basis.dimension, taus)
    d = basis.dimension
    path_diff = E @ (solution.xi[:d] - target.xi[:d])
    integral = np.zeros_like(path_diff)
    if op.indices_.size:
        cols = op.indices_ - 1
        integral = E[:, cols] @ (op.lambdas_ * solution.xi[cols])
    return float(np.max(np.abs(path_diff + integral), initial=0.0))
