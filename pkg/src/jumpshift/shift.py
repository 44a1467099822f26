"""Diagonal shift operators and their Gaussian Jacobian factorization.

The central object is :class:`ShiftOperator`, a scikit-learn style
transformer.  Fitting binds it to the jumps of a path up to an evaluation
time: jump number n (chronological) contributes the eigenvalue
``lambda_n = size_n`` on the basis direction assigned to n.  The fitted
map acts on coordinate vectors as

    transform:          xi_n  ->  (1 + lambda_n) xi_n   on active indices,
    inverse_transform:  xi_n  ->  xi_n / (1 + lambda_n),

identity elsewhere.  Because the derivative of the shift does not depend
on the point, the map is affine in the sample and its Jacobian density
with respect to the Gaussian measure factorizes per coordinate:

    value = det2 * exp(-divergence - norm2 / 2)

with det2 the determinant product of the eigenvalues, divergence
``sum lambda_n (xi_n^2 - 1)`` and norm2 ``sum lambda_n^2 xi_n^2``.  An
eigenvalue of exactly -1 collapses its coordinate; the Jacobian is then
exactly zero and the operator is flagged degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import CapacityError, DegeneracyError, DomainError, UsageError
from .jumps import (
    _MAX_PLAIN_FACTORS,
    _TINY_FACTOR,
    JumpPath,
    det2_product,
    det2_sign_logabs,
    fixed_jumps,
    jumps_up_to,
)
from .wiener import BasisSpec, GaussianSample, StepBasisAssignment


@dataclass(frozen=True)
class JacobianBreakdown:
    """Factored Gaussian Jacobian of the shifted map at one sample."""

    det2: float
    divergence: float
    norm2: float
    value: float
    degenerate: bool


class ShiftOperator(BaseEstimator, TransformerMixin):
    """Diagonal perturbation of identity driven by the jumps of a path.

    Parameters
    ----------
    path : JumpPath
        Source of the eigenvalues.
    t : float
        Evaluation time; jumps with time <= t are used.
    eps : float, default 0.0
        Truncation threshold: only jumps with |size| > eps become active
        eigenvalues.  0 keeps every jump.
    dim : int, optional
        Basis dimension.  When given, every assigned basis index of the
        jumps up to t must fit, otherwise fitting raises CapacityError.
        When omitted, the largest assigned index is used.
    assignment : StepBasisAssignment, optional
        Jump-ordinal to basis-index map; identity when omitted.

    Attributes (after fit)
    ----------------------
    indices_ : ndarray of int
        Active basis indices, 1-based.
    lambdas_ : ndarray of float
        Eigenvalue per active index (the jump sizes).
    dim_ : int
        Resolved basis dimension.
    degenerate_ : bool
        True when some eigenvalue equals -1 exactly.
    det2_ : float
        Determinant product of the eigenvalues.
    hs_norm_ : float
        Hilbert-Schmidt norm sqrt(sum lambda^2).
    """

    def __init__(self, path=None, t=None, eps=0.0, dim=None, assignment=None):
        self.path = path
        self.t = t
        self.eps = eps
        self.dim = dim
        self.assignment = assignment

    @classmethod
    def from_eigenvalues(cls, lambdas, eps=0.0, dim=None) -> "ShiftOperator":
        """Fitted operator with the given eigenvalues on indices 1..k.

        Builds the canonical carrier path with equally spaced jump times
        on horizon 1 and evaluates at t = 1.
        """
        lambdas = [float(v) for v in lambdas]
        k = len(lambdas)
        times = [(i + 1.0) / (k + 1.0) for i in range(k)]
        path = fixed_jumps(times, lambdas, 1.0)
        return cls(path=path, t=1.0, eps=eps, dim=dim).fit()

    def fit(self, X=None, y=None) -> "ShiftOperator":
        """Resolve the active (index, eigenvalue) pairs from the path."""
        if not isinstance(self.path, JumpPath):
            raise UsageError("path: expected a JumpPath")
        eps = float(self.eps)
        if not math.isfinite(eps) or eps < 0.0:
            raise DomainError(f"eps must be finite and >= 0, got {eps}")
        events = jumps_up_to(self.path, self.t)
        assignment = self.assignment if self.assignment is not None else StepBasisAssignment()
        assigned = [(assignment.basis_index(i + 1), ev.size) for i, ev in enumerate(events)]
        max_index = max((idx for idx, _ in assigned), default=0)
        if self.dim is not None:
            dim = int(self.dim)
            if max_index > dim:
                raise CapacityError(
                    f"{len(assigned)} jumps need basis index {max_index}, "
                    f"but the basis dimension is {dim}"
                )
        else:
            dim = max_index
        active = [(idx, size) for idx, size in assigned if abs(size) > eps]
        self.indices_ = np.array([idx for idx, _ in active], dtype=np.intp)
        self.lambdas_ = np.array([size for _, size in active], dtype=float)
        self.dim_ = dim
        self.degenerate_ = bool(np.any(self.lambdas_ == -1.0))
        self.det2_ = det2_product(self.lambdas_)
        self._det2_sign, self._det2_logabs = det2_sign_logabs(self.lambdas_)
        self.hs_norm_ = float(np.sqrt(np.sum(self.lambdas_**2)))
        self._plain = (
            self.lambdas_.size <= _MAX_PLAIN_FACTORS
            and (
                self.lambdas_.size == 0
                or np.min(np.abs(1.0 + self.lambdas_)) >= _TINY_FACTOR
            )
        )
        return self

    # -- helpers -----------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "lambdas_"):
            raise UsageError("operator is not fitted; call fit() first")

    def _as_matrix(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2:
            raise DomainError(f"expected a 2-d sample matrix, got ndim={X.ndim}")
        if self.indices_.size and X.shape[1] < int(self.indices_.max()):
            raise CapacityError(
                f"samples have {X.shape[1]} coordinates, active index "
                f"{int(self.indices_.max())} does not fit"
            )
        return X

    def _cols(self) -> np.ndarray:
        return self.indices_ - 1

    # -- the map and its inverse -------------------------------------------

    def transform(self, X) -> np.ndarray:
        """Apply the perturbation of identity row-wise."""
        X = self._as_matrix(X)
        out = X.copy()
        if self.indices_.size:
            out[:, self._cols()] *= 1.0 + self.lambdas_
        return out

    def inverse_transform(self, X) -> np.ndarray:
        """Exact coordinatewise inverse; undefined on degenerate operators."""
        X = self._as_matrix(X)
        if self.degenerate_:
            raise DegeneracyError("eigenvalue -1: the map collapses a coordinate")
        out = X.copy()
        if self.indices_.size:
            out[:, self._cols()] /= 1.0 + self.lambdas_
        return out

    def shift(self, X) -> np.ndarray:
        """The shift u(x) = transform(x) - x, row-wise (zero off the
        active indices)."""
        X = self._as_matrix(X)
        out = np.zeros_like(X)
        if self.indices_.size:
            out[:, self._cols()] = self.lambdas_ * X[:, self._cols()]
        return out

    def hs_norm(self) -> float:
        self._check_fitted()
        return self.hs_norm_

    # -- Jacobian ------------------------------------------------------------

    def jacobian_parts(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Per-row (divergence, norm2) of the shift at the samples."""
        X = self._as_matrix(X)
        if not self.indices_.size:
            z = np.zeros(X.shape[0])
            return z, z.copy()
        xi2 = X[:, self._cols()] ** 2
        divergence = xi2 @ self.lambdas_ - self.lambdas_.sum()
        norm2 = xi2 @ self.lambdas_**2
        return divergence, norm2

    def lambda_values(self, X) -> np.ndarray:
        """Per-row Gaussian Jacobian value (exactly 0 when degenerate)."""
        X = self._as_matrix(X)
        if self.degenerate_:
            return np.zeros(X.shape[0])
        divergence, norm2 = self.jacobian_parts(X)
        expo = -divergence - 0.5 * norm2
        if self._plain:
            return self.det2_ * np.exp(expo)
        return self._det2_sign * np.exp(self._det2_logabs + expo)


def build_shift(path, t, basis: BasisSpec, assignment=None, eps=0.0) -> ShiftOperator:
    """Fitted operator for the jumps of ``path`` up to ``t`` on the basis."""
    return ShiftOperator(
        path=path, t=t, eps=eps, dim=basis.dimension, assignment=assignment
    ).fit()


def hs_norm(op: ShiftOperator) -> float:
    return op.hs_norm()


def shift_vector(op: ShiftOperator, sample: GaussianSample) -> np.ndarray:
    """Coordinates of the shift u(w): lambda_n * xi_n on active indices."""
    return op.shift(sample.xi)[0]


def perturb(op: ShiftOperator, sample: GaussianSample) -> GaussianSample:
    """The perturbed point U(w) = w + u(w)."""
    return GaussianSample(op.transform(sample.xi)[0])


def jacobian(op: ShiftOperator, sample: GaussianSample) -> JacobianBreakdown:
    """Factored Gaussian Jacobian at one sample."""
    row = sample.xi[None, :]
    divergence, norm2 = op.jacobian_parts(row)
    value = op.lambda_values(row)
    return JacobianBreakdown(
        det2=op.det2_,
        divergence=float(divergence[0]),
        norm2=float(norm2[0]),
        value=float(value[0]),
        degenerate=op.degenerate_,
    )


def truncation_distance(op_a: ShiftOperator, op_b: ShiftOperator, sample: GaussianSample) -> float:
    """Cameron-Martin distance |u_a(w) - u_b(w)| of two truncations.

    Both operators must be fitted from the same path, time and
    assignment; they may differ only in the truncation threshold.  The
    difference is computed directly from coordinates, which for nested
    thresholds is supported on the band of eigenvalues kept by one
    operator and dropped by the other.
    """
    op_a._check_fitted()
    op_b._check_fitted()
    same_source = (
        op_a.path == op_b.path
        and float(op_a.t) == float(op_b.t)
        and op_a.assignment == op_b.assignment
    )
    if not same_source:
        raise UsageError("operators were not built from the same path and time")
    width = max((int(op.indices_.max()) for op in (op_a, op_b) if op.indices_.size), default=0)
    if sample.dimension < width:
        raise CapacityError(
            f"sample has {sample.dimension} coordinates, active index {width} does not fit"
        )
    diff = np.zeros(max(width, 1))
    if op_a.indices_.size:
        diff[op_a.indices_ - 1] += op_a.lambdas_ * sample.xi[op_a.indices_ - 1]
    if op_b.indices_.size:
        diff[op_b.indices_ - 1] -= op_b.lambdas_ * sample.xi[op_b.indices_ - 1]
    return float(np.linalg.norm(diff))
