"""Jump-time evolution of the Gaussian Jacobian.

Two per-jump multipliers are tracked side by side.  With jump size ``s``
and coordinate ``x`` (the Gaussian coordinate assigned to the jump):

* the stochastic-difference factor

      1 - s * (x^2 (1 + s/2) - 1)
        + exp(s * (x^2 (1 - s/2) - 1)) * (exp(-s) (1 + s) - 1)

  obtained by restricting the Jacobian's jump SDE to a pure-jump driver
  (the dZ integral collapses to a sum over jumps);

* the closed-form factor (1 + s) exp(-s (x^2 - 1) - s^2 x^2 / 2), i.e.
  the Jacobian of the single-jump operator.

The two agree to first order in the jump size (both are
1 + s (1 - x^2) + O(s^2)) but differ at second order for x^2 != 1, so
nothing here asserts pathwise equality: :func:`compare_evolutions`
measures the gap under size rescaling and reports the empirical
log-log slope, which sits near 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jumps import JumpPath, jumps_up_to
from .shift import ShiftOperator, jacobian
from .wiener import GaussianSample, StepBasisAssignment


@dataclass(frozen=True)
class JumpFactorRecord:
    time: float
    size: float
    coordinate: float
    sde_factor: float
    closed_factor: float
    running_sde: float
    running_closed: float


@dataclass(frozen=True)
class EvolutionTrace:
    """Per-jump factors and running products, starting from 1."""

    records: tuple[JumpFactorRecord, ...]

    @property
    def final_sde(self) -> float:
        return self.records[-1].running_sde if self.records else 1.0

    @property
    def final_closed(self) -> float:
        return self.records[-1].running_closed if self.records else 1.0


@dataclass(frozen=True)
class ScaleComparison:
    """Max per-jump factor gap at each size scale, plus the fitted
    log-log slope (None when fewer than two positive gaps exist)."""

    scales: tuple[float, ...]
    max_diffs: tuple[float, ...]
    per_jump_diffs: tuple[tuple[float, ...], ...]
    slope: float | None


def sde_jump_factor(size: float, coordinate: float) -> float:
    s, x2 = float(size), float(coordinate) ** 2
    return (
        1.0
        - s * (x2 * (1.0 + 0.5 * s) - 1.0)
        + math.exp(s * (x2 * (1.0 - 0.5 * s) - 1.0)) * (math.exp(-s) * (1.0 + s) - 1.0)
    )


def closed_form_jump_factor(size: float, coordinate: float) -> float:
    """Jacobian of the single-jump operator at the assigned coordinate."""
    op = ShiftOperator.from_eigenvalues([float(size)])
    return jacobian(op, GaussianSample([float(coordinate)])).value


def evolve_jacobian(path: JumpPath, t, sample: GaussianSample, assignment=None) -> EvolutionTrace:
    """Run both per-jump recursions over the jumps up to t."""
    assignment = assignment if assignment is not None else StepBasisAssignment()
    running_sde = 1.0
    running_closed = 1.0
    records = []
    for ordinal, event in enumerate(jumps_up_to(path, t), start=1):
        x = sample.coord(assignment.basis_index(ordinal))
        fs = sde_jump_factor(event.size, x)
        fc = closed_form_jump_factor(event.size, x)
        running_sde *= fs
        running_closed *= fc
        records.append(
            JumpFactorRecord(
                time=event.time,
                size=event.size,
                coordinate=x,
                sde_factor=fs,
                closed_factor=fc,
                running_sde=running_sde,
                running_closed=running_closed,
            )
        )
    return EvolutionTrace(tuple(records))


def compare_evolutions(path: JumpPath, t, sample, scales, assignment=None) -> ScaleComparison:
    """Factor gaps on copies of the path with all sizes rescaled.

    ``scales`` must be strictly decreasing positive multipliers (e.g.
    1, 1/2, 1/4, 1/8).  The slope is fitted on log(max gap) against
    log(scale) over the scales with a positive gap.
    """
    scales = tuple(float(c) for c in scales)
    if any(c <= 0.0 for c in scales) or any(b <= a for a, b in zip(scales[1:], scales[:-1])):
        raise ValueError("scales must be strictly decreasing and positive")
    max_diffs = []
    per_jump = []
    for c in scales:
        trace = evolve_jacobian(path.with_scaled_sizes(c), t, sample, assignment)
        diffs = tuple(abs(r.sde_factor - r.closed_factor) for r in trace.records)
        per_jump.append(diffs)
        max_diffs.append(max(diffs, default=0.0))
    positive = [(c, d) for c, d in zip(scales, max_diffs) if d > 0.0]
    slope = None
    if len(positive) >= 2:
        logc = np.log([c for c, _ in positive])
        logd = np.log([d for _, d in positive])
        slope = float(np.polyfit(logc, logd, 1)[0])
    return ScaleComparison(
        scales=scales,
        max_diffs=tuple(max_diffs),
        per_jump_diffs=tuple(per_jump),
        slope=slope,
    )
