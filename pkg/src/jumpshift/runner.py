"""Experiment orchestration and report emission.

Each experiment realizes one jump path (fixed or sampled once from the
seed's setup stream), builds the shift operator at the configured
evaluation time, runs the requested estimators/checks, and returns a
:class:`Report` whose records carry their own pass/fail verdicts against
the declared tolerances.

Canonical report documents are deterministic: given the same config
(seed included) they are byte-identical for any worker count.  Wall-clock
duration is therefore kept out of the canonical JSON/CSV payload unless
explicitly requested (``include_timing``).
"""

from __future__ import annotations

import csv
import io
import json
import sys
import time
from dataclasses import dataclass

import numpy as np

from .config import CompoundPoissonSpec, ExperimentConfig, FixedJumpsSpec
from .errors import CapacityError
from .evolution import compare_evolutions, evolve_jacobian
from .inverse import functional_sde_residual, geometric_rate, invert_exact, picard_inverse
from .jumps import JumpPath, carleman_determinant, sample_compound_poisson
from .montecarlo import (
    SubstreamFactory,
    change_of_variables_residual,
    estimate_abs_jacobian,
    estimate_mean_jacobian,
    mc_mean,
    quadrature_oracle,
    sum_over_preimage_check,
)
from .shift import build_shift, jacobian, truncation_distance
from .wiener import GaussianSample, dyadic_points, sample_gaussian

_ORACLE_NODES = 128
_ORACLE_TOL = 1e-8
_PICARD_MATCH_TOL = 1e-10
_SDE_RESIDUAL_TOL = 1e-10
_RATE_RTOL = 0.10
_SLOPE_MIN = 1.8
_FACTORIZATION_RTOL = 1e-12

CSV_COLUMNS = (
    "record",
    "label",
    "mean",
    "stderr",
    "n",
    "target",
    "value",
    "tolerance",
    "passed",
    "scale",
    "eps",
    "time",
    "size",
    "coordinate",
    "sde_factor",
    "closed_factor",
    "running_sde",
    "running_closed",
    "det_gap",
    "shift_distance",
    "degenerate",
    "variance_unreliable",
)


@dataclass
class Report:
    config: dict
    experiment: str
    results: list
    passed: bool
    duration_seconds: float


def _est_record(label, est, passed) -> dict:
    return {
        "record": "estimate",
        "label": label,
        "mean": est.mean,
        "stderr": est.stderr,
        "n": est.n,
        "target": est.target,
        "degenerate": est.degenerate,
        "variance_unreliable": est.variance_unreliable,
        "passed": bool(passed),
    }


def _check_record(label, value, tolerance) -> dict:
    return {
        "record": "check",
        "label": label,
        "value": float(value),
        "tolerance": float(tolerance),
        "passed": bool(value <= tolerance),
    }


def _oracle_record(label, value) -> dict:
    return {"record": "oracle", "label": label, "value": float(value)}


def _realize_path(config: ExperimentConfig, setup_rng) -> JumpPath:
    if isinstance(config.process, FixedJumpsSpec):
        return JumpPath(config.process.events, config.horizon)
    spec: CompoundPoissonSpec = config.process
    path = sample_compound_poisson(spec.rate, spec.size_dist, config.horizon, setup_rng)
    if len(path) > spec.cap:
        raise CapacityError(
            f"sampled path has {len(path)} jumps, exceeding the declared cap {spec.cap}"
        )
    return path


def run(config: ExperimentConfig, workers: int = 1) -> Report:
    """Execute the configured experiment; deterministic given (config, seed)."""
    start = time.perf_counter()
    streams = SubstreamFactory(config.seed)
    setup_rng = streams.setup_generator()
    path = _realize_path(config, setup_rng)
    kind = config.experiment.kind
    runner = _RUNNERS[kind]
    results = runner(config, path, streams, setup_rng, workers)
    passed = all(r["passed"] for r in results if "passed" in r)
    return Report(
        config=config.raw,
        experiment=kind,
        results=results,
        passed=passed,
        duration_seconds=time.perf_counter() - start,
    )


def _mean_pass(est) -> bool:
    return abs(est.mean - est.target) <= 3.0 * est.stderr


def _stable_oracle(op, integrand, f=None):
    """Gauss-Hermite value plus a node-doubling convergence verdict.

    Near-degenerate eigenvalues flatten the integrand's decay faster than
    feasible node counts can resolve; when halving the grid moves the
    value, the oracle is reported but not used as a pass/fail reference.
    """
    nodes = 128 if op.indices_.size >= 3 else _ORACLE_NODES
    value = quadrature_oracle(op, integrand, f=f, nodes=nodes)
    coarse = quadrature_oracle(op, integrand, f=f, nodes=nodes // 2)
    return value, abs(value - coarse) <= 1e-9


def _run_sign_family(config, path, streams, workers, estimator, integrand, label):
    op = build_shift(path, config.t_eval, config.basis, eps=config.eps)
    est = estimator(op, config.experiment.samples, streams, workers=workers)
    results = [_est_record(label, est, _mean_pass(est))]
    if op.indices_.size <= 3:
        oracle, converged = _stable_oracle(op, integrand)
        results.append(_oracle_record(f"quadrature_{label}", oracle))
        if converged:
            results.append(
                _check_record(f"quadrature_{label}_vs_target", abs(oracle - est.target), _ORACLE_TOL)
            )
            results.append(
                _check_record(f"mc_{label}_vs_quadrature", abs(est.mean - oracle), 3.0 * est.stderr)
            )
    return results


def _run_degree(config, path, streams, setup_rng, workers):
    return _run_sign_family(
        config, path, streams, workers, estimate_mean_jacobian, "lambda", "mean_jacobian"
    )


def _run_abs(config, path, streams, setup_rng, workers):
    return _run_sign_family(
        config, path, streams, workers, estimate_abs_jacobian, "abs_lambda", "abs_jacobian"
    )


def _run_cov(config, path, streams, setup_rng, workers):
    op = build_shift(path, config.t_eval, config.basis, eps=config.eps)
    exp = config.experiment
    res = change_of_variables_residual(op, exp.test_function, exp.samples, streams, workers)
    results = [_est_record("cov_residual", res, abs(res.mean) <= 3.0 * res.stderr)]
    quad_dims = set(map(int, op.indices_)) | set(exp.test_function.coords)
    if op.indices_.size <= 3 and len(quad_dims) <= 3:
        push = mc_mean(op, "push_lambda", exp.samples, streams, f=exp.test_function, workers=workers)
        plain = mc_mean(op, "plain", exp.samples, streams, f=exp.test_function, workers=workers)
        gh_push, ok_push = _stable_oracle(op, "push_lambda", f=exp.test_function)
        gh_plain, ok_plain = _stable_oracle(op, "plain", f=exp.test_function)
        gh_lam, ok_lam = _stable_oracle(op, "lambda")
        target = float(np.prod(np.sign(1.0 + op.lambdas_))) if op.lambdas_.size else 1.0
        results.append(_est_record("pushforward_side", push, True))
        results.append(_oracle_record("quadrature_pushforward", gh_push))
        results.append(_est_record("plain_side", plain, True))
        results.append(_oracle_record("quadrature_product_side", gh_plain * gh_lam))
        if ok_push and ok_plain and ok_lam:
            results.append(
                _check_record("pushforward_vs_quadrature", abs(push.mean - gh_push), 3.0 * push.stderr)
            )
            results.append(
                _check_record(
                    "product_side_vs_quadrature",
                    abs(plain.mean * target - gh_plain * gh_lam),
                    3.0 * plain.stderr,
                )
            )
    return results


def _run_preimage(config, path, streams, setup_rng, workers):
    op = build_shift(path, config.t_eval, config.basis, eps=config.eps)
    exp = config.experiment
    res = sum_over_preimage_check(op, exp.test_function, exp.test_function_g, exp.samples, streams, workers)
    results = [_est_record("preimage_residual", res, abs(res.mean) <= 3.0 * res.stderr)]
    if op.indices_.size > 3:
        return results
    left = mc_mean(
        op, "preimage_left", exp.samples, streams,
        f=exp.test_function, g=exp.test_function_g, workers=workers,
    )
    right = mc_mean(
        op, "preimage_right", exp.samples, streams,
        f=exp.test_function, g=exp.test_function_g, workers=workers,
    )
    o_left = quadrature_oracle(op, "preimage_left", f=exp.test_function, g=exp.test_function_g)
    o_right = quadrature_oracle(op, "preimage_right", f=exp.test_function, g=exp.test_function_g)
    tol = exp.tol if exp.tol is not None else 1e-3
    results.append(_est_record("preimage_left", left, True))
    results.append(_oracle_record("quadrature_preimage_left", o_left))
    results.append(_check_record("left_vs_quadrature", abs(left.mean - o_left), tol))
    results.append(_est_record("preimage_right", right, True))
    results.append(_oracle_record("quadrature_preimage_right", o_right))
    results.append(_check_record("right_vs_quadrature", abs(right.mean - o_right), tol))
    return results


def _run_invert(config, path, streams, setup_rng, workers):
    op = build_shift(path, config.t_eval, config.basis, eps=config.eps)
    exp = config.experiment
    dim = config.basis.dimension
    targets = setup_rng.standard_normal((exp.samples, dim))
    solutions = op.inverse_transform(targets)
    roundtrip = float(np.max(np.abs(op.transform(solutions) - targets), initial=0.0))
    results = [_check_record("exact_roundtrip_inf_norm", roundtrip, exp.tol)]
    contraction = float(np.max(np.abs(op.lambdas_), initial=0.0))
    if 0.0 < contraction < 1.0:
        gap = 0.0
        rate = None
        for i in range(exp.samples):
            res = picard_inverse(op, GaussianSample(targets[i]), tol=exp.tol, max_iter=exp.max_iter)
            gap = max(gap, float(np.max(np.abs(res.solution.xi - solutions[i]))))
            if rate is None and len(res.update_norms) >= 4:
                rate = geometric_rate(res)
        # the fixed point lands within ~tol * lam / (1 - lam) of the exact
        # inverse, so the match tolerance scales with the iteration tol
        match_tol = max(_PICARD_MATCH_TOL, 100.0 * exp.tol)
        results.append(_check_record("picard_vs_exact_inf_norm", gap, match_tol))
        if rate is not None:
            results.append(
                _check_record("picard_rate_error", abs(rate - contraction), _RATE_RTOL * contraction)
            )
    if config.basis.kind == "schauder":
        taus = dyadic_points(dim)
        worst = 0.0
        for i in range(exp.samples):
            worst = max(
                worst,
                functional_sde_residual(
                    op, config.basis, GaussianSample(targets[i]), GaussianSample(solutions[i]), taus
                ),
            )
        results.append(_check_record("functional_sde_residual", worst, _SDE_RESIDUAL_TOL))
    return results


def _run_evolve(config, path, streams, setup_rng, workers):
    sample = sample_gaussian(config.basis, setup_rng)
    if path.count_up_to(config.t_eval) > config.basis.dimension:
        raise CapacityError(
            f"path has {path.count_up_to(config.t_eval)} jumps up to t_eval, "
            f"basis dimension is {config.basis.dimension}"
        )
    trace = evolve_jacobian(path, config.t_eval, sample)
    results = []
    for i, r in enumerate(trace.records, start=1):
        results.append(
            {
                "record": "trace",
                "label": f"jump_{i}",
                "time": r.time,
                "size": r.size,
                "coordinate": r.coordinate,
                "sde_factor": r.sde_factor,
                "closed_factor": r.closed_factor,
                "running_sde": r.running_sde,
                "running_closed": r.running_closed,
            }
        )
    op = build_shift(path, config.t_eval, config.basis, eps=0.0)
    full = jacobian(op, sample).value
    scale = max(1.0, abs(full), abs(trace.final_closed))
    results.append(
        _check_record(
            "running_product_vs_jacobian",
            abs(trace.final_closed - full) / scale,
            _FACTORIZATION_RTOL,
        )
    )
    if config.experiment.scales:
        cmp = compare_evolutions(path, config.t_eval, sample, config.experiment.scales)
        for c, d in zip(cmp.scales, cmp.max_diffs):
            results.append(
                {"record": "scaling", "label": f"scale_{c}", "scale": c, "value": d}
            )
        if cmp.slope is not None:
            results.append(
                {
                    "record": "check",
                    "label": "scaling_slope",
                    "value": cmp.slope,
                    "tolerance": _SLOPE_MIN,
                    "passed": bool(cmp.slope >= _SLOPE_MIN),
                }
            )
    return results


def _run_truncation(config, path, streams, setup_rng, workers):
    sample = sample_gaussian(config.basis, setup_rng)
    d0 = carleman_determinant(path, config.t_eval, 0.0)
    op0 = build_shift(path, config.t_eval, config.basis, eps=0.0)
    results = [_oracle_record("untruncated_determinant", d0)]
    gaps = []
    dists = []
    for k, eps in enumerate(config.experiment.eps_schedule, start=1):
        gap = abs(carleman_determinant(path, config.t_eval, eps) - d0)
        op_eps = build_shift(path, config.t_eval, config.basis, eps=eps)
        dist = truncation_distance(op_eps, op0, sample)
        gaps.append(gap)
        dists.append(dist)
        results.append(
            {
                "record": "truncation",
                "label": f"k_{k}",
                "eps": eps,
                "det_gap": gap,
                "shift_distance": dist,
            }
        )
    results.append(
        {
            "record": "check",
            "label": "det_gap_nonincreasing",
            "value": float(np.max(np.diff(gaps), initial=0.0)),
            "tolerance": 0.0,
            "passed": bool(all(b <= a for a, b in zip(gaps, gaps[1:]))),
        }
    )
    results.append(
        {
            "record": "check",
            "label": "shift_distance_nonincreasing",
            "value": float(np.max(np.diff(dists), initial=0.0)),
            "tolerance": 0.0,
            "passed": bool(all(b <= a for a, b in zip(dists, dists[1:]))),
        }
    )
    return results


_RUNNERS = {
    "degree": _run_degree,
    "abs_jacobian": _run_abs,
    "change_of_variables": _run_cov,
    "preimage_sum": _run_preimage,
    "invert": _run_invert,
    "evolve": _run_evolve,
    "truncation_study": _run_truncation,
}


def report_document(report: Report, include_timing: bool = False) -> dict:
    doc = {
        "config": report.config,
        "experiment": report.experiment,
        "results": report.results,
        "passed": report.passed,
    }
    if include_timing:
        doc["duration_seconds"] = report.duration_seconds
    return doc


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render(report: Report, format: str = "json", include_timing: bool = False) -> str:
    """Serialize a report deterministically (fixed key/column order)."""
    if format == "json":
        return json.dumps(report_document(report, include_timing), indent=2) + "\n"
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in report.results:
            writer.writerow([_format_cell(rec.get(col)) for col in CSV_COLUMNS])
        return buf.getvalue()
    raise ValueError(f"format: must be 'json' or 'csv', got {format!r}")


def emit(report: Report, format: str = "json", destination=None, include_timing: bool = False) -> str:
    """Write the rendered report to a file path or stdout; returns the text."""
    text = render(report, format=format, include_timing=include_timing)
    if destination is None:
        sys.stdout.write(text)
        return text
    try:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise RuntimeError(f"cannot write report to {destination}: {exc}") from exc
    return text
