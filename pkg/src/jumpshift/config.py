"""Experiment configuration: schema, validation, loading.

Configs are single JSON documents.  Unknown keys are errors, not
warnings, and validation reports every offending field at once.  See the
README for the full schema; the shape is:

    {
      "seed": 42,
      "horizon": 1.0,
      "basis": {"dimension": 8, "kind": "abstract"},
      "process": {"type": "fixed_jumps",
                  "events": [{"time": 0.25, "size": 0.5}]},
      "eps": 0.0,
      "t_eval": 1.0,
      "experiment": {"kind": "degree", "samples": 100000}
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .jumps import JumpEvent, JumpPath, SizeDistribution
from .montecarlo import TestFunctionSpec
from .wiener import BasisSpec

EXPERIMENT_KINDS = (
    "degree",
    "abs_jacobian",
    "change_of_variables",
    "preimage_sum",
    "invert",
    "evolve",
    "truncation_study",
)

DEFAULT_EPS_SCHEDULE = tuple(2.0**-k for k in range(1, 13))

_TOP_KEYS = {"seed", "horizon", "basis", "process", "eps", "t_eval", "experiment"}
_REQUIRED = ("seed", "horizon", "basis", "process", "t_eval", "experiment")
_EXPERIMENT_KEYS = {
    "degree": {"samples"},
    "abs_jacobian": {"samples"},
    "change_of_variables": {"samples", "test_function"},
    "preimage_sum": {"samples", "test_function", "test_function_g", "tol"},
    "invert": {"samples", "tol", "max_iter"},
    "evolve": {"scales"},
    "truncation_study": {"eps_schedule"},
}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    samples: int | None = None
    test_function: TestFunctionSpec | None = None
    test_function_g: TestFunctionSpec | None = None
    tol: float | None = None
    max_iter: int = 400
    scales: tuple[float, ...] | None = None
    eps_schedule: tuple[float, ...] = DEFAULT_EPS_SCHEDULE


@dataclass(frozen=True)
class FixedJumpsSpec:
    events: tuple[JumpEvent, ...]


@dataclass(frozen=True)
class CompoundPoissonSpec:
    rate: float
    size_dist: SizeDistribution
    cap: int


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    horizon: float
    basis: BasisSpec
    process: FixedJumpsSpec | CompoundPoissonSpec
    eps: float
    t_eval: float
    experiment: ExperimentSpec
    raw: dict = field(repr=False, compare=False, default_factory=dict)


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_keys(doc: dict, allowed: set, prefix: str, problems: list):
    for key in doc:
        if key not in allowed:
            problems.append(f"{prefix}{key}: unknown key")


def _parse_test_function(doc, field_name, problems) -> TestFunctionSpec | None:
    if not isinstance(doc, dict):
        problems.append(f"{field_name}: must be an object")
        return None
    kind = doc.get("kind")
    allowed = {
        "cosine": {"kind", "coefficients"},
        "polynomial": {"kind", "coefficients", "degree"},
        "box": {"kind", "lower", "upper"},
    }
    if kind not in allowed:
        problems.append(f"{field_name}.kind: must be one of {sorted(allowed)}, got {kind!r}")
        return None
    _check_keys(doc, allowed[kind], f"{field_name}.", problems)
    try:
        if kind == "cosine":
            return TestFunctionSpec.cosine(doc.get("coefficients") or ())
        if kind == "polynomial":
            return TestFunctionSpec.monomial(doc.get("coefficients") or (), doc.get("degree", -1))
        return TestFunctionSpec.box(doc.get("lower") or (), doc.get("upper") or ())
    except (ConfigurationError, TypeError, ValueError) as exc:
        problems.append(f"{field_name}: {exc}")
        return None


def _parse_process(doc, basis_dim, horizon, problems):
    if not isinstance(doc, dict):
        problems.append("process: must be an object")
        return None
    ptype = doc.get("type")
    if ptype == "fixed_jumps":
        _check_keys(doc, {"type", "events"}, "process.", problems)
        events_doc = doc.get("events")
        if not isinstance(events_doc, list):
            problems.append("process.events: must be a list of {time, size} objects")
            return None
        events = []
        for i, ev in enumerate(events_doc):
            if not isinstance(ev, dict) or set(ev) != {"time", "size"}:
                problems.append(f"process.events[{i}]: must be an object with keys time, size")
                return None
            if not (_is_number(ev["time"]) and _is_number(ev["size"])):
                problems.append(f"process.events[{i}]: time and size must be finite numbers")
                return None
            events.append((ev["time"], ev["size"]))
        try:
            path_events = tuple(JumpEvent(t, s) for t, s in events)
            if horizon is not None:
                JumpPath(path_events, horizon)  # order/bound validation
        except ValueError as exc:
            problems.append(f"process.events: {exc}")
            return None
        if basis_dim is not None and len(events) > basis_dim:
            problems.append(
                f"basis.dimension: must be >= the number of fixed jumps "
                f"({len(events)}), got {basis_dim}"
            )
        return FixedJumpsSpec(events=path_events)
    if ptype == "compound_poisson":
        _check_keys(doc, {"type", "rate", "size_dist", "cap"}, "process.", problems)
        ok = True
        rate = doc.get("rate")
        if not _is_number(rate) or rate <= 0:
            problems.append(f"process.rate: must be positive, got {rate!r}")
            ok = False
        cap = doc.get("cap")
        if not _is_int(cap) or cap < 0:
            problems.append("process.cap: must be a nonnegative integer (max admissible jumps)")
            ok = False
        elif basis_dim is not None and cap > basis_dim:
            problems.append(f"basis.dimension: must be >= process.cap ({cap}), got {basis_dim}")
        dist = None
        sd = doc.get("size_dist")
        if not isinstance(sd, dict):
            problems.append("process.size_dist: must be an object")
            ok = False
        else:
            kinds = {
                "fixed": {"kind", "values"},
                "uniform": {"kind", "low", "high"},
                "normal": {"kind", "mean", "std"},
            }
            skind = sd.get("kind")
            if skind not in kinds:
                problems.append(
                    f"process.size_dist.kind: must be one of {sorted(kinds)}, got {skind!r}"
                )
                ok = False
            else:
                _check_keys(sd, kinds[skind], "process.size_dist.", problems)
                try:
                    if skind == "fixed":
                        dist = SizeDistribution.fixed(sd.get("values") or ())
                    elif skind == "uniform":
                        dist = SizeDistribution.uniform(sd.get("low", math.nan), sd.get("high", math.nan))
                    else:
                        dist = SizeDistribution.normal(sd.get("mean", math.nan), sd.get("std", math.nan))
                except (ConfigurationError, TypeError) as exc:
                    problems.append(f"process.size_dist: {exc}")
                    ok = False
        if not ok:
            return None
        return CompoundPoissonSpec(rate=float(rate), size_dist=dist, cap=int(cap))
    problems.append(f"process.type: must be 'fixed_jumps' or 'compound_poisson', got {ptype!r}")
    return None


def _parse_experiment(doc, problems) -> ExperimentSpec | None:
    if not isinstance(doc, dict):
        problems.append("experiment: must be an object")
        return None
    kind = doc.get("kind")
    if kind not in EXPERIMENT_KINDS:
        problems.append(
            f"experiment.kind: unknown experiment kind {kind!r} "
            f"(expected one of {list(EXPERIMENT_KINDS)})"
        )
        return None
    _check_keys(doc, _EXPERIMENT_KEYS[kind] | {"kind"}, "experiment.", problems)
    samples = doc.get("samples")
    needs_samples = kind in ("degree", "abs_jacobian", "change_of_variables", "preimage_sum", "invert")
    if needs_samples:
        if not _is_int(samples) or samples < 2:
            problems.append(f"experiment.samples: must be an integer >= 2, got {samples!r}")
    f = g = None
    if kind in ("change_of_variables", "preimage_sum"):
        if "test_function" not in doc:
            problems.append(f"experiment.test_function: required for {kind}")
        else:
            f = _parse_test_function(doc["test_function"], "experiment.test_function", problems)
    if kind == "preimage_sum":
        if "test_function_g" not in doc:
            problems.append("experiment.test_function_g: required for preimage_sum")
        else:
            g = _parse_test_function(doc["test_function_g"], "experiment.test_function_g", problems)
    tol = doc.get("tol")
    if tol is not None and (not _is_number(tol) or tol <= 0):
        problems.append(f"experiment.tol: must be positive, got {tol!r}")
    if tol is None:
        tol = 1e-12 if kind == "invert" else (1e-3 if kind == "preimage_sum" else None)
    max_iter = doc.get("max_iter", 400)
    if not _is_int(max_iter) or max_iter < 1:
        problems.append(f"experiment.max_iter: must be a positive integer, got {max_iter!r}")
    scales = doc.get("scales")
    if scales is not None:
        if (
            not isinstance(scales, list)
            or not all(_is_number(c) and c > 0 for c in scales)
            or any(b >= a for a, b in zip(scales, scales[1:]))
        ):
            problems.append("experiment.scales: must be a strictly decreasing list of positive numbers")
            scales = None
    schedule = doc.get("eps_schedule")
    if schedule is not None:
        if (
            not isinstance(schedule, list)
            or not all(_is_number(c) and c > 0 for c in schedule)
            or any(b >= a for a, b in zip(schedule, schedule[1:]))
        ):
            problems.append(
                "experiment.eps_schedule: must be a strictly decreasing list of positive numbers"
            )
            schedule = None
    return ExperimentSpec(
        kind=kind,
        samples=int(samples) if _is_int(samples) else None,
        test_function=f,
        test_function_g=g,
        tol=float(tol) if tol is not None else None,
        max_iter=int(max_iter) if _is_int(max_iter) else 400,
        scales=tuple(scales) if scales else None,
        eps_schedule=tuple(schedule) if schedule else DEFAULT_EPS_SCHEDULE,
    )


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config mapping; raises ConfigurationError listing every
    offending field."""
    if not isinstance(doc, dict):
        raise ConfigurationError("config: must be a JSON object")
    problems: list[str] = []
    _check_keys(doc, _TOP_KEYS, "", problems)
    for key in _REQUIRED:
        if key not in doc:
            problems.append(f"{key}: required")

    seed = doc.get("seed")
    if seed is not None and (not _is_int(seed) or not 0 <= seed < 2**64):
        problems.append(f"seed: must be a 64-bit unsigned integer, got {seed!r}")

    horizon = doc.get("horizon")
    if horizon is not None and (not _is_number(horizon) or horizon < 0):
        problems.append(f"horizon: must be a nonnegative number, got {horizon!r}")
        horizon = None

    basis = None
    basis_doc = doc.get("basis")
    if basis_doc is not None:
        if not isinstance(basis_doc, dict):
            problems.append("basis: must be an object")
        else:
            _check_keys(basis_doc, {"dimension", "kind"}, "basis.", problems)
            try:
                basis = BasisSpec(
                    dimension=basis_doc.get("dimension", 0),
                    kind=basis_doc.get("kind", "abstract"),
                )
            except ConfigurationError as exc:
                problems.extend(exc.problems)

    eps = doc.get("eps", 0.0)
    if not _is_number(eps) or eps < 0:
        problems.append(f"eps: must be nonnegative, got {eps!r}")
        eps = 0.0

    t_eval = doc.get("t_eval")
    if t_eval is not None:
        if not _is_number(t_eval):
            problems.append(f"t_eval: must be a number, got {t_eval!r}")
            t_eval = None
        elif horizon is not None and not 0 <= t_eval <= horizon:
            problems.append(f"t_eval: must lie in [0, horizon], got {t_eval}")

    process = None
    if doc.get("process") is not None:
        process = _parse_process(
            doc["process"], basis.dimension if basis else None, horizon, problems
        )

    experiment = None
    if doc.get("experiment") is not None:
        experiment = _parse_experiment(doc["experiment"], problems)

    if problems:
        raise ConfigurationError(problems)

    return ExperimentConfig(
        seed=int(seed),
        horizon=float(horizon),
        basis=basis,
        process=process,
        eps=float(eps),
        t_eval=float(t_eval),
        experiment=experiment,
        raw=doc,
    )
