"""Batch experiments: config parsing, per-kind dispatch, CSV/manifest output and run storage.

A config file is a list of "section/key = value" lines; a "[section]" header
prefixes the keys that follow it. Blank lines and lines starting with '#'
are ignored, so a manifest (comment header plus config echo) is itself a
valid config.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sqlalchemy import desc, select

from backend import __version__
from backend.db import SessionLocal, commit_with_retry, init_db
from backend.models import ExperimentRow, ExperimentRun
from backend.services.estimators import (
    VYSOTSKY_MAX_N,
    HullJob,
    empirical_variance_profile,
    gram_limit_mc,
    hull_distribution_probe,
    ks_two_sample,
    parse_functional,
    run_hull_replicates,
    vysotsky_mean_Vm,
)
from backend.services.limits import (
    bm_expected_Vm,
    drift_limits,
    gaussian_volume_limit,
    gram_mean_limit,
    limit_table,
    rotinv_expected_Vm,
    timespace_volume_constant,
    timespace_walk_expected_volume,
    v1_stable_limit,
    variance_upper_bound,
)
from backend.services.montecarlo import (
    STREAM_GRAM,
    STREAM_NAMES,
    STREAM_NORM,
    STREAM_ROTATIONS,
    STREAM_SPHERE,
    STREAM_VYSOTSKY,
    STREAM_WALKS,
    BudgetExceededError,
    McEstimate,
)
from backend.services.stable import (
    DiscreteSpectral,
    Gaussian,
    NormalizationPlan,
    RotInv,
    StableLawSpec,
    second_central_moment,
)
from backend.services.storage import default_output_dir, ensure_output_dir
from backend.services.utils import (
    format_number,
    normalize_text,
    parse_bool,
    parse_float,
    parse_int,
    parse_matrix,
    to_float_list,
    to_int_list,
)
from backend.services.walks import perp_covariance_det

logger = logging.getLogger(__name__)

KINDS = (
    "mean-intrinsic",
    "drift-scaling",
    "timespace-volume",
    "variance",
    "vysotsky-crosscheck",
    "distribution-probe",
    "limit-table",
)
VM_METHODS = ("auto", "exact", "kubota", "sphere")
STRUCTURES = ("gaussian", "rotinv", "spectral")
CSV_HEADER = ("experiment", "n", "m", "scaling", "estimate", "std_error", "limit", "rel_error", "seed")

# key -> default; None marks a required key
CONFIG_KEYS: Dict[str, Optional[str]] = {
    "experiment/kind": None,
    "experiment/seed": None,
    "experiment/replications": "200",
    "experiment/n_list": None,
    "experiment/m_list": "1",
    "experiment/vm_method": "auto",
    "experiment/functional": "",
    "experiment/dims": "2, 3, 4",
    "law/dim": None,
    "law/alpha": "2",
    "law/structure": "",
    "law/covariance": "",
    "law/gamma": "1",
    "law/directions": "",
    "law/weights": "",
    "law/symmetric": "true",
    "law/drift": "",
    "mc/sphere_directions": "4096",
    "mc/rotations": "1024",
    "mc/samples": "10000",
    "output/directory": "",
}
NOT_REQUIRED_FOR_TABLE = ("experiment/n_list", "law/dim")

# seed keys of Monte Carlo limit constants sit above every row key
LIMIT_ROW_KEY = 1 << 20
TIMESPACE_REFERENCE = "timespace-volume/timespace-walk"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    replications: int = 200
    n_list: Tuple[int, ...] = ()
    m_list: Tuple[int, ...] = (1,)
    vm_method: str = "auto"
    functional: str = ""
    dims: Tuple[int, ...] = (2, 3, 4)
    spec: Optional[StableLawSpec] = None
    sphere_directions: int = 4096
    rotations: int = 1024
    mc_samples: int = 10000
    output_dir: Optional[str] = None
    entries: Tuple[Tuple[str, str], ...] = ()

    def to_text(self) -> str:
        lines: List[str] = []
        section = None
        for key, value in self.entries:
            head, name = key.split("/", 1)
            if head != section:
                if lines:
                    lines.append("")
                lines.append(f"[{head}]")
                section = head
            lines.append(f"{name} = {value}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    n: Optional[int]
    m: str
    scaling: str
    estimate: float
    std_error: float
    limit: Optional[float]
    seed: int

    @property
    def rel_error(self) -> Optional[float]:
        if self.limit is None:
            return None
        if self.limit == 0:
            return abs(self.estimate)
        return abs(self.estimate - self.limit) / abs(self.limit)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentRecord:
    config: ExperimentConfig
    rows: List[ResultRow]
    checks: List[Check] = field(default_factory=list)
    wall_time: float = 0.0
    output_dir: Optional[Path] = None
    run_id: Optional[str] = None


# ---------------------------------------------------------------------------
# config parsing


def _entries_from_text(text: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    section = ""
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}", "expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if "/" not in key and section:
            key = f"{section}/{key}"
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "duplicate key")
        values[key] = value.strip()
    return values


def _field(values: Dict[str, str], key: str, parser: Callable[[str], Any]) -> Any:
    text = values.get(key)
    if text is None or text == "":
        default = CONFIG_KEYS[key]
        if default is None:
            raise ConfigError(key, "missing required key")
        text = default
    try:
        return parser(text)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from exc


def _positive(parser: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        value = parser(text)
        for item in value if isinstance(value, list) else [value]:
            if item < 1:
                raise ValueError("must be positive")
        return value

    return parse


def _parse_structure(values: Dict[str, str], dim: int, alpha: float) -> Any:
    structure = normalize_text(values.get("law/structure")).lower() or ("gaussian" if alpha == 2 else "rotinv")
    if structure not in STRUCTURES:
        raise ConfigError("law/structure", f"unknown structure: {structure}")
    if (structure == "gaussian") != (alpha == 2):
        raise ConfigError("law/structure", "alpha = 2 goes with the gaussian structure and only with it")
    if structure == "gaussian":
        matrix = _field(values, "law/covariance", parse_matrix) or np.eye(dim).tolist()
        return Gaussian(matrix)
    if structure == "rotinv":
        return RotInv(_field(values, "law/gamma", parse_float))
    directions = _field(values, "law/directions", parse_matrix)
    if not directions:
        raise ConfigError("law/directions", "missing required key")
    weights = _field(values, "law/weights", to_float_list) or [1.0] * len(directions)
    return DiscreteSpectral(directions, weights, _field(values, "law/symmetric", parse_bool))


_STRUCTURE_KEYS = {Gaussian: "law/covariance", RotInv: "law/gamma", DiscreteSpectral: "law/directions"}


def _parse_law(values: Dict[str, str]) -> StableLawSpec:
    dim = _field(values, "law/dim", _positive(parse_int))
    alpha = _field(values, "law/alpha", parse_float)
    if not 0 < alpha <= 2:
        raise ConfigError("law/alpha", "alpha must lie in (0, 2]")
    drift = _field(values, "law/drift", to_float_list)
    if drift and len(drift) != dim:
        raise ConfigError("law/drift", f"drift needs {dim} coordinates")
    if alpha <= 1 and any(drift):
        raise ConfigError("law/drift", "drift not supported for alpha ≤ 1")
    structure = _parse_structure(values, dim, alpha)
    try:
        return StableLawSpec(dim, alpha, structure, tuple(drift))
    except ValueError as exc:
        raise ConfigError(_STRUCTURE_KEYS[type(structure)], str(exc)) from exc


def _check_kind(kind: str, spec: Optional[StableLawSpec], config: Dict[str, Any]) -> None:
    if kind == "limit-table":
        return
    if kind in ("mean-intrinsic", "vysotsky-crosscheck") and spec.has_drift:
        raise ConfigError("law/drift", f"{kind} needs zero drift")
    if kind in ("drift-scaling", "timespace-volume") and not spec.has_drift:
        raise ConfigError("law/drift", f"{kind} needs a nonzero drift")
    if kind == "timespace-volume":
        if not isinstance(spec.structure, Gaussian):
            raise ConfigError("law/structure", "timespace-volume needs gaussian steps")
        if spec.dim < 2:
            raise ConfigError("law/dim", "timespace-volume needs dim >= 2")
    if kind == "variance":
        if spec.alpha != 2:
            raise ConfigError("law/alpha", "variance needs finite second moments (alpha = 2)")
        if config["replications"] < 3:
            raise ConfigError("experiment/replications", "variance needs at least 3 replications")
    if kind == "vysotsky-crosscheck" and spec.alpha <= 1:
        raise ConfigError("law/alpha", "vysotsky-crosscheck needs alpha > 1")
    for m in config["m_list"]:
        if not 1 <= m <= spec.dim:
            raise ConfigError("experiment/m_list", f"m must lie in 1..{spec.dim}")
    if kind == "distribution-probe":
        return
    indices = [spec.dim] if kind == "timespace-volume" else config["m_list"]
    for m in indices:
        if config["vm_method"] == "sphere" and m != 1:
            raise ConfigError("experiment/vm_method", f"sphere quadrature only estimates V_1, not V_{m}")
        # exact branches: m >= d - 1, plus the edge formula for V_1 in three dimensions
        if config["vm_method"] == "exact" and spec.dim >= 4 and m <= spec.dim - 2:
            raise ConfigError("experiment/vm_method", f"no exact branch for V_{m} in dimension {spec.dim}")


def _canonical_entries(values: Dict[str, str], parsed: Dict[str, Any]) -> Tuple[Tuple[str, str], ...]:
    entries = []
    for key in CONFIG_KEYS:
        if key in parsed:
            value = parsed[key]
            if isinstance(value, (list, tuple)):
                text = ", ".join(format_number(item) if isinstance(item, float) else str(item) for item in value)
            elif isinstance(value, float):
                text = format_number(value)
            else:
                text = str(value)
        else:
            text = values.get(key, "")
        if text != "":
            entries.append((key, text))
    return tuple(entries)


def parse_config_text(text: str) -> ExperimentConfig:
    values = _entries_from_text(text)
    kind = normalize_text(values.get("experiment/kind")).lower()
    if not kind:
        raise ConfigError("experiment/kind", "missing required key")
    if kind not in KINDS:
        raise ConfigError("experiment/kind", f"unknown experiment kind: {kind}")
    table = kind == "limit-table"
    parsed: Dict[str, Any] = {"experiment/kind": kind}
    seed = _field(values, "experiment/seed", parse_int)
    if seed < 0:
        raise ConfigError("experiment/seed", "seed must be non-negative")
    parsed["experiment/seed"] = seed
    replications = _field(values, "experiment/replications", parse_int)
    if replications < 2:
        raise ConfigError("experiment/replications", "at least 2 replications are needed")
    parsed["experiment/replications"] = replications

    spec = None
    n_list: List[int] = []
    if table:
        dims = _field(values, "experiment/dims", _positive(to_int_list))
        if not dims:
            raise ConfigError("experiment/dims", "no dimensions")
        parsed["experiment/dims"] = dims
        for key in NOT_REQUIRED_FOR_TABLE:
            if values.get(key):
                raise ConfigError(key, "not used by limit-table")
    else:
        n_list = _field(values, "experiment/n_list", _positive(to_int_list))
        if not n_list:
            raise ConfigError("experiment/n_list", "missing required key")
        if any(later <= earlier for earlier, later in zip(n_list, n_list[1:])):
            raise ConfigError("experiment/n_list", "n_list must be increasing")
        parsed["experiment/n_list"] = n_list
        spec = _parse_law(values)

    m_list = _field(values, "experiment/m_list", _positive(to_int_list))
    vm_method = _field(values, "experiment/vm_method", lambda text: text.lower())
    if vm_method not in VM_METHODS:
        raise ConfigError("experiment/vm_method", f"unknown method: {vm_method}")
    functional = values.get("experiment/functional", "")
    if kind == "distribution-probe":
        functional = functional or f"V{spec.dim}"
        try:
            parse_functional(functional, spec.dim)
        except ValueError as exc:
            raise ConfigError("experiment/functional", str(exc)) from exc
    elif functional:
        raise ConfigError("experiment/functional", "only used by distribution-probe")
    sphere_directions = _field(values, "mc/sphere_directions", _positive(parse_int))
    rotations = _field(values, "mc/rotations", _positive(parse_int))
    mc_samples = _field(values, "mc/samples", parse_int)
    if mc_samples < 2:
        raise ConfigError("mc/samples", "at least 2 samples are needed")
    parsed.update(
        {
            "experiment/m_list": m_list,
            "experiment/vm_method": vm_method,
            "mc/sphere_directions": sphere_directions,
            "mc/rotations": rotations,
            "mc/samples": mc_samples,
        }
    )
    if functional:
        parsed["experiment/functional"] = functional
    _check_kind(kind, spec, {"replications": replications, "m_list": m_list, "vm_method": vm_method})

    output_dir = normalize_text(values.get("output/directory")) or None
    return ExperimentConfig(
        kind=kind,
        seed=seed,
        replications=replications,
        n_list=tuple(n_list),
        m_list=tuple(m_list),
        vm_method=vm_method,
        functional=functional,
        dims=tuple(parsed.get("experiment/dims", ())),
        spec=spec,
        sphere_directions=sphere_directions,
        rotations=rotations,
        mc_samples=mc_samples,
        output_dir=output_dir,
        entries=_canonical_entries(values, parsed),
    )


def parse_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    return parse_config_text(text)


# ---------------------------------------------------------------------------
# scalings and limits


def scaling_for(m: int, d: int, alpha: float, has_drift: bool, n: int, route: str = "raw") -> Tuple[str, float]:
    """Label and value of the normalization applied to V_m(n)."""
    b_n = NormalizationPlan(alpha, ()).b(n)
    if not has_drift:
        return f"b_n^{m}", b_n ** m
    if m == 1:
        return "n", float(n)
    if m == d and route == "psi":
        # V_d of the psi_n image of the hull
        return f"n*b_n^{d - 1}", n * b_n ** (d - 1)
    return f"n^({m + 1}/2)", float(n) ** ((m + 1) / 2)


def variance_scaling(m: int, has_drift: bool, n: int) -> Tuple[str, float]:
    power = m + 1 if has_drift else m
    return f"n^{power}", float(n) ** power


def zero_drift_limit(spec: StableLawSpec, m: int, mc_samples: int, seed: int) -> Optional[float]:
    """lim E[V_m(n)] / b_n^m, closed form where one exists and Monte Carlo otherwise."""
    if spec.alpha <= 1:
        return None
    structure = spec.structure
    d = spec.dim
    if isinstance(structure, Gaussian):
        if np.allclose(structure.matrix, np.eye(d)):
            return bm_expected_Vm(d, m)
        if m == d:
            return gaussian_volume_limit(d, structure.matrix)
    if isinstance(structure, RotInv):
        return rotinv_expected_Vm(spec.alpha, structure.gamma, d, m)
    key = (seed, LIMIT_ROW_KEY + m)
    if m == 1:
        return v1_stable_limit(spec, mc_samples, key).mean
    return gram_mean_limit(gram_limit_mc(spec, m, mc_samples, key).mean, spec.alpha, m)


def _row(kind: str, n: Optional[int], m: Any, scaling: Tuple[str, float], estimate: McEstimate,
         limit: Optional[float], seed: int) -> ResultRow:
    label, factor = scaling
    return ResultRow(kind, n, str(m), label, estimate.mean / factor, estimate.std_error / factor, limit, seed)


def _hull_values(config: ExperimentConfig, n: int, row_key: int, ms: Sequence[int], workers: int,
                 steiner: bool = False) -> np.ndarray:
    job = HullJob(
        config.spec,
        n,
        (config.seed, row_key),
        tuple(ms),
        steiner,
        "raw",
        config.vm_method,
        config.sphere_directions,
        config.rotations,
    )
    return run_hull_replicates(job, config.replications, workers)


# ---------------------------------------------------------------------------
# experiment kinds


def _run_mean_intrinsic(config: ExperimentConfig, workers: int) -> Tuple[List[ResultRow], List[Check]]:
    spec = config.spec
    limits = {m: zero_drift_limit(spec, m, config.mc_samples, config.seed) for m in config.m_list}
    rows = []
    for row_key, n in enumerate(config.n_list):
        values = _hull_values(config, n, row_key, config.m_list, workers)
        for index, m in enumerate(config.m_list):
            estimate = McEstimate.from_samples(values[:, index], config.seed)
            scaling = scaling_for(m, spec.dim, spec.alpha, False, n)
            rows.append(_row(config.kind, n, m, scaling, estimate, limits[m], config.seed))
        logger.info("mean-intrinsic n=%s done", n)
    return rows, []


def _run_drift_scaling(config: ExperimentConfig, workers: int) -> Tuple[List[ResultRow], List[Check]]:
    spec = config.spec
    d = spec.dim
    limits = drift_limits(spec.mu, perp_covariance_det(spec), d)
    rows = []
    for row_key, n in enumerate(config.n_list):
        values = _hull_values(config, n, row_key, config.m_list, workers, steiner=True)
        for index, m in enumerate(config.m_list):
            estimate = McEstimate.from_samples(values[:, index], config.seed)
            route = "psi" if m == d and d >= 2 else "raw"
            scaling = scaling_for(m, d, spec.alpha, True, n, route)
            limit = limits.v1 if m == 1 else (limits.volume if m == d else None)
            rows.append(_row(config.kind, n, m, scaling, estimate, limit, config.seed))
        points = values[:, len(config.m_list):]
        for axis in range(d):
            estimate = McEstimate.from_samples(points[:, axis], config.seed)
            rows.append(
                _row(config.kind, n, f"p{axis + 1}", ("n", float(n)), estimate,
                     float(limits.steiner_point[axis]), config.seed)
            )
        logger.info("drift-scaling n=%s done", n)
    return rows, []


def _run_timespace(config: ExperimentConfig, workers: int) -> Tuple[List[ResultRow], List[Check]]:
    spec = config.spec
    d = spec.dim
    sigma_perp = perp_covariance_det(spec)
    limit = drift_limits(spec.mu, sigma_perp, d).volume
    # reference rows: exact mean volume of the time-space walk (k |mu|, Gaussian walk in mu-perp with covariance
    # Sigma_perp); the simulated walk also fluctuates along mu, so it only matches this mean as n grows
    stretch = float(np.linalg.norm(spec.mu)) * math.sqrt(max(sigma_perp, 0.0))
    rows = []
    for row_key, n in enumerate(config.n_list):
        values = _hull_values(config, n, row_key, [d], workers)
        scaling = scaling_for(d, d, spec.alpha, True, n)
        rows.append(_row(config.kind, n, d, scaling, McEstimate.from_samples(values[:, 0], config.seed),
                         limit, config.seed))
        reference = McEstimate(stretch * timespace_walk_expected_volume(d, n), 0.0, 1, config.seed)
        rows.append(_row(TIMESPACE_REFERENCE, n, d, scaling, reference, limit, config.seed))
        logger.info("timespace-volume n=%s done", n)
    logger.debug("time-space constant for d=%s: %s", d, timespace_volume_constant(d))
    return rows, []


def _run_variance(config: ExperimentConfig, workers: int) -> Tuple[List[ResultRow], List[Check]]:
    spec = config.spec
    moment = second_central_moment(spec)
    rows, checks = [], []
    for row_key, n in enumerate(config.n_list):
        profile = empirical_variance_profile(
            spec, n, config.m_list, config.replications, (config.seed, row_key), config.vm_method, workers,
            config.sphere_directions, config.rotations,
        )
        for m, estimate in profile.items():
            scaling = variance_scaling(m, spec.has_drift, n)
            rows.append(_row(config.kind, n, m, scaling, estimate, None, config.seed))
            if m == 1:
                bound = variance_upper_bound(n, moment)
                passed = estimate.mean <= bound
                checks.append(Check(f"var-bound[n={n}]", passed, f"variance={estimate.mean:.6g} bound={bound:.6g}"))
                if not passed:
                    logger.warning("Variance bound violated at n=%s", n)
        logger.info("variance n=%s done", n)
    return rows, checks


def _run_vysotsky(config: ExperimentConfig, workers: int) -> Tuple[List[ResultRow], List[Check]]:
    spec = config.spec
    for n in config.n_list:
        for m in config.m_list:
            if n > VYSOTSKY_MAX_N.get(m, m):
                raise BudgetExceededError("instance too large")
    limits = {m: zero_drift_limit(spec, m, config.mc_samples, config.seed) for m in config.m_list}
    rows, checks = [], []
    for row_key, n in enumerate(config.n_list):
        values = _hull_values(config, n, row_key, config.m_list, workers)
        for index, m in enumerate(config.m_list):
            scaling = scaling_for(m, spec.dim, spec.alpha, False, n)
            hull = McEstimate.from_samples(values[:, index], config.seed)
            tuples = vysotsky_mean_Vm(spec, n, m, config.mc_samples, (config.seed, row_key, m), workers)
            hull_row = _row("vysotsky-crosscheck/hull", n, m, scaling, hull, limits[m], config.seed)
            rows.append(hull_row)
            rows.append(_row("vysotsky-crosscheck/vysotsky", n, m, scaling, tuples, hull_row.estimate, config.seed))
            combined = math.hypot(hull.std_error, tuples.std_error)
            gap = abs(hull.mean - tuples.mean)
            passed = gap <= 3 * combined
            checks.append(Check(f"vysotsky[n={n},m={m}]", passed, f"gap={gap:.6g} 3se={3 * combined:.6g}"))
            if not passed:
                logger.warning("Vysotsky cross-check failed at n=%s m=%s", n, m)
        logger.info("vysotsky-crosscheck n=%s done", n)
    return rows, checks


def _run_distribution_probe(config: ExperimentConfig, workers: int) -> Tuple[List[ResultRow], List[Check]]:
    spec = config.spec
    kind, m = parse_functional(config.functional, spec.dim)
    label = "psi_n" if spec.has_drift else ("b_n" if kind == "steiner" else f"b_n^{m}")
    samples = []
    rows, checks = [], []
    for row_key, n in enumerate(config.n_list):
        sample = hull_distribution_probe(
            spec, n, config.replications, config.functional, (config.seed, row_key), workers,
            config.sphere_directions, config.rotations,
        )
        samples.append(sample)
        rows.append(_row(config.kind, n, m if kind == "volume" else "norm", (label, 1.0),
                         McEstimate.from_samples(sample, config.seed), None, config.seed))
        logger.info("distribution-probe n=%s done", n)
    for index in range(1, len(samples)):
        result = ks_two_sample(samples[index - 1], samples[index])
        name = f"ks[n={config.n_list[index - 1]},{config.n_list[index]}]"
        detail = f"statistic={result.statistic:.6g} critical={result.critical_value:.6g} pvalue={result.pvalue:.6g}"
        checks.append(Check(name, result.passed, detail))
        if not result.passed:
            logger.warning("KS check %s failed", name)
    return rows, checks


def _run_limit_table(config: ExperimentConfig, workers: int) -> Tuple[List[ResultRow], List[Check]]:
    rows = []
    for constant in limit_table(config.dims):
        rows.append(
            ResultRow(config.kind, None, str(constant.parameters.get("m", "")), constant.label,
                      constant.value, 0.0, constant.value, config.seed)
        )
    return rows, []


RUNNERS: Dict[str, Callable[[ExperimentConfig, int], Tuple[List[ResultRow], List[Check]]]] = {
    "mean-intrinsic": _run_mean_intrinsic,
    "drift-scaling": _run_drift_scaling,
    "timespace-volume": _run_timespace,
    "variance": _run_variance,
    "vysotsky-crosscheck": _run_vysotsky,
    "distribution-probe": _run_distribution_probe,
    "limit-table": _run_limit_table,
}


# ---------------------------------------------------------------------------
# output


def _m_order(m: str) -> Tuple[int, Any]:
    if m.isdigit():
        return (0, int(m))
    if m[:1] == "p" and m[1:].isdigit():
        return (1, int(m[1:]))
    return (2, m)


def sort_rows(rows: Sequence[ResultRow]) -> List[ResultRow]:
    return sorted(rows, key=lambda row: (row.n if row.n is not None else -1, _m_order(row.m)))


def emit_csv(record: ExperimentRecord, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in sort_rows(record.rows):
            writer.writerow(
                [
                    row.experiment,
                    "" if row.n is None else row.n,
                    row.m,
                    row.scaling,
                    format_number(row.estimate),
                    format_number(row.std_error),
                    format_number(row.limit),
                    format_number(row.rel_error),
                    row.seed,
                ]
            )


SEED_KEY_SUFFIXES = {
    STREAM_WALKS: "row, replicate",
    STREAM_SPHERE: "row, replicate",
    STREAM_ROTATIONS: "row, replicate",
    STREAM_GRAM: f"{LIMIT_ROW_KEY} + m",
    STREAM_NORM: f"{LIMIT_ROW_KEY} + 1",
    STREAM_VYSOTSKY: "row, m, sample",
}


def manifest_text(record: ExperimentRecord) -> str:
    config = record.config
    lines = [
        f"# hullwalk {__version__}",
        f"# kind: {config.kind}",
        f"# seed: {config.seed}",
        f"# wall_time: {record.wall_time:.3f}s",
    ]
    if config.kind != "limit-table":
        lines.extend(
            f"# seed-key {STREAM_NAMES[stream]}: rng_stream(seed, {stream}, {suffix})"
            for stream, suffix in SEED_KEY_SUFFIXES.items()
        )
        lines.extend(f"# row {row_key}: n={n}" for row_key, n in enumerate(config.n_list))
    for check in record.checks:
        status = "pass" if check.passed else "FAIL"
        lines.append(f"# check {check.name}: {status} {check.detail}".rstrip())
    lines.append(f"# rows: {len(record.rows)}")
    return "\n".join(lines) + "\n" + config.to_text()


def write_manifest(record: ExperimentRecord, path: str | Path) -> None:
    Path(path).write_text(manifest_text(record), encoding="utf-8")


# ---------------------------------------------------------------------------
# storage


def save_record(record: ExperimentRecord) -> str:
    init_db()
    session = SessionLocal()
    try:
        run = ExperimentRun(
            kind=record.config.kind,
            seed=record.config.seed,
            config_text=record.config.to_text(),
            output_dir=str(record.output_dir or ""),
            tool_version=__version__,
            wall_time=record.wall_time,
            checks_text="\n".join(
                f"{check.name}\t{'pass' if check.passed else 'fail'}\t{check.detail}" for check in record.checks
            ),
        )
        for position, row in enumerate(sort_rows(record.rows)):
            run.rows.append(
                ExperimentRow(
                    position=position,
                    experiment=row.experiment,
                    n=row.n,
                    m=row.m,
                    scaling=row.scaling,
                    estimate=row.estimate,
                    std_error=row.std_error,
                    limit=row.limit,
                    rel_error=row.rel_error,
                    seed=row.seed,
                )
            )
        session.add(run)
        commit_with_retry(session)
        return run.id
    finally:
        session.close()


def _serialize_run(run: ExperimentRun, with_rows: bool = False) -> Dict[str, Any]:
    data = {
        "id": run.id,
        "kind": run.kind,
        "seed": run.seed,
        "outputDir": run.output_dir,
        "toolVersion": run.tool_version,
        "wallTime": run.wall_time,
        "createdAt": run.created_at.isoformat() if run.created_at else None,
        "checks": [line.split("\t") for line in (run.checks_text or "").splitlines() if line],
    }
    if with_rows:
        data["config"] = run.config_text
        data["rows"] = [
            {
                "experiment": row.experiment,
                "n": row.n,
                "m": row.m,
                "scaling": row.scaling,
                "estimate": row.estimate,
                "stdError": row.std_error,
                "limit": row.limit,
                "relError": row.rel_error,
                "seed": row.seed,
            }
            for row in run.rows
        ]
    return data


def list_runs(limit: int = 20) -> List[Dict[str, Any]]:
    init_db()
    session = SessionLocal()
    try:
        runs = session.execute(select(ExperimentRun).order_by(desc(ExperimentRun.created_at)).limit(limit)).scalars()
        return [_serialize_run(run) for run in runs]
    finally:
        session.close()


def get_run(run_id: str) -> Dict[str, Any]:
    init_db()
    session = SessionLocal()
    try:
        run = session.get(ExperimentRun, run_id)
        if not run:
            raise ValueError(f"Unknown run: {run_id}")
        return _serialize_run(run, with_rows=True)
    finally:
        session.close()


# ---------------------------------------------------------------------------
# entry points


def run(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    workers: int = 1,
    persist: bool = True,
) -> ExperimentRecord:
    logger.info("Starting %s run (seed %s, %s workers)", config.kind, config.seed, workers)
    started = time.perf_counter()
    rows, checks = RUNNERS[config.kind](config, workers)
    record = ExperimentRecord(config, sort_rows(rows), checks, time.perf_counter() - started)
    directory = ensure_output_dir(out_dir or config.output_dir or default_output_dir(config.kind))
    record.output_dir = directory
    emit_csv(record, directory / "results.csv")
    write_manifest(record, directory / "manifest.txt")
    if persist:
        record.run_id = save_record(record)
    logger.info("Finished %s run in %.2fs: %s rows in %s", config.kind, record.wall_time, len(rows), directory)
    return record


def handle(action: str, payload: Dict[str, Any]) -> Dict[str, Any]:
    if action == "listRuns":
        limit = parse_int(payload.get("limit") or 20)
        return {"success": True, "data": list_runs(limit)}
    if action == "getRun":
        return {"success": True, "data": get_run(normalize_text(payload.get("id")))}
    if action == "parseConfig":
        config = parse_config_text(str(payload.get("text") or ""))
        return {"success": True, "data": {"kind": config.kind, "config": config.to_text()}}
    raise ValueError(f"Unknown experiments action: {action}")
