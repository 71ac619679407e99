"""Monte Carlo estimators for hull functionals of random walks.

Replicate r of a row keyed by (seed, row...) draws its walk from
rng_stream(seed, STREAM_WALKS, row..., r); quadrature inside the replicate
uses the same key under its own stream id. Replicates are evaluated in
chunks that may run on a process pool; the chunks are concatenated in index
order before any reduction, so results do not depend on the worker count.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Dict, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.stats import ks_2samp

from backend.services.geometry import (
    DEFAULT_DIRECTIONS,
    DEFAULT_ROTATIONS,
    convex_hull,
    intrinsic_volume,
    steiner_point,
)
from backend.services.montecarlo import (
    STREAM_GRAM,
    STREAM_VYSOTSKY,
    BudgetExceededError,
    McEstimate,
    SeedLike,
    VectorEstimate,
    as_generator,
    chunk_bounds,
    rng_stream,
    run_chunks,
    seed_key,
)
from backend.services.stable import StableLawSpec, sample_steps
from backend.services.walks import apply_psi_n, center_scale, drift_frame, generate_walk

logger = logging.getLogger(__name__)

REPLICATE_CHUNK = 16
VYSOTSKY_CHUNK = 64
GRAM_BLOCK = 1 << 16
GRAM_ZERO_RTOL = 1e-12
# largest n per m for the exact tuple sum
VYSOTSKY_MAX_N = {1: 1_000_000, 2: 60, 3: 25, 4: 14}
ROUTES = ("raw", "scaled", "psi")


class KsResult(NamedTuple):
    statistic: float
    critical_value: float
    pvalue: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical_value


@dataclass(frozen=True)
class HullJob:
    spec: StableLawSpec
    n: int
    seed: Tuple[int, ...]
    ms: Tuple[int, ...] = ()
    steiner: bool = False
    route: str = "raw"
    vm_method: str = "auto"
    num_directions: int = DEFAULT_DIRECTIONS
    num_rotations: int = DEFAULT_ROTATIONS

    @property
    def width(self) -> int:
        return len(self.ms) + (self.spec.dim if self.steiner else 0)


def _hull_points(job: HullJob, index: int) -> np.ndarray:
    path = generate_walk(job.spec, job.n, job.seed[0], (*job.seed[1:], index))
    if job.route == "scaled":
        return center_scale(path)
    if job.route == "psi":
        return apply_psi_n(path, drift_frame(job.spec.mu))
    return path.points


def _evaluate_replicate(job: HullJob, index: int) -> np.ndarray:
    hull = convex_hull(_hull_points(job, index))
    key = (*job.seed, index)
    values = [
        intrinsic_volume(hull, m, job.vm_method, job.num_directions, job.num_rotations, key).value
        for m in job.ms
    ]
    if job.steiner:
        values.extend(steiner_point(hull, job.num_directions, key).point)
    return np.array(values, dtype=float)


def _evaluate_chunk(job: HullJob, bounds: Tuple[int, int]) -> np.ndarray:
    start, stop = bounds
    logger.debug("Hull replicates %s..%s of n=%s", start, stop - 1, job.n)
    return np.stack([_evaluate_replicate(job, index) for index in range(start, stop)])


def run_hull_replicates(job: HullJob, replications: int, workers: int = 1) -> np.ndarray:
    """(replications, width) array of per-replicate functionals in index order."""
    if job.route not in ROUTES:
        raise ValueError(f"Unknown hull route: {job.route}")
    if job.n < 1:
        raise ValueError("n must be at least 1")
    if replications < 1:
        raise ValueError("replications must be at least 1")
    for m in job.ms:
        if not 1 <= m <= job.spec.dim:
            raise ValueError(f"m must lie in 1..{job.spec.dim}")
    chunks = run_chunks(partial(_evaluate_chunk, job), chunk_bounds(replications, REPLICATE_CHUNK), workers)
    return np.concatenate(chunks, axis=0)


def gram_det_sqrt(vectors) -> float:
    """sqrt det of the Gram matrix of m vectors in R^d; accepts a (..., m, d) stack."""
    array = np.asarray(vectors, dtype=float)
    single = array.ndim == 2
    if single:
        array = array[None]
    m, d = array.shape[-2:]
    norms = np.prod(np.linalg.norm(array, axis=-1), axis=-1)
    if m > d:
        values = np.zeros(array.shape[:-2])
    elif m == 1:
        values = norms
    elif m == d:
        values = np.abs(np.linalg.det(array))
    else:
        _, triangular = np.linalg.qr(np.swapaxes(array, -1, -2))
        values = np.abs(np.prod(np.diagonal(triangular, axis1=-2, axis2=-1), axis=-1))
    values = np.where(values <= GRAM_ZERO_RTOL * norms, 0.0, values)
    return float(values[0]) if single else values


def _require_zero_drift_stable(spec: StableLawSpec) -> None:
    if spec.alpha <= 1:
        raise ValueError("first moment infinite")
    if spec.has_drift:
        raise ValueError("the estimator needs zero drift")


def gram_limit_mc(spec: StableLawSpec, m: int, mc_samples: int, rng_seed: SeedLike) -> McEstimate:
    _require_zero_drift_stable(spec)
    if not 1 <= m <= spec.dim:
        raise ValueError(f"m must lie in 1..{spec.dim}")
    rng = as_generator(rng_seed, STREAM_GRAM)
    values = np.empty(mc_samples)
    for start in range(0, mc_samples, GRAM_BLOCK):
        stop = min(start + GRAM_BLOCK, mc_samples)
        draws = sample_steps(spec, (stop - start) * m, rng).reshape(stop - start, m, spec.dim)
        values[start:stop] = gram_det_sqrt(draws)
    return McEstimate.from_samples(values, rng_seed)


def empirical_mean_profile(
    spec: StableLawSpec,
    n: int,
    ms: Sequence[int],
    replications: int,
    rng_seed: SeedLike,
    vm_method: str = "auto",
    workers: int = 1,
    num_directions: int = DEFAULT_DIRECTIONS,
    num_rotations: int = DEFAULT_ROTATIONS,
    route: str = "raw",
) -> Dict[int, McEstimate]:
    """Mean V_m for several m over one set of replicate walks."""
    job = HullJob(spec, n, seed_key(rng_seed), tuple(ms), False, route, vm_method, num_directions, num_rotations)
    values = run_hull_replicates(job, replications, workers)
    return {m: McEstimate.from_samples(values[:, index], rng_seed) for index, m in enumerate(job.ms)}


def empirical_mean_Vm(
    spec: StableLawSpec,
    n: int,
    m: int,
    replications: int,
    rng_seed: SeedLike,
    vm_method: str = "auto",
    workers: int = 1,
    num_directions: int = DEFAULT_DIRECTIONS,
    num_rotations: int = DEFAULT_ROTATIONS,
) -> McEstimate:
    return empirical_mean_profile(
        spec, n, [m], replications, rng_seed, vm_method, workers, num_directions, num_rotations
    )[m]


@dataclass(frozen=True)
class DriftProfile:
    volumes: Dict[int, McEstimate]
    steiner_point: VectorEstimate


def empirical_drift_profile(
    spec: StableLawSpec,
    n: int,
    ms: Sequence[int],
    replications: int,
    rng_seed: SeedLike,
    route: str = "psi",
    vm_method: str = "auto",
    workers: int = 1,
    num_directions: int = DEFAULT_DIRECTIONS,
    num_rotations: int = DEFAULT_ROTATIONS,
) -> DriftProfile:
    """Mean V_m and Steiner point of the psi_n image (route="psi") or of the raw hull."""
    if not spec.has_drift:
        raise ValueError("zero drift")
    job = HullJob(spec, n, seed_key(rng_seed), tuple(ms), True, route, vm_method, num_directions, num_rotations)
    values = run_hull_replicates(job, replications, workers)
    volumes = {m: McEstimate.from_samples(values[:, index], rng_seed) for index, m in enumerate(job.ms)}
    return DriftProfile(volumes, VectorEstimate.from_samples(values[:, len(job.ms):], rng_seed))


def _jackknife_variance(values: np.ndarray) -> Tuple[float, float]:
    count = values.size
    if count < 3:
        raise ValueError("variance estimates need at least 3 replications")
    mean = values.mean()
    squares = (values - mean) ** 2
    total = squares.sum()
    variance = total / (count - 1)
    leave_one_out = (total - count / (count - 1) * squares) / (count - 2)
    spread = leave_one_out - leave_one_out.mean()
    return float(variance), float(math.sqrt((count - 1) / count * np.sum(spread * spread)))


def empirical_variance_profile(
    spec: StableLawSpec,
    n: int,
    ms: Sequence[int],
    replications: int,
    rng_seed: SeedLike,
    vm_method: str = "auto",
    workers: int = 1,
    num_directions: int = DEFAULT_DIRECTIONS,
    num_rotations: int = DEFAULT_ROTATIONS,
) -> Dict[int, McEstimate]:
    job = HullJob(spec, n, seed_key(rng_seed), tuple(ms), False, "raw", vm_method, num_directions, num_rotations)
    values = run_hull_replicates(job, replications, workers)
    result = {}
    for index, m in enumerate(job.ms):
        variance, std_error = _jackknife_variance(values[:, index])
        result[m] = McEstimate(variance, std_error, replications, rng_seed)
    return result


def empirical_variance_Vm(
    spec: StableLawSpec,
    n: int,
    m: int,
    replications: int,
    rng_seed: SeedLike,
    vm_method: str = "auto",
    workers: int = 1,
) -> McEstimate:
    return empirical_variance_profile(spec, n, [m], replications, rng_seed, vm_method, workers)[m]


def empirical_steiner_point(
    spec: StableLawSpec,
    n: int,
    replications: int,
    rng_seed: SeedLike,
    workers: int = 1,
    num_directions: int = DEFAULT_DIRECTIONS,
) -> VectorEstimate:
    job = HullJob(spec, n, seed_key(rng_seed), (), True, "raw", "auto", num_directions, DEFAULT_ROTATIONS)
    return VectorEstimate.from_samples(run_hull_replicates(job, replications, workers), rng_seed)


def parse_functional(functional: str, dim: int) -> Tuple[str, int]:
    text = (functional or "").strip()
    if text.lower() == "steinernorm":
        return "steiner", 0
    if len(text) > 1 and text[0] in "vV" and text[1:].isdigit():
        m = int(text[1:])
        if 1 <= m <= dim:
            return "volume", m
    raise ValueError(f"Unknown hull functional: {functional}")


def hull_distribution_probe(
    spec: StableLawSpec,
    n: int,
    replications: int,
    functional: str,
    rng_seed: SeedLike,
    workers: int = 1,
    num_directions: int = DEFAULT_DIRECTIONS,
    num_rotations: int = DEFAULT_ROTATIONS,
) -> np.ndarray:
    """Sorted sample of the scaled functional: S/b_n without drift, the psi_n image with drift."""
    kind, m = parse_functional(functional, spec.dim)
    route = "psi" if spec.has_drift else "scaled"
    job = HullJob(
        spec,
        n,
        seed_key(rng_seed),
        (m,) if kind == "volume" else (),
        kind == "steiner",
        route,
        "auto",
        num_directions,
        num_rotations,
    )
    values = run_hull_replicates(job, replications, workers)
    sample = values[:, 0] if kind == "volume" else np.linalg.norm(values, axis=1)
    return np.sort(sample)


def ks_two_sample(first: Sequence[float], second: Sequence[float], level: float = 0.01) -> KsResult:
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    result = ks_2samp(first, second)
    size_factor = math.sqrt((first.size + second.size) / (first.size * second.size))
    critical = math.sqrt(-math.log(level / 2) / 2) * size_factor
    return KsResult(float(result.statistic), critical, float(result.pvalue))


def vysotsky_tuples(n: int, m: int) -> np.ndarray:
    """All (j_1..j_m) with j_k >= 1 and j_1 + ... + j_m <= n."""
    if n < m:
        return np.zeros((0, m), dtype=int)
    grid = np.indices((n - m + 1,) * m).reshape(m, -1).T + 1
    return grid[grid.sum(axis=1) <= n]


def _vysotsky_chunk(
    spec: StableLawSpec,
    n: int,
    m: int,
    key: Tuple[int, ...],
    bounds: Tuple[int, int],
) -> np.ndarray:
    tuples = vysotsky_tuples(n, m)
    weights = 1.0 / np.prod(tuples, axis=1) / math.factorial(m)
    walks = np.arange(m)[None, :]
    start, stop = bounds
    values = np.empty(stop - start)
    for offset, sample in enumerate(range(start, stop)):
        rng = rng_stream(key[0], STREAM_VYSOTSKY, *key[1:], sample)
        prefixes = np.cumsum(sample_steps(spec, m * n, rng).reshape(m, n, spec.dim), axis=1)
        vectors = prefixes[walks, tuples - 1]
        values[offset] = float(gram_det_sqrt(vectors) @ weights)
    return values


def vysotsky_mean_Vm(
    spec: StableLawSpec,
    n: int,
    m: int,
    mc_samples: int,
    rng_seed: SeedLike,
    workers: int = 1,
) -> McEstimate:
    """E[V_m(n)] as the weighted tuple sum of Gram terms over m independent walks."""
    _require_zero_drift_stable(spec)
    if not 1 <= m <= spec.dim:
        raise ValueError(f"m must lie in 1..{spec.dim}")
    if n < m:
        raise ValueError("n must be at least m")
    if n > VYSOTSKY_MAX_N.get(m, m):
        raise BudgetExceededError("instance too large")
    key = seed_key(rng_seed)
    task = partial(_vysotsky_chunk, spec, n, m, key)
    values = np.concatenate(run_chunks(task, chunk_bounds(mc_samples, VYSOTSKY_CHUNK), workers))
    return McEstimate.from_samples(values, rng_seed)
