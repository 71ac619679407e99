"""Step laws in the domain of attraction of alpha-stable laws.

Scalar variates use the Chambers-Mallows-Stuck transform in the S(alpha,
beta, 0) parameterization: in the symmetric case the characteristic function
is exp(-|t|^alpha).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np

from backend.services.montecarlo import STREAM_NORM, McEstimate, SeedLike, as_generator

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
UNIT_TOL = 1e-12
NORM_BLOCK = 1 << 18


def _as_matrix(rows: Any) -> Tuple[Tuple[float, ...], ...]:
    array = np.atleast_2d(np.asarray(rows, dtype=float))
    return tuple(tuple(float(value) for value in row) for row in array)


@dataclass(frozen=True)
class Gaussian:
    covariance: Tuple[Tuple[float, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "covariance", _as_matrix(self.covariance))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.covariance, dtype=float)

    @cached_property
    def root(self) -> np.ndarray:
        eigenvalues, eigenvectors = np.linalg.eigh(self.matrix)
        return (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.T


@dataclass(frozen=True)
class RotInv:
    gamma: float = 1.0


@dataclass(frozen=True)
class DiscreteSpectral:
    directions: Tuple[Tuple[float, ...], ...]
    weights: Tuple[float, ...]
    symmetric: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "directions", _as_matrix(self.directions))
        object.__setattr__(self, "weights", tuple(float(value) for value in np.ravel(self.weights)))


Structure = Union[Gaussian, RotInv, DiscreteSpectral]


@dataclass(frozen=True)
class StableLawSpec:
    dim: int
    alpha: float
    structure: Structure
    drift: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        dim = int(self.dim)
        if dim < 1:
            raise ValueError("dim must be at least 1")
        alpha = float(self.alpha)
        if not 0 < alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        drift = tuple(float(value) for value in np.ravel(self.drift)) if len(self.drift) else (0.0,) * dim
        if len(drift) != dim:
            raise ValueError(f"drift needs {dim} coordinates")
        if not all(math.isfinite(value) for value in drift):
            raise ValueError("drift must be finite")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "drift", drift)
        self._validate_structure()
        if alpha <= 1 and any(drift):
            raise ValueError("drift not supported for alpha ≤ 1")

    def _validate_structure(self) -> None:
        structure = self.structure
        if (self.alpha == 2) != isinstance(structure, Gaussian):
            raise ValueError("alpha = 2 is exactly the Gaussian structure")
        if isinstance(structure, Gaussian):
            matrix = structure.matrix
            if matrix.shape != (self.dim, self.dim):
                raise ValueError(f"covariance must be {self.dim}x{self.dim}")
            scale = max(1.0, float(np.abs(matrix).max()))
            if np.abs(matrix - matrix.T).max() > SYMMETRY_TOL * scale:
                raise ValueError("covariance must be symmetric")
            if np.linalg.eigvalsh(matrix).min() < -SYMMETRY_TOL * scale:
                raise ValueError("covariance must be positive semidefinite")
        elif isinstance(structure, RotInv):
            if not structure.gamma > 0:
                raise ValueError("gamma must be positive")
        elif isinstance(structure, DiscreteSpectral):
            directions = np.array(structure.directions, dtype=float)
            if directions.ndim != 2 or directions.shape[1] != self.dim or len(directions) == 0:
                raise ValueError(f"spectral directions must be points of R^{self.dim}")
            if len(structure.weights) != len(directions):
                raise ValueError("one weight per spectral direction")
            if np.abs(np.linalg.norm(directions, axis=1) - 1.0).max() > UNIT_TOL:
                raise ValueError("spectral directions must be unit vectors")
            if min(structure.weights) <= 0:
                raise ValueError("spectral weights must be positive")
            if self.alpha == 1 and not structure.symmetric:
                raise ValueError("alpha = 1 is only supported for symmetric laws")
        else:
            raise ValueError(f"Unknown structure: {structure!r}")

    @property
    def mu(self) -> np.ndarray:
        return np.array(self.drift, dtype=float)

    @property
    def has_drift(self) -> bool:
        return any(self.drift)

    @property
    def kind(self) -> str:
        return {Gaussian: "gaussian", RotInv: "rotinv", DiscreteSpectral: "spectral"}[type(self.structure)]


@dataclass(frozen=True)
class NormalizationPlan:
    alpha: float
    mu: Tuple[float, ...]

    @classmethod
    def for_spec(cls, spec: StableLawSpec) -> "NormalizationPlan":
        return cls(alpha=spec.alpha, mu=spec.drift)

    def b(self, n: Any) -> Any:
        return np.power(n, 1.0 / self.alpha) if np.ndim(n) else float(n) ** (1.0 / self.alpha)

    def a(self, n: Any) -> np.ndarray:
        mu = np.array(self.mu, dtype=float)
        if self.alpha <= 1:
            mu = np.zeros_like(mu)
        steps = np.asarray(n, dtype=float)
        return steps[..., None] * mu if steps.ndim else float(steps) * mu


def sample_scalar_stable(
    alpha: float,
    beta: float,
    rng: np.random.Generator,
    size: Any = None,
) -> Any:
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    if not -1 <= beta <= 1:
        raise ValueError("beta must lie in [-1, 1]")
    if alpha == 2:
        return math.sqrt(2.0) * rng.standard_normal(size)
    angle = rng.uniform(-math.pi / 2, math.pi / 2, size)
    exponential = rng.standard_exponential(size)
    if alpha == 1:
        if beta == 0:
            return np.tan(angle)
        tilted = math.pi / 2 + beta * angle
        return (2 / math.pi) * (
            tilted * np.tan(angle)
            - beta * np.log((math.pi / 2) * exponential * np.cos(angle) / tilted)
        )
    skew = beta * math.tan(math.pi * alpha / 2)
    shift = math.atan(skew) / alpha
    scale = (1 + skew * skew) ** (1 / (2 * alpha))
    shifted = alpha * (angle + shift)
    return (
        scale
        * np.sin(shifted)
        / np.cos(angle) ** (1 / alpha)
        * (np.cos(angle - shifted) / exponential) ** ((1 - alpha) / alpha)
    )


def sample_steps(spec: StableLawSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be non-negative")
    structure = spec.structure
    if isinstance(structure, Gaussian):
        steps = rng.standard_normal((n, spec.dim)) @ structure.root.T
    elif isinstance(structure, RotInv):
        # A ~ cos(pi alpha / 4)^(2/alpha) S(alpha/2, 1, 0) has E exp(-s A) = exp(-s^(alpha/2)),
        # so sqrt(2 A) gamma^(1/alpha) Z has characteristic function exp(-gamma |xi|^alpha).
        half = spec.alpha / 2
        subordinator = math.cos(math.pi * spec.alpha / 4) ** (2 / spec.alpha) * sample_scalar_stable(half, 1.0, rng, n)
        gaussian = rng.standard_normal((n, spec.dim))
        steps = np.sqrt(2.0 * subordinator)[:, None] * structure.gamma ** (1 / spec.alpha) * gaussian
    else:
        beta = 0.0 if structure.symmetric else 1.0
        weights = np.array(structure.weights) ** (1 / spec.alpha)
        scalars = sample_scalar_stable(spec.alpha, beta, rng, (n, len(weights)))
        steps = (scalars * weights) @ np.array(structure.directions)
    if spec.has_drift:
        steps = steps + spec.mu
    return steps


def sample_step(spec: StableLawSpec, rng: np.random.Generator) -> np.ndarray:
    return sample_steps(spec, 1, rng)[0]


def normalization(spec: StableLawSpec, n: int) -> Tuple[float, np.ndarray]:
    if n < 1:
        raise ValueError("n must be at least 1")
    plan = NormalizationPlan.for_spec(spec)
    return plan.b(n), plan.a(n)


def drift_free(spec: StableLawSpec) -> StableLawSpec:
    if not spec.has_drift:
        return spec
    return replace(spec, drift=(0.0,) * spec.dim)


def second_central_moment(spec: StableLawSpec) -> float:
    """E||Y - mu||^2: trace of the covariance, infinite off the Gaussian case."""
    if isinstance(spec.structure, Gaussian):
        return float(np.trace(spec.structure.matrix))
    return math.inf


def expected_norm_X1(spec: StableLawSpec, mc_samples: int, rng_seed: SeedLike) -> McEstimate:
    if spec.alpha <= 1:
        raise ValueError("first moment infinite")
    if mc_samples < 2:
        raise ValueError("mc_samples must be at least 2")
    rng = as_generator(rng_seed, STREAM_NORM)
    law = drift_free(spec)
    norms = np.empty(mc_samples)
    for start in range(0, mc_samples, NORM_BLOCK):
        stop = min(start + NORM_BLOCK, mc_samples)
        norms[start:stop] = np.linalg.norm(sample_steps(law, stop - start, rng), axis=1)
    return McEstimate.from_samples(norms, rng_seed if not isinstance(rng_seed, np.random.Generator) else None)


def isotropic_gaussian(dim: int, variance: float = 1.0, drift: Optional[Sequence[float]] = None) -> StableLawSpec:
    return StableLawSpec(dim, 2.0, Gaussian(variance * np.eye(dim)), tuple(drift) if drift is not None else ())
