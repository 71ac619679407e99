from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from backend.services.geometry import IntrinsicVolumeEstimate, Method, box_intrinsic_volumes
from backend.services.montecarlo import STREAM_WALKS, rng_stream
from backend.services.stable import Gaussian, NormalizationPlan, StableLawSpec, sample_steps

logger = logging.getLogger(__name__)

FRAME_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WalkPath:
    spec: StableLawSpec
    n: int
    points: np.ndarray
    seed: int
    stream: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class DriftFrame:
    mu: np.ndarray
    # rows are the frame vectors e_1..e_d, so T[k, l] = <e_k, e_l>
    basis: np.ndarray

    @property
    def T(self) -> np.ndarray:
        return self.basis


def generate_walk(spec: StableLawSpec, n: int, seed: int, stream: Tuple[int, ...] = ()) -> WalkPath:
    if n < 0:
        raise ValueError("n must be non-negative")
    stream = tuple(int(key) for key in stream)
    steps = sample_steps(spec, n, rng_stream(seed, STREAM_WALKS, *stream))
    points = np.zeros((n + 1, spec.dim))
    np.cumsum(steps, axis=0, out=points[1:])
    points.setflags(write=False)
    return WalkPath(spec=spec, n=n, points=points, seed=int(seed), stream=stream)


def center_scale(path: WalkPath, plan: Optional[NormalizationPlan] = None) -> np.ndarray:
    plan = plan or NormalizationPlan.for_spec(path.spec)
    if plan.alpha != path.spec.alpha or len(plan.mu) != path.spec.dim:
        raise ValueError("normalization plan does not match the walk")
    steps = np.arange(path.n + 1)
    # a single point stays at the origin whatever the scale
    return (path.points - plan.a(steps)) / plan.b(max(path.n, 1))


def drift_frame(mu) -> DriftFrame:
    mu = np.asarray(mu, dtype=float).ravel()
    length = float(np.linalg.norm(mu))
    if length == 0:
        raise ValueError("zero drift")
    dim = mu.size
    skip = int(np.argmax(np.abs(mu)))
    vectors = [mu / length]
    for index in range(dim):
        if index == skip:
            continue
        candidate = np.zeros(dim)
        candidate[index] = 1.0
        for _ in range(2):
            for vector in vectors:
                candidate = candidate - (candidate @ vector) * vector
        candidate = candidate / np.linalg.norm(candidate)
        leading = candidate[np.abs(candidate) > FRAME_TOL]
        if leading.size and leading[0] < 0:
            candidate = -candidate
        vectors.append(candidate)
    return DriftFrame(mu=mu, basis=np.array(vectors))


def frame_coordinates(points: np.ndarray, frame: DriftFrame) -> np.ndarray:
    return np.asarray(points, dtype=float) @ frame.basis.T


def apply_psi_n(path: WalkPath, frame: DriftFrame, n: Optional[int] = None) -> np.ndarray:
    """First frame coordinate divided by n, the others by b_n."""
    spec = path.spec
    if not spec.has_drift:
        raise ValueError("use center_scale")
    if spec.alpha <= 1:
        raise ValueError("the drift scaling needs alpha > 1")
    if not np.allclose(frame.mu, spec.mu):
        raise ValueError("frame was not built from the walk drift")
    n = path.n if n is None else int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    scales = np.full(spec.dim, NormalizationPlan.for_spec(spec).b(n))
    scales[0] = n
    return frame_coordinates(path.points, frame) / scales


def bounding_box_in_frame(path: WalkPath, frame: DriftFrame) -> np.ndarray:
    coordinates = frame_coordinates(path.points, frame)
    return np.stack([coordinates.min(axis=0), coordinates.max(axis=0)], axis=1)


def box_bound_Vm(path: WalkPath, frame: DriftFrame, m: int) -> IntrinsicVolumeEstimate:
    box = bounding_box_in_frame(path, frame)
    return IntrinsicVolumeEstimate(m, box_intrinsic_volumes(box[:, 1] - box[:, 0])[m], 0.0, Method.BOX)


def max_norm(path: WalkPath) -> float:
    return float(np.linalg.norm(path.points, axis=1).max())


def perp_covariance_det(spec: StableLawSpec) -> Optional[float]:
    """det of the covariance restricted to the orthogonal complement of the drift."""
    if not spec.has_drift:
        raise ValueError("zero drift")
    if not isinstance(spec.structure, Gaussian):
        return None
    frame = drift_frame(spec.mu)
    rotated = frame.T @ spec.structure.matrix @ frame.T.T
    return float(np.linalg.det(rotated[1:, 1:])) if spec.dim > 1 else 1.0
