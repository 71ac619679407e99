"""Convex hulls, support functions, distances and intrinsic volumes in R^d.

Hulls come from Qhull (scipy.spatial.ConvexHull). A hull that is not
full-dimensional is kept as a rank-annotated polytope: its vertices live in
the ambient space, while volumes and widths are evaluated in orthonormal
coordinates of the affine hull. Intrinsic volumes do not depend on the
ambient dimension, so this loses nothing.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist
from scipy.special import comb, gamma

from backend.services.montecarlo import STREAM_DILATION, STREAM_ROTATIONS, STREAM_SPHERE, SeedLike, as_generator

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-12
FACET_TOL = 1e-9
DISTANCE_TOL = 1e-9
DEFAULT_DIRECTIONS = 4096
DEFAULT_ROTATIONS = 1024
# Upper bound on floats held by one vectorized block.
BLOCK_FLOATS = 4_000_000


class GeometryConstants:
    @staticmethod
    def kappa(d: int) -> float:
        if d < 0:
            raise ValueError("dimension must be non-negative")
        return float(math.pi ** (d / 2) / gamma(1 + d / 2))

    @staticmethod
    def varpi(d: int) -> float:
        return d * GeometryConstants.kappa(d)


kappa = GeometryConstants.kappa
varpi = GeometryConstants.varpi


class Method(str, Enum):
    EXACT = "Exact"
    SPHERE = "SphereQuadrature"
    KUBOTA = "KubotaMC"
    BOX = "BoxCoefficient"


@dataclass(frozen=True)
class IntrinsicVolumeEstimate:
    m: int
    value: float
    std_error: float
    method: Method


@dataclass(frozen=True)
class SteinerPointEstimate:
    point: np.ndarray
    std_error: np.ndarray
    method: Method


class SteinerCheck(NamedTuple):
    lhs: float
    rhs: float


@dataclass(frozen=True)
class Facet:
    normal: np.ndarray
    offset: float
    vertex_indices: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Polytope:
    dim: int
    vertices: np.ndarray
    degenerate_rank: int
    # affine frame: local = (x - origin) @ basis.T
    origin: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)

    @property
    def is_full(self) -> bool:
        return self.degenerate_rank == self.dim

    @cached_property
    def local_vertices(self) -> np.ndarray:
        return (self.vertices - self.origin) @ self.basis.T

    @cached_property
    def local_hull(self) -> Optional[ConvexHull]:
        if self.degenerate_rank < 2:
            return None
        return ConvexHull(self.local_vertices)

    @cached_property
    def facets(self) -> Tuple[Facet, ...]:
        if not self.is_full or self.dim < 2:
            return ()
        hull = self.local_hull
        scale = max(1.0, float(np.abs(self.vertices).max()))
        groups: List[Tuple[np.ndarray, float, set]] = []
        for simplex, equation in zip(hull.simplices, hull.equations):
            normal = equation[:-1]
            offset = -float(equation[-1])
            for group_normal, group_offset, members in groups:
                if np.abs(group_normal - normal).max() < FACET_TOL and abs(group_offset - offset) < FACET_TOL * scale:
                    members.update(int(index) for index in simplex)
                    break
            else:
                groups.append((normal, offset, set(int(index) for index in simplex)))
        return tuple(
            Facet(normal=normal / np.linalg.norm(normal), offset=offset, vertex_indices=tuple(sorted(members)))
            for normal, offset, members in groups
        )

    def to_text(self) -> str:
        return polytope_to_text(self)


def _as_point_array(points: Any) -> np.ndarray:
    array = np.asarray(points, dtype=float)
    if array.size == 0:
        raise ValueError("no points")
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2:
        raise ValueError("points must be a list of points")
    if not np.all(np.isfinite(array)):
        raise ValueError("invalid coordinate")
    return array


def _affine_frame(centred: np.ndarray) -> Tuple[int, np.ndarray]:
    count, dim = centred.shape
    if count == 1:
        return 0, np.zeros((0, dim))
    scale = float(np.abs(centred).max())
    if scale == 0:
        return 0, np.zeros((0, dim))
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    # a direction counts when some point sits off the lower-rank subspace by more than RANK_RTOL * scale
    spread = np.abs(centred @ vt.T).max(axis=0)
    thin = np.flatnonzero(spread <= RANK_RTOL * scale)
    rank = int(thin[0]) if thin.size else int(spread.size)
    return rank, vt


def convex_hull(points: Any) -> Polytope:
    array = _as_point_array(points)
    count, dim = array.shape
    centroid = array.mean(axis=0)
    rank, vt = _affine_frame(array - centroid)

    if rank == dim and dim >= 2:
        try:
            hull = ConvexHull(array)
            return Polytope(dim, array[hull.vertices], dim, np.zeros(dim), np.eye(dim))
        except QhullError as exc:
            logger.warning("Qhull rejected a rank-%s point set, retrying in lower rank: %s", rank, exc)
            rank -= 1

    if rank == dim:
        order = np.argsort(array[:, 0], kind="stable")
        picks = sorted({int(order[0]), int(order[-1])})
        return Polytope(dim, array[picks], dim, np.zeros(dim), np.eye(dim))

    while rank >= 2:
        basis = vt[:rank]
        try:
            hull = ConvexHull((array - centroid) @ basis.T)
            return Polytope(dim, array[hull.vertices], rank, centroid, basis)
        except QhullError as exc:
            logger.warning("Qhull rejected a rank-%s point set, retrying in lower rank: %s", rank, exc)
            rank -= 1

    if rank == 1:
        basis = vt[:1]
        local = (array - centroid) @ basis[0]
        picks = sorted({int(np.argmin(local)), int(np.argmax(local))})
        if len(picks) == 2:
            return Polytope(dim, array[picks], 1, centroid, basis)
    return Polytope(dim, array[:1].copy(), 0, array[0].copy(), np.zeros((0, dim)))


def support_function(polytope: Polytope, direction: Any) -> Any:
    """max over vertices of <direction, v>; a (k, d) array of directions gives k values."""
    directions = np.asarray(direction, dtype=float)
    if directions.shape[-1] != polytope.dim:
        raise ValueError("direction dimension does not match the polytope")
    norms = np.linalg.norm(directions, axis=-1)
    if np.any(norms == 0):
        raise ValueError("zero direction")
    values = (directions @ polytope.vertices.T).max(axis=-1)
    if directions.ndim == 1:
        return float(values)
    return values


def haar_rotations(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """count Haar-distributed matrices in SO(dim), shape (count, dim, dim)."""
    gaussian = rng.standard_normal((count, dim, dim))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    q = q * signs[:, None, :]
    flip = np.linalg.det(q) < 0
    q[flip, :, 0] *= -1.0
    return q


def _frame_blocks(rank: int, vertex_count: int, frames: int) -> List[Tuple[int, int]]:
    block = max(1, BLOCK_FLOATS // max(1, rank * rank * vertex_count))
    return [(start, min(start + block, frames)) for start in range(0, frames, block)]


def _rank_volume(polytope: Polytope) -> float:
    rank = polytope.degenerate_rank
    if rank == 0:
        return 1.0
    if rank == 1:
        local = polytope.local_vertices[:, 0]
        return float(local.max() - local.min())
    return float(polytope.local_hull.volume)


def _rank_boundary_half(polytope: Polytope) -> float:
    rank = polytope.degenerate_rank
    if rank == 1:
        return 1.0
    # in two dimensions Qhull reports the perimeter as "area"
    return float(polytope.local_hull.area) / 2.0


def volume(polytope: Polytope) -> float:
    if not polytope.is_full:
        return 0.0
    return _rank_volume(polytope)


def surface_area_half(polytope: Polytope) -> float:
    rank, dim = polytope.degenerate_rank, polytope.dim
    if rank == dim:
        return 1.0 if dim == 1 else _rank_boundary_half(polytope)
    if rank == dim - 1:
        return _rank_volume(polytope)
    return 0.0


def edge_mean_width_V1(polytope: Polytope) -> float:
    """Exact V_1 of a polytope of affine rank 3: edge lengths times external angles."""
    if polytope.degenerate_rank != 3:
        raise ValueError("edge formula needs a hull of affine rank 3")
    hull = polytope.local_hull
    points = hull.points
    normals = hull.equations[:, :3]
    total = 0.0
    for opposite, (first, second) in enumerate(((1, 2), (0, 2), (0, 1))):
        neighbours = hull.neighbors[:, opposite]
        cosines = np.clip(np.einsum("ij,ij->i", normals, normals[neighbours]), -1.0, 1.0)
        lengths = np.linalg.norm(points[hull.simplices[:, first]] - points[hull.simplices[:, second]], axis=1)
        total += float(np.sum(lengths * np.arccos(cosines)))
    # every edge was visited from both adjacent triangles
    return total / 2.0 / (2.0 * math.pi)


def _exact_value(polytope: Polytope, m: int) -> Optional[float]:
    rank = polytope.degenerate_rank
    if m == 0:
        return 1.0
    if m > rank:
        return 0.0
    if m == rank:
        return _rank_volume(polytope)
    if m == rank - 1:
        return _rank_boundary_half(polytope)
    if rank == 3 and m == 1:
        return edge_mean_width_V1(polytope)
    return None


def exact_intrinsic_volumes(polytope: Polytope) -> List[float]:
    values = [_exact_value(polytope, m) for m in range(polytope.dim + 1)]
    if any(value is None for value in values):
        raise ValueError("exact intrinsic volumes need a hull of affine rank at most 3")
    return values


def box_intrinsic_volumes(side_lengths: Sequence[float]) -> List[float]:
    sides = np.asarray(side_lengths, dtype=float).ravel()
    if np.any(sides < 0) or not np.all(np.isfinite(sides)):
        raise ValueError("box sides must be finite and non-negative")
    # coefficients of prod(1 + s_i w), lowest power first
    coefficients = np.array([1.0])
    for side in sides:
        coefficients = np.convolve(coefficients, [1.0, side])
    return [float(value) for value in coefficients]


def mean_width_and_V1(
    polytope: Polytope,
    num_directions: int = DEFAULT_DIRECTIONS,
    rng_seed: SeedLike = 0,
) -> IntrinsicVolumeEstimate:
    if num_directions < 1:
        raise ValueError("num_directions must be at least 1")
    rank = polytope.degenerate_rank
    if rank <= 2:
        value = 0.0 if rank == 0 else (_rank_volume(polytope) if rank == 1 else _rank_boundary_half(polytope))
        return IntrinsicVolumeEstimate(1, value, 0.0, Method.EXACT)

    rng = as_generator(rng_seed, STREAM_SPHERE)
    local = polytope.local_vertices
    frames = max(2, math.ceil(num_directions / (2 * rank)))
    rotations = haar_rotations(rank, frames, rng)
    widths = np.empty(frames)
    for start, stop in _frame_blocks(rank, len(local), frames):
        projections = np.einsum("fij,vj->fiv", rotations[start:stop], local)
        widths[start:stop] = (projections.max(axis=-1) - projections.min(axis=-1)).mean(axis=-1)
    factor = rank * kappa(rank) / (2.0 * kappa(rank - 1))
    value = factor * float(widths.mean())
    std_error = factor * float(widths.std(ddof=1) / math.sqrt(frames))
    return IntrinsicVolumeEstimate(1, value, std_error, Method.SPHERE)


def _polygon_steiner_point(polytope: Polytope) -> np.ndarray:
    local = polytope.local_vertices
    incoming = local - np.roll(local, 1, axis=0)
    outgoing = np.roll(local, -1, axis=0) - local
    cross = incoming[:, 0] * outgoing[:, 1] - incoming[:, 1] * outgoing[:, 0]
    dot = np.einsum("ij,ij->i", incoming, outgoing)
    exterior = np.abs(np.arctan2(cross, dot))
    weights = exterior / exterior.sum()
    return weights @ polytope.vertices


def steiner_point(
    polytope: Polytope,
    num_directions: int = DEFAULT_DIRECTIONS,
    rng_seed: SeedLike = 0,
) -> SteinerPointEstimate:
    dim = polytope.dim
    rank = polytope.degenerate_rank
    zeros = np.zeros(dim)
    if rank == 0:
        return SteinerPointEstimate(polytope.vertices[0].copy(), zeros, Method.EXACT)
    if rank == 1:
        return SteinerPointEstimate(polytope.vertices.mean(axis=0), zeros, Method.EXACT)
    if rank == 2:
        return SteinerPointEstimate(_polygon_steiner_point(polytope), zeros, Method.EXACT)

    rng = as_generator(rng_seed, STREAM_SPHERE)
    local = polytope.local_vertices
    frames = max(2, math.ceil(num_directions / (2 * rank)))
    rotations = haar_rotations(rank, frames, rng)
    estimates = np.empty((frames, rank))
    for start, stop in _frame_blocks(rank, len(local), frames):
        block = rotations[start:stop]
        projections = np.einsum("fij,vj->fiv", block, local)
        # antithetic pair (theta, -theta): (s(theta) - s(-theta)) / 2 * theta
        half_gap = (projections.max(axis=-1) + projections.min(axis=-1)) / 2.0
        estimates[start:stop] = np.einsum("fi,fij->fj", half_gap, block)
    ambient = polytope.origin + estimates @ polytope.basis
    point = ambient.mean(axis=0)
    std_error = ambient.std(axis=0, ddof=1) / math.sqrt(frames)
    return SteinerPointEstimate(point, std_error, Method.SPHERE)


def kubota_Vm(
    polytope: Polytope,
    m: int,
    num_rotations: int = DEFAULT_ROTATIONS,
    rng_seed: SeedLike = 0,
) -> IntrinsicVolumeEstimate:
    if not 1 <= m <= polytope.dim:
        raise ValueError(f"m must lie in 1..{polytope.dim}")
    rank = polytope.degenerate_rank
    if m >= rank:
        return IntrinsicVolumeEstimate(m, _exact_value(polytope, m), 0.0, Method.EXACT)
    if num_rotations < 2:
        raise ValueError("num_rotations must be at least 2")

    rng = as_generator(rng_seed, STREAM_ROTATIONS)
    local = polytope.local_vertices
    rotations = haar_rotations(rank, num_rotations, rng)
    projections = np.einsum("fij,vj->fvi", rotations[:, :m, :], local)
    if m == 1:
        volumes = projections[..., 0].max(axis=1) - projections[..., 0].min(axis=1)
    else:
        volumes = np.empty(num_rotations)
        for index, projected in enumerate(projections):
            try:
                volumes[index] = ConvexHull(projected).volume
            except QhullError:
                volumes[index] = 0.0
    factor = float(comb(rank, m)) * kappa(rank) / (kappa(m) * kappa(rank - m))
    values = factor * volumes
    return IntrinsicVolumeEstimate(
        m,
        float(values.mean()),
        float(values.std(ddof=1) / math.sqrt(num_rotations)),
        Method.KUBOTA,
    )


def intrinsic_volume(
    polytope: Polytope,
    m: int,
    method: str = "auto",
    num_directions: int = DEFAULT_DIRECTIONS,
    num_rotations: int = DEFAULT_ROTATIONS,
    rng_seed: SeedLike = 0,
) -> IntrinsicVolumeEstimate:
    if not 0 <= m <= polytope.dim:
        raise ValueError(f"m must lie in 0..{polytope.dim}")
    method = (method or "auto").lower()
    if method not in {"auto", "exact", "sphere", "kubota"}:
        raise ValueError(f"Unknown intrinsic volume method: {method}")
    if method in {"auto", "exact"}:
        exact = _exact_value(polytope, m)
        if exact is not None:
            return IntrinsicVolumeEstimate(m, exact, 0.0, Method.EXACT)
        if method == "exact":
            raise ValueError(f"no exact branch for V_{m} at affine rank {polytope.degenerate_rank}")
    if method == "sphere" and m != 1:
        raise ValueError("sphere quadrature only estimates V_1")
    if method == "sphere" or (method == "auto" and m == 1):
        return mean_width_and_V1(polytope, num_directions, rng_seed)
    if m == 0:
        return IntrinsicVolumeEstimate(0, 1.0, 0.0, Method.EXACT)
    return kubota_Vm(polytope, m, num_rotations, rng_seed)


def _min_norm_point(points: np.ndarray, tol: float = DISTANCE_TOL, max_iter: int = 1000) -> np.ndarray:
    """Point of conv(points) closest to the origin (Wolfe's corral iteration)."""
    scale = max(1.0, float(np.abs(points).max()))
    corral = [int(np.argmin(np.einsum("ij,ij->i", points, points)))]
    weights = np.array([1.0])
    x = points[corral[0]].copy()
    for _ in range(max_iter):
        norm_sq = float(x @ x)
        if norm_sq <= (1e-15 * scale) ** 2:
            return np.zeros_like(x)
        candidate = int(np.argmin(points @ x))
        gap = norm_sq - float(points[candidate] @ x)
        if gap <= tol * math.sqrt(norm_sq) or candidate in corral:
            break
        corral.append(candidate)
        weights = np.append(weights, 0.0)
        while True:
            selected = points[corral]
            size = len(corral)
            system = np.zeros((size + 1, size + 1))
            system[:size, :size] = selected @ selected.T
            system[:size, size] = 1.0
            system[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[size] = 1.0
            affine = np.linalg.lstsq(system, rhs, rcond=None)[0][:size]
            if np.all(affine > 1e-12):
                weights = affine
                break
            blocked = affine <= 1e-12
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = weights[blocked] / (weights[blocked] - affine[blocked])
            step = float(np.min(ratios[np.isfinite(ratios)], initial=1.0))
            weights = step * affine + (1.0 - step) * weights
            keep = weights > 1e-12
            corral = [index for index, flag in zip(corral, keep) if flag]
            weights = weights[keep]
            weights = weights / weights.sum()
            if len(corral) == 1:
                break
        x = weights @ points[corral]
    return x


def point_distance(point: Any, polytope: Polytope) -> float:
    target = np.asarray(point, dtype=float)
    closest = _min_norm_point(polytope.vertices - target)
    return float(math.sqrt(float(closest @ closest)))


def hausdorff_distance(first: Polytope, second: Polytope) -> float:
    if first.dim != second.dim:
        raise ValueError("polytopes live in different dimensions")
    forward = max(point_distance(vertex, second) for vertex in first.vertices)
    backward = max(point_distance(vertex, first) for vertex in second.vertices)
    return max(forward, backward)


def point_set_hausdorff(first: Any, second: Any) -> float:
    distances = cdist(_as_point_array(first), _as_point_array(second))
    return float(max(distances.min(axis=1).max(), distances.min(axis=0).max()))


def _segment_distances(points: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    edges = ends - starts
    lengths = np.maximum(np.einsum("ij,ij->i", edges, edges), 1e-300)
    offsets = points[:, None, :] - starts[None, :, :]
    t = np.clip(np.einsum("nsj,sj->ns", offsets, edges) / lengths, 0.0, 1.0)
    nearest = starts[None, :, :] + t[..., None] * edges[None, :, :]
    return np.linalg.norm(points[:, None, :] - nearest, axis=-1).min(axis=1)


def _triangle_face_distances(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Distance to the triangle interiors; inf where the projection misses."""
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    v0, v1 = b - a, c - a
    d00 = np.einsum("ij,ij->i", v0, v0)
    d01 = np.einsum("ij,ij->i", v0, v1)
    d11 = np.einsum("ij,ij->i", v1, v1)
    denominator = d00 * d11 - d01 * d01
    v2 = points[:, None, :] - a[None, :, :]
    d20 = np.einsum("nsj,sj->ns", v2, v0)
    d21 = np.einsum("nsj,sj->ns", v2, v1)
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = (d11 * d20 - d01 * d21) / denominator
        gamma_ = (d00 * d21 - d01 * d20) / denominator
    inside = (beta >= 0) & (gamma_ >= 0) & (beta + gamma_ <= 1)
    projected = a[None, :, :] + beta[..., None] * v0[None, :, :] + gamma_[..., None] * v1[None, :, :]
    distances = np.linalg.norm(points[:, None, :] - projected, axis=-1)
    return np.where(inside, distances, np.inf).min(axis=1)


def _boundary_complex(polytope: Polytope) -> Optional[Tuple[np.ndarray, Optional[np.ndarray]]]:
    """Segments and triangles whose union is the relative boundary (or the body if flat)."""
    rank, dim = polytope.degenerate_rank, polytope.dim
    vertices = polytope.vertices
    if rank == 0:
        return np.stack([vertices, vertices], axis=1), None
    if rank == 1:
        return vertices[None, :, :], None
    if rank == 2 and dim > 2:
        count = len(vertices)
        fan = np.array([(0, index, index + 1) for index in range(1, count - 1)])
        ring = np.array([(index, (index + 1) % count) for index in range(count)])
        return vertices[ring], vertices[fan]
    if rank == dim and dim in (2, 3):
        hull = polytope.local_hull
        simplices = hull.simplices
        if dim == 2:
            return vertices[simplices], None
        pairs = np.concatenate([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [0, 2]]])
        pairs = np.unique(np.sort(pairs, axis=1), axis=0)
        return vertices[pairs], vertices[simplices]
    return None


def distances_to_polytope(points: Any, polytope: Polytope) -> np.ndarray:
    queries = _as_point_array(points)
    if polytope.dim == 1:
        low, high = polytope.vertices[:, 0].min(), polytope.vertices[:, 0].max()
        return np.maximum(np.maximum(low - queries[:, 0], queries[:, 0] - high), 0.0)
    complex_ = _boundary_complex(polytope)
    if complex_ is None:
        return np.array([point_distance(query, polytope) for query in queries])

    segments, triangles = complex_
    features = len(segments) + (0 if triangles is None else len(triangles))
    block = max(1, BLOCK_FLOATS // max(1, features * polytope.dim * 3))
    result = np.empty(len(queries))
    for start in range(0, len(queries), block):
        chunk = queries[start:start + block]
        distances = _segment_distances(chunk, segments[:, 0], segments[:, 1])
        if triangles is not None:
            distances = np.minimum(distances, _triangle_face_distances(chunk, triangles))
        result[start:start + block] = distances
    if polytope.is_full:
        inside = np.ones(len(queries), dtype=bool)
        for facet in polytope.facets:
            inside &= queries @ facet.normal <= facet.offset + DISTANCE_TOL
        result[inside] = 0.0
    return result


def steiner_polynomial_check(
    polytope: Polytope,
    rho: float,
    mc_points: int = 1_000_000,
    rng_seed: SeedLike = 0,
) -> SteinerCheck:
    if rho < 0:
        raise ValueError("rho must be non-negative")
    dim = polytope.dim
    values = [intrinsic_volume(polytope, m, rng_seed=rng_seed).value for m in range(dim + 1)]
    rhs = sum(rho ** (dim - m) * kappa(dim - m) * values[m] for m in range(dim + 1))
    if rho == 0:
        return SteinerCheck(volume(polytope), rhs)

    rng = as_generator(rng_seed, STREAM_DILATION)
    low = polytope.vertices.min(axis=0) - rho
    high = polytope.vertices.max(axis=0) + rho
    box_volume = float(np.prod(high - low))
    hits = 0
    remaining = int(mc_points)
    while remaining > 0:
        size = min(remaining, 1 << 16)
        samples = rng.uniform(low, high, size=(size, dim))
        hits += int(np.count_nonzero(distances_to_polytope(samples, polytope) <= rho))
        remaining -= size
    return SteinerCheck(box_volume * hits / mc_points, rhs)


def polytope_to_text(polytope: Polytope) -> str:
    lines = [f"{polytope.dim} {len(polytope.vertices)}"]
    lines.extend(" ".join(repr(float(value)) for value in vertex) for vertex in polytope.vertices)
    return "\n".join(lines) + "\n"


def polytope_from_text(text: str) -> Polytope:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty polytope text")
    try:
        dim, count = (int(value) for value in rows[0])
    except ValueError:
        raise ValueError("header must be 'd n_vertices'")
    if len(rows) - 1 != count:
        raise ValueError(f"expected {count} vertices, found {len(rows) - 1}")
    if any(len(row) != dim for row in rows[1:]):
        raise ValueError(f"every vertex needs {dim} coordinates")
    try:
        points = [[float(value) for value in row] for row in rows[1:]]
    except ValueError:
        raise ValueError("invalid coordinate")
    return convex_hull(points)
