import math

import numpy as np
import pytest

from backend.services.estimators import ks_two_sample
from backend.services.montecarlo import rng_stream
from backend.services.stable import (
    DiscreteSpectral,
    Gaussian,
    NormalizationPlan,
    RotInv,
    StableLawSpec,
    drift_free,
    expected_norm_X1,
    isotropic_gaussian,
    normalization,
    sample_scalar_stable,
    sample_step,
    sample_steps,
    second_central_moment,
)


def _empirical_cf(samples, xi):
    return float(np.mean(np.cos(samples @ np.asarray(xi, dtype=float))))


@pytest.mark.parametrize(
    "kwargs, message",
    [
        (dict(dim=2, alpha=2.5, structure=RotInv()), "alpha must lie"),
        (dict(dim=2, alpha=0.0, structure=RotInv()), "alpha must lie"),
        (dict(dim=2, alpha=1.5, structure=Gaussian(np.eye(2))), "exactly the Gaussian"),
        (dict(dim=2, alpha=2.0, structure=RotInv()), "exactly the Gaussian"),
        (dict(dim=2, alpha=2.0, structure=Gaussian([[1.0, 0.5], [0.0, 1.0]])), "symmetric"),
        (dict(dim=2, alpha=2.0, structure=Gaussian([[1.0, 0.0], [0.0, -1.0]])), "positive semidefinite"),
        (dict(dim=2, alpha=2.0, structure=Gaussian(np.eye(3))), "covariance must be 2x2"),
        (dict(dim=2, alpha=1.5, structure=RotInv(gamma=0.0)), "gamma must be positive"),
        (dict(dim=2, alpha=1.5, structure=DiscreteSpectral([[1.0, 1.0]], [1.0])), "unit vectors"),
        (dict(dim=2, alpha=1.5, structure=DiscreteSpectral([[1.0, 0.0]], [1.0, 2.0])), "one weight"),
        (dict(dim=2, alpha=1.5, structure=DiscreteSpectral([[1.0, 0.0]], [-1.0])), "weights must be positive"),
        (dict(dim=2, alpha=1.0, structure=DiscreteSpectral([[1.0, 0.0]], [1.0], symmetric=False)), "alpha = 1"),
        (dict(dim=2, alpha=0.8, structure=RotInv(), drift=(1.0, 0.0)), "drift not supported"),
        (dict(dim=2, alpha=1.5, structure=RotInv(), drift=(1.0, 0.0, 0.0)), "drift needs 2"),
        (dict(dim=0, alpha=1.5, structure=RotInv()), "dim must be at least 1"),
    ],
)
def test_spec_validation(kwargs, message):
    with pytest.raises(ValueError, match=message):
        StableLawSpec(**kwargs)


def test_spec_properties():
    spec = StableLawSpec(3, 1.5, RotInv(2.0), (1.0, 0.0, 0.0))
    assert spec.kind == "rotinv"
    assert spec.has_drift
    assert spec.mu == pytest.approx([1.0, 0.0, 0.0])
    assert not drift_free(spec).has_drift
    assert drift_free(drift_free(spec)) == drift_free(spec)
    assert isotropic_gaussian(2).kind == "gaussian"


def test_scalar_sampler_rejects_bad_parameters(rng):
    with pytest.raises(ValueError, match="beta"):
        sample_scalar_stable(1.5, 2.0, rng, 4)
    with pytest.raises(ValueError, match="alpha"):
        sample_scalar_stable(2.5, 0.0, rng, 4)


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5, 2.0])
def test_symmetric_scalar_characteristic_function(alpha):
    samples = sample_scalar_stable(alpha, 0.0, rng_stream(7, int(alpha * 10)), 400_000)
    for t in (0.3, 1.0, 1.7):
        expected = math.exp(-t**alpha)
        assert float(np.mean(np.cos(t * samples))) == pytest.approx(expected, abs=0.006)


def test_scalar_tail_slope():
    alpha = 1.5
    samples = np.abs(sample_scalar_stable(alpha, 0.0, rng_stream(11), 1_000_000))
    near, far = np.mean(samples > 20.0), np.mean(samples > 40.0)
    assert math.log(near / far) / math.log(2.0) == pytest.approx(alpha, abs=0.15)


def test_gaussian_steps_have_the_requested_covariance():
    covariance = np.array([[2.0, 0.5], [0.5, 1.0]])
    spec = StableLawSpec(2, 2.0, Gaussian(covariance), (1.0, -1.0))
    steps = sample_steps(spec, 200_000, rng_stream(3))
    assert steps.mean(axis=0) == pytest.approx([1.0, -1.0], abs=0.02)
    assert np.cov(steps.T) == pytest.approx(covariance, abs=0.03)


def test_rotinv_characteristic_function():
    spec = StableLawSpec(2, 1.2, RotInv(gamma=0.8))
    steps = sample_steps(spec, 300_000, rng_stream(5))
    for xi in ([0.5, 0.0], [0.0, 1.0], [0.6, -0.6]):
        expected = math.exp(-0.8 * np.linalg.norm(xi) ** 1.2)
        assert _empirical_cf(steps, xi) == pytest.approx(expected, abs=0.008)


def test_spectral_characteristic_function():
    spec = StableLawSpec(2, 1.8, DiscreteSpectral([[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0]))
    steps = sample_steps(spec, 300_000, rng_stream(6))
    xi = np.array([0.5, 0.3])
    expected = math.exp(-(0.5**1.8 + 2.0 * 0.3**1.8))
    assert _empirical_cf(steps, xi) == pytest.approx(expected, abs=0.008)


def test_sampling_is_deterministic_per_stream():
    spec = StableLawSpec(3, 1.5, RotInv())
    first = sample_steps(spec, 50, rng_stream(1, 2, 3))
    again = sample_steps(spec, 50, rng_stream(1, 2, 3))
    other = sample_steps(spec, 50, rng_stream(1, 2, 4))
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert sample_step(spec, rng_stream(9)).shape == (3,)
    assert sample_steps(spec, 0, rng_stream(9)).shape == (0, 3)


def test_normalization():
    spec = StableLawSpec(2, 1.5, RotInv(), (2.0, 1.0))
    b, a = normalization(spec, 8)
    assert b == pytest.approx(4.0)
    assert a == pytest.approx([16.0, 8.0])
    plan = NormalizationPlan.for_spec(spec)
    assert plan.b(np.array([1, 8])) == pytest.approx([1.0, 4.0])
    assert plan.a(np.array([1, 2])) == pytest.approx([[2.0, 1.0], [4.0, 2.0]])
    with pytest.raises(ValueError):
        normalization(spec, 0)


def test_expected_norm_of_standard_gaussian():
    estimate = expected_norm_X1(isotropic_gaussian(2), 200_000, 12)
    assert abs(estimate.mean - math.sqrt(math.pi / 2)) <= 4 * estimate.std_error
    assert estimate.replications == 200_000


def test_expected_norm_ignores_drift():
    plain = expected_norm_X1(isotropic_gaussian(2), 1000, 4)
    drifted = expected_norm_X1(isotropic_gaussian(2, drift=(5.0, 0.0)), 1000, 4)
    assert drifted.mean == plain.mean


def test_expected_norm_needs_a_first_moment():
    with pytest.raises(ValueError, match="first moment infinite"):
        expected_norm_X1(StableLawSpec(2, 0.9, RotInv()), 100, 1)


def test_second_central_moment():
    assert second_central_moment(isotropic_gaussian(3, variance=2.0)) == pytest.approx(6.0)
    assert second_central_moment(StableLawSpec(2, 1.5, RotInv())) == math.inf


@pytest.mark.parametrize("dim", [2, 3])
def test_rotation_invariant_projections_agree(dim):
    spec = StableLawSpec(dim, 1.5, RotInv(gamma=0.7))
    tilted = np.ones(dim) / math.sqrt(dim)
    along_axis = sample_steps(spec, 50_000, rng_stream(21, dim))[:, 0]
    along_diagonal = sample_steps(spec, 50_000, rng_stream(22, dim)) @ tilted
    assert ks_two_sample(along_axis, along_diagonal, level=1e-4).passed


@pytest.mark.parametrize(
    "spec",
    [
        StableLawSpec(2, 2.0, Gaussian([[2.0, 0.5], [0.5, 1.0]])),
        StableLawSpec(2, 1.5, RotInv()),
        StableLawSpec(2, 1.2, DiscreteSpectral([[1.0, 0.0], [0.6, 0.8]], [1.0, 2.0])),
    ],
    ids=["gaussian", "rotinv", "spectral"],
)
def test_sums_of_steps_keep_the_law(spec):
    count, block = 40_000, 4
    sums = sample_steps(spec, count * block, rng_stream(23)).reshape(count, block, 2).sum(axis=1)
    rescaled = sums / block ** (1 / spec.alpha)
    single = sample_steps(spec, count, rng_stream(24))
    direction = np.array([0.6, -0.8])
    assert ks_two_sample(rescaled @ direction, single @ direction, level=1e-4).passed
    assert ks_two_sample(np.linalg.norm(rescaled, axis=1), np.linalg.norm(single, axis=1), level=1e-4).passed


def test_vector_norm_tail_slope():
    alpha = 1.5
    norms = np.linalg.norm(sample_steps(StableLawSpec(2, alpha, RotInv()), 1_000_000, rng_stream(25)), axis=1)
    near, far = np.mean(norms > 20.0), np.mean(norms > 40.0)
    assert math.log(near / far) / math.log(2.0) == pytest.approx(alpha, abs=0.15)


def test_cauchy_quartiles():
    samples = sample_scalar_stable(1.0, 0.0, rng_stream(26), 400_000)
    assert np.median(samples) == pytest.approx(0.0, abs=0.01)
    assert np.median(np.abs(samples)) == pytest.approx(1.0, abs=0.01)
