"""Closed-form limit constants and the exact finite-n means behind them."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.signal import convolve
from scipy.special import comb, gamma

from backend.services.geometry import kappa
from backend.services.montecarlo import McEstimate, SeedLike
from backend.services.stable import StableLawSpec, expected_norm_X1
from backend.services.utils import to_float_list, to_int_list

logger = logging.getLogger(__name__)


class FormulaId(str, Enum):
    GAMMA_RATIO = "GammaRatio"
    BM_VM = "BM_Vm"
    ROTINV_VM = "RotInv_Vm"
    V1_STABLE = "V1Stable"
    TIMESPACE_VOL = "TimeSpaceVol"
    DRIFT_V1 = "DriftV1"
    DRIFT_STEINER_POINT = "DriftSteinerPoint"
    DRIFT_VD = "DriftVd"
    CHI_MOMENT = "ChiMoment"
    DIRICHLET = "Dirichlet"
    GAUSSIAN_VD = "GaussianVd"
    GRAM_VM = "GramVm"


@dataclass(frozen=True)
class LimitConstant:
    value: float
    formula_id: FormulaId
    parameters: Dict[str, Any] = field(default_factory=dict)
    vector: Optional[Tuple[float, ...]] = None

    @property
    def label(self) -> str:
        details = ",".join(f"{key}={value}" for key, value in self.parameters.items())
        return f"{self.formula_id.value}[{details}]" if details else self.formula_id.value


@dataclass(frozen=True)
class DriftLimits:
    v1: float
    steiner_point: np.ndarray
    volume: Optional[float]


def gamma_ratio_constant(alpha: float, m: int) -> float:
    """alpha Gamma(1/alpha)^m / (m Gamma(m/alpha))."""
    if not 1 < alpha <= 2:
        raise ValueError("alpha must lie in (1, 2]")
    if m < 1:
        raise ValueError("m must be at least 1")
    return float(alpha * gamma(1 / alpha) ** m / (m * gamma(m / alpha)))


def bm_expected_Vm(d: int, m: int) -> float:
    if not 1 <= m <= d:
        raise ValueError("need 1 <= m <= d")
    return float(
        comb(d, m, exact=True)
        * (math.pi / 2) ** (m / 2)
        * gamma((d - m) / 2 + 1)
        / (gamma(m / 2 + 1) * gamma(d / 2 + 1))
    )


def rotinv_expected_Vm(alpha: float, gamma_: float, d: int, m: int) -> float:
    if alpha == 2:
        raise ValueError("alpha = 2 is Brownian motion: use bm_expected_Vm")
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    if gamma_ <= 0:
        raise ValueError("gamma must be positive")
    if not 1 <= m <= d:
        raise ValueError("need 1 <= m <= d")
    shape = alpha * gamma(1 / alpha) ** m * gamma(1 - 1 / alpha) ** m / (m * math.pi ** m * gamma(m / alpha))
    return float(comb(d, m, exact=True) * kappa(d) / kappa(d - m) * shape * gamma_ ** (m / alpha))


def ball_intrinsic_volume(d: int, m: int) -> float:
    if not 0 <= m <= d:
        raise ValueError("need 0 <= m <= d")
    return float(comb(d, m, exact=True) * kappa(d) / kappa(d - m))


def v1_stable_limit(spec: StableLawSpec, mc_samples: int, rng_seed: SeedLike) -> McEstimate:
    if spec.has_drift:
        raise ValueError("the stable V_1 limit needs zero drift")
    return expected_norm_X1(spec, mc_samples, rng_seed).scaled(spec.alpha)


def gram_mean_limit(gram_mean: float, alpha: float, m: int) -> float:
    """Limit of E[V_m(n)] / b_n^m from E sqrt det Gram(X_1..X_m) of independent copies of X(1)."""
    return float(gram_mean * gamma_ratio_constant(alpha, m) / math.factorial(m))


def timespace_volume_constant(d: int) -> float:
    if d < 2:
        raise ValueError("d must be at least 2")
    return float(2 ** ((d + 1) / 2) * math.pi ** ((d - 1) / 2) / math.factorial(d + 1))


def chi_sqrt_moment(k: int) -> float:
    """E sqrt(chi^2(k))."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return float(math.sqrt(2) * gamma((k + 1) / 2) / gamma(k / 2))


def dirichlet_limit(d: int) -> float:
    if d < 1:
        raise ValueError("d must be at least 1")
    return float(math.pi ** (d / 2) / gamma(d / 2))


def gaussian_volume_limit(d: int, sigma: Any = None) -> float:
    """Limit of E[V_d(n)] / n^(d/2) for zero-drift Gaussian steps with covariance sigma."""
    matrix = np.eye(d) if sigma is None else np.asarray(sigma, dtype=float)
    constant = math.pi ** (d / 2) / (2 ** ((d - 4) / 2) * d * d * gamma(d / 2) ** 2)
    return float(constant * math.sqrt(max(np.linalg.det(matrix), 0.0)))


def power_sequence(alpha: float, n: int) -> np.ndarray:
    """a_0 = 0, a_k = k^(1/alpha - 1)."""
    sequence = np.zeros(n + 1)
    sequence[1:] = np.arange(1, n + 1, dtype=float) ** (1 / alpha - 1)
    return sequence


def sequence_convolution(first: np.ndarray, second: np.ndarray, method: str = "auto") -> np.ndarray:
    """(x * y)_n = sum_{k=0}^n x_k y_{n-k}, truncated to the shorter input."""
    length = min(len(first), len(second))
    return convolve(first[:length], second[:length], method=method)[:length]


def convolution_power(sequence: np.ndarray, m: int, method: str = "auto") -> np.ndarray:
    if m < 1:
        raise ValueError("m must be at least 1")
    result = sequence
    for _ in range(m - 1):
        result = sequence_convolution(result, sequence, method)
    return result


def sequence_convolution_limit(alpha: float, m: int, n: int, method: str = "direct") -> float:
    """(1/b_n^m) sum_{k=m}^n of the m-fold convolution of a_k = k^(1/alpha - 1).

    The default direct convolution sums every product term and is reproducible bit for bit;
    method="fft" (or "auto") is much faster for large n at the cost of rounding noise.
    """
    if not 1 < alpha <= 2:
        raise ValueError("alpha must lie in (1, 2]")
    if n < m:
        raise ValueError("n must be at least m")
    powered = convolution_power(power_sequence(alpha, n), m, method)
    return float(math.fsum(powered[m:]) / float(n) ** (m / alpha))


def gaussian_walk_expected_Vm(d: int, m: int, n: int, scale: float = 1.0) -> float:
    """Exact E[V_m] for the hull of a walk with N(0, scale^2 I) steps."""
    if not 1 <= m <= d:
        raise ValueError("need 1 <= m <= d")
    if n < m:
        return 0.0
    # sqrt Gram det of m standard Gaussian vectors ~ prod of chi(d), ..., chi(d - m + 1)
    chi_product = math.prod(chi_sqrt_moment(d - k) for k in range(m))
    tuples = math.fsum(convolution_power(power_sequence(2.0, n), m)[m:])
    return chi_product * tuples * scale ** m / math.factorial(m)


def timespace_walk_expected_volume(d: int, n: int) -> float:
    """Exact mean volume of the hull of k -> (k, W_1 + ... + W_k), W_i ~ N(0, I_{d-1})."""
    if d < 2:
        raise ValueError("d must be at least 2")
    if n < d:
        return 0.0
    powered = convolution_power(power_sequence(2.0, n), d)
    weights = np.sqrt(np.arange(n + 1, dtype=float))
    total = math.fsum((weights * powered)[d:])
    return float(2 ** ((d - 1) / 2) * gamma(d / 2) / (math.factorial(d) * math.sqrt(math.pi)) * total)


def drift_limits(mu: Any, sigma_perp_det: Optional[float], d: int) -> DriftLimits:
    drift = np.asarray(mu, dtype=float).ravel()
    length = float(np.linalg.norm(drift))
    if length == 0:
        raise ValueError("zero drift")
    if drift.size != d:
        raise ValueError(f"drift needs {d} coordinates")
    volume = None
    if sigma_perp_det is not None and d >= 2:
        volume = length * math.sqrt(max(sigma_perp_det, 0.0)) * timespace_volume_constant(d)
    return DriftLimits(v1=length, steiner_point=drift / 2.0, volume=volume)


def steiner_norm_limits(mu: Any) -> float:
    """Limit of E||P(n)|| / n under drift."""
    return float(np.linalg.norm(np.asarray(mu, dtype=float))) / 2.0


def variance_upper_bound(n: int, second_central_moment: float) -> float:
    if n < 0 or second_central_moment < 0:
        raise ValueError("inputs must be non-negative")
    return float(n * second_central_moment) if n else 0.0


def v1_norm_bound_factor(d: int) -> float:
    """V_1(P) <= factor * max ||v|| whenever 0 is in P."""
    return d * kappa(d) / kappa(d - 1)


def steiner_norm_bound_factor(d: int) -> float:
    """||p(P)|| <= factor * max ||v|| whenever 0 is in P."""
    return float(d)


def limit_table(dims: Iterable[int]) -> List[LimitConstant]:
    rows: List[LimitConstant] = []
    for d in dims:
        d = int(d)
        if d < 1:
            raise ValueError("dimensions must be positive")
        for m in range(1, d + 1):
            rows.append(LimitConstant(bm_expected_Vm(d, m), FormulaId.BM_VM, {"d": d, "m": m}))
        if d >= 2:
            rows.append(LimitConstant(timespace_volume_constant(d), FormulaId.TIMESPACE_VOL, {"d": d, "m": d}))
        rows.append(LimitConstant(chi_sqrt_moment(d), FormulaId.CHI_MOMENT, {"k": d, "m": 1}))
        rows.append(LimitConstant(dirichlet_limit(d), FormulaId.DIRICHLET, {"d": d, "m": d}))
        rows.append(LimitConstant(gamma_ratio_constant(2.0, d), FormulaId.GAMMA_RATIO, {"alpha": 2.0, "m": d}))
    return rows


def _serialize(constant: LimitConstant) -> Dict[str, Any]:
    return {
        "formula": constant.formula_id.value,
        "label": constant.label,
        "value": constant.value,
        "parameters": constant.parameters,
        "vector": list(constant.vector) if constant.vector is not None else None,
    }


def _constant(payload: Dict[str, Any]) -> LimitConstant:
    formula = str(payload.get("formula") or "")
    if formula == FormulaId.GAMMA_RATIO.value:
        alpha, m = float(payload["alpha"]), int(payload["m"])
        return LimitConstant(gamma_ratio_constant(alpha, m), FormulaId.GAMMA_RATIO, {"alpha": alpha, "m": m})
    if formula == FormulaId.BM_VM.value:
        d, m = int(payload["d"]), int(payload["m"])
        return LimitConstant(bm_expected_Vm(d, m), FormulaId.BM_VM, {"d": d, "m": m})
    if formula == FormulaId.ROTINV_VM.value:
        alpha, gamma_, d, m = float(payload["alpha"]), float(payload.get("gamma", 1.0)), int(payload["d"]), int(payload["m"])
        return LimitConstant(
            rotinv_expected_Vm(alpha, gamma_, d, m),
            FormulaId.ROTINV_VM,
            {"alpha": alpha, "gamma": gamma_, "d": d, "m": m},
        )
    if formula == FormulaId.TIMESPACE_VOL.value:
        d = int(payload["d"])
        return LimitConstant(timespace_volume_constant(d), FormulaId.TIMESPACE_VOL, {"d": d})
    if formula == FormulaId.DRIFT_VD.value:
        mu = to_float_list(payload.get("mu"))
        det = float(payload.get("sigmaPerpDet", 1.0))
        limits = drift_limits(mu, det, len(mu))
        return LimitConstant(limits.volume, FormulaId.DRIFT_VD, {"d": len(mu), "sigmaPerpDet": det})
    if formula == FormulaId.DRIFT_STEINER_POINT.value:
        mu = to_float_list(payload.get("mu"))
        limits = drift_limits(mu, None, len(mu))
        return LimitConstant(
            float(np.linalg.norm(limits.steiner_point)),
            FormulaId.DRIFT_STEINER_POINT,
            {"d": len(mu)},
            tuple(float(value) for value in limits.steiner_point),
        )
    raise ValueError(f"Unknown limit formula: {formula}")


def handle(action: str, payload: Dict[str, Any]) -> Dict[str, Any]:
    if action == "table":
        dims = to_int_list(payload.get("dims")) or [2, 3, 4]
        return {"success": True, "data": [_serialize(constant) for constant in limit_table(dims)]}
    if action == "constant":
        return {"success": True, "data": _serialize(_constant(payload))}
    raise ValueError(f"Unknown limits action: {action}")
