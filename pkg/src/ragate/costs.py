"""Resource, time, and total cost of serving one query (all in TFLOPs)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

__all__ = [
    "ArmCostProfile",
    "CostWeights",
    "GPU_FP64_TFLOPS",
    "Outcome",
    "TokenDist",
    "resource_cost",
    "time_cost",
    "total_cost",
]

# Peak double-precision throughput, TFLOPs/s.
GPU_FP64_TFLOPS = {
    "rtx4090": 1.29,
    "p100": 4.70,
    "v100": 7.80,
    "a100": 9.70,
    "h100": 60.00,
}


@dataclass(frozen=True)
class TokenDist:
    """Normal token-count distribution truncated at zero."""

    mean: float
    stddev: float = 0.0

    def __post_init__(self):
        if not (self.mean >= 0 and self.stddev >= 0):
            raise ValueError(f"token distribution needs mean, stddev >= 0, got {self}")

    def sample(self, rng: np.random.Generator) -> float:
        if self.stddev == 0:
            return float(self.mean)
        # Rejection is cheap unless the mean sits far below zero.
        for _ in range(64):
            v = rng.normal(self.mean, self.stddev)
            if v >= 0:
                return float(v)
        a = -self.mean / self.stddev
        return float(truncnorm.rvs(a, np.inf, loc=self.mean, scale=self.stddev, random_state=rng))

    def expected(self) -> float:
        """Mean of the truncated distribution."""
        if self.stddev == 0:
            return float(self.mean)
        a = -self.mean / self.stddev
        return float(truncnorm.mean(a, np.inf, loc=self.mean, scale=self.stddev))


@dataclass(frozen=True)
class ArmCostProfile:
    """Compute profile of the model serving one arm.

    ``calibration`` scales the resource cost to absorb accounting the
    2 * params * tokens estimate does not capture.
    """

    model_params: float
    input_tokens: TokenDist
    output_tokens: TokenDist
    gpu_rate_tflops: float
    calibration: float = 1.0

    def __post_init__(self):
        if not self.model_params > 0:
            raise ValueError("model_params must be > 0")
        if not self.gpu_rate_tflops > 0:
            raise ValueError("gpu_rate_tflops must be > 0")
        if not self.calibration > 0:
            raise ValueError("calibration must be > 0")


@dataclass(frozen=True)
class CostWeights:
    delta1: float = 1.0
    delta2: float = 1.0

    def __post_init__(self):
        if self.delta1 < 0 or self.delta2 < 0 or not self.delta1 + self.delta2 > 0:
            raise ValueError("cost weights must be nonnegative with a positive sum")


@dataclass(frozen=True)
class Outcome:
    """Observed result of serving one query with one arm."""

    accuracy: float
    delay_s: float
    resource_cost_tflops: float
    time_cost_tflops: float
    total_cost: float
    tokens_in: float = 0.0
    tokens_out: float = 0.0

    def is_finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.accuracy, self.delay_s, self.resource_cost_tflops,
                      self.time_cost_tflops, self.total_cost)
        )


def _check_nonneg(**values):
    for name, v in values.items():
        if not (math.isfinite(v) and v >= 0):
            raise ValueError(f"{name} must be finite and >= 0, got {v!r}")


def resource_cost(profile: ArmCostProfile, tokens_in: float, tokens_out: float) -> float:
    """Dense-decoder estimate 2 * params * tokens, in TFLOPs."""
    _check_nonneg(tokens_in=tokens_in, tokens_out=tokens_out)
    return 2.0 * profile.model_params * (tokens_in + tokens_out) / 1e12 * profile.calibration


def time_cost(profile: ArmCostProfile, delay_s: float) -> float:
    """Delay converted to TFLOPs at the serving GPU's FP64 peak rate."""
    _check_nonneg(delay_s=delay_s)
    return delay_s * profile.gpu_rate_tflops


def total_cost(weights: CostWeights, u_r: float, u_d: float) -> float:
    _check_nonneg(u_r=u_r, u_d=u_d)
    return weights.delta1 * u_r + weights.delta2 * u_d
