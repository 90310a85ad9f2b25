"""Small statistical helpers shared by the experiment drivers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class SampleMoments:
    """First four sample moments: mean, variance, skewness, excess kurtosis.

    A zero-variance sample reports zero skewness and kurtosis so that
    degenerate statistics stay finite.
    """

    mean: float
    variance: float
    skewness: float
    kurtosis: float


def sample_moments(sample) -> SampleMoments:
    sample = np.asarray(sample, dtype=np.float64)
    mean = float(sample.mean())
    variance = float(sample.var(ddof=1)) if len(sample) > 1 else 0.0
    if variance == 0.0:
        return SampleMoments(mean=mean, variance=variance, skewness=0.0, kurtosis=0.0)
    return SampleMoments(
        mean=mean,
        variance=variance,
        skewness=float(sps.skew(sample)),
        kurtosis=float(sps.kurtosis(sample)),
    )


def ks_normal_distance(sample, mean: float = 0.0, std: float = 1.0) -> float:
    """One-sample Kolmogorov-Smirnov distance to N(mean, std^2)."""
    if not std > 0.0:
        raise ValueError("ks_normal_distance needs std > 0")
    return float(sps.kstest(sample, "norm", args=(mean, std)).statistic)


def ks_threshold(count: int) -> float:
    """Asymptotic 5%-level critical value for the one-sample KS distance."""
    return 1.36 / math.sqrt(count)


def fit_line(x, y) -> tuple[float, float, float]:
    """Least-squares line fit; returns (slope, stderr_of_slope, intercept)."""
    result = sps.linregress(np.asarray(x, dtype=np.float64),
                            np.asarray(y, dtype=np.float64))
    return float(result.slope), float(result.stderr), float(result.intercept)
