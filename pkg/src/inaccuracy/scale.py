"""Dimensionless accuracy coefficients on the [0, 1] scale.

Both coefficients are the cosine of the angle between a normal of the
inaccuracy surface and the normal ``(0, ..., 0, -1)`` of the ideal surface
``y_{n+1} = 0``.  A value of 1 is a perfectly accurate experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import InfluenceSet, MeasurementError


def accuracy_first(inf: InfluenceSet) -> float:
    return 1.0 / math.sqrt(math.fsum(a * a for a in inf.first) + 1.0)


def gradient_at_mean(inf: InfluenceSet, mean) -> np.ndarray:
    """Gradient of ``delta_total(y) - y_{n+1}`` at the mean inaccuracy point.

    The surface is at most quadratic, so its gradient is affine in the point
    and the mean of the gradients over observations equals the gradient at
    the mean point.
    """
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (inf.n,):
        raise MeasurementError(f"mean point has shape {mean.shape}, expected ({inf.n},)")
    # d/dy_i of 1/2 sum_{k<=l} A_kl y_k y_l is A_ii y_i + 1/2 sum_{j!=i} A_ij y_j
    S = inf.second_matrix()
    diag = np.diag(S).copy()
    np.fill_diagonal(S, 0.0)
    grad = np.asarray(inf.first) + diag * mean + 0.5 * S @ mean
    return np.append(grad, -1.0)


def accuracy_second(grad) -> float:
    grad = np.asarray(grad, dtype=float)
    if grad.ndim != 1 or grad.size < 2 or grad[-1] != -1.0:
        raise MeasurementError("gradient must be a vector ending in -1")
    return 1.0 / math.sqrt(criterion_sum(grad) + 1.0)


def criterion_sum(grad) -> float:
    """Sum of squared mean gradient components; smaller is more accurate."""
    return math.fsum(float(g) ** 2 for g in np.asarray(grad)[:-1])


@dataclass(frozen=True)
class AccuracyReport:
    k_first: float
    k_second: float
    mean_point: np.ndarray
    gradient_at_mean: np.ndarray
    criterion_sum: float


def accuracy_report(inf: InfluenceSet, mean) -> AccuracyReport:
    grad = gradient_at_mean(inf, mean)
    return AccuracyReport(
        k_first=accuracy_first(inf),
        k_second=accuracy_second(grad),
        mean_point=np.asarray(mean, dtype=float),
        gradient_at_mean=grad,
        criterion_sum=criterion_sum(grad),
    )
