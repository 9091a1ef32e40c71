"""Paired t-test and least-squares line fit."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import stdtr

from .errors import DegenerateInputError


class TTestResult(NamedTuple):
    t: float
    p: float
    df: int


class LinearFit(NamedTuple):
    slope: float
    intercept: float
    r: float


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test of ``a - b`` against zero mean."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired_ttest needs two 1-D sequences of equal length")
    n = a.size
    if n < 2:
        raise ValueError("paired_ttest needs at least two pairs")
    d = a - b
    mean = d.mean()
    sd = math.sqrt(float(((d - mean) ** 2).sum()) / (n - 1))
    if sd == 0.0:
        raise DegenerateInputError("differences have zero variance; t statistic undefined")
    t = float(mean / (sd / math.sqrt(n)))
    p = float(2.0 * stdtr(n - 1, -abs(t)))
    return TTestResult(t, p, n - 1)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Ordinary least squares ``y ~ slope * x + intercept`` with Pearson r.

    A constant ``y`` gives slope 0 and r = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("linear_fit needs two 1-D sequences of equal length")
    if x.size < 2:
        raise ValueError("linear_fit needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean() if np.ptp(y) > 0 else np.zeros_like(y)
    sxx = float((dx * dx).sum())
    if sxx == 0.0:
        raise DegenerateInputError("x is constant; slope undefined")
    sxy = float((dx * dy).sum())
    syy = float((dy * dy).sum())
    slope = sxy / sxx
    intercept = float(y.mean() - slope * x.mean())
    r = 0.0 if syy == 0.0 else sxy / math.sqrt(sxx * syy)
    return LinearFit(slope, intercept, max(-1.0, min(1.0, r)))
