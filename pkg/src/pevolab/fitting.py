"""Least-squares fits shared by the condition checker and the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    ssr: float

    def predict(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


def line_fit(x, y) -> LineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 1:
        return LineFit(0.0, float(y[0]), 0.0)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return LineFit(float(coef[0]), float(coef[1]), float(np.sum(resid ** 2)))


def loglog_slope(rho, values, floor: float = 1e-12) -> float:
    """Slope of log(values) against log(rho), over the positive entries.

    Returns 0 when fewer than two entries rise above ``floor``; the residual
    growth diagnostic behind the violated/holds verdicts.
    """
    rho = np.asarray(rho, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if int(np.sum(keep)) < 2:
        return 0.0
    return line_fit(np.log(rho[keep]), np.log(values[keep])).slope


@dataclass(frozen=True)
class GrowthClassification:
    label: str                    # "exponential" | "polynomial" | "ambiguous"
    lr_exp_over_poly: float
    exp_fit: LineFit              # y against rho
    poly_fit: LineFit             # y against log rho


def classify_growth(rho, y, ratio_threshold: float = 10.0,
                    ssr_floor: float = 1e-12) -> GrowthClassification:
    """Compare y ~ a*rho + b against y ~ a*log(rho) + b on the sweep.

    The likelihood ratio uses the Gaussian profile likelihood
    (SSR_alt / SSR_best)^(n/2); labels need the ratio to clear
    ``ratio_threshold``.
    """
    rho = np.asarray(rho, dtype=float)
    y = np.asarray(y, dtype=float)
    fe = line_fit(rho, y)
    fp = line_fit(np.log(rho), y)
    n = rho.size
    ssr_e = max(fe.ssr, ssr_floor)
    ssr_p = max(fp.ssr, ssr_floor)
    lr = (ssr_p / ssr_e) ** (n / 2.0)
    if lr >= ratio_threshold:
        label = "exponential"
    elif lr <= 1.0 / ratio_threshold:
        label = "polynomial"
    else:
        label = "ambiguous"
    return GrowthClassification(label, float(lr), fe, fp)


def log1p_rho_fit(rho, values) -> LineFit:
    """Least squares of values against log(1 + rho)."""
    return line_fit(np.log1p(np.asarray(rho, dtype=float)), values)


def safe_log(values, floor: float = 1e-300):
    return np.log(np.maximum(np.asarray(values, dtype=float), floor))


def order_of_convergence(errors, factor: float = 2.0) -> float:
    """Observed order from errors under step halving (largest pair ratio)."""
    errors = np.asarray(errors, dtype=float)
    ratios = errors[:-1] / np.maximum(errors[1:], 1e-300)
    return float(np.min(np.log(ratios) / math.log(factor)))
