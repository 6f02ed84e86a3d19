"""Confidence intervals for the variance and covariance estimators.

Two families are provided:

* ``BETA_COLLECTIVE``: distribution-free quantiles from the Beta(n/2, n/2)
  law of ``||X_1||^2 / ||X||^2``, valid under collective attacks;
* ``GAUSSIAN_ASSUMPTION``: chi-square quantiles, valid if the received
  quadratures are Gaussian.

All public functions take the raw failure probability. The internal splits
(``eps/6`` and ``eps**2/324`` inside the beta widths, ``eps_pe/2`` in the
bounds) happen here so callers cannot get them wrong.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import NumericalError
from .special_functions import chi2_invcdf, symmetric_beta_halfwidth

__all__ = [
    "IntervalMethod",
    "IntervalHalfWidths",
    "IntervalConditionError",
    "a_prime",
    "b_prime",
    "delta_var_beta",
    "delta_cov_beta",
    "delta_var_gauss",
    "delta_cov_gauss",
    "half_widths",
    "var_upper_bound",
    "cov_lower_bound",
    "cov_lower_bound_symmetric",
]

# Below this half-width the Gaussian variance bound uses 1 + delta instead of
# 1 / (1 - delta); the relative gap is delta**2 < 1e-4.
GAUSS_EXACT_FORM_THRESHOLD = 0.01


class IntervalMethod(enum.Enum):
    BETA_COLLECTIVE = "beta"
    GAUSSIAN_ASSUMPTION = "gaussian"

    @classmethod
    def parse(cls, value: "IntervalMethod | str") -> "IntervalMethod":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown interval method {value!r}; expected 'beta' or 'gaussian'") from None


class IntervalConditionError(NumericalError):
    """The side condition delta >= 4 c eps' / 9 of the covariance bound failed."""


@dataclass(frozen=True)
class IntervalHalfWidths:
    delta_var: float
    delta_cov: float
    method: IntervalMethod


def _check_n(n) -> int:
    if isinstance(n, bool):
        raise ValueError("sample count must be an integer")
    if isinstance(n, float):
        if not n.is_integer():
            raise ValueError(f"sample count must be an integer, got {n}")
        n = int(n)
    n = int(n)
    if n < 2:
        raise ValueError(f"sample count must be >= 2, got {n}")
    return n


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"failure probability must lie in (0, 1), got {eps}")
    return eps


@lru_cache(maxsize=4096)
def _halfwidth(eps: float, n: int) -> float:
    """(a' - b') / 2, signed: positive for eps < 1/2."""
    if eps == 0.5:
        return 0.0
    if eps < 0.5:
        return symmetric_beta_halfwidth(eps, 0.5 * n)
    return -symmetric_beta_halfwidth(1.0 - eps, 0.5 * n)


def a_prime(eps: float, n: int) -> float:
    """Upper quantile factor ``a' = 2 (1 - F^{-1}(eps))`` of Beta(n/2, n/2).

    ``Pr[2 ||X_1||^2 >= a' ||X||^2] = eps`` when ``X`` holds 2n i.i.d.
    centred Gaussians and ``X_1`` is its first half.
    """
    return 1.0 + _halfwidth(_check_eps(eps), _check_n(n))


def b_prime(eps: float, n: int) -> float:
    """Lower quantile factor ``b' = 2 F^{-1}(eps) = 2 - a'``."""
    return 1.0 - _halfwidth(_check_eps(eps), _check_n(n))


def delta_var_beta(n: int, eps: float) -> float:
    """Relative half-width of the beta-based variance interval.

    ``a'(eps/6) (1 + 120/eps * exp(-n/16)) - 1``, arranged so the small
    result does not come from subtracting 1 from a number close to 1.
    """
    n = _check_n(n)
    eps = _check_eps(eps)
    h = _halfwidth(eps / 6.0, n)
    tail = 120.0 / eps * math.exp(-n / 16.0)
    return h + (1.0 + h) * tail


def delta_cov_beta(n: int, eps: float) -> float:
    """Half-width of the beta-based covariance interval.

    ``((a' - b')(eps/6) / 2 + (a' - b')(eps**2/324)) / 2``.
    """
    n = _check_n(n)
    eps = _check_eps(eps)
    h1 = _halfwidth(eps / 6.0, n)
    h2 = _halfwidth(eps * eps / 324.0, n)
    return 0.5 * (h1 + 2.0 * h2)


@lru_cache(maxsize=4096)
def _delta_var_gauss(n: int, eps: float) -> float:
    return 1.0 - chi2_invcdf(eps, 2 * n) / (2.0 * n)


def delta_var_gauss(n: int, eps: float) -> float:
    """``1 - invcdf_{chi2(2n)}(eps) / (2n)``: variance half-width for Gaussian data."""
    return _delta_var_gauss(_check_n(n), _check_eps(eps))


def delta_cov_gauss(n: int, eps: float) -> float:
    """Covariance half-width for Gaussian data, ``delta_var_gauss(n, eps/2) / 2``."""
    return 0.5 * _delta_var_gauss(_check_n(n), _check_eps(eps) / 2.0)


def half_widths(n: int, eps: float, method: IntervalMethod | str) -> IntervalHalfWidths:
    """Both half-widths for ``method`` at raw failure probability ``eps``."""
    method = IntervalMethod.parse(method)
    if method is IntervalMethod.BETA_COLLECTIVE:
        return IntervalHalfWidths(delta_var_beta(n, eps), delta_cov_beta(n, eps), method)
    return IntervalHalfWidths(delta_var_gauss(n, eps), delta_cov_gauss(n, eps), method)


def var_upper_bound(y_hat: float, n: int, eps: float, method: IntervalMethod | str) -> float:
    """Worst-case variance ``y`` consistent with the estimate ``y_hat``.

    Parameters
    ----------
    y_hat : float
        Empirical per-quadrature variance.
    n : int
        Number of complex symbols behind ``y_hat``.
    eps : float
        Parameter-estimation failure probability; half of it is spent here.
    method : IntervalMethod or {"beta", "gaussian"}

    Returns
    -------
    float
        ``(1 + delta_var(n, eps/2)) * y_hat``. For the Gaussian family with a
        half-width above 0.01 the exact factor ``1 / (1 - delta)`` is used.
    """
    method = IntervalMethod.parse(method)
    y_hat = float(y_hat)
    if not y_hat >= 0.0:
        raise ValueError(f"variance estimate must be nonnegative, got {y_hat}")
    if method is IntervalMethod.BETA_COLLECTIVE:
        return (1.0 + delta_var_beta(n, eps / 2.0)) * y_hat
    delta = delta_var_gauss(n, eps / 2.0)
    if delta > GAUSS_EXACT_FORM_THRESHOLD:
        return y_hat / (1.0 - delta)
    return (1.0 + delta) * y_hat


def _check_moments(x_hat: float, y_hat: float) -> None:
    if not (x_hat > 0.0 and y_hat > 0.0):
        raise ValueError(f"variance estimates must be positive, got x_hat={x_hat}, y_hat={y_hat}")


def _check_side_condition(n: int, eps: float, z_hat: float, scale: float) -> None:
    """Assert ``delta >= 4 c eps' / 9`` for the beta covariance bound.

    ``scale`` is the norm combination multiplying the quantile widths
    (``2 sqrt(x y)`` for the optimized bound, ``x + y`` for the symmetric one),
    everything normalized per 2n real samples.
    """
    eps1 = eps / 6.0
    h1 = _halfwidth(eps1, n)
    h2 = _halfwidth(eps1 * eps1 / 9.0, n)
    delta = 0.5 * h2 * scale
    c = 0.5 * z_hat - 0.25 * h1 * scale
    if delta < 4.0 * c * eps1 / 9.0:
        raise IntervalConditionError(
            f"covariance interval side condition violated: delta={delta:.6g} < 4 c eps'/9 = {4.0 * c * eps1 / 9.0:.6g}"
        )


def cov_lower_bound(
    x_hat: float, y_hat: float, z_hat: float, n: int, eps: float, method: IntervalMethod | str
) -> float:
    """Worst-case covariance ``z >= z_hat - 2 delta_cov(n, eps/2) sqrt(x_hat y_hat)``.

    Uses the norm-balanced (optimized) form of the bound in additive shape so
    small ``z_hat`` never appears in a denominator.
    """
    method = IntervalMethod.parse(method)
    x_hat, y_hat, z_hat = float(x_hat), float(y_hat), float(z_hat)
    _check_moments(x_hat, y_hat)
    geo = math.sqrt(x_hat * y_hat)
    if method is IntervalMethod.BETA_COLLECTIVE:
        _check_side_condition(_check_n(n), _check_eps(eps / 2.0), z_hat, 2.0 * geo)
        delta = delta_cov_beta(n, eps / 2.0)
    else:
        delta = delta_cov_gauss(n, eps / 2.0)
    return z_hat - 2.0 * delta * geo


def cov_lower_bound_symmetric(
    x_hat: float, y_hat: float, z_hat: float, n: int, eps: float, method: IntervalMethod | str
) -> float:
    """Covariance bound with equal weights on both norms: ``z_hat - delta_cov (x_hat + y_hat)``.

    Never tighter than :func:`cov_lower_bound` (AM-GM); kept for comparison.
    """
    method = IntervalMethod.parse(method)
    x_hat, y_hat, z_hat = float(x_hat), float(y_hat), float(z_hat)
    _check_moments(x_hat, y_hat)
    if method is IntervalMethod.BETA_COLLECTIVE:
        _check_side_condition(_check_n(n), _check_eps(eps / 2.0), z_hat, x_hat + y_hat)
        delta = delta_cov_beta(n, eps / 2.0)
    else:
        delta = delta_cov_gauss(n, eps / 2.0)
    return z_hat - delta * (x_hat + y_hat)
