"""Regularized incomplete beta/gamma functions and their inverses.

Everything here works in double precision. The large-argument regime
(a, b ~ 1e9) is the one that matters for the confidence intervals, so the
power-term prefactors are assembled from a Stirling decomposition around the
distribution mean instead of differencing ``lgamma`` values, which would lose
~1e-6 of absolute accuracy at those sizes.
"""
from __future__ import annotations

import math
from fractions import Fraction
from statistics import NormalDist

import numpy as np

from .errors import NumericalError

__all__ = [
    "SpecialFunctionDomainError",
    "ConvergenceError",
    "reg_inc_beta",
    "reg_inc_beta_pair",
    "inv_reg_inc_beta",
    "symmetric_beta_halfwidth",
    "reg_lower_gamma_pair",
    "chi2_cdf",
    "chi2_sf",
    "chi2_invcdf",
    "log1pmx",
]

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_TINY_P = 1e-300
_EPS = 2.220446049250313e-16
_MAX_NEWTON = 200

# Bernoulli-number coefficients of the Stirling series for lnGamma.
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)

_STD_NORMAL = NormalDist()


class SpecialFunctionDomainError(ValueError):
    """Argument outside the mathematical domain of a special function."""


class ConvergenceError(NumericalError):
    """An iterative evaluation or inversion failed to converge."""


def _stirling_corr(z: float) -> float:
    """lnGamma(z) minus its leading Stirling terms."""
    if z >= 10.0:
        zi = 1.0 / z
        zi2 = zi * zi
        total = 0.0
        power = zi
        for c in _STIRLING:
            total += c * power
            power *= zi2
        return total
    return math.lgamma(z) - ((z - 0.5) * math.log(z) - z + _LN_SQRT_2PI)


def log1pmx(u: float) -> float:
    """Return ``log(1 + u) - u`` without cancellation for small ``u``."""
    if u <= -1.0:
        raise SpecialFunctionDomainError(f"log1pmx requires u > -1, got {u}")
    if abs(u) > 0.25:
        return math.log1p(u) - u
    s = u / (2.0 + u)
    s2 = s * s
    term = s * s2
    total = 0.0
    k = 3
    while True:
        contrib = term / k
        total += contrib
        if abs(contrib) <= 1e-18 * abs(total) or term == 0.0:
            break
        term *= s2
        k += 2
    return -u * u / (2.0 + u) + 2.0 * total


# ---------------------------------------------------------------------------
# incomplete beta
# ---------------------------------------------------------------------------


def _check_beta_params(a: float, b: float) -> None:
    if not (a > 0.0 and b > 0.0) or math.isinf(a) or math.isinf(b):
        raise SpecialFunctionDomainError(f"beta parameters must be positive and finite, got a={a}, b={b}")


def _beta_log_prefactor(x: float, a: float, b: float) -> float:
    """ln[x^a (1-x)^b / B(a, b)] for 0 < x < 1."""
    s = a + b
    if a <= b:
        q0 = 1.0 - a / s
        p0 = 1.0 - q0
    else:
        p0 = 1.0 - b / s
        q0 = 1.0 - p0
    # p0 + q0 == 1 exactly, so 1 - x == q0 - d in exact arithmetic.
    const = 0.5 * (math.log(a) + math.log(b) - math.log(s)) - _LN_SQRT_2PI
    const -= _stirling_corr(a) + _stirling_corr(b) - _stirling_corr(s)
    d = x - p0
    ua = d / p0
    ub = -d / q0
    if abs(ua) <= 0.5 and abs(ub) <= 0.5:
        fa, fb, fp, fq = Fraction(a), Fraction(b), Fraction(p0), Fraction(q0)
        slope = float((fa * fq - fb * fp) / (fp * fq))
        return a * log1pmx(ua) + b * log1pmx(ub) + d * slope + const
    # log1p of the exactly computed offset unless the ratio is near zero; a
    # rounded x / p0 would be amplified by a large shape parameter
    term_a = a * math.log1p(ua) if ua > -0.5 else a * math.log(x / p0)
    term_b = b * math.log1p(ub) if ub > -0.5 else b * math.log((1.0 - x) / q0)
    return term_a + term_b + const


def _beta_cf(x: float, y: float, a: float, b: float) -> float:
    """Continued fraction whose reciprocal scales the power term into I_x(a, b).

    Uses the DiDonato-Morris form, which keeps ``x`` and ``y = 1 - x``
    separate so nothing cancels near the mean. Intended for x <= a / (a + b).
    """
    tiny = 1e-300
    xx = x * x
    f = a * (a * y - b * x + 1.0) / (a + 1.0)
    if f == 0.0:
        f = tiny
    c = f
    d = 0.0
    max_iter = 2000 + int(40.0 * math.sqrt(max(a, b)))
    for m in range(1, max_iter + 1):
        am = (a + m - 1.0) * (a + b + m - 1.0) * m * (b - m) * xx / (a + 2.0 * m - 1.0) ** 2
        bm = (
            m
            + m * (b - m) * x / (a + 2.0 * m - 1.0)
            + (a + m) * (a * y - b * x + 1.0 + m * (2.0 - x)) / (a + 2.0 * m + 1.0)
        )
        d = bm + am * d
        if d == 0.0:
            d = tiny
        c = bm + am / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) <= 1e-16:
            return f
    raise ConvergenceError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def _beta_large_a_small_b(x: float, y: float, a: float, b: float) -> float:
    """I_x(a, b) for a >> b via the incomplete-gamma asymptotic series (x near 1).

    The continued fraction loses digits here because its odd partial
    numerators approach -1.
    """
    bm1 = b - 1.0
    t = a + 0.5 * bm1
    lx = math.log1p(-y) if y < 0.35 else math.log(x)
    u = -t * lx
    lower_g, upper_g = reg_lower_gamma_pair(b, u)
    log_h = b * math.log(u) - u - math.lgamma(b)
    # ln[Gamma(a + b) / Gamma(a) / t^b]
    log_ratio = (
        (a - 0.5) * math.log1p(b / a)
        + b * math.log1p(0.5 * (b + 1.0) / t)
        - b
        + _stirling_corr(a + b)
        - _stirling_corr(a)
    )
    # J_n below is the series' j_n scaled by h = exp(log_h), so nothing divides
    # by a quantity that may underflow
    scale = math.exp(log_ratio)
    h = math.exp(log_h)
    j = upper_g
    total = scale * j
    if total == 0.0:
        return 0.0
    p_coef = [1.0]
    lx2 = (0.5 * lx) ** 2
    lxp = 1.0
    t4 = 4.0 * t * t
    b2n = b
    for n in range(1, 30):
        acc = 0.0
        for m in range(1, n):
            acc += (m * b - n) * p_coef[n - m] / math.factorial(2 * m + 1)
        acc = acc / n + bm1 / math.factorial(2 * n + 1)
        p_coef.append(acc)
        j = (b2n * (b2n + 1.0) * j + (u + b2n + 1.0) * lxp * h) / t4
        lxp *= lx2
        b2n += 2.0
        r = scale * acc * j
        total += r
        if abs(r) <= 1e-17 * abs(total):
            return total
    raise ConvergenceError(f"large-parameter beta series did not converge (x={x}, a={a}, b={b})")


def _beta_pair_generic(x: float, a: float, b: float) -> tuple[float, float]:
    if max(a, b) >= 1e4 and min(a, b) <= 20.0:
        # Asymptotic series for the tail owned by the large parameter; keep
        # it only where that tail is the smaller one.
        if a > b:
            lower = _beta_large_a_small_b(x, 1.0 - x, a, b)
            if lower <= 0.5:
                return lower, 1.0 - lower
        else:
            upper = _beta_large_a_small_b(1.0 - x, x, b, a)
            if upper <= 0.5:
                return 1.0 - upper, upper
    lp = _beta_log_prefactor(x, a, b)
    y = 1.0 - x
    if x * (a + b) <= a:
        lower = math.exp(lp) / _beta_cf(x, y, a, b) if lp > -745.0 else 0.0
        return lower, 1.0 - lower
    upper = math.exp(lp) / _beta_cf(y, x, b, a) if lp > -745.0 else 0.0
    return 1.0 - upper, upper


def _beta_pair(x: float, a: float, b: float) -> tuple[float, float]:
    if x <= 0.0:
        return 0.0, 1.0
    if x >= 1.0:
        return 1.0, 0.0
    if a == b and 0.25 <= x <= 0.75:
        # X ~ Beta(a, a)  =>  (1 - 2X)^2 ~ Beta(1/2, a); keeps the large
        # symmetric case cheap and exact in both tails near the median.
        if x == 0.5:
            return 0.5, 0.5
        h = 1.0 - 2.0 * x
        _, tail = _beta_pair_generic(h * h, 0.5, a)
        if h > 0.0:
            return 0.5 * tail, 1.0 - 0.5 * tail
        return 1.0 - 0.5 * tail, 0.5 * tail
    return _beta_pair_generic(x, a, b)


def reg_inc_beta_pair(x: float, a: float, b: float) -> tuple[float, float]:
    """Return ``(I_x(a, b), 1 - I_x(a, b))``, each computed without cancellation."""
    if not 0.0 <= x <= 1.0:
        raise SpecialFunctionDomainError(f"x must lie in [0, 1], got {x}")
    _check_beta_params(a, b)
    return _beta_pair(float(x), float(a), float(b))


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``.

    Parameters
    ----------
    x : float
        Upper integration limit in [0, 1].
    a, b : float
        Positive shape parameters.

    Returns
    -------
    float
        The Beta(a, b) cumulative distribution function at ``x``.
    """
    return reg_inc_beta_pair(x, a, b)[0]


def _beta_log_pdf(x: float, a: float, b: float) -> float:
    return _beta_log_prefactor(x, a, b) - math.log(x) - math.log1p(-x)


def _check_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise SpecialFunctionDomainError(f"{name} must lie in [0, 1], got {p}")
    if 0.0 < p < _TINY_P or 0.0 < 1.0 - p < _TINY_P:
        raise SpecialFunctionDomainError(f"{name}={p} is below the representable tail mass")
    return p


def _newton_log(pair, log_pdf, target: float, lower_tail: bool, lo: float, hi: float, x0: float) -> float:
    """Safeguarded Newton iteration on the log of one tail.

    ``pair(x)`` returns (cdf, sf); ``log_pdf(x)`` the log density. Solves
    cdf(x) = target when ``lower_tail`` else sf(x) = target.
    """
    x = _newton_log_raw(pair, log_pdf, target, lower_tail, lo, hi, x0)
    return _ulp_polish(pair, target, lower_tail, lo, hi, x)


def _ulp_polish(pair, target: float, lower_tail: bool, lo: float, hi: float, x: float) -> float:
    # Newton stops on a relative step test, which can leave x a few ulps
    # short where the tail is steep (near 0 or 1); walk to the best neighbour
    k = 0 if lower_tail else 1
    log_target = math.log(target)

    def err(t):
        tail = pair(t)[k]
        return abs(math.log(tail) - log_target) if tail > 0.0 else math.inf

    best = err(x)
    for _ in range(8):
        moved = False
        for t in (math.nextafter(x, -math.inf), math.nextafter(x, math.inf)):
            if lo <= t <= hi:
                e = err(t)
                if e < best:
                    x, best, moved = t, e, True
        if not moved:
            break
    return x


def _newton_log_raw(pair, log_pdf, target: float, lower_tail: bool, lo: float, hi: float, x0: float) -> float:
    log_target = math.log(target)
    x = min(max(x0, lo), hi)
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    for _ in range(_MAX_NEWTON):
        cdf, sf = pair(x)
        tail = cdf if lower_tail else sf
        if tail <= 0.0:
            # underflowed: move toward the side holding the mass
            if lower_tail:
                lo = x
            else:
                hi = x
            x_new = math.sqrt(lo * hi) if lo > 0.0 else 0.5 * (lo + hi)
            x_new = 0.5 * (lo + hi) if not lo < x_new < hi else x_new
            x = x_new
            continue
        resid = math.log(tail) - log_target
        if (tail < target) == lower_tail:
            lo = x
        else:
            hi = x
        if abs(resid) <= 4.0 * _EPS:
            return x
        slope = math.exp(log_pdf(x) - math.log(tail))
        if not lower_tail:
            slope = -slope
        step = resid / slope if slope != 0.0 and math.isfinite(slope) else math.inf
        x_new = x - step
        if abs(x_new - x) <= 2.0 * _EPS * abs(x):
            return x_new if lo <= x_new <= hi else x
        if not lo < x_new < hi:
            x_new = math.sqrt(lo * hi) if lo > 0.0 and hi / lo > 4.0 else 0.5 * (lo + hi)
        if hi - lo <= 2.0 * _EPS * abs(hi):
            return 0.5 * (lo + hi)
        x = x_new
    raise ConvergenceError(f"quantile inversion did not converge (target={target})")


def symmetric_beta_halfwidth(p: float, a: float) -> float:
    """Return ``1 - 2 x`` where ``x`` is the ``p``-quantile of Beta(a, a).

    Computed directly (not by subtracting the quantile from 1/2), so it keeps
    full relative precision when the quantile sits within 1e-4 of the median.
    Requires 0 < p <= 1/2.
    """
    p = _check_probability(p)
    if not 0.0 < p <= 0.5:
        raise SpecialFunctionDomainError(f"symmetric half-width needs 0 < p <= 1/2, got {p}")
    _check_beta_params(a, a)
    if p == 0.5:
        return 0.0
    a = float(a)
    # Upper tail of W = (1 - 2X)^2 ~ Beta(1/2, a) has mass 2p at w = h^2.
    z = _STD_NORMAL.inv_cdf(p)
    w0 = min(z * z / (2.0 * a + 1.0), 0.5)
    w = _newton_log(
        lambda w: _beta_pair_generic(w, 0.5, a) if 0.0 < w < 1.0 else ((0.0, 1.0) if w <= 0.0 else (1.0, 0.0)),
        lambda w: _beta_log_pdf(w, 0.5, a),
        2.0 * p,
        False,
        0.0,
        1.0,
        w0,
    )
    return math.sqrt(w)


def inv_reg_inc_beta(p: float, a: float, b: float) -> float:
    """Quantile function of Beta(a, b): the ``x`` with ``I_x(a, b) = p``.

    ``p`` equal to 0 or 1 returns the corresponding endpoint; probabilities
    inside (0, 1e-300) of either end are rejected. The result is always
    clamped to [0, 1].
    """
    p = _check_probability(p)
    _check_beta_params(a, b)
    a = float(a)
    b = float(b)
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if a == b:
        if p == 0.5:
            return 0.5
        # near the median the half-width route keeps full precision; far from
        # it (1 - h)/2 cancels and the generic solver below takes over
        h = symmetric_beta_halfwidth(min(p, 1.0 - p), a)
        if h <= 0.5:
            return 0.5 * (1.0 - h) if p < 0.5 else 0.5 * (1.0 + h)
    mean = a / (a + b)
    sd = math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1.0)))
    lower_tail = p <= 0.5
    x0 = mean + _STD_NORMAL.inv_cdf(p) * sd
    # small-x tail: I_x(a, b) ~ x^a / (a B(a, b)); a sharper seed and the
    # place to detect quantiles below the smallest double
    log_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    if lower_tail:
        log_x_tail = (math.log(p) + math.log(a) + log_beta) / a
        if log_x_tail < -745.0:
            return 0.0
        if log_x_tail < math.log(0.1 * mean):
            x0 = math.exp(log_x_tail)
    else:
        log_y_tail = (math.log1p(-p) + math.log(b) + log_beta) / b
        if log_y_tail < -745.0:
            return 1.0
        if log_y_tail < math.log(0.1 * (1.0 - mean)):
            x0 = -math.expm1(log_y_tail)
    if not 0.0 < x0 < 1.0:
        x0 = 0.5 * mean if x0 <= 0.0 else 0.5 * (1.0 + mean)
    x = _newton_log(
        lambda t: _beta_pair(t, a, b),
        lambda t: _beta_log_pdf(t, a, b),
        p if lower_tail else 1.0 - p,
        lower_tail,
        0.0,
        1.0,
        x0,
    )
    return min(max(x, 0.0), 1.0)


# ---------------------------------------------------------------------------
# incomplete gamma / chi-square
# ---------------------------------------------------------------------------


def _gamma_log_prefactor(a: float, x: float) -> float:
    """ln[x^a e^-x / Gamma(a)] for x > 0."""
    u = (x - a) / a
    if u > -1.0:
        core = a * log1pmx(u) if abs(u) <= 0.25 else a * math.log(x / a) - (x - a)
    else:
        core = a * math.log(x / a) - (x - a)
    return core + 0.5 * math.log(a) - _LN_SQRT_2PI - _stirling_corr(a)


def _gamma_series(a: float, x: float) -> float:
    """Sum_{j>=0} prod_{i<=j} x/(a+i); only used for x < a + 1 (terms decrease)."""
    total = 1.0
    log_last = 0.0
    start = 1
    chunk = 64
    dx = x - a
    while True:
        i = np.arange(start, start + chunk, dtype=np.float64)
        ratio = x / (a + i)
        with np.errstate(divide="ignore"):
            step = np.where(ratio < 0.5, np.log(ratio), np.log1p((dx - i) / (a + i)))
        logs = log_last + np.cumsum(step)
        total += float(np.exp(logs).sum())
        log_last = float(logs[-1])
        if log_last < math.log(total) - 40.0:
            return total
        start += chunk
        chunk = min(chunk * 2, 1 << 16)
        if start > 1e8:
            raise ConvergenceError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cf(a: float, x: float) -> float:
    """Legendre continued fraction for Q(a, x) without the prefactor."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    max_iter = 1000 + int(40.0 * math.sqrt(a))
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= 1e-16:
            return h
    raise ConvergenceError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def reg_lower_gamma_pair(a: float, x: float) -> tuple[float, float]:
    """Return ``(P(a, x), Q(a, x))`` for the regularized incomplete gamma function."""
    if not a > 0.0 or math.isinf(a):
        raise SpecialFunctionDomainError(f"gamma shape must be positive, got {a}")
    if x < 0.0 or math.isnan(x):
        raise SpecialFunctionDomainError(f"x must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    lp = _gamma_log_prefactor(a, x)
    if x < a + 1.0:
        lower = math.exp(lp) * _gamma_series(a, x) / a if lp > -745.0 else 0.0
        return lower, 1.0 - lower
    upper = math.exp(lp) * _gamma_cf(a, x) if lp > -745.0 else 0.0
    return 1.0 - upper, upper


def _check_dof(k) -> float:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise SpecialFunctionDomainError(f"degrees of freedom must be a positive integer, got {k}")
    return float(k)


def chi2_cdf(x: float, k: int) -> float:
    """Cumulative distribution function of the chi-square law with ``k`` degrees of freedom."""
    k = _check_dof(k)
    if x < 0.0:
        raise SpecialFunctionDomainError(f"chi-square argument must be nonnegative, got {x}")
    return reg_lower_gamma_pair(0.5 * k, 0.5 * x)[0]


def chi2_sf(x: float, k: int) -> float:
    """Survival function ``1 - chi2_cdf(x, k)`` evaluated directly."""
    k = _check_dof(k)
    if x < 0.0:
        raise SpecialFunctionDomainError(f"chi-square argument must be nonnegative, got {x}")
    return reg_lower_gamma_pair(0.5 * k, 0.5 * x)[1]


def chi2_invcdf(p: float, k: int) -> float:
    """Quantile of the chi-square law: ``x`` with ``chi2_cdf(x, k) = p``.

    Newton iteration on the log of the relevant tail, seeded with the
    Wilson-Hilferty approximation and kept inside a bisection bracket.
    """
    k = _check_dof(k)
    p = _check_probability(p)
    if not 0.0 < p < 1.0:
        raise SpecialFunctionDomainError(f"chi2_invcdf needs 0 < p < 1, got {p}")
    a = 0.5 * k
    z = _STD_NORMAL.inv_cdf(p)
    c = 2.0 / (9.0 * k)
    base = 1.0 - c + z * math.sqrt(c)
    if base > 0.1:
        x0 = k * base**3
    else:
        # small-x tail: P(a, x/2) ~ (x/2)^a / Gamma(a + 1)
        x0 = 2.0 * math.exp((math.log(p) + math.lgamma(a + 1.0)) / a)
    hi = max(2.0 * x0, k + 50.0 * math.sqrt(k) + 100.0)
    while reg_lower_gamma_pair(a, 0.5 * hi)[0] < p:
        hi *= 2.0
    lower_tail = p <= 0.5
    return _newton_log(
        lambda t: reg_lower_gamma_pair(a, 0.5 * t),
        lambda t: _gamma_log_prefactor(a, 0.5 * t) - math.log(t),
        p if lower_tail else 1.0 - p,
        lower_tail,
        0.0,
        hi,
        min(x0, hi),
    )
