"""Recompute the reference values frozen into the test suite.

Every number comes from mpmath at 40 significant digits: incomplete beta
functions from the Gauss hypergeometric series (cross-checked by quadrature),
gamma functions by direct quadrature of the density (mpmath's own
``betainc``/``gammainc`` for small parameters) and quantiles by root finding
on those integrals. Nothing here calls the package under test.

Run ``python3 scripts/derive_oracle_values.py`` and paste the output into
``tests/oracle_values.py``.
"""
from __future__ import annotations

import mpmath as mp

mp.mp.dps = 40


def _hyp_lower(x, a, b):
    """I_x(a, b) = x^a (1-x)^b / (a B(a, b)) 2F1(a+b, 1; a+1; x)."""
    return (mp.exp(a * mp.log(x) + b * mp.log1p(-x) - mp.log(a) - mp.log(mp.beta(a, b)))
            * mp.hyp2f1(a + b, 1, a + 1, x, maxterms=10**7))


def beta_tails(x, a, b):
    """(I_x(a, b), 1 - I_x(a, b))."""
    a, b, x = mp.mpf(a), mp.mpf(b), mp.mpf(x)
    if a + b < 200:
        return mp.betainc(a, b, 0, x, regularized=True), mp.betainc(a, b, x, 1, regularized=True)
    # the smaller tail from the hypergeometric series, checked against quadrature
    if x < a / (a + b):
        low = _hyp_lower(x, a, b)
        lo_q, _ = _beta_quad(x, a, b)
        assert abs(low / lo_q - 1) < 1e-10, (x, a, b)
        return low, 1 - low
    up = _hyp_lower(1 - x, b, a)
    _, up_q = _beta_quad(x, a, b)
    assert abs(up / up_q - 1) < 1e-10, (x, a, b)
    return 1 - up, up


def _beta_quad(x, a, b):
    lb = mp.log(mp.beta(a, b))

    def dens(t):
        return mp.exp((a - 1) * mp.log(t) + (b - 1) * mp.log1p(-t) - lb)

    mean = a / (a + b)
    sd = mp.sqrt(a * b / (a + b) ** 2 / (a + b + 1))
    # panels start at the local decay length, which can be far below sd in a tail
    slope = abs((a - 1) / x - (b - 1) / (1 - x))
    step = min(sd, 1 / slope) / 8 if slope > 0 else sd / 8
    if x < mean:
        edge = max(mp.mpf(0), x - 80 * sd)
        low = mp.quad(dens, _panels(x, edge, step))
        return low, 1 - low
    edge = min(mp.mpf(1), x + 80 * sd)
    up = mp.quad(dens, _panels(x, edge, step))
    return 1 - up, up


def _panels(start, stop, step):
    """Breakpoints from ``start`` toward ``stop`` with geometrically growing width."""
    pts = [start]
    width = step
    sign = 1 if stop > start else -1
    while abs(pts[-1] - start) < abs(stop - start):
        pts.append(start + sign * min(abs(stop - start), abs(pts[-1] - start) + width))
        width *= mp.mpf("1.25")
    return sorted(pts)


def gamma_lower(a, x):
    a, x = mp.mpf(a), mp.mpf(x)
    if a < 100:
        return mp.gammainc(a, 0, x, regularized=True), mp.gammainc(a, x, mp.inf, regularized=True)
    lg = mp.loggamma(a)

    def dens(t):
        return mp.exp((a - 1) * mp.log(t) - t - lg)

    sd = mp.sqrt(a)
    slope = abs((a - 1) / x - 1)
    step = min(sd, 1 / slope) / 8 if slope > 0 else sd / 8
    if x < a:
        low = mp.quad(dens, _panels(x, max(mp.mpf(0), x - 80 * sd), step))
        return low, 1 - low
    up = mp.quad(dens, _panels(x, x + 80 * sd, step))
    return 1 - up, up


def _root(f, x0):
    """Root of an increasing ``f`` bracketed within 5% of ``x0``."""
    x0 = mp.mpf(x0)
    return mp.findroot(f, (x0 * mp.mpf("0.95"), x0 * mp.mpf("1.05")), solver="anderson", tol=mp.mpf(10) ** -20)


def inv_beta(p, a, b, x0):
    p = mp.mpf(p)
    return _root(lambda x: mp.log(beta_tails(x, a, b)[0]) - mp.log(p), x0)


def halfwidth(p, a, h0):
    """h with I_{(1-h)/2}(a, a) = p."""
    p = mp.mpf(p)
    return _root(lambda h: mp.log(p) - mp.log(beta_tails((1 - h) / 2, a, a)[0]), h0)


def chi2_quantile(p, k, x0):
    p = mp.mpf(p)
    return _root(lambda x: mp.log(gamma_lower(mp.mpf(k) / 2, x / 2)[0]) - mp.log(p), x0)


def main():
    print("BETA = [  # (x, a, b, I_x(a,b), 1 - I_x(a,b))")
    for x, a, b in [(0.3, 2, 5), (0.01, 0.5, 0.5), (0.9, 10, 3), (0.2, 0.1, 20), (0.5, 1000, 1000),
                    (0.49, 5e4, 5e4), (0.4999, 5e8, 5e8), (2e-4, 1000, 1e7), (0.99999, 3e5, 3),
                    (0.5003, 1e6, 1e6)]:
        lo, up = beta_tails(x, a, b)
        print(f"    ({x!r}, {a!r}, {b!r}, {mp.nstr(lo, 17)}, {mp.nstr(up, 17)}),")
    print("]")

    print("INV_BETA = [  # (p, a, b, x)")
    for p, a, b, x0 in [(0.01, 3, 7, 0.0533), (0.99, 3, 7, 0.656), (1e-15, 2, 3, 1.29e-8), (0.3, 0.1, 0.1, 0.0052),
                        (1e-12, 2e5, 5e5, 0.282)]:
        print(f"    ({p!r}, {a!r}, {b!r}, {mp.nstr(inv_beta(p, a, b, x0), 17)}),")
    print("]")

    print("HALFWIDTH = [  # (p, a, h)")
    for p, a, h0 in [(0.05, 50, 0.164), (0.01, 250, 0.104), (1e-10 / 6, 5e5, 0.00663), (1e-10 / 6, 1.75e8, 3.54e-4),
                     (1e-20 / 324, 5e5, 0.00986)]:
        print(f"    ({p!r}, {a!r}, {mp.nstr(halfwidth(p, a, h0), 17)}),")
    print("]")

    print("CHI2 = [  # (x, k, cdf, sf)")
    for x, k in [(3.0, 1), (0.5, 2), (1500.0, 1000), (2e6 - 4000.0, 2e6), (2.0e9 + 4e5, 2e9)]:
        lo, up = gamma_lower(mp.mpf(k) / 2, mp.mpf(x) / 2)
        print(f"    ({x!r}, {k!r}, {mp.nstr(lo, 17)}, {mp.nstr(up, 17)}),")
    print("]")

    print("CHI2_QUANTILE = [  # (p, k, x)")
    for p, k, x0 in [(0.05, 2000, 1897.0), (1e-10, 1000, 741.0), (1e-6, 1, 1.57e-12), (0.5, 3, 2.366),
                     (1e-10 / 2, 2e6, 1.987e6)]:
        print(f"    ({p!r}, {k!r}, {mp.nstr(chi2_quantile(p, k, x0), 17)}),")
    print("]")


if __name__ == "__main__":
    main()
