"""Acceptance suite: one test per criterion, each run at its stated tolerance.

The terminal summary prints one PASS/FAIL line per criterion (see conftest.py).
"""
import hashlib
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from cvqkd_finite.cli import main
from cvqkd_finite.confidence import (
    a_prime,
    b_prime,
    delta_cov_beta,
    delta_cov_gauss,
    delta_var_beta,
    delta_var_gauss,
)
from cvqkd_finite.config import load_config
from cvqkd_finite.estimation import (
    EntropyEstimate,
    TrustedReceiver,
    channel_params,
    combine_moments,
    empirical_moments,
    entropy_penalty,
)
from cvqkd_finite.pipeline import calibrate_run, simulate_run, summarize_run, zero_crossing_n
from cvqkd_finite.security import (
    IrOutcome,
    SecurityBudget,
    aep_penalty,
    aep_penalty_exact,
    holevo_bound,
    holevo_untrusted,
    key_length,
)
from cvqkd_finite.simulator import ChannelModel, SeededStream, generate_symbols, normals, orthogonal_split_trial
from cvqkd_finite.special_functions import inv_reg_inc_beta, reg_inc_beta

from fock_oracle import holevo_fock

MU, ETA, U, TAU, T = 1.45, 0.35, 6.3e-3, 0.69, 25.71e-3
RECEIVER = TrustedReceiver(tau=TAU, t=T)


def _binomial_sd(p, trials):
    return math.sqrt(p * (1.0 - p) / trials)


def _dyadic(v, bits=40):
    return round(v * 2**bits) / 2**bits


@pytest.mark.criterion(1, "incomplete-beta reflection and symmetric inverse to 1e-12 on 200 pairs")
def test_c1_special_function_identities(detail):
    start = time.perf_counter()
    a_values = list(np.geomspace(0.5, 5e8, 19)) + [5e8]
    worst_reflect = worst_inverse = 0.0
    pairs = 0
    for a in a_values:
        spread = 4.0 / math.sqrt(a) if a > 16 else 0.45
        for j in range(10):
            # x spans the bulk of the distribution; dyadic so 1 - x is exact
            x = _dyadic(0.5 + spread * (j - 4.5) / 5.0)
            x = min(max(x, 2.0**-40), 1.0 - 2.0**-40)
            p = _dyadic([2.0**-40, 2.0**-30, 2.0**-20, 2.0**-12, 2.0**-7, 0.0625, 0.25, 0.375, 0.4375, 0.5][j])
            for b in (a, 2.0 * a):
                worst_reflect = max(worst_reflect, abs(reg_inc_beta(x, a, b) + reg_inc_beta(1.0 - x, b, a) - 1.0))
            worst_inverse = max(worst_inverse,
                                abs(inv_reg_inc_beta(1.0 - p, a, a) - (1.0 - inv_reg_inc_beta(p, a, a))))
            pairs += 1
    elapsed = time.perf_counter() - start
    detail(f"pairs={pairs} max reflection err={worst_reflect:.1e} max inverse err={worst_inverse:.1e} t={elapsed:.1f}s")
    assert pairs == 200 and 5e8 in a_values
    assert worst_reflect <= 1e-12
    assert worst_inverse <= 1e-12
    assert elapsed < 10.0


@pytest.mark.criterion(2, "orthogonal-split coverage within 4 binomial SD (1e5 trials)")
def test_c2_split_coverage(detail):
    trials = 100_000
    ok = True
    for n, eps, seed in [(100, 0.05, 101), (500, 0.01, 102)]:
        start = time.perf_counter()
        s = orthogonal_split_trial(n, SeededStream(seed), trials)
        rate = float(np.mean(2.0 * s.x1_sq >= a_prime(eps, n) * s.x_sq))
        elapsed = time.perf_counter() - start
        sd = _binomial_sd(eps, trials)
        detail(f"n={n} eps={eps} rate={rate:.5f} ({(rate - eps) / sd:+.2f} SD) t={elapsed:.0f}s")
        ok &= abs(rate - eps) <= 4.0 * sd and elapsed < 60.0
    assert ok


@pytest.mark.criterion(3, "inner-product split violation rate <= 4 eps + 4 SD")
def test_c3_inner_product_coverage(detail):
    start = time.perf_counter()
    n, eps, trials = 100, 0.05, 100_000
    s = orthogonal_split_trial(n, SeededStream(103), trials)
    width = 0.25 * (a_prime(eps, n) - b_prime(eps, n)) * s.norm_sum
    rate = float(np.mean(np.abs(s.xy1 - s.xy2) > width))
    limit = 4.0 * eps + 4.0 * _binomial_sd(4.0 * eps, trials)
    detail(f"violation rate={rate:.5f} limit={limit:.5f}")
    assert rate <= limit
    assert time.perf_counter() - start < 60.0


@pytest.mark.criterion(4, "Pr{y > (1 + dVar) y_hat} within 4 SD of eps (n=1000, eps=0.05)")
def test_c4_gaussian_interval_coverage(detail):
    n, eps, trials = 1000, 0.05, 100_000
    delta = delta_var_gauss(n, eps)
    y_hat = np.empty(trials)
    stream = SeededStream(104)
    rows = 2000  # trials per chunk; each trial averages 2n squared normals
    for lo in range(0, trials, rows):
        hi = min(lo + rows, trials)
        z = normals(stream, (hi - lo) * n // 2, lo * n // 2).reshape(hi - lo, 2 * n)
        y_hat[lo:hi] = np.einsum("ij,ij->i", z, z) / (2 * n)
    true_y = 1.0
    rate = float(np.mean(true_y > (1.0 + delta) * y_hat))
    exact_form = float(np.mean(true_y > y_hat / (1.0 - delta)))
    sd = _binomial_sd(eps, trials)
    detail(f"delta={delta:.5f} rate={rate:.5f} ({(rate - eps) / sd:+.1f} SD); "
           f"with 1/(1-delta) rate={exact_form:.5f}")
    assert abs(rate - eps) <= 4.0 * sd


@pytest.mark.criterion(5, "Gaussian half-widths <= Beta half-widths, both strictly decreasing")
def test_c5_interval_ordering(detail):
    start = time.perf_counter()
    grid = np.unique(np.rint(np.geomspace(1e4, 1e9, 50)).astype(np.int64))
    eps = 1e-10
    table = np.array([[delta_var_gauss(int(n), eps), delta_var_beta(int(n), eps),
                       delta_cov_gauss(int(n), eps), delta_cov_beta(int(n), eps)] for n in grid])
    elapsed = time.perf_counter() - start
    detail(f"rows={len(grid)} var ratio at 1e4={table[0, 1] / table[0, 0]:.3f} t={elapsed:.1f}s")
    assert len(grid) == 50
    assert np.all(table[:, 0] <= table[:, 1])
    assert np.all(table[:, 2] <= table[:, 3])
    assert np.all(np.diff(table, axis=0) < 0.0)
    assert elapsed < 30.0


@pytest.mark.criterion(6, "closed-form AEP penalty dominates the exact one on the (delta, d) grid")
def test_c6_aep_dominance(detail):
    margins = [aep_penalty(delta, d) - aep_penalty_exact(delta, d)
               for delta in (1e-12, 1e-10, 1e-6, 1e-3, 0.1) for d in range(2, 17)]
    detail(f"points={len(margins)} min margin={min(margins):.3f}")
    assert len(margins) == 75
    assert min(margins) >= 0.0


@pytest.mark.criterion(7, "Holevo limits, monotone in u, untrusted agreement, Fock oracle to 1e-4")
def test_c7_holevo(detail):
    perfect = TrustedReceiver(tau=1.0, t=0.0)
    lossless = holevo_bound(MU, 1.0, 0.0, perfect)
    no_signal = holevo_bound(0.0, ETA, 0.0, RECEIVER)
    us = np.linspace(0.0, 0.05, 10)
    chis = [holevo_bound(MU, ETA, u, RECEIVER) for u in us]
    pure_loss_gap = max(abs(holevo_bound(MU, eta, 0.0, perfect) - holevo_untrusted(MU, eta, 0.0))
                        for eta in (0.05, 0.2, 0.35, 0.6, 0.9))
    chi = holevo_bound(MU, ETA, U, RECEIVER)
    oracle = holevo_fock(MU, ETA, U, TAU, T, cutoff=40)
    detail(f"chi={chi:.9f} fock={oracle:.9f} pure-loss gap={pure_loss_gap:.1e}")
    assert lossless <= 1e-9
    assert no_signal <= 1e-9
    assert all(b > a for a, b in zip(chis, chis[1:]))
    assert pure_loss_gap <= 1e-9
    assert abs(chi - oracle) <= 1e-4


@pytest.mark.criterion(8, "eta within 0.01 and u within 2e-3 in >= 95 of 100 runs at n=1e7")
def test_c8_round_trip(detail):
    start = time.perf_counter()
    cfg = load_config()
    model = ChannelModel(eta=ETA, u=U, tau=TAU, t=T, mu=MU)
    hits = 0
    u_err = []
    for i in range(100):
        data = generate_symbols(10**7, model, cfg.dig, SeededStream(cfg["run.seed"] + i),
                                cfg["dig.digitize_tx"], cfg["dig.digitize_rx"])
        m = empirical_moments(data)
        del data
        eta, u = channel_params(m, m.x_hat, RECEIVER)
        u_err.append(u - U)
        hits += abs(eta - ETA) <= 0.01 and abs(u - U) <= 2e-3
    elapsed = time.perf_counter() - start
    detail(f"{hits}/100 within tolerance, u err mean={np.mean(u_err):+.1e} sd={np.std(u_err, ddof=1):.2e}, "
           f"t={elapsed:.0f}s")
    assert hits >= 95
    assert elapsed < 300.0


@pytest.mark.criterion(9, "worst-case bound crosses zero at N in [1.5e8, 7e8]")
def test_c9_threshold_crossing(detail, tmp_path):
    start = time.perf_counter()
    cfg = load_config()
    simulate_run(cfg, tmp_path)
    receiver = calibrate_run(cfg, tmp_path)
    summaries = summarize_run(cfg, tmp_path)
    moments = combine_moments(s.moments for s in summaries)
    counts = np.sum([s.counts for s in summaries], axis=0)
    n_cross = zero_crossing_n(cfg, moments, counts, receiver)
    elapsed = time.perf_counter() - start
    detail(f"N*={n_cross:.4g} ({n_cross / cfg['channel.symbol_rate']:.2f} s at 1e8 Bd), t={elapsed:.0f}s")
    assert 1.5e8 <= n_cross <= 7e8
    assert elapsed < 600.0


@pytest.mark.criterion(10, "some H in [0, 12] gives 53,452,436 +- 1e6 bits; terms re-derivable")
def test_c10_reference_key_length(detail):
    target = 53_452_436
    n_prime, leak, p, d = 984_000_000, 1.6e9, 1.0 - 0.0036, 6
    budget = SecurityBudget()
    chi = holevo_bound(MU, ETA, U, RECEIVER)
    ir = IrOutcome(p_success=p, n_prime=n_prime, leak_bits=leak)
    pen = entropy_penalty(n_prime, budget.eps_ent)

    def report(h):
        return key_length(ir, EntropyEstimate(h, pen, n_prime, 2 ** (2 * d)), chi, budget, d)

    grid = np.linspace(0.0, 12.0, 1201)
    bounds = np.array([report(h).signed_bound for h in grid])
    j = int(np.searchsorted(bounds, target))
    assert 0 < j < len(grid), "target not reachable for H in [0, 12]"
    h_star = brentq(lambda h: report(h).signed_bound - target, grid[j - 1], grid[j], xtol=1e-14)
    rep = report(h_star)

    # every term from the report, recomputed by hand
    smoothing = p * budget.eps_s**2 / 3.0
    ent = math.log2(n_prime) * math.sqrt(2.0 * n_prime * math.log2(2.0 / budget.eps_ent))
    aep = math.sqrt(n_prime) * 4.0 * (d + 1) * math.sqrt(math.log2(2.0 / smoothing**2))
    corr = math.log2(p - smoothing)
    hsh = 2.0 * math.log2(math.sqrt(2.0) * budget.eps_h)
    signed = n_prime * (rep.h_hat_bits - rep.holevo_bits) - rep.leak_bits - ent - aep + corr + hsh
    assert rep.entropy_penalty_bits == pytest.approx(ent, rel=1e-12)
    assert rep.aep_penalty_bits == pytest.approx(aep, rel=1e-12)
    assert rep.ir_projection_bits == pytest.approx(corr, rel=1e-12, abs=1e-15)
    assert rep.hash_penalty_bits == pytest.approx(hsh, rel=1e-12)
    assert rep.signed_bound == pytest.approx(signed, rel=1e-12)
    detail(f"H={h_star:.7f} chi={chi:.6f} key={rep.key_length} aep={rep.aep_penalty_bits:.4g} "
           f"ent={rep.entropy_penalty_bits:.4g}")
    assert 0.0 <= h_star <= 12.0
    assert abs(rep.key_length - target) <= 1_000_000


def _digests(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())}


@pytest.mark.criterion(11, "simulate is byte-identical across reruns and serial vs parallel")
def test_c11_determinism(detail, tmp_path):
    runs = [("serial_a", []), ("serial_b", []), ("parallel", ["--workers", "4"])]
    digests = []
    for name, extra in runs:
        assert main(["simulate", "--out", str(tmp_path / name), *extra]) == 0
        digests.append(_digests(tmp_path / name))
    detail(f"{len(digests[0])} files compared across {len(runs)} runs")
    assert len(digests[0]) == 28
    assert digests[0] == digests[1] == digests[2]
