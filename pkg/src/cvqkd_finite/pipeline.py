"""End-to-end orchestration: simulate, calibrate, estimate, key length, sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RunConfig
from .confidence import IntervalMethod, delta_cov_beta, delta_cov_gauss, delta_var_beta, delta_var_gauss
from .datasets import (
    FLAG_RX_DIGITIZED,
    FLAG_TX_DIGITIZED,
    read_calibration,
    read_manifest,
    read_symbols,
    write_calibration,
    write_manifest,
    write_symbols,
)
from .digitization import grid_step
from .errors import DataFormatError, NumericalError
from .estimation import (
    MomentEstimates,
    TrustedReceiver,
    bin_counts,
    channel_params,
    combine_moments,
    empirical_entropy,
    empirical_moments,
    entropy_penalty,
    EntropyEstimate,
    shot_noise_calibration,
    snr_from_moments,
    worst_case_moments,
)
from .security import IrOutcome, KeyLengthReport, holevo_bound, key_length, leak_from_efficiency, total_epsilon
from .simulator import SeededStream, generate_calibration, generate_symbols, rx_sigma

__all__ = [
    "BlockSummary",
    "CALIBRATION_STREAM",
    "block_file_name",
    "simulate_run",
    "summarize_block",
    "summarize_run",
    "receiver_from_config",
    "calibrate_run",
    "evaluate_key",
    "key_bound_at_u",
    "threshold_u",
    "zero_crossing_n",
    "sweep_rows",
    "interval_rows",
    "SWEEP_COLUMNS",
    "INTERVAL_COLUMNS",
]

# Stream index reserved for calibration records, far above any data block.
CALIBRATION_STREAM = 1 << 40

SWEEP_COLUMNS = (
    "k", "N", "time_s", "skf_worst", "skf_average", "bound_worst", "bound_average",
    "eta_worst", "u_worst", "threshold",
)
INTERVAL_COLUMNS = ("n", "delta_var_beta", "delta_cov_beta", "delta_var_gauss", "delta_cov_gauss")


@dataclass(frozen=True, eq=False)
class BlockSummary:
    """Sufficient statistics of one data block."""

    index: int
    moments: MomentEstimates
    counts: np.ndarray


def block_file_name(k: int) -> str:
    return f"block_{k:03d}.bin"


def _manifest_config(cfg: RunConfig) -> dict:
    # execution-only settings stay out so serial and parallel runs agree byte for byte
    d = cfg.to_dict()
    d.pop("run.workers", None)
    d.pop("run.output_path", None)
    return d


def simulate_run(cfg: RunConfig, out_dir: str | Path, workers: int | None = None) -> dict:
    """Write all data blocks, the calibration records and the manifest to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, dig = cfg.channel, cfg.dig
    seed, blocks, per = cfg["run.seed"], cfg["run.blocks"], cfg.block_size
    dtx, drx = cfg["dig.digitize_tx"], cfg["dig.digitize_rx"]
    flags = (FLAG_TX_DIGITIZED if dtx else 0) | (FLAG_RX_DIGITIZED if drx else 0)
    workers = cfg["run.workers"] if workers is None else max(1, int(workers))

    def one(k: int) -> dict:
        data = generate_symbols(per, model, dig, SeededStream(seed, k), dtx, drx)
        write_symbols(out / block_file_name(k), data, flags)
        return {"index": k, "file": block_file_name(k), "symbols": per, "stream": [seed, k]}

    if workers == 1:
        entries = [one(k) for k in range(blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(one, range(blocks)))

    manifest = {
        "format": "cvqkd-symbols",
        "format_version": 1,
        "seed": seed,
        "model": {"mu": model.mu, "eta": model.eta, "u": model.u, "tau": model.tau, "t": model.t,
                  "noise_reference": model.noise_reference},
        "digitization": {"d": dig.d, "range_sigmas": dig.range_sigmas, "digitize_tx": dtx, "digitize_rx": drx},
        "tx_step": grid_step(dig, math.sqrt(model.mu)),
        "rx_step": grid_step(dig, rx_sigma(model)),
        "n_total": cfg["run.n_total"],
        "blocks": entries,
        "config": _manifest_config(cfg),
    }
    if cfg["calibration.enabled"]:
        vac, elec = generate_calibration(cfg["calibration.m"], model.t, SeededStream(seed, CALIBRATION_STREAM))
        write_calibration(out / "calibration_vacuum.bin", vac[:, 0], vac[:, 1], electronic=False)
        write_calibration(out / "calibration_electronic.bin", elec[:, 0], elec[:, 1], electronic=True)
        manifest["calibration"] = {
            "m": cfg["calibration.m"],
            "vacuum": "calibration_vacuum.bin",
            "electronic": "calibration_electronic.bin",
            "stream": [seed, CALIBRATION_STREAM],
        }
    write_manifest(out, manifest)
    return manifest


def summarize_block(data, cfg: RunConfig, rx_step: float, index: int = 0) -> BlockSummary:
    return BlockSummary(index, empirical_moments(data), bin_counts(data.rx_q, data.rx_p, cfg.dig, rx_step))


def summarize_run(cfg: RunConfig, data_dir: str | Path, max_blocks: int | None = None) -> list[BlockSummary]:
    """Read the blocks listed in the manifest and reduce each to moments and a histogram."""
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir)
    try:
        rx_step = float(manifest["rx_step"])
        entries = sorted(manifest["blocks"], key=lambda e: int(e["index"]))
        d_file = int(manifest["digitization"]["d"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{data_dir}: malformed manifest ({exc})") from None
    if d_file != cfg.dig.d:
        raise DataFormatError(f"{data_dir}: data digitized with d={d_file}, config has d={cfg.dig.d}")
    if max_blocks is not None:
        entries = entries[:max_blocks]
    out = []
    for e in entries:
        data, _ = read_symbols(data_dir / e["file"])
        out.append(summarize_block(data, cfg, rx_step, int(e["index"])))
    if not out:
        raise DataFormatError(f"{data_dir}: manifest lists no blocks")
    return out


def receiver_from_config(cfg: RunConfig) -> TrustedReceiver:
    """Receiver with the configured trusted noise taken at face value (no calibration data)."""
    return TrustedReceiver(tau=cfg["channel.tau"], t=cfg["channel.t"])


def calibrate_from_records(cfg: RunConfig, vac: np.ndarray, elec: np.ndarray) -> TrustedReceiver:
    """Shot-noise calibration from ``(m, 2)`` vacuum and electronic records."""
    m = vac.shape[0]
    var_vac = float(np.einsum("ij,ij->", vac, vac)) / (2.0 * m)
    var_elec = float(np.einsum("ij,ij->", elec, elec)) / (2.0 * elec.shape[0])
    m_interval = cfg["calibration.m_declared"] or m
    return shot_noise_calibration(var_vac, var_elec, m_interval, cfg["budget.eps_cal"], tau=cfg["channel.tau"])


def calibrate_run(cfg: RunConfig, data_dir: str | Path) -> TrustedReceiver:
    """Receiver from the calibration files of a run, or from the config if calibration is off."""
    if not cfg["calibration.enabled"]:
        return receiver_from_config(cfg)
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir)
    cal = manifest.get("calibration")
    if not cal:
        raise DataFormatError(f"{data_dir}: manifest has no calibration records")
    q_v, p_v, elec_flag_v = read_calibration(data_dir / cal["vacuum"])
    q_e, p_e, elec_flag_e = read_calibration(data_dir / cal["electronic"])
    if elec_flag_v or not elec_flag_e:
        raise DataFormatError(f"{data_dir}: calibration files have swapped vacuum/electronic flags")
    return calibrate_from_records(cfg, np.column_stack([q_v, p_v]), np.column_stack([q_e, p_e]))


@dataclass(frozen=True)
class _KeyContext:
    n_nominal: int
    n_prime: int
    h_hat: float
    leak: float
    mu: float


def _context(cfg: RunConfig, moments: MomentEstimates, counts: np.ndarray, n_nominal: int) -> _KeyContext:
    n_prime = int(math.floor(n_nominal * cfg.p_success))
    h_hat = empirical_entropy(counts)
    if cfg["ir.leak_bits"] is None:
        snr = cfg["ir.snr"] if cfg["ir.snr"] is not None else snr_from_moments(moments)
        leak = leak_from_efficiency(n_prime, h_hat, cfg["ir.beta"], snr)
    else:
        leak = cfg["ir.leak_bits"]
    return _KeyContext(n_nominal, n_prime, h_hat, leak, moments.x_hat)


def _assemble(cfg: RunConfig, ctx: _KeyContext, chi: float, params: dict) -> KeyLengthReport:
    entropy = EntropyEstimate(ctx.h_hat, entropy_penalty(ctx.n_prime, cfg["budget.eps_ent"]), ctx.n_prime,
                              cfg.dig.num_bins)
    ir = IrOutcome(cfg.p_success, ctx.n_prime, ctx.leak, cfg["ir.beta"], ctx.n_nominal)
    return key_length(ir, entropy, chi, cfg.budget, cfg.dig.d, worst_case_params=params)


def _estimated_channel(cfg: RunConfig, moments: MomentEstimates, receiver: TrustedReceiver, n_nominal: int,
                       worst_case: bool):
    if worst_case:
        used = worst_case_moments(moments, cfg["budget.eps_pe"], cfg.method, n=n_nominal,
                                  bound_x=cfg["pipeline.bound_x"])
    else:
        used = moments
    mu = used.x_hat
    eta, u = channel_params(used, mu, receiver)
    params = {"eta": eta, "u": u, "t": receiver.t, "tau": receiver.tau, "mu": mu,
              "x": used.x_hat, "y": used.y_hat, "z": used.z_hat}
    return mu, eta, u, params


def evaluate_key(
    cfg: RunConfig,
    moments: MomentEstimates,
    counts: np.ndarray,
    receiver: TrustedReceiver,
    n_nominal: int | None = None,
    worst_case: bool = True,
) -> KeyLengthReport:
    """Key length for data summarized by ``moments`` and ``counts``.

    ``n_nominal`` is the symbol count the protocol is credited with; it
    drives the interval widths and ``n' = floor(n_nominal (1 - FER))``.
    It defaults to the number of symbols behind ``moments``. Per-symbol
    quantities (entropy, SNR, channel parameters) come from the data.
    """
    n_nominal = moments.n if not n_nominal else int(n_nominal)
    ctx = _context(cfg, moments, counts, n_nominal)
    mu, eta, u, params = _estimated_channel(cfg, moments, receiver, n_nominal, worst_case)
    chi = cfg["pipeline.chi_override"]
    if chi is None:
        chi = holevo_bound(mu, eta, u, receiver)
    return _assemble(cfg, ctx, chi, params)


def key_bound_at_u(cfg: RunConfig, moments: MomentEstimates, counts: np.ndarray, receiver: TrustedReceiver,
                   n_nominal: int, u: float) -> float:
    """Signed worst-case bound when the excess noise is replaced by ``u``."""
    ctx = _context(cfg, moments, counts, n_nominal)
    mu, eta, _, params = _estimated_channel(cfg, moments, receiver, n_nominal, True)
    return _assemble(cfg, ctx, holevo_bound(mu, eta, u, receiver), params).signed_bound


def threshold_u(cfg: RunConfig, moments: MomentEstimates, counts: np.ndarray, receiver: TrustedReceiver,
                n_nominal: int, tol: float = 1e-7) -> float:
    """Largest excess noise with a nonnegative worst-case bound at ``n_nominal`` (NaN if none)."""
    ctx = _context(cfg, moments, counts, n_nominal)
    mu, eta, _, params = _estimated_channel(cfg, moments, receiver, n_nominal, True)

    def f(u: float) -> float:
        return _assemble(cfg, ctx, holevo_bound(mu, eta, u, receiver), params).signed_bound

    if f(0.0) < 0.0:
        return math.nan
    hi = 0.01
    while f(hi) >= 0.0:
        hi *= 2.0
        if hi > 1e3:
            return math.inf
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def zero_crossing_n(cfg: RunConfig, moments: MomentEstimates, counts: np.ndarray, receiver: TrustedReceiver,
                    n_lo: float = 1e5, n_hi: float = 1e12, rel_tol: float = 1e-4) -> float:
    """Nominal N at which the worst-case signed bound changes sign (log-space bisection)."""

    def f(n: float) -> float:
        return evaluate_key(cfg, moments, counts, receiver, int(round(n))).signed_bound

    if f(n_lo) >= 0.0:
        return n_lo
    if f(n_hi) < 0.0:
        return math.inf
    lo, hi = math.log(n_lo), math.log(n_hi)
    while hi - lo > rel_tol:
        mid = 0.5 * (lo + hi)
        if f(math.exp(mid)) >= 0.0:
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


def _try_key(cfg, moments, counts, receiver, n_nom, worst_case):
    # an unphysical estimate at small k blanks that trace instead of aborting the sweep
    try:
        return evaluate_key(cfg, moments, counts, receiver, n_nom, worst_case=worst_case)
    except NumericalError:
        return None


def sweep_rows(cfg: RunConfig, summaries: Sequence[BlockSummary], receiver: TrustedReceiver,
               k_values: Sequence[int] | None = None) -> list[dict]:
    """One row per cumulative block count ``k``.

    Moments and histograms pool the first ``k`` blocks; the credited symbol
    count is ``k * sweep.block_symbols`` (or the real block size when that
    setting is 0). Columns of a trace whose channel estimate is unphysical
    are NaN.
    """
    k_values = list(k_values) if k_values is not None else list(range(1, len(summaries) + 1))
    if k_values != sorted(k_values) or not k_values or k_values[0] < 1 or k_values[-1] > len(summaries):
        raise ValueError("k_values must be ascending and within the number of blocks")
    per_block = cfg["sweep.block_symbols"] or summaries[0].moments.n
    rows = []
    for k in k_values:
        part = summaries[:k]
        moments = combine_moments(s.moments for s in part)
        counts = np.sum([s.counts for s in part], axis=0)
        n_nom = k * per_block
        worst = _try_key(cfg, moments, counts, receiver, n_nom, True)
        avg = _try_key(cfg, moments, counts, receiver, n_nom, False)
        nan = math.nan
        rows.append({
            "k": k,
            "N": n_nom,
            "time_s": n_nom / cfg["channel.symbol_rate"],
            "skf_worst": worst.skf if worst else nan,
            "skf_average": avg.skf if avg else nan,
            "bound_worst": worst.signed_bound if worst else nan,
            "bound_average": avg.signed_bound if avg else nan,
            "eta_worst": worst.worst_case_params["eta"] if worst else nan,
            "u_worst": worst.worst_case_params["u"] if worst else nan,
            "threshold": threshold_u(cfg, moments, counts, receiver, n_nom) if worst else nan,
        })
    return rows


def interval_rows(n_values: Sequence[int], eps: float) -> list[dict]:
    """Half-widths of both interval families at each ``n``."""
    rows = []
    for n in n_values:
        n = int(n)
        rows.append({
            "n": n,
            "delta_var_beta": delta_var_beta(n, eps),
            "delta_cov_beta": delta_cov_beta(n, eps),
            "delta_var_gauss": delta_var_gauss(n, eps),
            "delta_cov_gauss": delta_cov_gauss(n, eps),
        })
    return rows


def log_grid(n_min: float, n_max: float, rows: int) -> list[int]:
    """``rows`` log-spaced integers from ``n_min`` to ``n_max`` (duplicates removed)."""
    if rows == 1:
        return [int(round(n_min))]
    grid = np.unique(np.rint(np.geomspace(n_min, n_max, rows)).astype(np.int64))
    return [int(v) for v in grid]


def run_summary(cfg: RunConfig, moments: MomentEstimates, receiver: TrustedReceiver, counts: np.ndarray) -> dict:
    """Point and worst-case channel estimates for reporting."""
    eta, u = channel_params(moments, moments.x_hat, receiver)
    n_nom = cfg["pipeline.n_nominal"] or moments.n
    _, eta_w, u_w, params = _estimated_channel(cfg, moments, receiver, n_nom, True)
    return {
        "moments": {"x_hat": moments.x_hat, "y_hat": moments.y_hat, "z_hat": moments.z_hat, "n": moments.n},
        "point": {"eta": eta, "u": u, "snr": snr_from_moments(moments)},
        "worst_case": params,
        "n_nominal": n_nom,
        "entropy_bits": empirical_entropy(counts),
        "receiver": {"tau": receiver.tau, "t": receiver.t, "t_hat": receiver.t_hat,
                     "v_shot_hat": receiver.v_shot_hat, "v_shot_plus": receiver.v_shot_plus,
                     "v_shot_minus": receiver.v_shot_minus, "m": receiver.m, "delta": receiver.delta},
        "total_epsilon": total_epsilon(cfg.budget),
        "interval_method": cfg.method.value if isinstance(cfg.method, IntervalMethod) else str(cfg.method),
    }
