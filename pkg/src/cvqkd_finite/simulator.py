"""Synthetic Gaussian-modulated coherent-state data.

Randomness comes from a Philox4x64 counter-based generator keyed by
``(seed, block_index)``. Symbol ``s`` of a block always consumes the four
64-bit words at counter ``s``, so any chunking or thread layout produces the
same bits. Uniform words are mapped to normals by inverse-cdf sampling.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import ndtri

from .digitization import DigitizationSpec, digitize, grid_step
from .estimation import QuadratureDataset

__all__ = [
    "ChannelModel",
    "SeededStream",
    "SplitTrialStats",
    "normals",
    "expected_moments",
    "rx_sigma",
    "generate_symbols",
    "generate_blocks",
    "generate_calibration",
    "calibration_electronic_variance",
    "orthogonal_split_trial",
]

_WORDS_PER_SYMBOL = 4
_CHUNK = 1 << 18
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ChannelModel:
    """Channel and receiver parameters (mean-photon-number units).

    ``noise_reference`` selects where ``u`` enters: ``"input"`` (scaled by
    ``tau * eta`` at the receiver, the model assumed by the estimator) or
    ``"output"`` (added unscaled, for sensitivity studies).
    """

    eta: float = 0.35
    u: float = 6.3e-3
    tau: float = 0.69
    t: float = 25.71e-3
    mu: float = 1.45
    noise_reference: str = "input"

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if not self.u >= 0.0:
            raise ValueError(f"u must be nonnegative, got {self.u}")
        if not self.t >= 0.0:
            raise ValueError(f"t must be nonnegative, got {self.t}")
        if not self.mu > 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.noise_reference not in ("input", "output"):
            raise ValueError(f"noise_reference must be 'input' or 'output', got {self.noise_reference!r}")

    @property
    def gain(self) -> float:
        """Amplitude transmission ``sqrt(tau * eta)``."""
        return math.sqrt(self.tau * self.eta)

    @property
    def noise_variance(self) -> float:
        """Per-quadrature receiver noise variance (shot noise included)."""
        if self.noise_reference == "input":
            return 1.0 + self.tau * self.eta * self.u + self.t
        return 1.0 + self.u + self.t


@dataclass(frozen=True)
class SeededStream:
    seed: int
    block_index: int = 0

    def __post_init__(self):
        if isinstance(self.seed, bool) or int(self.seed) != self.seed:
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if isinstance(self.block_index, bool) or int(self.block_index) != self.block_index or self.block_index < 0:
            raise ValueError(f"block_index must be a nonnegative integer, got {self.block_index!r}")

    def key(self) -> list[int]:
        return [int(self.seed) & _MASK64, int(self.block_index) & _MASK64]


def normals(stream: SeededStream, count: int, start: int = 0) -> np.ndarray:
    """Standard normals for ``count`` consecutive symbols starting at symbol ``start``.

    Returns an array of shape ``(count, 4)``.
    """
    gen = np.random.Philox(key=stream.key())
    if start:
        gen.advance(start)
    raw = gen.random_raw(count * _WORDS_PER_SYMBOL)
    raw >>= np.uint64(11)
    u = raw.astype(np.float64)
    u += 0.5
    u *= 2.0**-53
    return ndtri(u, out=u).reshape(count, _WORDS_PER_SYMBOL)


def expected_moments(model: ChannelModel) -> tuple[float, float, float]:
    """Model expectations ``(x, y, z)`` for undigitized data."""
    g = model.gain
    return model.mu, g * g * model.mu + model.noise_variance, g * model.mu


def rx_sigma(model: ChannelModel) -> float:
    """Standard deviation used to lay out the receiver grid."""
    return math.sqrt(expected_moments(model)[1])


def _fill(out: np.ndarray, model: ChannelModel, dig: DigitizationSpec, stream: SeededStream,
          start: int, stop: int, digitize_tx: bool, digitize_rx: bool) -> None:
    tx_step = grid_step(dig, math.sqrt(model.mu))
    rx_step = grid_step(dig, rx_sigma(model))
    sd_tx = math.sqrt(model.mu)
    sd_noise = math.sqrt(model.noise_variance)
    g = model.gain
    for lo in range(start, stop, _CHUNK):
        hi = min(lo + _CHUNK, stop)
        z = normals(stream, hi - lo, lo)
        tx = out[0:2, lo:hi]
        rx = out[2:4, lo:hi]
        for j in range(2):
            np.multiply(z[:, j], sd_tx, out=tx[j])
            if digitize_tx:
                digitize(tx[j], dig, tx_step, out=tx[j])
            np.multiply(z[:, 2 + j], sd_noise, out=rx[j])
            rx[j] += g * tx[j]
            if digitize_rx:
                digitize(rx[j], dig, rx_step, out=rx[j])


def generate_symbols(
    n: int,
    model: ChannelModel,
    dig: DigitizationSpec,
    stream: SeededStream,
    digitize_tx: bool = True,
    digitize_rx: bool = True,
    workers: int = 1,
) -> QuadratureDataset:
    """Simulate one block of ``n`` symbols.

    Transmitter quadratures are N(0, mu) (optionally snapped to the d-bit
    grid over ``range_sigmas`` standard deviations). The receiver sees
    ``sqrt(tau eta) tx`` plus Gaussian noise of variance
    ``1 + tau eta u + t`` and is digitized on its own grid.

    ``workers > 1`` splits the block across threads; the output is
    bit-identical to the serial result.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    out = np.empty((4, n), dtype=np.float64)
    workers = max(1, int(workers))
    if workers == 1 or n <= _CHUNK:
        _fill(out, model, dig, stream, 0, n, digitize_tx, digitize_rx)
    else:
        per = -(-n // workers)
        per = -(-per // _CHUNK) * _CHUNK
        bounds = [(lo, min(lo + per, n)) for lo in range(0, n, per)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: _fill(out, model, dig, stream, b[0], b[1], digitize_tx, digitize_rx), bounds))
    return QuadratureDataset(out[0], out[1], out[2], out[3])


def generate_blocks(
    n_total: int,
    blocks: int,
    model: ChannelModel,
    dig: DigitizationSpec,
    seed: int,
    digitize_tx: bool = True,
    digitize_rx: bool = True,
    workers: int = 1,
) -> Iterator[QuadratureDataset]:
    """Yield ``blocks`` equal blocks; block ``k`` uses stream ``(seed, k)``."""
    if blocks < 1 or n_total % blocks:
        raise ValueError(f"n_total={n_total} is not divisible into {blocks} blocks")
    per = n_total // blocks
    for k in range(blocks):
        yield generate_symbols(per, model, dig, SeededStream(seed, k), digitize_tx, digitize_rx, workers)


def calibration_electronic_variance(t_true: float) -> float:
    """Electronic-noise variance making the trusted-noise point estimate equal ``t_true``.

    With unit shot noise the vacuum record has variance ``1 + v_elec`` and
    ``1 / (1 - v_elec / (1 + v_elec)) - 1 = v_elec``.
    """
    if not t_true >= 0.0:
        raise ValueError(f"t_true must be nonnegative, got {t_true}")
    return float(t_true)


def generate_calibration(m: int, t_true: float, stream: SeededStream) -> tuple[np.ndarray, np.ndarray]:
    """Vacuum and electronic-noise calibration records, each of shape ``(m, 2)``."""
    if isinstance(m, bool) or int(m) != m or m < 1000:
        raise ValueError(f"calibration needs m >= 1000 symbols, got {m}")
    m = int(m)
    v_elec = calibration_electronic_variance(t_true)
    vac = np.empty((m, 2))
    elec = np.empty((m, 2))
    sd_vac = math.sqrt(1.0 + v_elec)
    sd_elec = math.sqrt(v_elec)
    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        z = normals(stream, hi - lo, lo)
        vac[lo:hi] = sd_vac * z[:, 0:2]
        elec[lo:hi] = sd_elec * z[:, 2:4]
    return vac, elec


@dataclass(frozen=True, eq=False)
class SplitTrialStats:
    """Per-trial statistics of two independent 2n-dimensional standard normal vectors.

    ``X1`` denotes the first n coordinates of ``X``, ``X2`` the rest.
    """

    x1_sq: np.ndarray
    x_sq: np.ndarray
    y_sq: np.ndarray
    xy1: np.ndarray
    xy2: np.ndarray

    @property
    def norm_sum(self) -> np.ndarray:
        return self.x_sq + self.y_sq


def orthogonal_split_trial(n: int, stream: SeededStream, trials: int = 1) -> SplitTrialStats:
    """Draw ``trials`` independent pairs (X, Y), each of 2n standard normals, and summarize them."""
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    # one symbol = 4 normals; a trial needs 4n normals (X and Y of length 2n)
    rows_per_chunk = max(1, _CHUNK // n)
    parts = []
    for lo in range(0, trials, rows_per_chunk):
        hi = min(lo + rows_per_chunk, trials)
        z = normals(stream, (hi - lo) * n, lo * n).reshape(hi - lo, 4 * n)
        x = z[:, : 2 * n]
        y = z[:, 2 * n:]
        x1, x2 = x[:, :n], x[:, n:]
        y1, y2 = y[:, :n], y[:, n:]
        x1_sq = np.einsum("ij,ij->i", x1, x1)
        parts.append((
            x1_sq,
            x1_sq + np.einsum("ij,ij->i", x2, x2),
            np.einsum("ij,ij->i", y, y),
            np.einsum("ij,ij->i", x1, y1),
            np.einsum("ij,ij->i", x2, y2),
        ))
    cols = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    return SplitTrialStats(*cols)
