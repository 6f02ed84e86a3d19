"""Moment estimation, receiver calibration, entropy estimation and channel extraction.

Units: every variance is per quadrature and normalized to the shot noise
(vacuum quadrature variance 1). Transmitter quadratures have variance ``mu``
and the declared channel model is::

    y = tau * eta * (mu + u) + t + 1,    z = sqrt(tau * eta) * mu
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .confidence import IntervalMethod, cov_lower_bound, delta_var_gauss, var_upper_bound
from .digitization import DigitizationSpec, joint_bin_index
from .errors import NumericalError

__all__ = [
    "QuadratureDataset",
    "MomentEstimates",
    "TrustedReceiver",
    "EntropyEstimate",
    "ChannelParams",
    "ParameterEstimationError",
    "CalibrationError",
    "empirical_moments",
    "combine_moments",
    "worst_case_moments",
    "shot_noise_calibration",
    "empirical_entropy",
    "entropy_penalty",
    "bin_counts",
    "estimate_entropy",
    "channel_params",
    "snr_from_moments",
]

_CS_SLACK = 1e-9
_U_TOLERANCE = 1e-6


class ParameterEstimationError(NumericalError):
    """Moments imply an unphysical channel."""


class CalibrationError(NumericalError):
    """Calibration data too noisy for the requested confidence."""


@dataclass(frozen=True, eq=False)
class QuadratureDataset:
    """Synchronized transmitter/receiver quadrature samples (one row per complex symbol)."""

    tx_q: np.ndarray
    tx_p: np.ndarray
    rx_q: np.ndarray
    rx_p: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=np.float64) for a in (self.tx_q, self.tx_p, self.rx_q, self.rx_p)]
        for name, arr in zip(("tx_q", "tx_p", "rx_q", "rx_p"), arrays):
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            object.__setattr__(self, name, arr)
        if len({a.shape[0] for a in arrays}) != 1:
            raise ValueError("all quadrature arrays must share the same length")
        if arrays[0].shape[0] == 0:
            raise ValueError("dataset is empty")
        if not all(np.isfinite(a).all() for a in arrays):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return int(self.tx_q.shape[0])


@dataclass(frozen=True)
class MomentEstimates:
    """Per-quadrature second moments ``x_hat`` (tx), ``y_hat`` (rx), ``z_hat`` (cross)."""

    x_hat: float
    y_hat: float
    z_hat: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"moment estimates need n >= 1, got {self.n}")
        if not (self.x_hat >= 0.0 and self.y_hat >= 0.0):
            raise ValueError(f"variances must be nonnegative, got x_hat={self.x_hat}, y_hat={self.y_hat}")
        if abs(self.z_hat) > math.sqrt(self.x_hat * self.y_hat) + _CS_SLACK:
            raise ValueError("covariance violates the Cauchy-Schwarz bound")


@dataclass(frozen=True)
class TrustedReceiver:
    """Trusted receiver parameters after calibration.

    ``t`` is the worst-case (smallest credible) trusted noise; ``t_hat`` the
    point estimate. ``v_shot_minus <= v_shot_hat <= v_shot_plus``.
    """

    tau: float
    t: float
    v_shot_plus: float = 1.0
    v_shot_minus: float = 1.0
    m: int = 0
    v_shot_hat: float = 1.0
    t_hat: float | None = None
    delta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if not self.t >= 0.0:
            raise ValueError(f"trusted noise must be nonnegative, got {self.t}")
        if self.v_shot_minus > self.v_shot_plus:
            raise ValueError("v_shot_minus exceeds v_shot_plus")
        if self.t_hat is None:
            object.__setattr__(self, "t_hat", self.t)


@dataclass(frozen=True)
class EntropyEstimate:
    """Plug-in entropy of the discretized receiver data and its finite-size penalty.

    ``h_hat`` and ``penalty`` are bits per complex symbol.
    """

    h_hat: float
    penalty: float
    n_prime: int
    num_bins: int

    def __post_init__(self):
        if not 0.0 <= self.h_hat <= math.log2(self.num_bins) + 1e-12:
            raise ValueError(f"h_hat={self.h_hat} outside [0, log2(num_bins)]")
        if self.penalty < 0.0:
            raise ValueError("entropy penalty must be nonnegative")


class ChannelParams(NamedTuple):
    eta: float
    u: float


def empirical_moments(data: QuadratureDataset) -> MomentEstimates:
    """Per-quadrature moments ``x = sum(q_tx^2 + p_tx^2) / 2n`` and likewise for y, z."""
    n = data.n
    two_n = 2.0 * n
    x = (np.dot(data.tx_q, data.tx_q) + np.dot(data.tx_p, data.tx_p)) / two_n
    y = (np.dot(data.rx_q, data.rx_q) + np.dot(data.rx_p, data.rx_p)) / two_n
    z = (np.dot(data.tx_q, data.rx_q) + np.dot(data.tx_p, data.rx_p)) / two_n
    return MomentEstimates(float(x), float(y), float(z), n)


def combine_moments(parts: Iterable[MomentEstimates]) -> MomentEstimates:
    """Pool moments from disjoint blocks (weighted by block size)."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to combine")
    n = sum(p.n for p in parts)
    x = math.fsum(p.x_hat * p.n for p in parts) / n
    y = math.fsum(p.y_hat * p.n for p in parts) / n
    z = math.fsum(p.z_hat * p.n for p in parts) / n
    return MomentEstimates(x, y, z, n)


def worst_case_moments(
    moments: MomentEstimates,
    eps_pe: float,
    method: IntervalMethod | str,
    n: int | None = None,
    bound_x: bool = False,
) -> MomentEstimates:
    """Replace ``y_hat`` and ``z_hat`` by their confidence-interval worst cases.

    ``n`` overrides the sample count behind the interval widths (used to
    extrapolate desk-scale estimates to a larger block). With ``bound_x`` the
    transmitter variance is bounded from above as well. The result may sit
    outside the Cauchy-Schwarz region, so it is not re-validated.
    """
    n_eff = moments.n if n is None else n
    y = var_upper_bound(moments.y_hat, n_eff, eps_pe, method)
    z = cov_lower_bound(moments.x_hat, moments.y_hat, moments.z_hat, n_eff, eps_pe, method)
    x = var_upper_bound(moments.x_hat, n_eff, eps_pe, method) if bound_x else moments.x_hat
    wc = object.__new__(MomentEstimates)
    for name, value in (("x_hat", x), ("y_hat", y), ("z_hat", z), ("n", n_eff)):
        object.__setattr__(wc, name, value)
    return wc


def shot_noise_calibration(
    var_vac: float, var_elec: float, m: int, eps_cal: float, tau: float = 1.0
) -> TrustedReceiver:
    """Shot-noise bounds and worst-case trusted noise from vacuum/electronic variances.

    Parameters
    ----------
    var_vac, var_elec : float
        Per-quadrature variances of the vacuum (local oscillator only) and
        electronic-noise (all lasers off) records.
    m : int
        Number of complex calibration symbols in each record.
    eps_cal : float
        Calibration failure probability; each of the four one-sided bounds
        gets ``eps_cal / 4``.
    tau : float
        Trusted efficiency, carried into the returned receiver.

    Returns
    -------
    TrustedReceiver
    """
    var_vac = float(var_vac)
    var_elec = float(var_elec)
    if not var_elec >= 0.0:
        raise ValueError(f"electronic variance must be nonnegative, got {var_elec}")
    if not var_vac > var_elec:
        raise ValueError("vacuum variance must exceed electronic variance")
    delta = delta_var_gauss(m, eps_cal / 4.0)
    plus = (1.0 + delta) * var_vac - (1.0 - delta) * var_elec
    minus = (1.0 - delta) * var_vac - (1.0 + delta) * var_elec
    if minus <= 0.0:
        raise CalibrationError(
            f"lower shot-noise bound {minus:.6g} is not positive; calibration too short for eps_cal={eps_cal}"
        )
    ratio = var_elec / var_vac
    t_worst = 1.0 / (1.0 - (1.0 - delta) / (1.0 + delta) * ratio) - 1.0
    t_hat = 1.0 / (1.0 - ratio) - 1.0
    return TrustedReceiver(
        tau=tau,
        t=t_worst,
        v_shot_plus=plus,
        v_shot_minus=minus,
        m=int(m),
        v_shot_hat=var_vac - var_elec,
        t_hat=t_hat,
        delta=delta,
    )


def empirical_entropy(counts: Sequence[int] | np.ndarray) -> float:
    """Plug-in Shannon entropy in bits of a histogram."""
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 1 or (c < 0).any():
        raise ValueError("counts must be a one-dimensional array of nonnegative integers")
    total = c.sum()
    if total <= 0:
        raise ValueError("at least one count must be positive")
    f = c[c > 0] / total
    return float(max(0.0, -np.dot(f, np.log2(f))))


def entropy_penalty(n_prime: int, eps_ent: float) -> float:
    """Per-symbol entropy-estimation penalty ``log2(n') sqrt(2 log2(2/eps_ent) / n')``."""
    if n_prime < 2:
        raise ValueError(f"n_prime must be >= 2, got {n_prime}")
    if not eps_ent > 0.0:
        raise ValueError(f"eps_ent must be positive, got {eps_ent}")
    return math.log2(n_prime) * math.sqrt(2.0 * math.log2(2.0 / eps_ent) / n_prime)


def bin_counts(rx_q: np.ndarray, rx_p: np.ndarray, dig: DigitizationSpec, step: float) -> np.ndarray:
    """Joint (q, p) histogram on the digitization grid, length ``2**(2d)``."""
    idx = joint_bin_index(rx_q, rx_p, dig, step)
    return np.bincount(idx, minlength=dig.num_bins)


def estimate_entropy(
    counts: np.ndarray, dig: DigitizationSpec, eps_ent: float, n_prime: int | None = None
) -> EntropyEstimate:
    """Entropy estimate from a joint histogram; ``n_prime`` defaults to the histogram total."""
    counts = np.asarray(counts)
    if counts.shape != (dig.num_bins,):
        raise ValueError(f"expected {dig.num_bins} bins, got {counts.shape}")
    total = int(counts.sum())
    n_prime = total if n_prime is None else int(n_prime)
    return EntropyEstimate(
        h_hat=empirical_entropy(counts),
        penalty=entropy_penalty(n_prime, eps_ent),
        n_prime=n_prime,
        num_bins=dig.num_bins,
    )


def channel_params(
    moments: MomentEstimates, mu: float, receiver: TrustedReceiver
) -> ChannelParams:
    """Invert the declared channel model for ``(eta, u)``.

    ``eta = z^2 / (tau x mu)`` and ``u = (y - 1 - t - tau eta mu) / (tau eta)``,
    with ``mu`` the calibrated modulation strength.

    Raises
    ------
    ParameterEstimationError
        If ``eta`` falls outside (0, 1] or ``u`` is below ``-1e-6``.
        Slightly negative ``u`` within that tolerance is clamped to 0.
    """
    x, y, z = moments.x_hat, moments.y_hat, moments.z_hat
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    if not x > 0.0:
        raise ParameterEstimationError("transmitter variance is zero")
    if z <= 0.0:
        raise ParameterEstimationError(f"covariance {z:.6g} is not positive; no usable correlation")
    tau, t = receiver.tau, receiver.t
    if y < 1.0 + t:
        raise ParameterEstimationError(f"received variance {y:.6g} is below the noise floor 1 + t = {1.0 + t:.6g}")
    eta = z * z / (tau * x * mu)
    if not 0.0 < eta <= 1.0:
        raise ParameterEstimationError(f"implied transmittance eta={eta:.6g} outside (0, 1]")
    te = tau * eta
    u = (y - 1.0 - t - te * mu) / te
    if u < 0.0:
        if u < -_U_TOLERANCE:
            raise ParameterEstimationError(f"implied excess noise u={u:.6g} is negative")
        u = 0.0
    return ChannelParams(eta, u)


def snr_from_moments(moments: MomentEstimates) -> float:
    """Signal-to-noise ratio ``(z^2/x) / (y - z^2/x)`` seen by the receiver."""
    signal = moments.z_hat**2 / moments.x_hat
    noise = moments.y_hat - signal
    if noise <= 0.0:
        raise ParameterEstimationError("received noise variance is not positive")
    return signal / noise
