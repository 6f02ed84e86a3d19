"""Uniform d-bit quadrature grid shared by the simulator and the entropy estimator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DigitizationSpec", "grid_step", "quantize_indices", "index_to_level", "digitize", "joint_bin_index"]


@dataclass(frozen=True)
class DigitizationSpec:
    """Grid of ``2**d`` cells per quadrature spanning ``range_sigmas`` standard deviations.

    The span is centred on zero; samples outside it are clamped to the
    outermost cells.
    """

    d: int = 6
    range_sigmas: float = 7.0

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d or not 2 <= self.d <= 16:
            raise ValueError(f"d must be an integer in [2, 16], got {self.d}")
        if not self.range_sigmas > 0.0:
            raise ValueError(f"range_sigmas must be positive, got {self.range_sigmas}")

    @property
    def levels(self) -> int:
        return 1 << int(self.d)

    @property
    def num_bins(self) -> int:
        """Number of joint (q, p) cells."""
        return 1 << (2 * int(self.d))


def grid_step(dig: DigitizationSpec, sigma: float) -> float:
    """Cell width for a quadrature of standard deviation ``sigma``."""
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return dig.range_sigmas * sigma / dig.levels


def quantize_indices(values: np.ndarray, dig: DigitizationSpec, step: float) -> np.ndarray:
    """Signed cell indices in ``[-2**(d-1), 2**(d-1) - 1]``."""
    half = dig.levels // 2
    idx = np.floor(np.asarray(values, dtype=np.float64) / step)
    np.clip(idx, -half, half - 1, out=idx)
    return idx.astype(np.int64)


def index_to_level(idx: np.ndarray, step: float) -> np.ndarray:
    """Cell midpoints."""
    return (np.asarray(idx, dtype=np.float64) + 0.5) * step


def digitize(values: np.ndarray, dig: DigitizationSpec, step: float, out: np.ndarray | None = None) -> np.ndarray:
    """Replace every sample by the midpoint of its (clamped) cell.

    ``out`` may alias ``values`` for in-place operation.
    """
    half = dig.levels // 2
    out = np.divide(values, step, out=out, dtype=np.float64)
    np.floor(out, out=out)
    np.clip(out, -half, half - 1, out=out)
    out += 0.5
    out *= step
    return out


def joint_bin_index(q: np.ndarray, p: np.ndarray, dig: DigitizationSpec, step: float) -> np.ndarray:
    """Flattened (q, p) cell number in ``[0, 2**(2d))``."""
    half = dig.levels // 2
    iq = quantize_indices(q, dig, step) + half
    ip = quantize_indices(p, dig, step) + half
    return iq * dig.levels + ip
