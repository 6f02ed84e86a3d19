"""Composable key-length accounting.

The finite-size key length (bits) is::

    l = n' (H - chi) - leak - log2(n') sqrt(2 n' log2(2/eps_ent))
        - sqrt(n') Delta_AEP(p eps_s^2 / 3, d)
        + log2(p - p eps_s^2 / 3) + 2 log2(sqrt(2) eps_h)

with ``p`` the reconciliation success probability, ``n' = p n`` and ``chi``
the Holevo bound per symbol. Every logarithm is base 2.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import NumericalError

__all__ = [
    "SecurityBudget",
    "IrOutcome",
    "KeyLengthReport",
    "PhysicalityError",
    "total_epsilon",
    "aep_penalty",
    "aep_penalty_exact",
    "ir_projection_terms",
    "g_function",
    "symplectic_eigenvalues",
    "holevo_bound",
    "holevo_untrusted",
    "mutual_information",
    "leak_from_efficiency",
    "key_length",
]

_NU_CLAMP = 1e-9
_PHYS_TOL = 1e-6
_CHI_CLAMP = 1e-9


class PhysicalityError(NumericalError):
    """A covariance matrix violates the uncertainty principle."""


@dataclass(frozen=True)
class SecurityBudget:
    """Failure probabilities of the protocol stages; they add up to the total security parameter."""

    eps_h: float = 1e-10
    eps_s: float = 1e-10
    eps_ent: float = 1e-10
    eps_pe: float = 1e-10
    eps_cal: float = 1e-10
    eps_ir: float = 1e-12
    eps_qrng: float = 2e-6

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{f.name} must lie in [0, 1), got {v}")
        tot = total_epsilon(self)
        if not 0.0 < tot < 1.0:
            raise ValueError(f"total security parameter must lie in (0, 1), got {tot}")


def total_epsilon(budget: SecurityBudget) -> float:
    """Sum of all seven failure probabilities."""
    return math.fsum(getattr(budget, f.name) for f in fields(budget))


@dataclass(frozen=True)
class IrOutcome:
    """Result of information reconciliation.

    ``p_success`` is ``1 - FER``; ``n_prime`` the symbols kept for privacy
    amplification; ``beta`` is informational only.
    """

    p_success: float
    n_prime: int
    leak_bits: float
    beta: float | None = None
    n: int | None = None

    def __post_init__(self):
        if not 0.0 < self.p_success <= 1.0:
            raise ValueError(f"p_success must lie in (0, 1], got {self.p_success}")
        if self.n_prime < 2:
            raise ValueError(f"n_prime must be >= 2, got {self.n_prime}")
        if self.n is not None and self.n_prime > self.n:
            raise ValueError("n_prime cannot exceed n")
        if not self.leak_bits >= 0.0:
            raise ValueError(f"leak_bits must be nonnegative, got {self.leak_bits}")
        if self.beta is not None and not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")


@dataclass(frozen=True)
class KeyLengthReport:
    """Itemized key-length computation.

    Sign convention: ``leak_bits``, ``aep_penalty_bits`` and
    ``entropy_penalty_bits`` are subtracted; ``ir_projection_bits`` and
    ``hash_penalty_bits`` are added as they stand (both are negative).
    ``h_hat_bits`` and ``holevo_bits`` are per symbol, the rest are totals.
    """

    n_prime: int
    h_hat_bits: float
    holevo_bits: float
    leak_bits: float
    aep_penalty_bits: float
    entropy_penalty_bits: float
    ir_projection_bits: float
    hash_penalty_bits: float
    signed_bound: float
    key_length: int
    skf: float
    worst_case_params: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def aep_penalty(delta: float, d: int) -> float:
    """Closed-form AEP correction ``4 (d + 1) sqrt(log2(2 / delta^2))``."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if isinstance(d, bool) or int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d}")
    return 4.0 * (d + 1) * math.sqrt(math.log2(2.0) - 2.0 * math.log2(delta))


def aep_penalty_exact(delta: float, d: int) -> float:
    """``4 sqrt(l(delta)) log2(v)`` with ``l = -log2(1 - sqrt(1 - delta^2))`` and ``v = 2^d + 2``.

    ``v`` is the largest value allowed for ``2^(H_max/2) + 1`` once the
    min-entropy of the classical-quantum state is nonnegative.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if isinstance(d, bool) or int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d}")
    # 1 - sqrt(1 - delta^2) without cancellation
    gap = delta * delta / (1.0 + math.sqrt(1.0 - delta * delta))
    ell = -math.log2(gap)
    v = 2.0**d + 2.0
    return 4.0 * math.sqrt(ell) * math.log2(v)


def ir_projection_terms(p_success: float, eps_s: float) -> tuple[float, float]:
    """Smoothing parameter ``p eps_s^2 / 3`` and the correction ``log2(p - p eps_s^2 / 3)``."""
    if not 0.0 < p_success <= 1.0:
        raise ValueError(f"p_success must lie in (0, 1], got {p_success}")
    if not 0.0 < eps_s < 1.0:
        raise ValueError(f"eps_s must lie in (0, 1), got {eps_s}")
    smoothing = p_success / 3.0 * eps_s * eps_s
    return smoothing, math.log2(p_success) + math.log1p(-eps_s * eps_s / 3.0) / math.log(2.0)


def g_function(nu: float) -> float:
    """Von Neumann entropy (bits) of a thermal mode with symplectic eigenvalue ``nu``."""
    nu = float(nu)
    if nu < 1.0 - _NU_CLAMP or math.isnan(nu):
        raise ValueError(f"symplectic eigenvalue must be >= 1, got {nu}")
    if nu <= 1.0:
        return 0.0
    hp = 0.5 * (nu + 1.0)
    hm = 0.5 * (nu - 1.0)
    return hp * math.log2(hp) - hm * math.log2(hm)


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum (ascending) of a real covariance matrix in (q1, p1, q2, p2, ...) order."""
    cov = np.asarray(cov, dtype=np.float64)
    dim = cov.shape[0]
    if cov.shape != (dim, dim) or dim % 2:
        raise ValueError("covariance matrix must be square with even dimension")
    omega = np.kron(np.eye(dim // 2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    ev = np.abs(np.linalg.eigvals(1j * omega @ cov))
    ev.sort()
    return ev[::2].copy()


def _check_physical(nus: np.ndarray, what: str) -> None:
    if nus.min() < 1.0 - _PHYS_TOL:
        raise PhysicalityError(f"{what}: symplectic eigenvalue {nus.min():.9g} < 1")


def _entropy(cov: np.ndarray, what: str) -> float:
    nus = symplectic_eigenvalues(cov)
    _check_physical(nus, what)
    return math.fsum(g_function(max(nu, 1.0)) for nu in nus)


def _check_channel(mu: float, eta: float, u: float) -> None:
    if not mu >= 0.0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if not u >= 0.0:
        raise ValueError(f"u must be nonnegative, got {u}")


def _ab_block(mu: float, eta: float, u: float) -> tuple[float, float, float]:
    a = 2.0 * mu + 1.0
    b = 2.0 * eta * mu + 1.0 + 2.0 * eta * u
    c = math.sqrt(eta) * math.sqrt(2.0 * mu * (2.0 * mu + 2.0))  # sqrt(eta (a^2 - 1))
    return a, b, c


def holevo_bound(mu: float, eta: float, u: float, receiver) -> float:
    """Holevo bound on Eve's information about the heterodyne outcome (bits per symbol).

    Entangling-cloner picture in shot-noise units: Alice's EPR mode A with
    variance ``a = 2 mu + 1`` is correlated with Bob's input B through the
    untrusted channel ``(eta, u)``. The trusted receiver mixes B on a
    beamsplitter of transmissivity ``tau`` with one arm F0 of a two-mode
    squeezed state (F0, G) of variance ``1 + 2 t / (1 - tau)``; its output
    B' is heterodyned. Then ``chi = S(AB) - S(A F G | y)``.

    Parameters
    ----------
    mu : float
        Modulation strength (mean photon number at the channel input).
    eta, u : float
        Untrusted transmittance and channel-input-referred excess noise.
    receiver : object with ``tau`` and ``t`` attributes
        Trusted efficiency and trusted noise (mean photon number).
    """
    tau = float(receiver.tau)
    t = float(receiver.t)
    _check_channel(mu, eta, u)
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if not t >= 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0.0:
        v_d = 1.0
    elif tau == 1.0:
        raise ValueError("trusted noise t > 0 requires tau < 1 in the beamsplitter detector model")
    else:
        v_d = 1.0 + 2.0 * t / (1.0 - tau)
    a, b, c = _ab_block(mu, eta, u)
    eye = np.eye(2)
    z = np.diag([1.0, -1.0])

    cov_ab = np.block([[a * eye, c * z], [c * z, b * eye]])
    s_e = _entropy(cov_ab, "state AB")

    s_d = math.sqrt(max(v_d * v_d - 1.0, 0.0))
    zero = np.zeros((2, 2))
    # modes A, B, F0, G
    cov = np.block(
        [
            [a * eye, c * z, zero, zero],
            [c * z, b * eye, zero, zero],
            [zero, zero, v_d * eye, s_d * z],
            [zero, zero, s_d * z, v_d * eye],
        ]
    )
    st, sr = math.sqrt(tau), math.sqrt(1.0 - tau)
    bs = np.eye(8)
    bs[2:6, 2:6] = np.block([[st * eye, sr * eye], [-sr * eye, st * eye]])
    cov = bs @ cov @ bs.T  # modes A, B', F, G
    keep = [0, 1, 4, 5, 6, 7]
    v_rest = cov[np.ix_(keep, keep)]
    v_b = cov[2:4, 2:4]
    c_rb = cov[np.ix_(keep, [2, 3])]
    cond = v_rest - c_rb @ np.linalg.solve(v_b + eye, c_rb.T)
    s_e_given_y = _entropy(0.5 * (cond + cond.T), "state A F G given y")
    chi = s_e - s_e_given_y
    if chi < 0.0:
        if chi < -_CHI_CLAMP:
            raise NumericalError(f"negative Holevo bound {chi:.3g}")
        chi = 0.0
    return chi


def holevo_untrusted(mu: float, eta: float, u: float) -> float:
    """Holevo bound with a perfect receiver (closed form, for cross-checks)."""
    _check_channel(mu, eta, u)
    a, b, c = _ab_block(mu, eta, u)
    delta = a * a + b * b - 2.0 * c * c
    det = (a * b - c * c) ** 2
    disc = math.sqrt(max(delta * delta - 4.0 * det, 0.0))
    nu1 = math.sqrt(max(0.5 * (delta + disc), 1.0))
    nu2 = math.sqrt(max(0.5 * (delta - disc), 1.0))
    nu3 = a - c * c / (b + 1.0)
    return max(0.0, g_function(nu1) + g_function(nu2) - g_function(max(nu3, 1.0)))


def mutual_information(mu: float, eta: float, u: float, tau: float, t: float) -> float:
    """Alice-Bob mutual information ``log2(1 + SNR)`` per complex symbol for heterodyne detection."""
    snr = tau * eta * mu / (1.0 + tau * eta * u + t)
    return math.log2(1.0 + snr)


def leak_from_efficiency(n_prime: int, h_hat: float, beta: float, snr: float) -> float:
    """Model-dependent leak ``n' (H - beta log2(1 + SNR))`` for simulated sweeps.

    Not a measured quantity: it assumes the code reaches efficiency ``beta``
    relative to the Gaussian-channel capacity at the given SNR.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if not snr >= 0.0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    leak = n_prime * (h_hat - beta * math.log2(1.0 + snr))
    if leak < 0.0:
        raise ValueError("entropy estimate below beta * capacity; leak model inconsistent")
    return leak


def key_length(ir: IrOutcome, entropy, chi: float, budget: SecurityBudget, d: int,
               worst_case_params: dict | None = None) -> KeyLengthReport:
    """Assemble the composable key length from its components.

    Parameters
    ----------
    ir : IrOutcome
    entropy : EntropyEstimate
        ``h_hat`` per symbol; its ``penalty`` is the per-symbol entropy
        correction evaluated at ``ir.n_prime``.
    chi : float
        Holevo bound per symbol.
    budget : SecurityBudget
    d : int
        Digitization bits per quadrature.
    """
    if not chi >= 0.0:
        raise ValueError(f"chi must be nonnegative, got {chi}")
    for name in ("eps_s", "eps_h", "eps_ent"):
        if not getattr(budget, name) > 0.0:
            raise ValueError(f"{name} must be positive for the key length")
    n_prime = int(ir.n_prime)
    if entropy.n_prime != n_prime:
        raise ValueError(f"entropy estimate uses n'={entropy.n_prime}, reconciliation n'={n_prime}")
    smoothing, ir_corr = ir_projection_terms(ir.p_success, budget.eps_s)
    ent_pen = math.log2(n_prime) * math.sqrt(2.0 * n_prime * math.log2(2.0 / budget.eps_ent))
    aep_pen = math.sqrt(n_prime) * aep_penalty(smoothing, d)
    hash_term = 2.0 * (0.5 + math.log2(budget.eps_h))
    main = n_prime * (entropy.h_hat - chi)
    signed = math.fsum([main, -ir.leak_bits, -ent_pen, -aep_pen, ir_corr, hash_term])
    key = max(0, math.floor(signed))
    return KeyLengthReport(
        n_prime=n_prime,
        h_hat_bits=float(entropy.h_hat),
        holevo_bits=float(chi),
        leak_bits=float(ir.leak_bits),
        aep_penalty_bits=aep_pen,
        entropy_penalty_bits=ent_pen,
        ir_projection_bits=ir_corr,
        hash_penalty_bits=hash_term,
        signed_bound=signed,
        key_length=int(key),
        skf=key / n_prime,
        worst_case_params=worst_case_params,
    )
