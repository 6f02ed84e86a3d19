"""Holevo information from explicit truncated Fock-space states.

Independent of the covariance-matrix code: states are built from number-state
amplitudes, beamsplitters act on creation operators, and entropies come from
eigenvalues of Gram matrices of pure branches. Used only as a test oracle.
"""
from __future__ import annotations

import math

import numpy as np


def _thermal_weights(nbar: float, cutoff: int) -> np.ndarray:
    if nbar == 0.0:
        w = np.zeros(cutoff)
        w[0] = 1.0
        return w
    q = nbar / (nbar + 1.0)
    return (1.0 - q) * q ** np.arange(cutoff)


def _tmsv(nbar: float, cutoff: int) -> np.ndarray:
    """Schmidt coefficients of a two-mode squeezed vacuum with ``nbar`` photons per mode."""
    return np.sqrt(_thermal_weights(nbar, cutoff))


def bs_amplitude(T: float, n: int, k: int, m: int) -> float:
    """<m, n+k-m| U_T |n, k> for a beamsplitter of intensity transmittance T."""
    l = n + k - m
    if l < 0 or m < 0:
        return 0.0
    st, sr = math.sqrt(T), math.sqrt(1.0 - T)
    total = 0.0
    for i in range(max(0, m - k), min(n, m) + 1):
        j = m - i
        total += (math.comb(n, i) * st**i * sr ** (n - i)
                  * math.comb(k, j) * (-sr) ** j * st ** (k - j))
    return total * math.sqrt(math.factorial(m) * math.factorial(l) / (math.factorial(n) * math.factorial(k)))


def _entropy_from_columns(cols: np.ndarray) -> float:
    gram = cols.T @ cols
    w = np.linalg.eigvalsh(gram)
    w = w[w > 1e-300]
    w = w / w.sum()
    return float(-np.sum(w * np.log2(w)))


def holevo_fock(mu: float, eta: float, u: float, tau: float, t: float,
                cutoff: int = 40, small_cutoff: int = 12) -> float:
    """Holevo information of Eve on heterodyne data, trusted loss ``tau`` and noise ``t``.

    ``cutoff`` truncates the modulated modes; ``small_cutoff`` truncates the
    weakly populated noise modes (thermal environment and trusted EPR pair).
    """
    c = _tmsv(mu, cutoff)
    n_env = eta * u / (1.0 - eta) if eta < 1.0 else 0.0
    p_env = _thermal_weights(n_env, small_cutoff if n_env > 0 else 1)
    nb = cutoff + len(p_env)

    # branches (k, j): environment photon k in, j photons leaked to Eve
    branches = []
    for k, pk in enumerate(p_env):
        if pk < 1e-30:
            continue
        for j in range(cutoff + k):
            psi = np.zeros((cutoff, nb))
            for n in range(cutoff):
                m = n + k - j
                if 0 <= m < nb:
                    psi[n, m] = c[n] * bs_amplitude(eta, n, k, m)
            if np.any(psi):
                branches.append(math.sqrt(pk) * psi)
    s_e = _entropy_from_columns(np.stack([b.ravel() for b in branches], axis=1))

    # trusted receiver: EPR pair (F, G) with t/(1-tau) photons per mode, F mixed with B
    if t > 0.0:
        d = _tmsv(t / (1.0 - tau), small_cutoff)
    else:
        d = np.array([1.0])
    sr, st = math.sqrt(1.0 - tau), math.sqrt(tau)
    nf = nb + len(d)
    cond = []
    for psi in branches:
        # project the detected port onto vacuum: amplitude for (m, s) -> (0, m + s)
        phi = np.zeros((cutoff, nf, len(d)))
        for m in range(nb):
            col = psi[:, m]
            if not np.any(col):
                continue
            for s, ds in enumerate(d):
                # U|m,s> component on |0, m+s>: all photons exit the unobserved port
                amp = sr**m * st**s * math.sqrt(math.comb(m + s, m))
                phi[:, m + s, s] += col * ds * amp
        cond.append(phi.ravel())
    s_e_given_y = _entropy_from_columns(np.stack(cond, axis=1))
    return s_e - s_e_given_y
