"""MIMO capacity with power-dependent amplifier distortion.

Each transmit antenna ``i`` drives its own amplifier at power ``P_i``. The
receiver sees

    y = H A(p) v + H eta + n

with ``A = diag(alpha_i)``, ``eta`` distortion of covariance
``diag(sigma_eta2_i)`` and white thermal noise of variance ``sigma_n2``.
All matrices are plain complex numpy arrays; a channel is ``N_R x N_T``.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Sequence, Union

import numpy as np
from scipy import linalg

from . import bussgang
from .bussgang import PaParams

__all__ = [
    "PowerAllocation",
    "NumericalError",
    "as_channel",
    "frobenius_norm_sq",
    "bussgang_vectors",
    "effective_noise_covariance",
    "signal_covariance",
    "capacity",
    "capacity_gradient",
    "logdet2",
]

_LN2 = math.log(2.0)

PaBank = Union[PaParams, Sequence[PaParams]]


class NumericalError(ArithmeticError):
    """Raised when a covariance matrix fails to factorize."""


@dataclass(frozen=True)
class PowerAllocation:
    """Per-antenna input powers with the budget they were drawn from."""

    powers: np.ndarray
    budget: float

    def __post_init__(self):
        powers = np.asarray(self.powers, dtype=float).copy()
        powers.setflags(write=False)
        object.__setattr__(self, "powers", powers)
        if powers.ndim != 1:
            raise ValueError("powers must be a 1-D vector")
        if not np.all(np.isfinite(powers)) or np.any(powers < 0):
            raise ValueError("powers must be finite and nonnegative")
        if not (math.isfinite(self.budget) and self.budget > 0):
            raise ValueError("budget must be positive and finite")
        if powers.sum() > self.budget * (1 + 1e-9):
            raise ValueError(f"allocation sums to {powers.sum()!r}, above budget {self.budget!r}")

    @property
    def utilization(self) -> float:
        return float(self.powers.sum() / self.budget)


def as_channel(H) -> np.ndarray:
    """Validate and return ``H`` as a 2-D complex array."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ValueError(f"channel must be a nonempty 2-D matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("channel entries must be finite")
    return H


def _powers(p, n_t: int) -> np.ndarray:
    if isinstance(p, PowerAllocation):
        p = p.powers
    p = np.asarray(p, dtype=float)
    if p.shape != (n_t,):
        raise ValueError(f"allocation has shape {p.shape}, channel expects ({n_t},)")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("powers must be finite and nonnegative")
    return p


def frobenius_norm_sq(H) -> float:
    """Sum of squared magnitudes of the entries of ``H``."""
    H = np.asarray(H, dtype=complex)
    return float(np.sum(H.real**2 + H.imag**2))


def bussgang_vectors(p: np.ndarray, pa: PaBank, gradients: bool = False):
    """Per-antenna ``alpha`` and ``sigma_eta2`` (and slopes if requested).

    ``pa`` is one :class:`PaParams` shared by all antennas or a sequence
    with one entry per antenna. Zero-power antennas get the limit values
    ``alpha = G`` and zero slopes.
    """
    p = np.asarray(p, dtype=float)
    if isinstance(pa, PaParams):
        groups = [(pa, np.arange(p.size))]
    else:
        bank = list(pa)
        if len(bank) != p.size:
            raise ValueError(f"{len(bank)} amplifier parameter sets for {p.size} antennas")
        groups = {}
        for i, item in enumerate(bank):
            groups.setdefault(item, []).append(i)
        groups = [(item, np.asarray(idx)) for item, idx in groups.items()]

    a = np.empty_like(p)
    s = np.empty_like(p)
    da = np.zeros_like(p)
    ds = np.zeros_like(p)
    for item, idx in groups:
        sub = p[idx]
        a[idx] = bussgang.alpha(sub, item)
        s[idx] = bussgang.distortion_variance(sub, item)
        if gradients:
            pos = sub > 0
            if np.any(pos):
                da[idx[pos]] = bussgang.alpha_gradient(sub[pos], item)
                ds[idx[pos]] = bussgang.distortion_gradient(sub[pos], item)
    if gradients:
        return a, s, da, ds
    return a, s


def _column_outer_sum(H: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``sum_i w_i h_i h_i^H`` for columns ``h_i`` of ``H``."""
    M = (H * weights) @ H.conj().T
    return 0.5 * (M + M.conj().T)


def effective_noise_covariance(H, p, pa: PaBank, sigma_n2: float) -> np.ndarray:
    """Thermal noise plus channel-filtered distortion, ``H R_eta H^H + sigma_n2 I``."""
    H = as_channel(H)
    p = _powers(p, H.shape[1])
    if not sigma_n2 > 0:
        raise ValueError("sigma_n2 must be positive")
    _, s = bussgang_vectors(p, pa)
    R = _column_outer_sum(H, s)
    R[np.diag_indices_from(R)] += sigma_n2
    return R


def signal_covariance(H, p, pa: PaBank) -> np.ndarray:
    """Received coherent-signal covariance ``H A R_v A^H H^H``."""
    H = as_channel(H)
    p = _powers(p, H.shape[1])
    a, _ = bussgang_vectors(p, pa)
    return _column_outer_sum(H, a * a * p)


def _cholesky(M: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(M)):
        raise NumericalError(f"{what} contains non-finite entries")
    try:
        return linalg.cholesky(M, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        w = np.linalg.eigvalsh(M)
        raise NumericalError(
            f"{what} is not positive definite (min eigenvalue {w.min():.3e})"
        ) from exc


def logdet2(M: np.ndarray, what: str = "matrix") -> float:
    """Base-2 log-determinant of a Hermitian positive-definite matrix.

    Uses a Cholesky factor; if that fails the eigenvalues are tried before
    giving up with :class:`NumericalError`.
    """
    try:
        L = _cholesky(M, what)
    except NumericalError:
        if not np.all(np.isfinite(M)):
            raise
        w = np.linalg.eigvalsh(M)
        if w.min() <= 0:
            raise
        return float(np.sum(np.log2(w)))
    return float(2.0 * np.sum(np.log2(np.diag(L).real)))


def _covariances(H, p, pa, sigma_n2):
    a, s = bussgang_vectors(p, pa)
    R = _column_outer_sum(H, s)
    R[np.diag_indices_from(R)] += sigma_n2
    Q = _column_outer_sum(H, a * a * p)
    return R, Q


def capacity(H, p, pa: PaBank, sigma_n2: float) -> float:
    """Achievable rate in bits/s/Hz for a diagonal input covariance.

    ``log2 det(R + Q) - log2 det(R)`` with ``R`` the effective noise
    covariance and ``Q`` the received signal covariance.
    """
    H = as_channel(H)
    p = _powers(p, H.shape[1])
    if not sigma_n2 > 0:
        raise ValueError("sigma_n2 must be positive")
    R, Q = _covariances(H, p, pa, sigma_n2)
    c = logdet2(R + Q, "signal-plus-noise covariance") - logdet2(R, "effective noise covariance")
    return max(c, 0.0)


def capacity_gradient(H, p, pa: PaBank, sigma_n2: float) -> np.ndarray:
    """Gradient of :func:`capacity` with respect to the per-antenna powers.

    With ``K = R + Q`` every perturbation is rank one along column
    ``h_i``, so

        dC/dP_i = [q_i' h_i^H K^-1 h_i + r_i' (h_i^H K^-1 h_i - h_i^H R^-1 h_i)] / ln 2

    where ``q_i' = alpha_i**2 + 2 alpha_i P_i alpha_i'`` and
    ``r_i' = sigma_eta2_i'``. Zero-power entries use the one-sided limits.
    """
    H = as_channel(H)
    p = _powers(p, H.shape[1])
    if not sigma_n2 > 0:
        raise ValueError("sigma_n2 must be positive")
    a, s, da, ds = bussgang_vectors(p, pa, gradients=True)
    R = _column_outer_sum(H, s)
    R[np.diag_indices_from(R)] += sigma_n2
    K = R + _column_outer_sum(H, a * a * p)

    LK = _cholesky(K, "signal-plus-noise covariance")
    WK = linalg.solve_triangular(LK, H, lower=True, check_finite=False)
    quad_k = np.sum(WK.real**2 + WK.imag**2, axis=0)

    dq = a * a + 2.0 * a * p * da
    grad = dq * quad_k
    if np.any(ds != 0):
        LR = _cholesky(R, "effective noise covariance")
        WR = linalg.solve_triangular(LR, H, lower=True, check_finite=False)
        quad_r = np.sum(WR.real**2 + WR.imag**2, axis=0)
        grad = grad + ds * (quad_k - quad_r)
    return grad / _LN2
