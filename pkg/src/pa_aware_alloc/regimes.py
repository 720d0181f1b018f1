"""Noise-limited versus distortion-limited operation."""

from __future__ import annotations

from dataclasses import dataclass
import enum

from .bussgang import PaParams, distortion_variance
from .mimo import as_channel, frobenius_norm_sq

__all__ = ["Regime", "RegimeReport", "noise_threshold", "classify"]

DEFAULT_BAND = 3.0


class Regime(str, enum.Enum):
    NOISE_LIMITED = "noise-limited"
    DISTORTION_LIMITED = "distortion-limited"
    TRANSITION = "transition"


@dataclass(frozen=True)
class RegimeReport:
    threshold_sigma_n2: float
    regime: Regime
    ratio: float


def noise_threshold(H, pa: PaParams, p_avg: float) -> float:
    """Thermal noise variance at which noise and distortion traces match.

    Under a uniform allocation ``p_avg`` per antenna the received distortion
    trace is ``sigma_eta2(p_avg) * ||H||_F**2``; dividing by ``N_R`` gives the
    per-antenna noise variance with the same trace.
    """
    H = as_channel(H)
    if not p_avg >= 0:
        raise ValueError("p_avg must be nonnegative")
    return distortion_variance(p_avg, pa) * frobenius_norm_sq(H) / H.shape[0]


def classify(sigma_n2: float, threshold: float, band: float = DEFAULT_BAND) -> RegimeReport:
    """Label ``sigma_n2`` relative to ``threshold`` with a multiplicative band."""
    if not sigma_n2 > 0:
        raise ValueError("sigma_n2 must be positive")
    if not band >= 1:
        raise ValueError("band must be >= 1")
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    if sigma_n2 > band * threshold:
        regime = Regime.NOISE_LIMITED
    elif sigma_n2 < threshold / band:
        regime = Regime.DISTORTION_LIMITED
    else:
        regime = Regime.TRANSITION
    ratio = sigma_n2 / threshold if threshold > 0 else float("inf")
    return RegimeReport(threshold, regime, ratio)
