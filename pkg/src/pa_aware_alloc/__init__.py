"""Amplifier-aware power allocation for MIMO links with hard-limiting PAs."""

from .allocators import (
    PgdOptions,
    SolveReport,
    WaterfillResult,
    pgd_optimize,
    project_budget,
    waterfill,
    waterfill_baseline,
)
from .bussgang import (
    BussgangPoint,
    McEstimate,
    PaParams,
    alpha,
    alpha_gradient,
    bussgang_point,
    clip_transfer,
    distortion_gradient,
    distortion_variance,
    monte_carlo_bussgang,
    output_power,
    output_power_gradient,
    saturation_power,
)
from .channels import ChannelFormatError, ChannelSpec, generate, read_channel, write_channel
from .mimo import (
    NumericalError,
    PowerAllocation,
    capacity,
    capacity_gradient,
    effective_noise_covariance,
    frobenius_norm_sq,
)
from .regimes import Regime, RegimeReport, classify, noise_threshold
from .units import dbm_to_watt, watt_to_dbm

__version__ = "0.1.0"
