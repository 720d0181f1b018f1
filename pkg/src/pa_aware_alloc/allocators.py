"""Power allocators: amplifier-aware projected gradient ascent and water-filling."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Optional

import numpy as np

from .bussgang import PaParams
from .mimo import PaBank, PowerAllocation, as_channel, capacity, capacity_gradient

__all__ = [
    "PgdOptions",
    "SolveReport",
    "WaterfillResult",
    "project_budget",
    "waterfill",
    "waterfill_baseline",
    "pgd_optimize",
]

logger = logging.getLogger(__name__)


def project_budget(p_tilde, p_total: float) -> np.ndarray:
    """Euclidean projection onto ``{p : p >= 0, sum(p) <= p_total}``.

    Negative entries are clipped first; if the result fits the budget it is
    already the projection. Otherwise the threshold ``mu`` solving
    ``sum(max(0, p_tilde - mu)) = p_total`` is found by sorting.
    """
    x = np.asarray(p_tilde, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot project non-finite entries")
    if not p_total > 0:
        raise ValueError("p_total must be positive")
    clipped = np.maximum(x, 0.0)
    if clipped.sum() <= p_total:
        return clipped
    # stable sort keeps index order among ties
    u = -np.sort(-x, kind="stable")
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    rho = np.nonzero(u * j > css - p_total)[0][-1]
    mu = (css[rho] - p_total) / (rho + 1)
    return np.maximum(x - mu, 0.0)


@dataclass(frozen=True)
class WaterfillResult:
    allocation: PowerAllocation
    water_level: float
    degenerate: bool = False


def waterfill(gains, p_total: float) -> tuple[np.ndarray, float]:
    """Classical water-filling over parallel channels with SNR gains ``gains``.

    Maximizes ``sum(log(1 + gains_i P_i))`` subject to ``sum(P) = p_total``;
    returns the powers and the water level. Channels with zero gain get no
    power.
    """
    gains = np.asarray(gains, dtype=float)
    if not p_total > 0:
        raise ValueError("p_total must be positive")
    if np.any(gains < 0) or not np.all(np.isfinite(gains)):
        raise ValueError("gains must be finite and nonnegative")
    powers = np.zeros_like(gains)
    active = np.nonzero(gains > 0)[0]
    if active.size == 0:
        return powers, math.nan
    order = active[np.argsort(-gains[active], kind="stable")]
    inv = 1.0 / gains[order]
    css = np.cumsum(inv)
    m = np.arange(1, order.size + 1)
    levels = (p_total + css) / m
    # largest m whose weakest channel still sits below the water level
    m_star = np.nonzero(levels > inv)[0][-1] + 1
    mu = levels[m_star - 1]
    powers[order[:m_star]] = mu - inv[:m_star]
    return powers, float(mu)


def waterfill_baseline(H, p_total: float, sigma_n2: float, gain: float) -> WaterfillResult:
    """Per-antenna water-filling for a linear amplifier of gain ``gain``.

    Antenna ``i`` is treated as a parallel channel with SNR gain
    ``gain**2 * ||h_i||**2 / sigma_n2``. The full budget is spent unless
    the channel is identically zero, in which case a zero allocation is
    returned with ``degenerate=True``.
    """
    H = as_channel(H)
    if not sigma_n2 > 0:
        raise ValueError("sigma_n2 must be positive")
    col = np.sum(H.real**2 + H.imag**2, axis=0)
    powers, mu = waterfill(gain**2 * col / sigma_n2, p_total)
    if math.isnan(mu):
        logger.info("all-zero channel: water-filling returns a zero allocation")
        return WaterfillResult(PowerAllocation(powers, p_total), mu, degenerate=True)
    # renormalize roundoff so the sum never exceeds the budget
    total = powers.sum()
    if total > p_total:
        powers *= p_total / total
    return WaterfillResult(PowerAllocation(powers, p_total), mu)


@dataclass(frozen=True)
class PgdOptions:
    """Knobs for :func:`pgd_optimize`.

    ``step_init`` is the length (in V**2) of the first trial move along the
    gradient; ``None`` means ``p_total / (10 * n_t)``. ``tol_proj_grad`` is
    compared with ``p_total * ||Pi(p + s g) - p|| / s``, i.e. the projected
    gradient expressed in bits/s/Hz over the whole budget.
    """

    max_iters: int = 2000
    step_init: Optional[float] = None
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    tol_rel_capacity: float = 1e-9
    tol_proj_grad: float = 1e-8
    multistart: int = 2

    def __post_init__(self):
        if self.max_iters < 1 or self.multistart < 1:
            raise ValueError("max_iters and multistart must be >= 1")
        if not 0 < self.armijo_shrink < 1 or not 0 < self.armijo_slope < 1:
            raise ValueError("armijo_shrink and armijo_slope must lie in (0, 1)")
        if self.step_init is not None and not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if not (self.tol_rel_capacity > 0 and self.tol_proj_grad > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class SolveReport:
    allocation: PowerAllocation
    capacity: float
    iterations: int
    capacity_trace: np.ndarray
    utilization: float
    converged: bool
    start_index: int
    starts: list = field(default_factory=list)


def _pgd_run(H, p0, p_total, pa, sigma_n2, opts: PgdOptions):
    p = p0.copy()
    c = capacity(H, p, pa, sigma_n2)
    trace = [c]
    step0 = opts.step_init or p_total / (10.0 * p.size)
    s = None
    converged = False
    it = 0
    g_prev = p_prev = None
    for it in range(1, opts.max_iters + 1):
        g = capacity_gradient(H, p, pa, sigma_n2)
        gmax = np.max(np.abs(g))
        if gmax == 0:
            converged = True
            break
        if s is None:
            s = step0 / gmax
        elif g_prev is not None:
            # Barzilai-Borwein trial step for ascent, kept within sane bounds
            dp, dg = p - p_prev, g - g_prev
            curv = -float(dp @ dg)
            if curv > 0:
                s = float(dp @ dp) / curv
            s = min(max(s, 1e-6 * step0 / gmax), 1e6 * step0 / gmax)

        accepted = stalled = False
        while True:
            p_new = project_budget(p + s * g, p_total)
            move = p_new - p
            if not np.any(move):
                stalled = True
                break
            c_new = capacity(H, p_new, pa, sigma_n2)
            if c_new >= c + opts.armijo_slope * float(g @ move):
                accepted = True
                break
            s *= opts.armijo_shrink
            if s * gmax < 1e-14 * p_total:
                break

        pg = p_total * np.linalg.norm(project_budget(p + s * g, p_total) - p) / s
        if not accepted:
            # no ascent left at working precision
            converged = stalled or pg < opts.tol_proj_grad
            break
        p_prev, g_prev = p, g
        rel = (c_new - c) / max(abs(c), 1e-300)
        p, c = p_new, c_new
        trace.append(c)
        if rel < opts.tol_rel_capacity or pg < opts.tol_proj_grad:
            converged = True
            break
    return p, c, it, np.asarray(trace), converged


def _starts(n_t: int, p_total: float, pa: PaBank) -> list[np.ndarray]:
    uniform = np.full(n_t, p_total / n_t)
    if isinstance(pa, PaParams):
        p_sat = np.full(n_t, pa.p_sat)
    else:
        p_sat = np.array([item.p_sat for item in pa])
    capped = np.minimum(uniform, p_sat)
    return [uniform, capped]


def pgd_optimize(
    H,
    p_total: float,
    pa: PaBank,
    sigma_n2: float,
    opts: Optional[PgdOptions] = None,
) -> SolveReport:
    """Maximize the distortion-aware capacity over ``{p >= 0, sum(p) <= p_total}``.

    Projected gradient ascent with Armijo backtracking along the projection
    arc, run from a uniform start and from a start capped at the saturation
    power; the better run is returned. Running out of iterations is not an
    error, it is reported through ``converged``.
    """
    opts = opts or PgdOptions()
    H = as_channel(H)
    if not (math.isfinite(p_total) and p_total > 0):
        raise ValueError("p_total must be positive and finite")
    starts = _starts(H.shape[1], p_total, pa)[: opts.multistart]
    runs = []
    for idx, p0 in enumerate(starts):
        if idx > 0 and any(np.array_equal(p0, other) for other in starts[:idx]):
            continue
        runs.append((idx,) + _pgd_run(H, p0, p_total, pa, sigma_n2, opts))
    best = max(runs, key=lambda run: run[2])
    idx, p, c, iters, trace, converged = best
    alloc = PowerAllocation(p, p_total)
    return SolveReport(
        allocation=alloc,
        capacity=c,
        iterations=iters,
        capacity_trace=trace,
        utilization=alloc.utilization,
        converged=converged,
        start_index=idx,
        starts=[(run[0], run[2], run[3], run[5]) for run in runs],
    )
