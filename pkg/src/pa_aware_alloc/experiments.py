"""Experiment sweeps behind the command-line tool.

Each sweep returns ``(columns, rows)`` where rows are tuples in a
deterministic order; :func:`write_csv` serializes them. Cells of a grid
sweep get their own derived seed, so running them in parallel produces the
same rows as running them serially.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
import io
import logging
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import channels
from .allocators import PgdOptions, pgd_optimize, waterfill_baseline
from .bussgang import PaParams, alpha, distortion_variance, saturation_power
from .channels import derive_seed, format_float, numerical_rank
from .mimo import NumericalError, capacity
from .regimes import DEFAULT_BAND, classify, noise_threshold
from .units import dbm_to_watt, watt_to_dbm

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "pa_curve",
    "utilization_heatmap",
    "capacity_vs_noise",
    "timeslot_sim",
    "write_csv",
    "format_value",
]

MAX_MULTIPATH_RANK = 20


@dataclass
class ExperimentConfig:
    n_t: int = 32
    n_r: int = 32
    gain: float = 10.0
    v_cc: float = 1.0
    clipping: str = "quadrature"
    p_total_dbm_grid: Sequence[float] = field(
        default_factory=lambda: list(np.arange(-20.0, 40.0 + 1e-9, 5.0)))
    sigma_n2_dbm_grid: Sequence[float] = field(
        default_factory=lambda: list(np.arange(-90.0, 30.0 + 1e-9, 10.0)))
    p_total_dbm: float = 40.0
    sigma_n2_dbm: float = -60.0  # 1e-9 V**2
    n_slots: int = 200
    channel: str = "multipath"
    base_seed: int = 0
    band: float = DEFAULT_BAND
    jobs: int = 1
    pgd: PgdOptions = field(default_factory=PgdOptions)

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1 or self.n_slots < 1:
            raise ValueError("n_t, n_r and n_slots must be >= 1")
        for name in ("p_total_dbm_grid", "sigma_n2_dbm_grid"):
            grid = np.asarray(getattr(self, name), dtype=float)
            if grid.size == 0 or not np.all(np.isfinite(grid)):
                raise ValueError(f"{name} must be nonempty and finite")
        if self.channel not in ("rayleigh", "multipath", "mixed"):
            raise ValueError(f"unknown channel model {self.channel!r}")

    @property
    def pa(self) -> PaParams:
        return PaParams(self.gain, self.v_cc, self.clipping)


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def write_csv(columns: Sequence[str], rows: Iterable[Sequence], path=None) -> str:
    """Write rows as CSV (to ``path`` if given) and return the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _map(fn: Callable, tasks: list, jobs: int) -> list:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(task) for task in tasks]


def _draw_channel(kind: str, n_r: int, n_t: int, seed: int, n_paths: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if kind == "rayleigh":
        return channels.rayleigh(n_r, n_t, rng)
    return channels.multipath(n_r, n_t, n_paths, rng)


# -- pa-curve ---------------------------------------------------------------

PA_CURVE_COLUMNS = ("p_dbm", "v_cc", "alpha", "sigma_eta2_dbm", "p_sat_dbm")


def pa_curve(v_cc_list: Sequence[float], p_dbm: Sequence[float], gain: float = 10.0,
             clipping: str = "quadrature"):
    rows = []
    p_dbm = np.asarray(p_dbm, dtype=float)
    p = dbm_to_watt(p_dbm)
    for v_cc in v_cc_list:
        pa = PaParams(gain, float(v_cc), clipping)
        a = alpha(p, pa)
        s_dbm = watt_to_dbm(distortion_variance(p, pa))
        p_sat_dbm = float(watt_to_dbm(saturation_power(pa)))
        rows.extend(
            (float(pd), float(v_cc), float(ai), float(si), p_sat_dbm)
            for pd, ai, si in zip(p_dbm, a, s_dbm)
        )
    return PA_CURVE_COLUMNS, rows


# -- utilization-heatmap ----------------------------------------------------

HEATMAP_COLUMNS = (
    "p_total_dbm", "sigma_n2_dbm", "utilization_pct", "capacity", "regime",
    "threshold_sigma_n2_dbm", "p_sat_dbm", "iterations", "status",
)


def _heatmap_cell(task):
    cfg, index, p_dbm, s_dbm = task
    pa = cfg.pa
    p_total, sigma_n2 = float(dbm_to_watt(p_dbm)), float(dbm_to_watt(s_dbm))
    H = _draw_channel("rayleigh", cfg.n_r, cfg.n_t, derive_seed(cfg.base_seed, "cell", index))
    threshold = noise_threshold(H, pa, p_total / cfg.n_t)
    regime = classify(sigma_n2, threshold, cfg.band).regime.value
    p_sat_dbm = float(watt_to_dbm(pa.p_sat))
    th_dbm = float(watt_to_dbm(threshold))
    try:
        rep = pgd_optimize(H, p_total, pa, sigma_n2, cfg.pgd)
    except NumericalError as exc:
        logger.warning("cell %d failed: %s", index, exc)
        return (p_dbm, s_dbm, float("nan"), float("nan"), regime, th_dbm, p_sat_dbm, 0, "failed")
    return (p_dbm, s_dbm, 100.0 * rep.utilization, rep.capacity, regime, th_dbm, p_sat_dbm,
            rep.iterations, "ok")


def utilization_heatmap(cfg: ExperimentConfig):
    tasks = []
    for i, p_dbm in enumerate(cfg.p_total_dbm_grid):
        for j, s_dbm in enumerate(cfg.sigma_n2_dbm_grid):
            index = i * len(cfg.sigma_n2_dbm_grid) + j
            tasks.append((cfg, index, float(p_dbm), float(s_dbm)))
    return HEATMAP_COLUMNS, _map(_heatmap_cell, tasks, cfg.jobs)


# -- capacity-vs-noise ------------------------------------------------------

NOISE_COLUMNS = (
    "sigma_n2_dbm", "p_total_dbm", "capacity_pgd", "capacity_wf", "utilization_pct",
    "threshold_sigma_n2_dbm", "regime", "status",
)


def _noise_point(task):
    cfg, H, s_dbm, threshold = task
    pa = cfg.pa
    p_total, sigma_n2 = float(dbm_to_watt(cfg.p_total_dbm)), float(dbm_to_watt(s_dbm))
    regime = classify(sigma_n2, threshold, cfg.band).regime.value
    th_dbm = float(watt_to_dbm(threshold))
    try:
        rep = pgd_optimize(H, p_total, pa, sigma_n2, cfg.pgd)
        wf = waterfill_baseline(H, p_total, sigma_n2, cfg.gain).allocation
        c_wf = capacity(H, wf, pa, sigma_n2)
    except NumericalError as exc:
        logger.warning("sigma_n2=%s dBm failed: %s", s_dbm, exc)
        nan = float("nan")
        return (s_dbm, cfg.p_total_dbm, nan, nan, nan, th_dbm, regime, "failed")
    return (s_dbm, cfg.p_total_dbm, rep.capacity, c_wf, 100.0 * rep.utilization, th_dbm,
            regime, "ok")


def capacity_vs_noise(cfg: ExperimentConfig, H: Optional[np.ndarray] = None):
    """Sweep the thermal noise on one channel (drawn from the base seed if not given)."""
    if H is None:
        H = _draw_channel("rayleigh", cfg.n_r, cfg.n_t, derive_seed(cfg.base_seed, "channel"))
    p_total = float(dbm_to_watt(cfg.p_total_dbm))
    threshold = noise_threshold(H, cfg.pa, p_total / H.shape[1])
    tasks = [(cfg, H, float(s), threshold) for s in cfg.sigma_n2_dbm_grid]
    return NOISE_COLUMNS, _map(_noise_point, tasks, cfg.jobs)


# -- timeslot-sim -----------------------------------------------------------

TIMESLOT_COLUMNS = (
    "slot", "channel", "rank", "capacity_pgd", "capacity_wf", "utilization_pct", "status",
)


def slot_channel(cfg: ExperimentConfig, slot: int) -> tuple[str, np.ndarray]:
    """Channel family and matrix for one time slot.

    ``mixed`` uses Rayleigh fading for the first half of the slots and the
    multipath model for the second half. Multipath slots draw their number
    of paths uniformly from ``0..min(20, N_R, N_T)``.
    """
    kind = cfg.channel
    if kind == "mixed":
        kind = "rayleigh" if slot < cfg.n_slots // 2 else "multipath"
    seed = derive_seed(cfg.base_seed, "channel", slot)
    if kind == "rayleigh":
        return kind, _draw_channel(kind, cfg.n_r, cfg.n_t, seed)
    max_rank = min(MAX_MULTIPATH_RANK, cfg.n_r, cfg.n_t)
    n_paths = int(np.random.default_rng(derive_seed(cfg.base_seed, "rank", slot))
                  .integers(0, max_rank + 1))
    return kind, _draw_channel(kind, cfg.n_r, cfg.n_t, seed, n_paths)


def _timeslot(task):
    cfg, slot = task
    pa = cfg.pa
    kind, H = slot_channel(cfg, slot)
    rank = numerical_rank(H)
    p_total, sigma_n2 = float(dbm_to_watt(cfg.p_total_dbm)), float(dbm_to_watt(cfg.sigma_n2_dbm))
    try:
        rep = pgd_optimize(H, p_total, pa, sigma_n2, cfg.pgd)
        wf = waterfill_baseline(H, p_total, sigma_n2, cfg.gain).allocation
        c_wf = capacity(H, wf, pa, sigma_n2)
    except NumericalError as exc:
        logger.warning("slot %d failed: %s", slot, exc)
        nan = float("nan")
        return (slot, kind, rank, nan, nan, nan, "failed")
    return (slot, kind, rank, rep.capacity, c_wf, 100.0 * rep.utilization, "ok")


def timeslot_sim(cfg: ExperimentConfig):
    tasks = [(cfg, slot) for slot in range(cfg.n_slots)]
    return TIMESLOT_COLUMNS, _map(_timeslot, tasks, cfg.jobs)
