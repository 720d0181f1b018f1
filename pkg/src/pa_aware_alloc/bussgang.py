"""Bussgang linearization of a hard-limiting power amplifier.

A circularly-symmetric Gaussian input of power ``p`` passed through the
amplifier is decomposed as ``g(v) = alpha * v + eta`` with ``eta``
uncorrelated with ``v``. This module gives ``alpha``, the output power,
the distortion variance ``sigma_eta2 = p_out - alpha**2 * p`` and their
derivatives with respect to ``p``, plus a Monte-Carlo estimator of the
same quantities.

Two clipping geometries are supported through :attr:`PaParams.clipping`:

``"quadrature"`` (default)
    In-phase and quadrature rails clipped independently at
    ``+-V_CC/sqrt(2)``. This is the geometry for which
    ``alpha = G * erf(k)`` with ``k = V_CC / (G * sqrt(2 p))`` is exact.
``"envelope"``
    The magnitude is clipped at ``V_CC`` and the phase is preserved.
    Closed forms are derived from the same split Rayleigh integrals.

Power is expressed in V**2 with a 1-ohm load, so V**2 and watts coincide.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Literal

import numpy as np
from scipy import special

__all__ = [
    "PaParams",
    "BussgangPoint",
    "McEstimate",
    "clip_transfer",
    "alpha",
    "output_power",
    "distortion_variance",
    "alpha_gradient",
    "output_power_gradient",
    "distortion_gradient",
    "saturation_power",
    "bussgang_point",
    "monte_carlo_bussgang",
]

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

Clipping = Literal["quadrature", "envelope"]


@dataclass(frozen=True)
class PaParams:
    """Hard-limiting amplifier with small-signal gain and supply rail.

    Parameters
    ----------
    gain : float
        Small-signal voltage gain ``G``.
    v_cc : float
        Supply voltage ``V_CC`` (output ceiling) in volts.
    clipping : {"quadrature", "envelope"}
        Clipping geometry, see module docstring.
    """

    gain: float
    v_cc: float
    clipping: Clipping = "quadrature"

    def __post_init__(self):
        for name in ("gain", "v_cc"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.clipping not in ("quadrature", "envelope"):
            raise ValueError(f"unknown clipping geometry {self.clipping!r}")

    @property
    def p_sat(self) -> float:
        return saturation_power(self)


@dataclass(frozen=True)
class BussgangPoint:
    """Bussgang parameters and slopes at one input power."""

    power: float
    alpha: float
    p_out: float
    sigma_eta2: float
    d_alpha_dp: float
    d_sigma_eta2_dp: float


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo estimate of the Bussgang parameters.

    ``std_errors`` maps ``"alpha"``, ``"p_out"``, ``"sigma_eta2"`` and
    ``"residual_correlation"`` to one-sigma standard errors.
    """

    alpha_hat: float
    sigma_eta2_hat: float
    p_out_hat: float
    n_samples: int
    std_errors: dict
    residual_correlation: float


def _check_power(p, strict: bool = False) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)):
        raise ValueError("power must be finite")
    if strict and np.any(arr <= 0):
        raise ValueError("power must be strictly positive for gradients")
    if np.any(arr < 0):
        raise ValueError("power must be nonnegative")
    return arr


def _out(values: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(values)
    return values


def _k(p: np.ndarray, pa: PaParams) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return pa.v_cc / (pa.gain * np.sqrt(2.0 * p))


# erf(k) - 2k exp(-k^2)/sqrt(pi) = (2/sqrt(pi)) k^3 sum_{n>=1} c_n k^(2n-2),
# c_n = (-1)^(n+1) 2n / ((2n+1) n!); highest power first for polyval
_SLOPE_SERIES = np.array(
    [(-1.0) ** (n + 1) * 2.0 * n / ((2.0 * n + 1.0) * math.factorial(n)) for n in range(1, 18)]
)[::-1] * (2.0 / _SQRT_PI)

# large-k distortion bracket: sum_{n>=1} (-1)^(n+1) 2n (2n-1)!! u^-n, u = 2k^2
_TAIL_SERIES = np.array(
    [(-1.0) ** (n + 1) * 2.0 * n * math.prod(range(1, 2 * n, 2)) for n in range(1, 25)]
)[::-1]


def _erf_minus_slope(k: np.ndarray) -> np.ndarray:
    """``erf(k) - 2 k exp(-k**2) / sqrt(pi)``, accurate for small ``k``."""
    k = np.asarray(k, dtype=float)
    if k.ndim == 0:
        return _erf_minus_slope(k.reshape(1))[0]
    small = k < 0.5
    if small.all():
        return np.polyval(_SLOPE_SERIES, k * k) * k**3
    with np.errstate(invalid="ignore", over="ignore"):
        out = special.erf(k) - 2.0 * k * np.exp(-k * k) / _SQRT_PI
    out[np.isinf(k)] = 1.0
    if small.any():
        ks = k[small]
        out[small] = np.polyval(_SLOPE_SERIES, ks * ks) * ks**3
    return out


def _quadrature_sigma_ratio(k: np.ndarray) -> np.ndarray:
    """Distortion variance divided by ``G**2 p`` for quadrature clipping."""
    k = np.asarray(k, dtype=float)
    if k.ndim == 0:
        return _quadrature_sigma_ratio(k.reshape(1))[0]
    out = np.zeros_like(k)

    low = k < 1.0
    if low.any():
        kl = k[low]
        erf_l = special.erf(kl)
        out[low] = _erf_minus_slope(kl) - erf_l * erf_l + 2.0 * kl * kl * special.erfc(kl)

    mid = (k >= 1.0) & (k < 8.0)
    if mid.any():
        km = k[mid]
        bracket = special.erfcx(km) * (special.erf(km) + 2.0 * km * km) - 2.0 * km / _SQRT_PI
        out[mid] = np.exp(-km * km) * bracket

    high = (k >= 8.0) & np.isfinite(k)
    if high.any():
        # asymptotic series of the bracket above; erf(k) == 1 here
        kh = k[high]
        inv_u = 1.0 / (2.0 * kh * kh)
        acc = np.polyval(_TAIL_SERIES, inv_u) * inv_u
        out[high] = np.exp(-kh * kh) * acc / (kh * _SQRT_PI)
    return np.maximum(out, 0.0)


def _envelope_sigma_ratio(x: np.ndarray) -> np.ndarray:
    """Distortion variance divided by ``G**2 p`` for envelope clipping.

    ``x = V_CC**2 / (G**2 p)``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return _envelope_sigma_ratio(x.reshape(1))[0]
    out = np.zeros_like(x)

    low = x < 1.0
    xl = x[low]
    a = -np.expm1(-xl) + 0.5 * np.sqrt(np.pi * xl) * special.erfc(np.sqrt(xl))
    out[low] = -np.expm1(-xl) - a * a

    high = (x >= 1.0) & np.isfinite(x)
    xh = x[high]
    s = np.sqrt(np.pi * xh) * special.erfcx(np.sqrt(xh))
    c = 1.0 - 0.5 * s
    e = np.exp(-xh)
    out[high] = e * ((1.0 - s) - e * c * c)
    return np.maximum(out, 0.0)


def clip_transfer(r, pa: PaParams):
    """Output magnitude of the hard limiter for input magnitude ``r``."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("input magnitude must be nonnegative")
    return _out(np.minimum(pa.gain * arr, pa.v_cc), r)


def alpha(p, pa: PaParams):
    """Bussgang equivalent gain; equals ``G`` at ``p = 0``."""
    arr = _check_power(p)
    if pa.clipping == "quadrature":
        val = pa.gain * special.erf(_k(arr, pa))
    else:
        with np.errstate(divide="ignore"):
            x = pa.v_cc**2 / (pa.gain**2 * arr)
        sx = np.sqrt(x)
        with np.errstate(invalid="ignore"):
            tail = 0.5 * np.sqrt(np.pi * x) * special.erfc(sx)
        tail = np.where(np.isinf(x), 0.0, tail)
        val = pa.gain * (-np.expm1(-x) + tail)
    return _out(val, p)


def distortion_variance(p, pa: PaParams):
    """Power of the distortion term, floored at zero."""
    arr = _check_power(p)
    if pa.clipping == "quadrature":
        ratio = _quadrature_sigma_ratio(_k(arr, pa))
    else:
        with np.errstate(divide="ignore"):
            ratio = _envelope_sigma_ratio(pa.v_cc**2 / (pa.gain**2 * arr))
    return _out(pa.gain**2 * arr * ratio, p)


def output_power(p, pa: PaParams):
    """Mean output power ``E|g(v)|**2``.

    Evaluated as ``alpha**2 p + sigma_eta2`` so that both terms come from
    cancellation-free expressions.
    """
    arr = _check_power(p)
    a = np.asarray(alpha(arr, pa))
    return _out(a * a * arr + np.asarray(distortion_variance(arr, pa)), p)


def alpha_gradient(p, pa: PaParams):
    """Derivative of :func:`alpha` with respect to input power (``p > 0``)."""
    arr = _check_power(p, strict=True)
    if pa.clipping == "quadrature":
        k = _k(arr, pa)
        val = -pa.v_cc * np.exp(-k * k) / (arr * np.sqrt(2.0 * np.pi * arr))
    else:
        x = pa.v_cc**2 / (pa.gain**2 * arr)
        sx = np.sqrt(x)
        da_dx = pa.gain * np.exp(-x) * (0.5 + _SQRT_PI * special.erfcx(sx) / (4.0 * sx))
        val = -da_dx * x / arr
    return _out(val, p)


def output_power_gradient(p, pa: PaParams):
    """Derivative of :func:`output_power` with respect to input power."""
    arr = _check_power(p, strict=True)
    g2 = pa.gain**2
    if pa.clipping == "quadrature":
        val = g2 * _erf_minus_slope(_k(arr, pa))
    else:
        # 1 - (1 + x) exp(-x) is the regularized lower incomplete gamma P(2, x)
        val = g2 * special.gammainc(2.0, pa.v_cc**2 / (g2 * arr))
    return _out(val, p)


def distortion_gradient(p, pa: PaParams):
    """Derivative of :func:`distortion_variance` with respect to input power."""
    arr = _check_power(p, strict=True)
    if pa.clipping == "quadrature":
        # d p_out - (2 alpha p alpha' + alpha**2) collapses to this product
        k = _k(arr, pa)
        val = pa.gain**2 * special.erfc(k) * _erf_minus_slope(k)
    else:
        # same difference simplified to G^2 c exp(-x) P(2, x), c = 1 - sqrt(pi x) erfcx(sqrt x) / 2
        x = pa.v_cc**2 / (pa.gain**2 * arr)
        c = 1.0 - 0.5 * np.sqrt(np.pi * x) * special.erfcx(np.sqrt(x))
        val = pa.gain**2 * c * np.exp(-x) * special.gammainc(2.0, x)
    return _out(val, p)


def saturation_power(pa: PaParams) -> float:
    """Input power ``(V_CC / G)**2`` where the linear and clipped regions meet."""
    return (pa.v_cc / pa.gain) ** 2


def bussgang_point(p: float, pa: PaParams) -> BussgangPoint:
    """Evaluate every Bussgang quantity at one power.

    At ``p = 0`` the slopes take their one-sided limits, which are zero.
    """
    p = float(p)
    if p > 0:
        da, ds = alpha_gradient(p, pa), distortion_gradient(p, pa)
    else:
        _check_power(p)
        da = ds = 0.0
    return BussgangPoint(
        power=p,
        alpha=alpha(p, pa),
        p_out=output_power(p, pa),
        sigma_eta2=distortion_variance(p, pa),
        d_alpha_dp=da,
        d_sigma_eta2_dp=ds,
    )


def _apply_pa(v: np.ndarray, pa: PaParams) -> np.ndarray:
    if pa.clipping == "envelope":
        mag = np.abs(v)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(mag > 0, np.minimum(pa.gain * mag, pa.v_cc) / mag, pa.gain)
        return v * scale
    rail = pa.v_cc / math.sqrt(2.0)
    return np.clip(pa.gain * v.real, -rail, rail) + 1j * np.clip(pa.gain * v.imag, -rail, rail)


def monte_carlo_bussgang(
    p: float,
    pa: PaParams,
    n_samples: int = 10**7,
    seed: int = 0,
    chunk: int = 10**6,
) -> McEstimate:
    """Estimate the Bussgang parameters by simulating the clipper.

    Draws ``n_samples`` circularly-symmetric complex Gaussian inputs of
    power ``p`` and pushes them through the amplifier with the clipping
    geometry of ``pa``. Standard errors for ``sigma_eta2`` use the delta
    method on the per-sample contributions.
    """
    if not (math.isfinite(p) and p > 0):
        raise ValueError("p must be positive and finite")
    if int(n_samples) != n_samples or n_samples < 1000:
        raise ValueError("n_samples must be an integer >= 1000")
    n_samples = int(n_samples)
    rng = np.random.default_rng(seed)
    scale = math.sqrt(p / 2.0)

    # running sums of z = Re(g v*)/p, w = |g|^2, q = |v|^2/p, y = Im(g v*)/p
    keys = ("z", "w", "q", "y", "zz", "ww", "zw", "qq", "zq", "yy")
    sums = dict.fromkeys(keys, 0.0)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        v = scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
        out = _apply_pa(v, pa)
        cross = out * np.conj(v) / p
        z, y = cross.real, cross.imag
        w = out.real**2 + out.imag**2
        q = (v.real**2 + v.imag**2) / p
        for key, val in (("z", z), ("w", w), ("q", q), ("y", y), ("zz", z * z),
                         ("ww", w * w), ("zw", z * w), ("qq", q * q), ("zq", z * q),
                         ("yy", y * y)):
            sums[key] += float(val.sum())
        done += m

    n = n_samples
    mean = {key: val / n for key, val in sums.items()}

    def cov(a, b):
        return mean[a + b] - mean[a] * mean[b]

    alpha_hat = mean["z"]
    sigma_hat = mean["w"] - alpha_hat**2 * p
    # delta method: d sigma = dw - 2 alpha p dz
    c = 2.0 * alpha_hat * p
    var_s = cov("w", "w") + c * c * cov("z", "z") - 2.0 * c * cov("z", "w")
    # residual E{v*(g - alpha v)}/p = mean_z * (1 - mean_q) + j mean_y
    res_re = alpha_hat * (1.0 - mean["q"])
    res_im = mean["y"]
    dz, dq = 1.0 - mean["q"], -alpha_hat
    var_res = (dz * dz * cov("z", "z") + dq * dq * cov("q", "q")
               + 2.0 * dz * dq * cov("z", "q") + cov("y", "y"))
    se = {
        "alpha": math.sqrt(max(cov("z", "z"), 0.0) / n),
        "p_out": math.sqrt(max(cov("w", "w"), 0.0) / n),
        "sigma_eta2": math.sqrt(max(var_s, 0.0) / n),
        "residual_correlation": math.sqrt(max(var_res, 0.0) / n),
    }
    return McEstimate(
        alpha_hat=alpha_hat,
        sigma_eta2_hat=sigma_hat,
        p_out_hat=mean["w"],
        n_samples=n,
        std_errors=se,
        residual_correlation=math.hypot(res_re, res_im),
    )
