"""Closed-form kernels for Brownian motion with drift -r killed at 0.

Every function broadcasts over numpy arrays. Densities are written in
factored exponential form, so none of them overflow for large ``x*y/t``
and the sub-Markovian quantities never have to be formed as a product
of a huge and a tiny number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx, exprel, gamma


SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
# |z| beyond which the normal cdf is clamped to 0 or 1 (error < 1e-300)
PHI_CLAMP = 38.0
# series / direct branch switch for the sinh remainder, on (x+y)^2/(2t)
EPS_SWITCH = 1e-2
SERIES_RTOL = 1e-18


@dataclass(frozen=True)
class DriftParams:
    """Drift magnitude ``r`` of ``X_t = X_0 + B_t - r t``."""

    r: float

    def __post_init__(self):
        r = float(self.r)
        if not math.isfinite(r) or r <= 0:
            raise ValueError(f"drift r must be finite and > 0, got {self.r!r}")
        object.__setattr__(self, "r", r)

    @property
    def lambda0(self) -> float:
        return lambda0(self)


def lambda0(params: DriftParams) -> float:
    """Decay rate of the survival probability under the Yaglom limit."""
    return 0.5 * params.r ** 2


def eta(params: DriftParams, x):
    """Right eigenfunction ``x exp(r x) / r^2`` of the killed generator."""
    r = params.r
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = x * np.exp(r * x) / r ** 2
    return out if out.ndim else float(out)


def log_eta(params: DriftParams, x):
    r = params.r
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(x) + r * x - 2.0 * math.log(r)
    return out if out.ndim else float(out)


def yaglom_pdf(params: DriftParams, x):
    r = params.r
    x = np.asarray(x, dtype=float)
    out = r * r * x * np.exp(-r * x)
    return out if out.ndim else float(out)


def yaglom_cdf(params: DriftParams, x):
    r = params.r
    x = np.asarray(x, dtype=float)
    rx = r * x
    # 1 - (1 + rx) e^{-rx} without cancellation near 0
    out = -np.expm1(-rx) - rx * np.exp(-rx)
    out = np.where(rx < 1e-3, _small_gamma2_cdf(rx), out)
    return out if out.ndim else float(out)


def _small_gamma2_cdf(z):
    # Taylor series of 1 - (1+z)e^{-z} = z^2/2 - z^3/3 + z^4/8 - ...
    return z * z * (0.5 - z / 3.0 + z * z / 8.0 - z ** 3 / 30.0)


def yaglom_moment(params: DriftParams, k: float) -> float:
    """``int y^k alpha(dy) = Gamma(k + 2) / r^k``."""
    return float(gamma(k + 2.0) / params.r ** k)


def normal_cdf(z):
    """Standard normal cdf via erfc, clamped to {0, 1} beyond |z| = 38."""
    z = np.asarray(z, dtype=float)
    out = 0.5 * erfc(-z / SQRT2)
    out = np.where(z < -PHI_CLAMP, 0.0, np.where(z > PHI_CLAMP, 1.0, out))
    return out if out.ndim else float(out)


def k_factor(t):
    t = np.asarray(t, dtype=float)
    out = t * np.sqrt(2.0 * np.pi * t) / 2.0
    return out if out.ndim else float(out)


def bessel3_density(t, x, y):
    """Transition density of the Bessel-3 process from ``x`` to ``y`` over time ``t``.

    At ``x = 0`` this is the continuous limit ``2 y^2 exp(-y^2/2t) / (t sqrt(2 pi t))``.
    """
    t, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, y)))
    out = (2.0 * y * y / (t * np.sqrt(2.0 * np.pi * t))
           * np.exp(-(x - y) ** 2 / (2.0 * t)) * exprel(-2.0 * x * y / t))
    return out if out.ndim else float(out)


def kt_kernel(t, x, y):
    """``K_t`` times the Bessel-3 density: ``t (y/x) sinh(xy/t) exp(-(x^2+y^2)/2t)``.

    Tends to ``y^2`` as ``t`` grows, which is why ``K_t`` is the natural normalization.
    """
    t, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, y)))
    out = y * y * np.exp(-(x - y) ** 2 / (2.0 * t)) * exprel(-2.0 * x * y / t)
    return out if out.ndim else float(out)


def killed_density(params: DriftParams, t, x, y):
    """Sub-Markovian density of ``X_t`` on ``{tau_0 > t}`` started from ``x``.

    ``phi_t(y - x + r t) (1 - exp(-2 x y / t))``: the reflection-principle
    image term with the Girsanov factor folded into the Gaussian.
    """
    r = params.r
    t, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, y)))
    gauss = np.exp(-(y - x + r * t) ** 2 / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)
    out = gauss * -np.expm1(-2.0 * x * y / t)
    return out if out.ndim else float(out)


def _erfcx_gap(a, b):
    """``erfcx(a) - erfcx(b)`` for ``b >= a``."""
    with np.errstate(over="ignore", invalid="ignore"):
        return erfcx(a) - erfcx(b)


def _tail_regime(r, t, x):
    # for large a', erfcx(a') - erfcx(b') keeps only a fraction ~ (b'-a')/a' of its digits;
    # the tail integral below resolves its integrand once r^2 t >= 8
    st = np.sqrt(t)
    a = (r * t - x) / (SQRT2 * st)
    width = SQRT2 * x / st
    return (a > 0) & (np.maximum(a, 1.0) > 8.0 * width) & (r * r * t >= 8.0)


def _hitting_tail_scaled(r, t, x):
    """``exp(lambda0 t) P_x(tau_0 > t)`` from the first-passage density tail.

    ``x e^{rx} (2/r^2) int_0^inf e^{-w} (2 pi s^3)^{-1/2} e^{-x^2/2s} dw`` with
    ``s = t + 2w/r^2``; the integrand is positive so nothing cancels.
    """
    t = np.asarray(t, dtype=float)[..., None]
    x = np.asarray(x, dtype=float)[..., None]
    w, wt = _TAIL_RULE
    s = t + 2.0 * w / (r * r)
    integrand = np.exp(-w - x * x / (2.0 * s)) / np.sqrt(2.0 * np.pi * s ** 3)
    x = x[..., 0]
    return x * np.exp(r * x) * (2.0 / (r * r)) * np.sum(wt * integrand, axis=-1)


def _make_tail_rule():
    from .quadrature import panel_rule, uniform_knots
    nodes, weights = panel_rule(uniform_knots(0.0, 44.0, 2.0))
    return nodes.ravel(), weights.ravel()


_TAIL_RULE = _make_tail_rule()


def scaled_survival(params: DriftParams, t, x):
    """``exp(lambda0 t) P_x(tau_0 > t)``, finite for every ``t``; equals 1 at ``t = 0``."""
    r = params.r
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    shape = t.shape
    t, x = t.ravel(), x.ravel()
    out = np.ones(t.shape)
    pos = t > 0
    tt, xx = t[pos], x[pos]
    st = np.sqrt(tt)
    a = (r * tt - xx) / st
    b = (r * tt + xx) / st
    with np.errstate(over="ignore", invalid="ignore"):
        lead = np.exp(r * xx - xx * xx / (2.0 * tt))
        inner = 0.5 * lead * _erfcx_gap(a / SQRT2, b / SQRT2)
        # a <= 0 means x >= rt, so e^{lambda0 t} <= e^{rx/2} stays finite
        outer = np.exp(0.5 * r * r * tt) * normal_cdf(-a) - 0.5 * lead * erfcx(b / SQRT2)
        val = np.where(a > 0, inner, outer)
    tail = _tail_regime(r, tt, xx)
    if np.any(tail):
        val[tail] = _hitting_tail_scaled(r, tt[tail], xx[tail])
    out[pos] = val
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def survival_probability(params: DriftParams, t, x):
    """``P_x(tau_0 > t) = Phi((x - rt)/sqrt t) - exp(2 r x) Phi((-x - rt)/sqrt t)``.

    Evaluated through scaled complementary error functions, or through the
    first-passage tail integral where the two terms would cancel.
    """
    r = params.r
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    shape = t.shape
    t, x = t.ravel(), x.ravel()
    st = np.sqrt(t)
    a = (r * t - x) / st
    b = (r * t + x) / st
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        half_gauss = 0.5 * np.exp(-0.5 * a * a)
        inner = half_gauss * _erfcx_gap(a / SQRT2, b / SQRT2)
        outer = normal_cdf(-a) - half_gauss * erfcx(b / SQRT2)
        out = np.where(a > 0, inner, outer)
    tail = _tail_regime(r, t, x)
    if np.any(tail):
        with np.errstate(under="ignore"):
            out[tail] = (_hitting_tail_scaled(r, t[tail], x[tail])
                         * np.exp(-0.5 * r * r * t[tail]))
    out = np.clip(out, 0.0, 1.0).reshape(shape)
    return out if out.ndim else float(out)


def _remainder_direct(c, u_minus):
    # xy/t - sinh(xy/t) e^{-(x^2+y^2)/2t} = c + e^{-u-} expm1(-2c) / 2
    return c + 0.5 * np.exp(-u_minus) * np.expm1(-2.0 * c)


def _remainder_series(c, u_plus, u_minus):
    # c * sum_{n>=2} (-1)^n h_{n-1}(u+, u-) / n!, h_m complete homogeneous
    h = u_plus + u_minus          # h_1
    pw = u_plus.copy()            # u+^1
    total = 0.5 * h               # n = 2
    fact = 2.0
    n = 2
    while True:
        n += 1
        fact *= n
        pw = pw * u_plus
        h = pw + u_minus * h
        term = (-1.0) ** n * h / fact
        total = total + term
        if np.all(np.abs(term) <= SERIES_RTOL * np.abs(total)):
            break
        if n > 60:  # pragma: no cover - u+ < 1e-2 converges in < 10 terms
            break
    return c * total


def sinh_remainder(t, x, y):
    """``xy/t - sinh(xy/t) exp(-(x^2+y^2)/2t)``, nonnegative and cancellation-free.

    Uses the alternating power series when ``(x+y)^2/(2t) < 1e-2`` and the
    factored exponential form otherwise.
    """
    t, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, y)))
    c = x * y / t
    u_plus = (x + y) ** 2 / (2.0 * t)
    u_minus = (x - y) ** 2 / (2.0 * t)
    out = _remainder_direct(c, u_minus)
    small = u_plus < EPS_SWITCH
    if np.any(small):
        out = np.array(out, copy=True)
        out[small] = _remainder_series(c[small], u_plus[small], u_minus[small])
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def gap_kernel(t, x, y):
    """``y^2 - kt_kernel(t, x, y) = t (y/x) sinh_remainder(t, x, y)``, stable at large t."""
    t, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, x, y)))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = t * y / x * sinh_remainder(t, x, y)
    at_zero = x == 0
    if np.any(at_zero):
        out = np.where(at_zero, -y * y * np.expm1(-y * y / (2.0 * t)), out)
    return out if out.ndim else float(out)


def expansion_coefficient(n: int, x, y):
    """Coefficient of ``t^{-n}`` in the large-t expansion of :func:`sinh_remainder`.

    ``(-1)^n ((x+y)^{2n} - (x-y)^{2n}) / (2^{n+1} n!)``; the ``n = 2`` value
    is ``xy(x^2+y^2)/2``.
    """
    if int(n) != n or n < 3:
        raise ValueError(f"expansion coefficients are defined for integer n >= 3, got {n!r}")
    n = int(n)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = (-1.0) ** n * ((x + y) ** (2 * n) - (x - y) ** (2 * n)) / (2.0 ** (n + 1) * math.factorial(n))
    return out if out.ndim else float(out)


def leading_coefficient(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = x * y * (x * x + y * y) / 2.0
    return out if out.ndim else float(out)
