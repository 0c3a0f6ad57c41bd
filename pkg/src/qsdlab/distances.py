"""W1, total variation and Kolmogorov distances between discretized laws.

Conventions
-----------
* W1 is the sup over 1-Lipschitz ``f`` with ``f(0) = 1``.  For two
  probability measures a constant shift of ``f`` cancels in
  ``mu(f) - nu(f)``, so the value is the usual ``int |F_a - F_b|``.
* Total variation is the sup over measurable ``|f| <= 1``, i.e. the L1
  distance of the densities, with range ``[0, 2]``.
* Kolmogorov is ``sup_y |F_a(y) - F_b(y)|``.

Between knots the cdf is the cubic Hermite interpolant built from the knot
cdf values and their exact derivatives (the pdf values).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .laws import DiscretizedLaw
from .quadrature import _reference_rule

KINDS = ("W1", "TV", "Kolmogorov")


@dataclass(frozen=True)
class DistanceResult:
    value: float
    error_bound: float
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if self.error_bound < 0:
            raise ValueError("error_bound must be >= 0")
        cap = {"TV": 2.0, "Kolmogorov": 1.0}.get(self.kind, np.inf)
        value = float(min(max(self.value, 0.0), cap))
        object.__setattr__(self, "value", value)


def _evaluate(law: DiscretizedLaw, y: np.ndarray):
    """cdf (Hermite cubic) and pdf (its derivative) at ``y``, with exponential continuation."""
    g, c, p = law.grid, law.cdf, law.pdf
    F = np.empty_like(y)
    P = np.empty_like(y)
    inside = y <= g[-1]
    yi = y[inside]
    idx = np.clip(np.searchsorted(g, yi, side="right") - 1, 0, g.size - 2)
    h = g[idx + 1] - g[idx]
    s = (yi - g[idx]) / h
    h00 = 2 * s ** 3 - 3 * s ** 2 + 1
    h10 = s ** 3 - 2 * s ** 2 + s
    h01 = -2 * s ** 3 + 3 * s ** 2
    h11 = s ** 3 - s ** 2
    F[inside] = h00 * c[idx] + h10 * h * p[idx] + h01 * c[idx + 1] + h11 * h * p[idx + 1]
    dF = (6 * s - 6 * s * s) * (c[idx + 1] - c[idx]) / h + (3 * s * s - 4 * s + 1) * p[idx] \
        + (3 * s * s - 2 * s) * p[idx + 1]
    P[inside] = np.maximum(dF, 0.0)
    out = ~inside
    if np.any(out):
        if law.tail_mass_bound > 0 and law.tail_width > 0:
            decay = np.exp(-(y[out] - g[-1]) / law.tail_width)
            F[out] = 1.0 - law.tail_mass_bound * decay
            P[out] = law.tail_mass_bound / law.tail_width * decay
        else:
            F[out] = c[-1]
            P[out] = 0.0
    return F, P


def _same_grid(a: DiscretizedLaw, b: DiscretizedLaw) -> bool:
    return a.grid.shape == b.grid.shape and np.array_equal(a.grid, b.grid)


def _merged(a: DiscretizedLaw, b: DiscretizedLaw):
    if _same_grid(a, b):
        y = a.grid
        return y, a.cdf - b.cdf, a.pdf - b.pdf
    y = np.union1d(a.grid, b.grid)
    Fa, Pa = _evaluate(a, y)
    Fb, Pb = _evaluate(b, y)
    return y, Fa - Fb, Pa - Pb


def _interpolation_error(law: DiscretizedLaw) -> tuple[float, float]:
    """Sup and integral bounds on the Hermite cdf error ``h^4 |p'''| / 384``.

    The third derivative of the pdf is estimated by repeated differencing.
    """
    g, p = law.grid, law.pdf
    if g.size < 4:
        return 0.0, 0.0
    d3 = np.abs(np.gradient(np.gradient(np.gradient(p, g), g), g))
    h = np.diff(g)
    local = h ** 4 / 384.0 * np.maximum(d3[:-1], d3[1:])
    return float(local.max()), float(np.sum(local * h))


def _interpolation_terms(a: DiscretizedLaw, b: DiscretizedLaw) -> tuple[float, float]:
    """Interpolation error of the merged cdf difference (zero on a shared grid)."""
    if _same_grid(a, b):
        return 0.0, 0.0
    sa, ia = _interpolation_error(a)
    sb, ib = _interpolation_error(b)
    return sa + sb, ia + ib


def _tail_w1(a, b):
    return a.tail_mass_bound * a.tail_width + b.tail_mass_bound * b.tail_width


def _check_moment(law, tolerance):
    if tolerance is not None and law.first_moment_error > tolerance:
        raise ValueError(f"first moment error bar {law.first_moment_error:.3g} exceeds "
                         f"the requested tolerance {tolerance:.3g}")


def _abs_integral_cubic(D0, D1, d0, d1, h):
    """Exact ``int_0^h |H|`` for Hermite cubics ``H`` given endpoint values and slopes."""
    # monomial coefficients in s in [0, 1]: H = c0 + c1 s + c2 s^2 + c3 s^3
    c0 = D0
    c1 = h * d0
    c2 = -3 * D0 - 2 * h * d0 + 3 * D1 - h * d1
    c3 = 2 * D0 + h * d0 - 2 * D1 + h * d1
    total = np.zeros_like(D0)
    for i in range(D0.size):
        coeffs = [c0[i], c1[i], c2[i], c3[i]]
        roots = np.polynomial.polynomial.polyroots(np.trim_zeros(coeffs, "b") or [0.0])
        roots = np.sort(roots[(np.abs(roots.imag) < 1e-12) & (roots.real > 0) & (roots.real < 1)].real)
        pts = np.concatenate(([0.0], roots, [1.0]))
        anti = lambda s: c0[i] * s + c1[i] * s ** 2 / 2 + c2[i] * s ** 3 / 3 + c3[i] * s ** 4 / 4
        total[i] = np.sum(np.abs(np.diff(anti(pts))))
    return total * h


def wasserstein1(a: DiscretizedLaw, b: DiscretizedLaw, tolerance: float | None = None) -> DistanceResult:
    _check_moment(a, tolerance)
    _check_moment(b, tolerance)
    y, D, d = _merged(a, b)
    h = np.diff(y)
    D0, D1, d0, d1 = D[:-1], D[1:], d[:-1], d[1:]
    signed = h * (D0 + D1) / 2 + h * h * (d0 - d1) / 12
    # segments where the cubic may change sign: sample it
    ref_x, _ = _reference_rule(8)
    s = ref_x[None, :]
    H = ((2 * s ** 3 - 3 * s ** 2 + 1) * D0[:, None] + (s ** 3 - 2 * s ** 2 + s) * (h * d0)[:, None]
         + (-2 * s ** 3 + 3 * s ** 2) * D1[:, None] + (s ** 3 - s ** 2) * (h * d1)[:, None])
    samples = np.column_stack([D0, H, D1])
    mixed = (samples.max(axis=1) > 0) & (samples.min(axis=1) < 0)
    cubic = np.abs(signed)
    if np.any(mixed):
        cubic[mixed] = _abs_integral_cubic(D0[mixed], D1[mixed], d0[mixed], d1[mixed], h[mixed])
    value = float(cubic.sum())
    linear = float(np.sum(_abs_trapezoid(D0, D1, h)))
    interp = _interpolation_terms(a, b)[1]
    return DistanceResult(value, abs(value - linear) + interp + _tail_w1(a, b), "W1")


def _abs_trapezoid(v0, v1, h):
    """``int |linear|`` per segment, splitting at the zero crossing."""
    same = v0 * v1 >= 0
    out = np.where(same, 0.5 * h * np.abs(v0 + v1), 0.0)
    cross = ~same
    if np.any(cross):
        a, b, hh = np.abs(v0[cross]), np.abs(v1[cross]), h[cross]
        out[cross] = 0.5 * hh * (a * a + b * b) / (a + b)
    return out


def total_variation(a: DiscretizedLaw, b: DiscretizedLaw, tolerance: float | None = None) -> DistanceResult:
    """``int |p_a - p_b|`` (range [0, 2]).

    Where ``p_a - p_b`` keeps its sign across a segment the integral is the
    exact cdf increment; crossing segments are split at the sign change of
    the Hermite model.
    """
    _check_moment(a, tolerance)
    _check_moment(b, tolerance)
    y, D, d = _merged(a, b)
    h = np.diff(y)
    increments = np.abs(np.diff(D))
    cross = d[:-1] * d[1:] < 0
    lin = _abs_trapezoid(d[:-1], d[1:], h)
    split = increments.copy()
    if np.any(cross):
        split[cross] = _split_increment(D[:-1][cross], D[1:][cross], d[:-1][cross], d[1:][cross], h[cross])
    value = float(np.sum(split))
    # crossing segments: Hermite split vs linear pdf model bounds the local error
    err = float(np.sum(np.abs(lin[cross] - split[cross]))) + a.tail_mass_bound + b.tail_mass_bound
    # each crossing point and both ends carry the cdf interpolation error
    err += (2 * int(cross.sum()) + 2) * _interpolation_terms(a, b)[0]
    return DistanceResult(value, err, "TV")


def _split_increment(D0, D1, d0, d1, h):
    """``|H(s*) - H(0)| + |H(1) - H(s*)|`` for the Hermite cubic ``H`` of the cdf
    difference, with ``s*`` the zero of ``H'`` (the pdf difference) in ``(0, 1)``."""
    c1 = h * d0
    c2 = -3 * D0 - 2 * h * d0 + 3 * D1 - h * d1
    c3 = 2 * D0 + h * d0 - 2 * D1 + h * d1
    out = np.empty_like(D0)
    for i in range(D0.size):
        roots = np.polynomial.polynomial.polyroots(np.trim_zeros([c1[i], 2 * c2[i], 3 * c3[i]], "b"))
        roots = roots[(np.abs(roots.imag) < 1e-12) & (roots.real > 0) & (roots.real < 1)].real
        lin_root = d0[i] / (d0[i] - d1[i])
        s = roots[np.argmin(np.abs(roots - lin_root))] if roots.size else lin_root
        mid = D0[i] + c1[i] * s + c2[i] * s * s + c3[i] * s ** 3
        out[i] = abs(mid - D0[i]) + abs(D1[i] - mid)
    return out


def kolmogorov(a: DiscretizedLaw, b: DiscretizedLaw) -> DistanceResult:
    y, D, d = _merged(a, b)
    h = np.diff(y)
    ref_x, _ = _reference_rule(8)
    s = ref_x[None, :]
    D0, D1, d0, d1 = D[:-1], D[1:], d[:-1], d[1:]
    H = ((2 * s ** 3 - 3 * s ** 2 + 1) * D0[:, None] + (s ** 3 - 2 * s ** 2 + s) * (h * d0)[:, None]
         + (-2 * s ** 3 + 3 * s ** 2) * D1[:, None] + (s ** 3 - s ** 2) * (h * d1)[:, None])
    value = float(max(np.abs(D).max(), np.abs(H).max()))
    # unsampled excursion of a cubic between samples is bounded by h^2 |D''| / 8
    err = float(np.max(h * np.abs(np.diff(d))) / 8.0) + max(a.tail_mass_bound, b.tail_mass_bound)
    err += _interpolation_terms(a, b)[0]
    return DistanceResult(value, err, "Kolmogorov")


def distance(kind: str, a: DiscretizedLaw, b: DiscretizedLaw) -> DistanceResult:
    key = kind.lower()
    if key in ("w1", "wasserstein", "wasserstein1"):
        return wasserstein1(a, b)
    if key in ("tv", "total_variation"):
        return total_variation(a, b)
    if key in ("kolmogorov", "kolm", "ks"):
        return kolmogorov(a, b)
    raise ValueError(f"unknown distance {kind!r}; use w1, tv or kolmogorov")
