"""Discretized conditional laws and the K_t-normalized semigroup functionals.

All laws are built from an unnormalized density evaluated on composite
Gauss-Legendre panels between grid knots; the cdf at the knots is the
cumulative panel sum, so it carries quadrature (not interpolation) error.

Densities that involve the killed semigroup are never formed with the
factor ``exp(-lambda0 t)``: the eta-reweighted Bessel-3 kernel gives the
same law up to a constant, and the constant is removed by normalization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytic as an
from .analytic import DriftParams
from .functions import FunctionSpec
from .measures import InitialMeasure, eta_mass, eta_transform, measure_hash
from .quadrature import GL_ORDER, panel_rule, uniform_knots

UNDERFLOW_LIMIT = 1e-300
SCHEMA_VERSION = 1


class UnderflowError(ArithmeticError):
    """The survival probability is below the double precision range."""


@dataclass(frozen=True)
class GridSpec:
    """Hybrid grid: geometric near 0, then uniform up to ``y_max``.

    ``y_max=None`` lets each law pick its own extent.
    """

    n_nodes: int = 4000
    y_max: float | None = None
    geometric_fraction: float = 0.2
    geometric_start: float = 1e-6

    def knots(self, y_max: float, scale: float) -> np.ndarray:
        y_max = self.y_max if self.y_max is not None else y_max
        n_geo = max(2, int(self.geometric_fraction * self.n_nodes))
        n_lin = max(2, self.n_nodes - n_geo)
        switch = min(0.5 * scale, 0.25 * y_max)
        start = min(self.geometric_start * scale, 0.5 * switch)
        geo = np.geomspace(start, switch, n_geo)
        lin = np.linspace(switch, y_max, n_lin)
        return np.unique(np.concatenate(([0.0], geo, lin)))


@dataclass(frozen=True)
class DiscretizedLaw:
    """A law on the half line as knot values of its pdf and cdf.

    ``tail_mass_bound`` bounds the mass beyond the last knot and
    ``tail_width`` is a length with ``int_{y_max}^inf (1 - F) <= tail_mass_bound * tail_width``.
    """

    grid: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray
    tail_mass_bound: float
    tail_width: float
    first_moment: float
    first_moment_error: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g, p, c = (np.asarray(a, dtype=float) for a in (self.grid, self.pdf, self.cdf))
        if not (g.shape == p.shape == c.shape) or g.ndim != 1 or g.size < 2:
            raise ValueError("grid, pdf and cdf must be 1-D of equal length")
        if g[0] < 0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be nonnegative and strictly increasing")
        if np.any(p < 0) or c[0] < 0 or np.any(np.diff(c) < 0):
            raise ValueError("pdf must be >= 0 and cdf nondecreasing")
        if abs(c[-1] + self.tail_mass_bound - 1.0) > 1e-8:
            raise ValueError(f"cdf ends at {c[-1]!r} with tail {self.tail_mass_bound!r}; not normalized")
        for a in (g, p, c):
            a.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "pdf", p)
        object.__setattr__(self, "cdf", c)

    @classmethod
    def from_density(cls, density, knots, *, meta: dict | None = None) -> "DiscretizedLaw":
        """Normalize an unnormalized density given as a vectorized callable."""
        knots = np.asarray(knots, dtype=float)
        nodes, weights = panel_rule(knots)
        vals = np.asarray(density(nodes), dtype=float)
        masses = np.sum(weights * vals, axis=1)
        moments = np.sum(weights * vals * nodes, axis=1)
        total = float(masses.sum())
        if not (total > 0 and math.isfinite(total)):
            raise ArithmeticError(f"density has total mass {total!r} on the grid")
        pdf_knots = np.asarray(density(knots), dtype=float) / total
        cdf = np.minimum(np.concatenate(([0.0], np.cumsum(masses) / total)), 1.0)
        cdf[-1] = 1.0
        tail, width = _tail_estimate(knots, pdf_knots)
        mean = float(moments.sum() / total)
        mean_err = tail * (knots[-1] + width) + 1e-14 * abs(mean)
        return cls(knots, pdf_knots, cdf, tail, width, mean, mean_err, dict(meta or {}))

    def to_csv(self, path) -> Path:
        """Write ``y,pdf,cdf`` plus a JSON sidecar; returns the sidecar path."""
        path = Path(path)
        rows = np.column_stack([self.grid, self.pdf, self.cdf])
        _atomic_write(path, _csv_text(["y", "pdf", "cdf"], rows))
        sidecar = path.with_suffix(".json")
        doc = {"schema_version": SCHEMA_VERSION, "tail_mass_bound": self.tail_mass_bound,
               "tail_width": self.tail_width, "first_moment": self.first_moment,
               "first_moment_error": self.first_moment_error, "provenance": self.meta}
        _atomic_write(sidecar, json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return sidecar

    @classmethod
    def from_csv(cls, path) -> "DiscretizedLaw":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        side = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        return cls(data[:, 0], data[:, 1], data[:, 2], side["tail_mass_bound"], side["tail_width"],
                   side["first_moment"], side["first_moment_error"], side.get("provenance", {}))


def _tail_estimate(knots, pdf):
    """Mass and width of an exponential continuation of the last two knots."""
    p1, p2 = pdf[-2], pdf[-1]
    if p2 <= 0:
        return 0.0, 0.0
    h = knots[-1] - knots[-2]
    if p1 <= p2:
        # not yet decaying at the grid end; fall back to a conservative width
        width = knots[-1]
    else:
        width = h / math.log(p1 / p2)
    return float(p2 * width), float(width)


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    tmp.replace(path)


def write_csv(path, header, rows) -> None:
    _atomic_write(Path(path), _csv_text(header, rows))


def write_json(path, doc) -> None:
    _atomic_write(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- densities ---------------------------------------------------------------

def _chunked_sum(x, w, kernel, y, chunk=2_000_000):
    """``sum_i w_i kernel(x_i, y)`` with bounded memory, fixed summation order."""
    y = np.asarray(y, dtype=float)
    flat = y.ravel()
    out = np.zeros_like(flat)
    keep = w > 0
    x, w = x[keep], w[keep]
    step = max(1, chunk // max(1, flat.size))
    for i in range(0, x.size, step):
        xs, ws = x[i:i + step, None], w[i:i + step, None]
        out += np.sum(ws * kernel(xs, flat[None, :]), axis=0)
    return out.reshape(y.shape)


def qprocess_density(measure_eta: InitialMeasure, s: float):
    """Density of the Bessel-3 marginal at time ``s`` from an already reweighted law."""
    x, w = measure_eta.nodes_weights()
    return lambda y: _chunked_sum(x, w, lambda xx, yy: an.bessel3_density(s, xx, yy), y)


def _killed_shape(params: DriftParams, measure: InitialMeasure, t: float):
    """``y -> const * int killed_density(t, x, y) mu(dx)`` without the e^{-lambda0 t} factor."""
    weighted = eta_transform(measure, params)
    q = qprocess_density(weighted, t)
    r = params.r

    def density(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            # q_t(x, y) / eta(y); q ~ y^2 near 0 so the ratio -> 0
            out = q(y) * r * r * np.exp(-r * y) / y
        return np.where(y > 0, out, 0.0)

    return density


def _support_scale(measure: InitialMeasure) -> float:
    return measure.support_bound


def conditional_law(params: DriftParams, measure: InitialMeasure, t: float,
                    grid_spec: GridSpec | None = None) -> DiscretizedLaw:
    """Law of ``X_t`` given ``tau_0 > t`` under ``P_mu``.

    Raises :class:`UnderflowError` once ``exp(-lambda0 t) < 1e-300``; the
    K_t-normalized functionals in :mod:`qsdlab.rates` cover that regime.
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    if -an.lambda0(params) * t < math.log(UNDERFLOW_LIMIT):
        raise UnderflowError(
            f"P_mu(tau_0 > t) underflows at t={t:g} (exp(-lambda0 t) < 1e-300); "
            "use the K_t-normalized ratios instead")
    return _conditional_law(params, measure, t, grid_spec)


def _conditional_law(params, measure, t, grid_spec=None):
    grid_spec = grid_spec or GridSpec()
    r = params.r
    m1 = _support_scale(measure)
    # the e^{-ry} tilt caps the spread at ~45/r however large t is
    y_max = max(45.0 / r, m1 + min(12.0 * math.sqrt(t), 45.0 / r))
    knots = grid_spec.knots(y_max, min(1.0 / r, math.sqrt(t), m1))
    meta = {"law": "conditional", "r": r, "t": t, "measure": measure_hash(measure)}
    return DiscretizedLaw.from_density(_killed_shape(params, measure, t), knots, meta=meta)


def qprocess_marginal(measure: InitialMeasure, params: DriftParams, s: float,
                      grid_spec: GridSpec | None = None) -> DiscretizedLaw:
    """Law of the Bessel-3 process at time ``s`` started from ``eta o mu``."""
    if s <= 0:
        raise ValueError("s must be > 0")
    grid_spec = grid_spec or GridSpec()
    weighted = eta_transform(measure, params)
    knots = grid_spec.knots(_marginal_extent(measure, s), min(math.sqrt(s), _support_scale(measure)))
    meta = {"law": "qprocess", "r": params.r, "s": s, "measure": measure_hash(measure)}
    return DiscretizedLaw.from_density(qprocess_density(weighted, s), knots, meta=meta)


def _marginal_extent(measure, s):
    return _support_scale(measure) + 12.0 * math.sqrt(s) + 2.0


def _survival_weight(params: DriftParams, horizon: float):
    """``y -> K_T Q_T[1/eta](y)`` for ``T = horizon``: survival over the remaining time, rescaled."""
    r = params.r
    if horizon == 0:
        return None
    kt = an.k_factor(horizon)

    def weight(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = kt * an.scaled_survival(params, horizon, y) * r * r * np.exp(-r * y) / y
        # y -> 0: scaled_survival ~ y, so the ratio has a finite limit; nodes never hit 0
        return np.where(y > 0, out, 0.0)

    return weight


def time_s_conditional_law(params: DriftParams, measure: InitialMeasure, s: float, t: float,
                           grid_spec: GridSpec | None = None) -> DiscretizedLaw:
    """Law of ``X_s`` given ``tau_0 > t``, for ``0 < s <= t``."""
    if not 0 < s <= t:
        raise ValueError(f"need 0 < s <= t, got s={s!r}, t={t!r}")
    if s == t:
        law = conditional_law(params, measure, t, grid_spec)
        return DiscretizedLaw(law.grid, law.pdf, law.cdf, law.tail_mass_bound, law.tail_width,
                              law.first_moment, law.first_moment_error,
                              {**law.meta, "law": "time-s conditional", "s": s})
    grid_spec = grid_spec or GridSpec()
    weighted = eta_transform(measure, params)
    q = qprocess_density(weighted, s)
    weight = _survival_weight(params, t - s)
    knots = grid_spec.knots(_marginal_extent(measure, s), min(math.sqrt(s), _support_scale(measure)))
    meta = {"law": "time-s conditional", "r": params.r, "s": s, "t": t,
            "measure": measure_hash(measure)}
    return DiscretizedLaw.from_density(lambda y: q(y) * weight(y), knots, meta=meta)


def yaglom_law(params: DriftParams, knots) -> DiscretizedLaw:
    """The Yaglom limit on given knots, with exact cdf values."""
    knots = np.asarray(knots, dtype=float)
    r = params.r
    cdf = an.yaglom_cdf(params, knots)
    tail = 1.0 - float(cdf[-1])
    y_max = knots[-1]
    # int_Y^inf (1 - F) = e^{-rY} (2 + rY) / r
    width = (2.0 + r * y_max) / (r * (1.0 + r * y_max)) if tail > 0 else 0.0
    mean = 2.0 / r
    return DiscretizedLaw(knots, an.yaglom_pdf(params, knots), cdf, tail, width, mean, 0.0,
                          {"law": "yaglom", "r": r})


def yaglom_law_for(params: DriftParams, grid_spec: GridSpec | None = None) -> DiscretizedLaw:
    grid_spec = grid_spec or GridSpec()
    return yaglom_law(params, grid_spec.knots(45.0 / params.r, 1.0 / params.r))


# --- K_t-normalized functionals ----------------------------------------------

def _y_rule(f: FunctionSpec, t: float, atoms: np.ndarray, order: int = GL_ORDER):
    if not f.integrable:
        raise ValueError(f"function {f.name!r} lacks finite c_f, c_f' or cutoff; "
                         "K_t mu Q_t f needs int |f| y^4 dy < inf")
    width = min(0.25, 0.25 * math.sqrt(t))
    knots = uniform_knots(0.0, f.cutoff, width)
    extra = [b for b in f.breakpoints if 0 < b < f.cutoff]
    near = atoms[(atoms > 0) & (atoms < f.cutoff)]
    knots = np.union1d(knots, np.asarray(extra + list(near), dtype=float))
    nodes, weights = panel_rule(knots, order)
    return nodes.ravel(), weights.ravel()


def gamma_integral(f: FunctionSpec) -> float:
    """``gamma(f) = int f(y) y^2 dy``."""
    y, w = _y_rule(f, 1.0, np.empty(0))
    return float(np.sum(w * f(y) * y * y))


def kt_mu_qt(measure: InitialMeasure, t: float, f: FunctionSpec, order: int = GL_ORDER) -> float:
    """``K_t mu Q_t f = int int f(y) t (y/x) sinh(xy/t) e^{-(x^2+y^2)/2t} dy mu(dx)``."""
    if t <= 0:
        raise ValueError("t must be > 0")
    x, wx = measure.nodes_weights()
    y, wy = _y_rule(f, t, x, order)
    fy = wy * f(y)
    inner = _chunked_sum(x, wx, lambda xx, yy: an.kt_kernel(t, xx, yy), y)
    return float(np.sum(fy * inner))


def lemma1_gap(measure: InitialMeasure, t: float, f: FunctionSpec, order: int = GL_ORDER) -> float:
    """``gamma(f) - K_t mu Q_t f`` computed from the nonnegative sinh remainder.

    Avoids subtracting two nearly equal numbers when ``t`` is large.
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    x, wx = measure.nodes_weights()
    y, wy = _y_rule(f, t, x, order)
    fy = wy * f(y)
    inner = _chunked_sum(x, wx, lambda xx, yy: an.gap_kernel(t, xx, yy), y)
    return float(np.sum(fy * inner))


def survival_mass(params: DriftParams, measure: InitialMeasure, t: float) -> float:
    """``P_mu(tau_0 > t)``."""
    x, w = measure.nodes_weights()
    return float(np.sum(w * an.survival_probability(params, t, x)))


def conditional_normalizer_check(params, measure, t, grid_spec=None) -> tuple[float, float]:
    """Quadrature vs closed-form value of ``(eta o mu) Q_t [1/eta]``.

    Both equal ``e^{lambda0 t} P_mu(tau_0 > t) / mu(eta)``.
    """
    weighted = eta_transform(measure, params)
    x, w = weighted.nodes_weights()
    closed = float(np.sum(measure.nodes_weights()[1] * an.scaled_survival(params, t, measure.nodes_weights()[0])))
    closed /= eta_mass(measure, params)
    grid_spec = grid_spec or GridSpec()
    r = params.r
    y_max = max(45.0 / r, measure.support_bound + min(12.0 * math.sqrt(t), 45.0 / r))
    knots = grid_spec.knots(y_max, min(1.0 / r, math.sqrt(t), measure.support_bound))
    nodes, weights = panel_rule(knots)
    quad = float(np.sum(weights * _killed_shape(params, measure, t)(nodes)))
    return quad, closed
