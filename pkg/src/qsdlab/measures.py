"""Initial laws on (0, inf), eta-reweighting and the integrability gates."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.special import logsumexp

from .analytic import DriftParams, log_eta, yaglom_cdf, yaglom_pdf

OVERFLOW_THRESHOLD = 1e300
TAIL_FIT_FRACTION = 0.1


class IntegrabilityError(ValueError):
    """Raised when an initial law is too heavy-tailed for the requested computation."""


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite mixture of Dirac masses."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.locations, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if loc.shape != w.shape or loc.ndim != 1 or loc.size == 0:
            raise ValueError("locations and weights must be non-empty 1-D arrays of equal length")
        if np.any(~np.isfinite(loc)) or np.any(loc <= 0):
            raise ValueError("atoms must sit at finite locations > 0")
        if np.any(w <= 0):
            raise ValueError("atom weights must be > 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"atom weights sum to {w.sum()!r}, expected 1")
        loc.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, x: float) -> "AtomicMeasure":
        return cls(np.array([x]), np.array([1.0]))

    @classmethod
    def from_pairs(cls, pairs) -> "AtomicMeasure":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return self.locations, self.weights

    @property
    def support_bound(self) -> float:
        return float(self.locations.max())

    @property
    def tail_bound(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"type": "atomic",
                "atoms": [[float(x), float(w)] for x, w in zip(self.locations, self.weights)]}


@dataclass(frozen=True)
class GridDensity:
    """Density tabulated on a grid, integrated with the trapezoid rule.

    ``tail`` bounds the mass beyond the last grid point; the trapezoid mass
    plus ``tail`` must equal one.
    """

    grid: np.ndarray
    pdf: np.ndarray
    tail: float = 0.0
    _weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.asarray(self.grid, dtype=float)
        p = np.asarray(self.pdf, dtype=float)
        if x.ndim != 1 or x.shape != p.shape or x.size < 3:
            raise ValueError("grid and pdf must be 1-D arrays of equal length >= 3")
        if x[0] < 0 or np.any(np.diff(x) <= 0):
            raise ValueError("grid must be nonnegative and strictly increasing")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValueError("density values must be finite and >= 0")
        if self.tail < 0:
            raise ValueError("tail bound must be >= 0")
        w = _trapezoid_weights(x)
        mass = float(w @ p)
        if abs(mass + self.tail - 1.0) > 1e-8:
            raise ValueError(f"trapezoid mass {mass!r} + tail {self.tail!r} differs from 1")
        for arr in (x, p, w):
            arr.setflags(write=False)
        object.__setattr__(self, "grid", x)
        object.__setattr__(self, "pdf", p)
        object.__setattr__(self, "tail", float(self.tail))
        object.__setattr__(self, "_weights", w)

    @classmethod
    def from_callable(cls, density: Callable, grid, tail: float = 0.0) -> "GridDensity":
        """Tabulate ``density`` and rescale it so the trapezoid mass is ``1 - tail``."""
        x = np.asarray(grid, dtype=float)
        p = np.asarray(density(x), dtype=float)
        mass = float(_trapezoid_weights(x) @ p)
        return cls(x, p * (1.0 - tail) / mass, tail)

    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grid, self._weights * self.pdf

    @property
    def support_bound(self) -> float:
        return float(self.grid[-1])

    @property
    def tail_bound(self) -> float:
        return self.tail

    def to_dict(self) -> dict:
        return {"type": "grid", "x": self.grid.tolist(), "pdf": self.pdf.tolist(), "tail": self.tail}


InitialMeasure = Union[AtomicMeasure, GridDensity]


@dataclass(frozen=True)
class MomentReport:
    k: int
    exponential: bool
    value: float
    finite: bool


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def integrate(measure: InitialMeasure, f: Callable) -> float:
    """``mu(f)``. For grid densities the declared tail mass is not included."""
    x, w = measure.nodes_weights()
    with np.errstate(over="ignore", invalid="ignore"):
        fx = np.asarray(f(x), dtype=float)
    fx = np.broadcast_to(fx, x.shape)
    used = w > 0
    if not np.all(np.isfinite(fx[used])):
        raise ValueError("integrand is not finite on the support of the measure")
    return float(np.sum(w[used] * fx[used]))


def integrate_with_error(measure: InitialMeasure, f: Callable, sup_f: float | None = None):
    """``(mu(f), error)``.

    For grid densities the error is ``tail * sup|f|`` (infinite when ``f`` is
    not declared bounded) plus the trapezoid discretization estimate
    ``|T_h - T_2h| / 3`` from the every-other-node subgrid.
    """
    value = integrate(measure, f)
    if isinstance(measure, AtomicMeasure):
        return value, 0.0
    x, p = measure.grid, measure.pdf
    keep = np.unique(np.r_[np.arange(0, x.size, 2), x.size - 1])
    xs = x[keep]
    with np.errstate(over="ignore", invalid="ignore"):
        coarse = float(_trapezoid_weights(xs) @ (p[keep] * np.broadcast_to(f(xs), xs.shape)))
    disc = abs(value - coarse) / 3.0
    if measure.tail_bound == 0:
        return value, disc
    if sup_f is None:
        return value, math.inf
    return value, measure.tail_bound * sup_f + disc


def moment(measure: InitialMeasure, k: float) -> float:
    if k < 0:
        raise ValueError("moment order must be >= 0")
    report = check_integrability(measure, None, k)
    if not report.finite:
        raise IntegrabilityError(f"moment of order {k} is not finite")
    return report.value


def _fitted_decay(measure: GridDensity) -> float:
    x, p = measure.grid, measure.pdf
    n = max(3, int(TAIL_FIT_FRACTION * x.size))
    xs, ps = x[-n:], p[-n:]
    keep = ps > 0
    if keep.sum() < 3:
        return math.inf  # compactly supported on the grid
    slope = np.polyfit(xs[keep], np.log(ps[keep]), 1)[0]
    return -float(slope)


def check_integrability(measure: InitialMeasure, params: DriftParams | None, k: float) -> MomentReport:
    """``int x^k e^{r x} mu(dx)`` with a finiteness verdict.

    With ``params=None`` the exponential weight is dropped (plain moment).
    For grid densities the tail beyond the grid is extrapolated from an
    exponential fit to the last cells; a fitted decay rate at or below ``r``
    is reported as non-finite.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    r = params.r if params is not None else 0.0
    x, w = measure.nodes_weights()
    used = w > 0
    with np.errstate(divide="ignore"):
        log_x = k * np.log(x[used]) if k > 0 else np.zeros(int(used.sum()))
        log_terms = np.log(w[used]) + log_x + r * x[used]
    log_value = float(logsumexp(log_terms)) if log_terms.size else -math.inf
    value = math.exp(log_value) if log_value < math.log(OVERFLOW_THRESHOLD) else math.inf

    if isinstance(measure, GridDensity) and measure.pdf[-1] > 0 and math.isfinite(value):
        decay = _fitted_decay(measure)
        if params is not None and decay <= r * (1.0 + 1e-3):
            value = math.inf
        elif params is None and decay <= 0:
            value = math.inf
        elif math.isfinite(decay):
            # int_X^inf p(X) e^{-decay (x-X)} x^k e^{r x} dx, integrated numerically
            X, pX = measure.grid[-1], measure.pdf[-1]
            lam = decay - r
            u = np.linspace(0.0, 60.0 / lam, 4001)
            integrand = pX * np.exp(-lam * u + r * X) * (X + u) ** k
            value += float(_trapezoid_weights(u) @ integrand)
    finite = math.isfinite(value) and value < OVERFLOW_THRESHOLD
    return MomentReport(k=int(k) if float(k).is_integer() else k, exponential=params is not None,
                        value=value if finite else math.inf, finite=finite)


def eta_mass(measure: InitialMeasure, params: DriftParams) -> float:
    """``mu(eta)``; raises when it overflows or the tail makes it infinite."""
    report = check_integrability(measure, params, 1)
    if not report.finite:
        raise IntegrabilityError("mu(eta) is not finite: the initial law decays no faster than e^{-r x}")
    return report.value / params.r ** 2


def eta_transform(measure: InitialMeasure, params: DriftParams) -> InitialMeasure:
    """Reweight ``mu`` by the eigenfunction: ``eta(x) mu(dx) / mu(eta)``."""
    eta_mass(measure, params)  # gate on integrability
    if isinstance(measure, AtomicMeasure):
        logw = np.log(measure.weights) + log_eta(params, measure.locations)
        w = np.exp(logw - logsumexp(logw))
        w = w / w.sum()
        return AtomicMeasure(measure.locations, w)
    x = measure.grid
    with np.errstate(divide="ignore"):
        logp = np.where(measure.pdf > 0, np.log(measure.pdf), -np.inf) + log_eta(params, x)
    logp = np.where(x > 0, logp, -np.inf)
    p = np.exp(logp - logp.max())
    # tail of the reweighted law, relative to the grid mass, from the same extrapolation
    total = check_integrability(measure, params, 1).value
    on_grid = float(measure._weights @ (measure.pdf * x * np.exp(params.r * x)))
    tail = max(0.0, 1.0 - on_grid / total) if total > 0 else 0.0
    mass = float(measure._weights @ p)
    return GridDensity(x, p * (1.0 - tail) / mass, tail)


def second_moment_eta(measure: InitialMeasure, params: DriftParams) -> float:
    """``int x^2 (eta o mu)(dx)``: the measure-dependent part of every rate constant."""
    num = check_integrability(measure, params, 3)
    if not num.finite:
        raise IntegrabilityError(
            "integrability condition int x^3 e^{r x} mu(dx) < inf fails; the 1/t rate "
            "theory does not cover this initial law (its tail decays no faster than e^{-r x}, "
            "as for the Yaglom limit itself)")
    return num.value / (eta_mass(measure, params) * params.r ** 2)


def yaglom_measure(params: DriftParams, n: int = 20001, span: float = 60.0) -> GridDensity:
    """The Yaglom limit tabulated on ``[0, span / r]``."""
    grid = np.linspace(0.0, span / params.r, n)
    tail = 1.0 - float(yaglom_cdf(params, grid[-1]))
    return GridDensity.from_callable(lambda x: yaglom_pdf(params, x), grid, tail)


def exponential_measure(rate: float, n: int = 20001, span: float = 60.0) -> GridDensity:
    """Density proportional to ``exp(-rate x)`` on ``[0, span / rate]``."""
    grid = np.linspace(0.0, span / rate, n)
    tail = math.exp(-span)
    return GridDensity.from_callable(lambda x: rate * np.exp(-rate * x), grid, tail)


def measure_from_dict(doc: dict) -> InitialMeasure:
    kind = doc.get("type")
    if kind == "atomic":
        return AtomicMeasure.from_pairs(doc["atoms"])
    if kind == "grid":
        return GridDensity(np.asarray(doc["x"], float), np.asarray(doc["pdf"], float),
                           float(doc.get("tail", 0.0)))
    raise ValueError(f"unknown measure type {kind!r}; expected 'atomic' or 'grid'")


def load_measure(path) -> InitialMeasure:
    return measure_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def measure_hash(measure: InitialMeasure) -> str:
    payload = json.dumps(measure.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
