"""The 1/t rate constants and t-sweeps that tabulate them.

Finite-t expectations go through the eta-ratio

    E_mu[f(X_t) | tau_0 > t] = K_t (eta o mu) Q_t[f/eta] / K_t (eta o mu) Q_t[1/eta],

where numerator and denominator are written as ``gamma(.) - gap`` with the
gap evaluated from the nonnegative sinh remainder.  No factor
``exp(-lambda0 t)`` is ever formed.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import analytic as an
from .analytic import DriftParams
from .distances import distance as _distance
from .functions import FunctionSpec, divided_by_eta, hinge, one, one_plus_x
from .laws import (GridSpec, SCHEMA_VERSION, _conditional_law, _marginal_extent, gamma_integral,
                   lemma1_gap, qprocess_density, qprocess_marginal, time_s_conditional_law,
                   write_json, yaglom_law_for)
from .measures import (AtomicMeasure, InitialMeasure, IntegrabilityError, check_integrability, eta_transform,
                       measure_hash, moment, second_moment_eta)
from .quadrature import panel_rule, uniform_knots
from ._parallel import ordered_map

DEFAULT_T_GRID = (25.0, 50.0, 100.0, 200.0, 400.0, 800.0)
REDUCTION_RTOL = 1e-8

REFUSAL_K3 = ("integrability condition int x^3 e^{r x} mu(dx) < inf fails for this initial law; "
              "the 1/t rate statement does not cover it. The Yaglom law itself is the boundary "
              "case (density decay exactly e^{-r x}), where the rate is an open question.")
REFUSAL_K4 = ("integrability condition int x^4 e^{r x} mu(dx) < inf fails for this initial law; "
              "the Q-process rate statement needs it for the W1 distance.")


# --- tables ------------------------------------------------------------------

@dataclass(frozen=True)
class RateTable:
    """Rows ``(t, distance, t * distance, predicted, error)``.

    ``predicted`` is NaN where no prediction exists.  ``extra`` holds further
    per-row columns (envelopes, witnesses) that go to the JSON manifest, and
    ``violations`` lists every proved inequality that failed beyond the
    certified error.
    """

    t: np.ndarray
    distance: np.ndarray
    t_x_distance: np.ndarray
    predicted: np.ndarray
    error: np.ndarray
    kind: str = ""
    extra: dict = field(default_factory=dict, compare=False)
    manifest: dict = field(default_factory=dict, compare=False)
    violations: tuple = ()

    HEADER = ("t", "distance", "t_x_distance", "predicted", "error")

    def __post_init__(self):
        cols = [np.atleast_1d(np.asarray(getattr(self, k), dtype=float)) for k in self.HEADER]
        n = cols[0].size
        if any(c.shape != (n,) for c in cols):
            raise ValueError("all RateTable columns must have the same length")
        if n > 1 and np.any(np.diff(cols[0]) <= 0):
            raise ValueError("t must be strictly increasing")
        for name, c in zip(self.HEADER, cols):
            if name != "predicted" and not np.all(np.isfinite(c)):
                raise ValueError(f"column {name!r} has non-finite values")
        for name, c in zip(self.HEADER, cols):
            c.setflags(write=False)
            object.__setattr__(self, name, c)
        object.__setattr__(self, "violations", tuple(self.violations))

    def __len__(self):
        return self.t.size

    @property
    def last(self) -> float:
        return float(self.t_x_distance[-1])

    def richardson(self) -> float:
        """Two-point extrapolate of ``t * distance`` assuming ``c + b / t``."""
        if len(self) < 2:
            return math.nan
        return richardson(self.t[-2], self.t_x_distance[-2], self.t[-1], self.t_x_distance[-1])

    def to_csv(self, path):
        """Write the CSV and its JSON manifest next to it; returns the manifest path."""
        from pathlib import Path

        from .laws import _atomic_write
        path = Path(path)
        lines = [",".join(self.HEADER)]
        for row in zip(self.t, self.distance, self.t_x_distance, self.predicted, self.error):
            lines.append(",".join("" if math.isnan(v) else repr(float(v)) for v in row))
        _atomic_write(path, "\n".join(lines) + "\n")
        side = path.with_suffix(".json")
        write_json(side, self.manifest_doc())
        return side

    def manifest_doc(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "code_version": __version__, "kind": self.kind,
                **self.manifest,
                "last_t_x_distance": self.last, "richardson_t_x_distance": _nan_to_none(self.richardson()),
                "extra_columns": {k: [_nan_to_none(float(v)) for v in np.atleast_1d(col)]
                                  for k, col in self.extra.items()},
                "violations": list(self.violations)}


def _nan_to_none(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def richardson(t1, v1, t2, v2) -> float:
    """Eliminate the ``1/t`` term from ``v(t) = L + a/t + O(1/t^2)``."""
    return float((t2 * v2 - t1 * v1) / (t2 - t1))


# --- Yaglom functionals --------------------------------------------------------

def _times_power(f: FunctionSpec, k: int) -> FunctionSpec:
    return FunctionSpec(f"{f.name}*y^{k}", lambda y: f(y) * y ** k, breakpoints=f.breakpoints,
                        nonnegative=f.nonnegative)


def yaglom_expectation(f: FunctionSpec, params: DriftParams) -> float:
    """``alpha(f)``, using ``gamma(f/eta) = alpha(f)``."""
    return gamma_integral(divided_by_eta(f, params.r))


# --- K_t-normalized gap ----------------------------------------------------------

def lemma1_limit(measure: InitialMeasure, f: FunctionSpec) -> float:
    """``int int f(y) y^2 (x^2 + y^2) / 2 dy mu(dx)``, the limit of ``t (gamma(f) - K_t mu Q_t f)``."""
    from .laws import _y_rule
    x, wx = measure.nodes_weights()
    y, wy = _y_rule(f, 1.0, np.empty(0))
    fy = f(y)
    if np.any(fy < 0):
        raise ValueError(f"function {f.name!r} takes negative values; the limit needs f >= 0")
    x2 = float(np.sum(wx * x * x))
    return 0.5 * float(np.sum(wy * fy * y * y * (x2 + y * y)))


def _lemma1_row(measure, f, t):
    gap = lemma1_gap(measure, t, f)
    coarse = lemma1_gap(measure, t, f, order=8)
    err = abs(gap - coarse) + 1e-15 * abs(gap)
    return gap, err


def lemma1_check(measure: InitialMeasure, f: FunctionSpec, t_grid, workers: int | None = None) -> RateTable:
    """Tabulate ``|gamma(f) - K_t mu Q_t f|`` against its ``1/t`` bound.

    ``predicted`` holds the limit of ``t * gap`` when ``f >= 0``; the
    ``ratio`` column is ``t |gap| / (C_f mu(x^2) + C'_f)`` and must be <= 1.
    """
    t_grid = np.sort(np.asarray(list(t_grid), dtype=float))
    if np.any(t_grid <= 0):
        raise ValueError("t values must be > 0")
    m2 = moment(measure, 2)
    bound = f.c_f * m2 + f.c_f_prime
    rows = ordered_map(lambda t: _lemma1_row(measure, f, t), t_grid, workers)
    gap = np.array([g for g, _ in rows])
    err = np.array([e for _, e in rows])
    dist = np.abs(gap)
    limit = lemma1_limit(measure, f) if f.nonnegative else math.nan
    ratio = t_grid * dist / bound if bound > 0 else np.zeros_like(dist)
    violations = [f"t={t:g}: |gap|={d:.6g} exceeds bound {bound / t:.6g}"
                  for t, d, e in zip(t_grid, dist, err) if d > bound / t + e]
    if f.nonnegative:
        violations += [f"t={t:g}: gap={g:.6g} is negative for f >= 0"
                       for t, g, e in zip(t_grid, gap, err) if g < -e]
    return RateTable(t_grid, dist, t_grid * dist, np.full_like(dist, limit), err, kind="lemma1-gap",
                     extra={"ratio": ratio, "bound": np.full_like(dist, bound), "signed_gap": gap},
                     manifest={"measure": measure_hash(measure), "function": f.name,
                               "m2": m2, "c_f": f.c_f, "c_f_prime": f.c_f_prime},
                     violations=violations)


# --- Yaglom convergence rate -----------------------------------------------------

def psi(measure: InitialMeasure, f: FunctionSpec, params: DriftParams, method: str = "suite") -> float:
    """First-order correction functional.

    ``method="suite"`` uses ``alpha(f) m2 / 2 + alpha(f y^2) / 2`` with
    ``m2`` the second moment of ``eta o mu``; ``method="notation"`` evaluates
    the defining double integral against ``y^2 / eta(y) dy`` directly.
    """
    if method == "suite":
        m2 = second_moment_eta(measure, params)
        return 0.5 * yaglom_expectation(f, params) * m2 + 0.5 * yaglom_expectation(_times_power(f, 2), params)
    if method == "notation":
        second_moment_eta(measure, params)  # same integrability gate
        from .laws import _y_rule
        weighted = eta_transform(measure, params)
        x, wx = weighted.nodes_weights()
        g = divided_by_eta(f, params.r)
        y, wy = _y_rule(g, 1.0, np.empty(0))
        inner = wy * g(y) * y * y
        # sum_i w_i sum_j v_j (x_i^2 + y_j^2) / 2, accumulated in fixed order
        return 0.5 * float(np.sum(wx * x * x) * np.sum(inner) + np.sum(wx) * np.sum(inner * y * y))
    raise ValueError(f"unknown psi method {method!r}; use 'suite' or 'notation'")


def first_order_constant(f: FunctionSpec, measure: InitialMeasure, params: DriftParams) -> float:
    """The ``1/t`` coefficient of ``E_mu[f(X_t) | tau_0 > t]``.

    Computed as ``alpha(f) psi(1) - psi(f)``; the result must match the
    measure-free reduction ``(alpha(f) alpha(y^2) - alpha(f y^2)) / 2``.
    """
    a_f = yaglom_expectation(f, params)
    value = a_f * psi(measure, one(), params) - psi(measure, f, params)
    reduced = 0.5 * (a_f * an.yaglom_moment(params, 2) - yaglom_expectation(_times_power(f, 2), params))
    scale = max(abs(reduced), abs(a_f) * an.yaglom_moment(params, 2), 1e-300)
    if abs(value - reduced) > REDUCTION_RTOL * scale:
        raise ArithmeticError(f"first-order constant {value!r} differs from its reduction {reduced!r}")
    return value


@dataclass(frozen=True)
class Theorem1Constants:
    C: float
    C_prime: float
    C_mu: float
    C_mu_prime: float
    C_mu_second: float

    @property
    def envelope(self) -> float:
        return max(self.C_mu_prime, self.C_mu_second)

    @property
    def t_min(self) -> float:
        """The envelope holds for ``t >= C_mu + 1``."""
        return self.C_mu + 1.0


def uniform_constants(params: DriftParams) -> tuple[float, float]:
    """``C = int (1+x) x e^{-rx} dx`` and ``C' = int (1+x) x^3 e^{-rx} dx``."""
    r = params.r
    return 1.0 / r ** 2 + 2.0 / r ** 3, 6.0 / r ** 4 + 24.0 / r ** 5


def theorem1_constants(measure: InitialMeasure, params: DriftParams) -> Theorem1Constants:
    C, Cp = uniform_constants(params)
    c_mu = C * second_moment_eta(measure, params) + Cp
    ratio = c_mu / (c_mu + 1.0)
    c_mu_prime = c_mu * (1.0 + (1.0 + 2.0 / params.r + ratio) / (1.0 - c_mu / (1.0 + c_mu)))
    c_mu_second = c_mu * (2.0 + 2.0 / params.r + ratio)
    return Theorem1Constants(C, Cp, c_mu, c_mu_prime, c_mu_second)


@dataclass(frozen=True)
class ConditionalExpectation:
    value: float
    alpha: float
    scaled_deviation: float  # t * (value - alpha), evaluated without cancellation


def conditional_expectation(params: DriftParams, measure: InitialMeasure, t: float,
                            f: FunctionSpec) -> ConditionalExpectation:
    """``E_mu[f(X_t) | tau_0 > t]`` through the eta-ratio; valid for any ``t > 0``."""
    if t <= 0:
        raise ValueError("t must be > 0")
    g = divided_by_eta(f, params.r)
    h = divided_by_eta(one(), params.r)
    weighted = eta_transform(measure, params)
    A, B = gamma_integral(g), gamma_integral(h)
    a, b = lemma1_gap(weighted, t, g), lemma1_gap(weighted, t, h)
    value = (A - a) / (B - b)
    scaled = t * (A * b - a * B) / (B * (B - b))
    return ConditionalExpectation(float(value), float(A / B), float(scaled))


def conjectured_limit(params: DriftParams, kind: str) -> float:
    """Candidate value of ``lim t * d(law_t, Yaglom)`` (unproved).

    The first-order signed measure is ``n(y) = (alpha(y^2) - y^2) alpha(dy) / 2``
    with cumulative ``N(y) = e^{-ry} (r y^3 + 3 y^2) / 2 >= 0``.  The
    candidates are ``int N`` (W1), ``int |n|`` (TV) and ``sup N``
    (Kolmogorov); ``n`` changes sign once, at ``sqrt(6) / r``.
    """
    r = params.r
    peak = math.exp(-math.sqrt(6.0)) * (3.0 * math.sqrt(6.0) + 9.0) / r ** 2
    key = kind.lower()
    if key in ("w1", "wasserstein", "wasserstein1"):
        return 6.0 / r ** 3
    if key in ("tv", "total_variation"):
        return 2.0 * peak
    if key in ("kolmogorov", "kolm", "ks"):
        return peak
    raise ValueError(f"unknown distance {kind!r}")


def _distance_kind(kind: str) -> str:
    key = kind.lower()
    for canon, names in (("W1", ("w1", "wasserstein", "wasserstein1")),
                         ("TV", ("tv", "total_variation")),
                         ("Kolmogorov", ("kolmogorov", "kolm", "ks"))):
        if key in names:
            return canon
    raise ValueError(f"unknown distance {kind!r}; use w1, tv or kolmogorov")


def theorem1_sweep(measure: InitialMeasure, params: DriftParams, kind: str = "W1",
                   t_grid=DEFAULT_T_GRID, grid_spec: GridSpec | None = None,
                   workers: int | None = None) -> RateTable:
    """``t * d(P_mu(X_t in .|tau_0 > t), Yaglom)`` over ``t_grid``.

    Records the proof envelope ``(C'_mu v C''_mu) / t`` (for ``t >= C_mu + 1``)
    and the witness ``t |E_mu[1 + X_t | tau_0 > t] - alpha(1 + x)|``, which
    bounds ``t * W1`` from below.  ``predicted`` is the conjectured limit.
    """
    kind = _distance_kind(kind)
    if not check_integrability(measure, params, 3).finite:
        raise IntegrabilityError(REFUSAL_K3)
    t_grid = np.sort(np.asarray(list(t_grid), dtype=float))
    if t_grid.size == 0 or np.any(t_grid <= 0):
        raise ValueError("t_grid must hold positive times")
    grid_spec = grid_spec or GridSpec()
    consts = theorem1_constants(measure, params)
    yag = yaglom_law_for(params, grid_spec)
    witness_f = one_plus_x()

    def row(t):
        law = _conditional_law(params, measure, t, grid_spec)
        d = _distance(kind, law, yag)
        w = conditional_expectation(params, measure, t, witness_f)
        return d, abs(w.scaled_deviation)

    rows = ordered_map(row, t_grid, workers)
    dist = np.array([d.value for d, _ in rows])
    err = np.array([d.error_bound for d, _ in rows])
    witness = np.array([w for _, w in rows])
    envelope = np.where(t_grid >= consts.t_min, consts.envelope / t_grid, np.nan)
    violations = []
    for t, d, e, env, w in zip(t_grid, dist, err, envelope, witness):
        if not d - e > 0:
            violations.append(f"t={t:g}: distance {d:.6g} not certified positive (error {e:.3g})")
        if not math.isnan(env) and d - e > env:
            violations.append(f"t={t:g}: distance {d:.6g} exceeds envelope {env:.6g}")
        if kind == "W1" and d + e < w / t * (1.0 - 1e-9):
            violations.append(f"t={t:g}: W1 {d:.6g} below the witness lower bound {w / t:.6g}")
    witness_limit = abs(first_order_constant(witness_f, measure, params))
    return RateTable(t_grid, dist, t_grid * dist, np.full_like(dist, conjectured_limit(params, kind)), err,
                     kind=kind,
                     extra={"envelope": envelope, "t_x_envelope": t_grid * envelope,
                            "witness_t_x_deviation": witness,
                            "witness_limit": np.full_like(dist, witness_limit)},
                     manifest={"sweep": "yaglom-rate", "measure": measure_hash(measure), "r": params.r,
                               "grid_spec": dataclasses.asdict(grid_spec),
                               "constants": dataclasses.asdict(consts),
                               "predicted_label": "conjectured limit"},
                     violations=violations)


# --- Q-process marginal rate -----------------------------------------------------

def _q_rule(measure: InitialMeasure, params: DriftParams, s: float, breakpoints=()):
    """Nodes and probability weights of the Q-process marginal at time ``s``."""
    weighted = eta_transform(measure, params)
    extent = _marginal_extent(measure, s)
    width = 0.1 * min(1.0, math.sqrt(s))
    atoms = weighted.locations if isinstance(weighted, AtomicMeasure) else np.empty(0)
    knots = uniform_knots(0.0, extent, width)
    extra = [b for b in list(breakpoints) + list(atoms) if 0 < b < extent]
    knots = np.union1d(knots, np.asarray(extra, dtype=float))
    nodes, weights = panel_rule(knots)
    y, w = nodes.ravel(), weights.ravel()
    w = w * qprocess_density(weighted, s)(y)
    return y, w / w.sum()


@dataclass(frozen=True)
class QMoments:
    s: float
    m1: float
    m2: float
    m3: float


def q_moments(measure: InitialMeasure, params: DriftParams, s: float) -> QMoments:
    y, w = _q_rule(measure, params, s)
    return QMoments(s, float(w @ y), float(w @ y ** 2), float(w @ y ** 3))


def _gate_k4(measure, params):
    if not check_integrability(measure, params, 4).finite:
        raise IntegrabilityError(REFUSAL_K4)


def theorem2_constant(measure: InitialMeasure, params: DriftParams, s: float,
                      g: FunctionSpec | None = None) -> float:
    """``E^Q[g(X_s)] E^Q[X_s^2] - E^Q[g(X_s) X_s^2]`` under ``Q_{eta o mu}``."""
    if s <= 0:
        raise ValueError("s must be > 0")
    _gate_k4(measure, params)
    g = g or hinge()
    y, w = _q_rule(measure, params, s, g.breakpoints)
    gy = g(y)
    return float((w @ gy) * (w @ y ** 2) - w @ (gy * y ** 2))


@dataclass(frozen=True)
class TimeSExpectation:
    value: float
    q_value: float
    scaled_deviation: float  # 2 t (value - q_value)


def time_s_expectation(params: DriftParams, measure: InitialMeasure, s: float, t: float,
                       g: FunctionSpec) -> TimeSExpectation:
    """``E_mu[g(X_s) | tau_0 > t]`` against ``E^Q_{eta o mu}[g(X_s)]``, for ``0 < s < t``.

    With ``T = t - s`` and ``h(y) = K_T Q_T[1/eta](y)``, the conditional
    expectation is ``E^Q[g h] / E^Q[h]``; writing ``h = 1 - d / T`` keeps the
    ``1/T`` deviation free of cancellation.
    """
    if not 0 < s < t:
        raise ValueError(f"need 0 < s < t, got s={s!r}, t={t!r}")
    T = t - s
    r = params.r
    y, w = _q_rule(measure, params, s, g.breakpoints)
    h = an.k_factor(T) * an.scaled_survival(params, T, y) * r * r * np.exp(-r * y) / y
    d = T * (1.0 - h)
    gy = g(y)
    Eg, Ed, Egd = float(w @ gy), float(w @ d), float(w @ (gy * d))
    dev = (Eg * Ed - Egd) / T / (1.0 - Ed / T)
    return TimeSExpectation(Eg + dev, Eg, 2.0 * t * dev)


def theorem2_conjectured_limit(moments: QMoments, kind: str = "W1", y=None, w=None) -> float:
    """Candidate ``lim t * d`` for the time-``s`` law (unproved).

    The first-order signed density is ``(E X^2 - y^2) q_s(y) / 2``, whose
    cumulative is nonnegative; W1 gives ``(E X^3 - E X^2 E X) / 2``.  TV and
    Kolmogorov need the marginal as nodes ``y`` with probability weights ``w``.
    """
    kind = _distance_kind(kind)
    if kind == "W1":
        return 0.5 * (moments.m3 - moments.m2 * moments.m1)
    order = np.argsort(y)
    cum = 0.5 * np.cumsum((w * (moments.m2 - y * y))[order])
    peak = float(cum.max())
    return 2.0 * peak if kind == "TV" else peak


def theorem2_envelope(moments: QMoments, params: DriftParams, s: float, t, kind: str = "W1"):
    """Upper bound on ``d`` at time ``t``; NaN where ``t <= s + C_phi``.

    W1 uses test functions with ``|f(x)| <= x``; TV and Kolmogorov use
    ``|f| <= 1``, which replaces ``E X`` by 1 and ``E X^3`` by ``E X^2``.
    """
    C, Cp = uniform_constants(params)
    c_phi = C * moments.m2 + Cp
    t = np.asarray(t, dtype=float)
    if _distance_kind(kind) == "W1":
        num = (c_phi + Cp) * moments.m1 + C * moments.m3
    else:
        num = (c_phi + Cp) + C * moments.m2
    denom = t - s - c_phi
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, num / denom, np.nan), c_phi


def theorem2_sweep(measure: InitialMeasure, params: DriftParams, s: float, t_grid=DEFAULT_T_GRID,
                   kind: str = "W1", grid_spec: GridSpec | None = None, g: FunctionSpec | None = None,
                   workers: int | None = None) -> RateTable:
    """``t * d(P_mu(X_s in .|tau_0 > t), Q_{eta o mu}(X_s in .))`` over ``t_grid``."""
    kind = _distance_kind(kind)
    t_grid = np.sort(np.asarray(list(t_grid), dtype=float))
    if t_grid.size == 0:
        raise ValueError("t_grid is empty")
    if not 0 < s < t_grid[0]:
        raise ValueError(f"need 0 < s < min(t_grid); got s={s!r}, min t={t_grid[0]!r}")
    _gate_k4(measure, params)
    grid_spec = grid_spec or GridSpec()
    g = g or hinge()
    q_law = qprocess_marginal(measure, params, s, grid_spec)
    moments = q_moments(measure, params, s)
    limit_const = theorem2_constant(measure, params, s, g)

    def row(t):
        law = time_s_conditional_law(params, measure, s, t, grid_spec)
        d = _distance(kind, law, q_law)
        return d, time_s_expectation(params, measure, s, t, g).scaled_deviation

    rows = ordered_map(row, t_grid, workers)
    dist = np.array([d.value for d, _ in rows])
    err = np.array([d.error_bound for d, _ in rows])
    witness = np.array([w for _, w in rows])
    envelope, c_phi = theorem2_envelope(moments, params, s, t_grid, kind)
    violations = []
    for t, d, e, env in zip(t_grid, dist, err, envelope):
        if not d - e > 0:
            violations.append(f"t={t:g}: distance {d:.6g} not certified positive (error {e:.3g})")
        if not math.isnan(env) and d - e > env:
            violations.append(f"t={t:g}: distance {d:.6g} exceeds envelope {env:.6g}")
    if kind == "W1":
        # |E[g | tau > t] - E^Q[g]| <= W1 since the hinge is 1-Lipschitz
        for t, d, e, w in zip(t_grid, dist, err, witness):
            if d + e < abs(w) / (2.0 * t) * (1.0 - 1e-9):
                violations.append(f"t={t:g}: W1 {d:.6g} below the hinge witness {abs(w) / (2 * t):.6g}")
    y, w = _q_rule(measure, params, s)
    predicted = theorem2_conjectured_limit(moments, kind=kind, y=y, w=w)
    return RateTable(t_grid, dist, t_grid * dist, np.full_like(dist, predicted), err, kind=kind,
                     extra={"envelope": envelope, "t_x_envelope": t_grid * envelope,
                            "witness_2t_x_deviation": witness,
                            "witness_limit": np.full_like(dist, limit_const)},
                     manifest={"sweep": "q-process-rate", "measure": measure_hash(measure), "r": params.r, "s": s,
                               "function": g.name, "grid_spec": dataclasses.asdict(grid_spec),
                               "q_moments": dataclasses.asdict(moments), "c_phi": c_phi,
                               "predicted_label": "conjectured limit"},
                     violations=violations)


def find_s0(measure: InitialMeasure, params: DriftParams, s_grid, g: FunctionSpec | None = None):
    """Smallest ``s`` in ``s_grid`` with ``E^Q[X_s^2] > 1`` and a positive limit constant.

    An empirical stand-in for the existential threshold; ``None`` if no grid
    point qualifies.
    """
    g = g or hinge()
    for s in sorted(float(v) for v in s_grid):
        if q_moments(measure, params, s).m2 > 1.0 and theorem2_constant(measure, params, s, g) > 0:
            return s
    return None
