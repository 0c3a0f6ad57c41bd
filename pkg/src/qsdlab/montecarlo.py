"""Monte Carlo oracles: killed drifted Brownian paths and exact Bessel-3 draws.

Random streams are Philox counters keyed by the seed, one stream per batch
of ``batch_size`` paths (the batch index sits in the high counter word), so
results do not depend on how batches are scheduled across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import DriftParams, lambda0, log_eta
from .measures import AtomicMeasure, GridDensity, InitialMeasure
from ._parallel import ordered_map

MAX_STEP = 0.1
MIN_PATHS = 1000
BRIDGE_CUTOFF = 40.0  # exp(-40) is below double-precision uniform resolution


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    step: float = 1e-3
    seed: int = 0
    batch_size: int = 50_000
    workers: int | None = None

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < MIN_PATHS:
            raise ValueError(f"n_paths must be an integer >= {MIN_PATHS}")
        if not 0 < self.step <= MAX_STEP:
            raise ValueError(f"step must lie in (0, {MAX_STEP}]")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be > 0")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")

    def batches(self) -> list[tuple[int, int]]:
        """``(batch index, paths in batch)``."""
        full, rest = divmod(self.n_paths, self.batch_size)
        sizes = [self.batch_size] * full + ([rest] if rest else [])
        return list(enumerate(sizes))


@dataclass(frozen=True)
class McBatch:
    """Endpoints of simulated paths.

    ``weight`` is the per-path weight ``1 / n`` of the empirical measure;
    ``starts`` keeps the initial points for reweighting.
    """

    endpoints: np.ndarray
    survived: np.ndarray
    weight: float
    starts: np.ndarray
    t: float
    r: float | None = None
    step: float | None = None
    seed_lineage: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.endpoints.shape != self.survived.shape or self.endpoints.size == 0:
            raise ValueError("endpoints and survived must be non-empty and aligned")
        if np.any(self.endpoints[self.survived] <= 0):
            raise ValueError("surviving endpoints must be > 0")

    @property
    def n(self) -> int:
        return self.endpoints.size


def _rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(batch)]))


def _sample_start(measure: InitialMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(measure, AtomicMeasure):
        if measure.locations.size == 1:
            return np.full(n, measure.locations[0])
        return rng.choice(measure.locations, size=n, p=measure.weights)
    if isinstance(measure, GridDensity):
        # cell by its trapezoid mass, then the linear density within the cell
        x, p = measure.grid, measure.pdf
        h = np.diff(x)
        mass = 0.5 * h * (p[:-1] + p[1:])
        cell = rng.choice(mass.size, size=n, p=mass / mass.sum())
        u = rng.random(n)
        p0, p1 = p[cell], p[cell + 1]
        slope = p1 - p0
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(np.abs(slope) > 1e-12 * np.maximum(p0, p1),
                            (np.sqrt(p0 * p0 + u * (p1 * p1 - p0 * p0)) - p0) / slope, u)
        out = x[cell] + h[cell] * frac
        return np.maximum(out, np.nextafter(0.0, 1.0))
    raise TypeError(f"unsupported measure type {type(measure).__name__}")


def _step_sizes(t: float, h: float) -> np.ndarray:
    n = max(1, math.ceil(t / h - 1e-9))
    steps = np.full(n, h)
    steps[-1] = t - (n - 1) * h
    return steps


def _killed_batch(params, measure, t, cfg, batch, size):
    rng = _rng(cfg.seed, batch)
    starts = _sample_start(measure, size, rng)
    x = starts.copy()
    alive = np.ones(size, dtype=bool)
    idx = np.arange(size)
    r = params.r
    for dt in _step_sizes(t, cfg.step):
        cur = x[idx]
        new = cur + math.sqrt(dt) * rng.standard_normal(idx.size) - r * dt
        dead = new <= 0
        # Brownian bridge between positive endpoints crosses 0 w.p. exp(-2ab/dt)
        expo = 2.0 * cur * new / dt
        near = ~dead & (expo < BRIDGE_CUTOFF)
        if np.any(near):
            u = rng.random(int(near.sum()))
            dead[near] = u < np.exp(-expo[near])
        x[idx] = new
        alive[idx[dead]] = False
        idx = idx[~dead]
        if idx.size == 0:
            break
    return x, alive, starts


def simulate_killed(params: DriftParams, start: InitialMeasure, t: float, cfg: McConfig) -> McBatch:
    """Euler paths of ``X_0 + B_t - r t`` killed at 0, with bridge crossing checks."""
    if t <= 0:
        raise ValueError("t must be > 0")
    parts = ordered_map(lambda b: _killed_batch(params, start, t, cfg, *b), cfg.batches(), cfg.workers)
    x = np.concatenate([p[0] for p in parts])
    alive = np.concatenate([p[1] for p in parts])
    starts = np.concatenate([p[2] for p in parts])
    return McBatch(x, alive, 1.0 / x.size, starts, t, params.r, cfg.step,
                   {"generator": "Philox", "seed": int(cfg.seed), "batch_size": cfg.batch_size,
                    "n_batches": len(cfg.batches())})


def _bessel_batch(x0, t, cfg, batch, size):
    rng = _rng(cfg.seed, batch)
    z = math.sqrt(t) * rng.standard_normal((size, 3))
    z[:, 0] += x0
    return np.sqrt(np.einsum("ij,ij->i", z, z))


def simulate_bessel3(x0: float, t: float, cfg: McConfig) -> McBatch:
    """Exact Bessel-3 marginal: ``|x0 e_1 + W_t|`` for a 3-d Brownian motion ``W``."""
    if x0 < 0 or t <= 0:
        raise ValueError("need x0 >= 0 and t > 0")
    parts = ordered_map(lambda b: _bessel_batch(x0, t, cfg, *b), cfg.batches(), cfg.workers)
    y = np.concatenate(parts)
    return McBatch(y, np.ones(y.size, dtype=bool), 1.0 / y.size, np.full(y.size, float(x0)), t,
                   None, None, {"generator": "Philox", "seed": int(cfg.seed), "batch_size": cfg.batch_size,
                                "n_batches": len(cfg.batches())})


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n: int


def _pairwise_sum(v: np.ndarray) -> float:
    # numpy's add.reduce is pairwise on contiguous arrays: fixed order for fixed input
    return float(np.add.reduce(np.ascontiguousarray(v, dtype=float)))


def estimate_expectation(batch: McBatch, f, weights: np.ndarray | None = None) -> McEstimate:
    """Mean of ``f`` over survivors (a ratio estimator) with its delta-method error.

    Optional ``weights`` (per path, ignored where killed) turn it into a
    self-normalized importance estimate.
    """
    s = batch.survived
    if not np.any(s):
        raise ValueError("no surviving paths: the conditional mean is undefined")
    y = batch.endpoints[s]
    fy = np.broadcast_to(np.asarray(f(y), dtype=float), y.shape)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)[s]
    total = _pairwise_sum(w)
    mean = _pairwise_sum(w * fy) / total
    resid = w * (fy - mean)
    se = math.sqrt(_pairwise_sum(resid * resid)) / total
    return McEstimate(mean, se, int(y.size))


def survival_estimate(batch: McBatch) -> McEstimate:
    p = float(batch.survived.mean())
    return McEstimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / batch.n), batch.n)


def qprocess_weights(batch: McBatch, params: DriftParams) -> np.ndarray:
    """``e^{lambda0 t} eta(X_t) / eta(X_0)`` on survivors, 0 elsewhere."""
    w = np.zeros(batch.n)
    s = batch.survived
    w[s] = np.exp(lambda0(params) * batch.t + log_eta(params, batch.endpoints[s])
                  - log_eta(params, batch.starts[s]))
    return w


def estimate_covariance_constant(batch: McBatch, g) -> McEstimate:
    """``E[g(Y)] E[Y^2] - E[g(Y) Y^2]`` from an unkilled batch, with an influence-function error."""
    y = batch.endpoints[batch.survived]
    gy = np.asarray(g(y), dtype=float)
    y2 = y * y
    n = y.size
    Eg, Ey2, Egy2 = gy.mean(), y2.mean(), (gy * y2).mean()
    value = Eg * Ey2 - Egy2
    infl = Ey2 * (gy - Eg) + Eg * (y2 - Ey2) - (gy * y2 - Egy2)
    return McEstimate(float(value), float(infl.std(ddof=1) / math.sqrt(n)), n)


def weighted_ks(samples: np.ndarray, cdf, weights: np.ndarray | None = None) -> tuple[float, float]:
    """Kolmogorov statistic of a (weighted) sample against ``cdf`` and the effective size."""
    order = np.argsort(samples, kind="stable")
    y = samples[order]
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)[order]
    total = w.sum()
    upper = np.cumsum(w) / total
    lower = upper - w / total
    F = np.asarray(cdf(y), dtype=float)
    stat = float(max(np.max(upper - F), np.max(F - lower)))
    n_eff = float(total * total / np.sum(w * w))
    return stat, n_eff


def dkw_bound(n: float, alpha: float = 0.05) -> float:
    """Dvoretzky-Kiefer-Wolfowitz radius: ``P(sup|F_n - F| > eps) <= alpha``."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def batch_summary(batch: McBatch, f=None) -> dict:
    """JSON-ready summary; ``mean``/``se`` are of ``f`` over survivors (survival fraction if ``f`` is None)."""
    est = survival_estimate(batch) if f is None else estimate_expectation(batch, f)
    return {"n": batch.n, "survived": int(batch.survived.sum()), "mean": est.mean, "se": est.std_error,
            "seed": batch.seed_lineage.get("seed"), "h": batch.step, "r": batch.r, "t": batch.t}
