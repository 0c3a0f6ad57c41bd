"""Test functions with the envelope constants the rate bounds need."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class FunctionSpec:
    """A scalar test function plus caller-declared integrability data.

    ``c_f`` and ``c_f_prime`` are half the integrals of ``|f(y)| y^2`` and
    ``|f(y)| y^4`` over the half line (``inf`` when they diverge).
    ``cutoff`` is a point beyond which both integrals have negligible tails,
    and ``breakpoints`` lists kinks or jumps that quadrature panels must
    respect.
    """

    name: str
    evaluator: Callable
    c_f: float = math.inf
    c_f_prime: float = math.inf
    lipschitz_const: Optional[float] = None
    f_at_0: Optional[float] = None
    cutoff: float = math.inf
    breakpoints: tuple = ()
    nonnegative: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, y):
        return self.evaluator(np.asarray(y, dtype=float))

    @property
    def integrable(self) -> bool:
        return math.isfinite(self.c_f) and math.isfinite(self.c_f_prime) and math.isfinite(self.cutoff)


def one() -> FunctionSpec:
    return FunctionSpec("one", lambda y: np.ones_like(y), lipschitz_const=0.0, f_at_0=1.0,
                        nonnegative=True)


def one_plus_x() -> FunctionSpec:
    return FunctionSpec("one-plus-x", lambda y: 1.0 + y, lipschitz_const=1.0, f_at_0=1.0,
                        nonnegative=True)


def identity() -> FunctionSpec:
    return FunctionSpec("x", lambda y: y * 1.0, lipschitz_const=1.0, f_at_0=0.0, nonnegative=True)


def hinge() -> FunctionSpec:
    """``(1 - x) v 0``; supported on [0, 1]."""
    return FunctionSpec("hinge", lambda y: np.maximum(1.0 - y, 0.0),
                        c_f=1.0 / 24.0, c_f_prime=1.0 / 60.0,
                        lipschitz_const=1.0, f_at_0=1.0, cutoff=1.0, breakpoints=(1.0,),
                        nonnegative=True)


def exp_decay() -> FunctionSpec:
    """``e^{-y}``: ``c_f = Gamma(3)/2 = 1``, ``c_f' = Gamma(5)/2 = 12``."""
    return FunctionSpec("exp-decay", lambda y: np.exp(-y), c_f=1.0, c_f_prime=12.0,
                        lipschitz_const=1.0, f_at_0=1.0, cutoff=80.0, nonnegative=True)


def y_exp_decay() -> FunctionSpec:
    """``y e^{-y}``: ``c_f = Gamma(4)/2 = 3``, ``c_f' = Gamma(6)/2 = 60``."""
    return FunctionSpec("y-exp-decay", lambda y: y * np.exp(-y), c_f=3.0, c_f_prime=60.0,
                        lipschitz_const=1.0, f_at_0=0.0, cutoff=85.0, nonnegative=True)


def zero() -> FunctionSpec:
    return FunctionSpec("zero", lambda y: np.zeros_like(y), c_f=0.0, c_f_prime=0.0,
                        lipschitz_const=0.0, f_at_0=0.0, cutoff=1.0, nonnegative=True)


def indicator(a: float, b: float) -> FunctionSpec:
    if not 0 <= a < b:
        raise ValueError("indicator needs 0 <= a < b")
    return FunctionSpec(f"indicator:{a:g},{b:g}",
                        lambda y: ((y >= a) & (y <= b)).astype(float),
                        c_f=(b ** 3 - a ** 3) / 6.0, c_f_prime=(b ** 5 - a ** 5) / 10.0,
                        f_at_0=1.0 if a == 0 else 0.0, cutoff=b, breakpoints=(a, b),
                        nonnegative=True)


def divided_by_eta(f: FunctionSpec, r: float) -> FunctionSpec:
    """``f / eta`` with ``eta(y) = y e^{ry} / r^2``.

    Valid for ``f`` with at most polynomial growth; the envelope constants are
    computed numerically and the cutoff is chosen where ``e^{-ry}`` has killed
    polynomial factors of degree up to 8.
    """
    def g(y):
        with np.errstate(divide="ignore", invalid="ignore"):
            return f(y) * r * r * np.exp(-r * y) / y

    cutoff = (90.0 + 8.0 * math.log1p(90.0 / r)) / r
    from .quadrature import integrate, uniform_knots
    knots = np.union1d(uniform_knots(0.0, cutoff, 0.25 / r), np.asarray(f.breakpoints, float))
    knots = knots[(knots >= 0) & (knots <= cutoff)]
    c = 0.5 * integrate(lambda y: np.abs(f(y)) * r * r * y * np.exp(-r * y), knots)
    c4 = 0.5 * integrate(lambda y: np.abs(f(y)) * r * r * y ** 3 * np.exp(-r * y), knots)
    return FunctionSpec(f"{f.name}/eta", g, c_f=c, c_f_prime=c4, cutoff=cutoff,
                        breakpoints=f.breakpoints, nonnegative=f.nonnegative,
                        meta={"base": f.name, "r": r})


BUILTIN = {
    "one": one,
    "one-plus-x": one_plus_x,
    "x": identity,
    "hinge": hinge,
    "exp-decay": exp_decay,
    "y-exp-decay": y_exp_decay,
    "zero": zero,
}


def parse_function(spec: str) -> FunctionSpec:
    """Parse names like ``exp-decay`` or ``indicator:0.5,2``."""
    spec = spec.strip()
    if spec.startswith("indicator:"):
        a, b = (float(v) for v in spec.split(":", 1)[1].split(","))
        return indicator(a, b)
    try:
        return BUILTIN[spec]()
    except KeyError:
        raise ValueError(f"unknown function spec {spec!r}; known: {sorted(BUILTIN)} or indicator:a,b") from None
