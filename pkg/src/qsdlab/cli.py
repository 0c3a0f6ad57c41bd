"""Command-line entry point: ``qsdlab <command> [flags]``.

Exit status: 0 on success, 1 on input or integrability errors, 2 when a
proved inequality (or an MC cross-check) fails beyond its certified error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .analytic import DriftParams, survival_probability
from .functions import parse_function
from .laws import SCHEMA_VERSION, UnderflowError, _atomic_write, conditional_law, write_json, yaglom_law_for
from .measures import (AtomicMeasure, IntegrabilityError, exponential_measure, load_measure,
                       measure_hash, yaglom_measure)

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

COMMANDS = ("yaglom", "lemma1", "sweep-thm1", "sweep-thm2", "psi", "mc-validate")
EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 1, 2

DEFAULTS = {
    "r": 1.0,
    "measure": "dirac:1",
    "distance": "w1",
    "t": None,
    "s": None,
    "f": None,
    "out": None,
    "seed": 0,
    "n_paths": 100_000,
    "step": 1e-3,
    "x0": 1.0,
    "nodes": 4000,
}


class InputError(ValueError):
    pass


def parse_measure(spec: str, params: DriftParams):
    """``dirac:x``, ``mix:x1:w1,x2:w2``, ``expdensity:rate``, ``yaglom`` or ``file:path``."""
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    try:
        if head == "dirac":
            return AtomicMeasure.dirac(float(rest))
        if head == "mix":
            pairs = [tuple(float(v) for v in item.split(":")) for item in rest.split(",") if item]
            return AtomicMeasure.from_pairs(pairs)
        if head == "expdensity":
            return exponential_measure(float(rest))
        if head == "yaglom" and not rest:
            return yaglom_measure(params)
        if head == "file":
            return load_measure(rest)
    except (ValueError, OSError, KeyError) as exc:
        raise InputError(f"bad measure spec {spec!r}: {exc}") from exc
    raise InputError(f"unknown measure spec {spec!r}; use dirac:x, mix:x1:w1,..., expdensity:rate, "
                     "yaglom or file:path")


def _float_list(raw) -> list[float]:
    if raw is None:
        return []
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    if isinstance(raw, (int, float)):
        return [float(raw)]
    return [float(v) for v in str(raw).split(",") if v.strip()]


def load_config(path: str) -> dict:
    """Read a TOML config, or the ``config`` block of a JSON run manifest."""
    p = Path(path)
    try:
        if p.suffix == ".json":
            doc = json.loads(p.read_text(encoding="utf-8"))
            return dict(doc.get("config", doc))
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read config {path!r}: {exc}") from exc


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error status, keeping 2 for violations."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qsdlab", description=(
        "Quasi-stationary Brownian motion with drift -r killed at 0: Yaglom limit, "
        "Q-process and 1/t convergence rates."))
    parser.add_argument("--version", action="version", version=f"qsdlab {__version__}")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML config (or JSON run manifest) supplying defaults")
        p.add_argument("--r", type=float, help="drift magnitude r > 0")
        p.add_argument("--measure", help="initial law: dirac:x, mix:x1:w1,..., expdensity:rate, yaglom, file:path")
        p.add_argument("--t", help="comma-separated times")
        p.add_argument("--out", help="output CSV path (a JSON manifest is written next to it)")
        if name in ("sweep-thm1", "sweep-thm2"):
            p.add_argument("--distance", choices=("w1", "tv", "kolmogorov"))
        if name == "sweep-thm2":
            p.add_argument("--s", type=float, help="observation time s < min(t)")
        if name in ("lemma1", "psi", "sweep-thm2"):
            p.add_argument("--f", help="test function: one-plus-x, hinge, exp-decay, y-exp-decay, indicator:a,b")
        if name == "mc-validate":
            p.add_argument("--seed", type=int)
            p.add_argument("--n-paths", dest="n_paths", type=int)
            p.add_argument("--step", type=float)
            p.add_argument("--x0", type=float, help="Bessel-3 start point")
        if name == "yaglom":
            p.add_argument("--nodes", type=int, help="grid size")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        loaded = load_config(args.config)
        if loaded.get("command", args.command) != args.command:
            raise InputError(f"config is for {loaded['command']!r}, not {args.command!r}")
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items() if k != "command"})
    for key, value in vars(args).items():
        if key not in ("config", "command") and value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    cfg["t"] = _float_list(cfg.get("t"))
    if not float(cfg["r"]) > 0:
        raise InputError("r must be > 0")
    return cfg


def _out_path(cfg) -> Path:
    return Path(cfg["out"] or f"{cfg['command']}.csv")


def _manifest(cfg, measure=None, **extra) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "code_version": __version__, "config": cfg}
    if measure is not None:
        doc["measure"] = measure_hash(measure)
    doc.update(extra)
    return doc


def _write_table(table, cfg, measure) -> int:
    path = _out_path(cfg)
    table.to_csv(path)
    side = path.with_suffix(".json")
    doc = table.manifest_doc()
    doc["config"] = cfg
    write_json(side, doc)
    print(f"wrote {path} ({len(table)} rows); last t*d = {table.last:.6g}")
    for v in table.violations:
        print(f"VIOLATION: {v}", file=sys.stderr)
    return EXIT_VIOLATION if table.violations else EXIT_OK


def cmd_yaglom(cfg) -> int:
    from .laws import GridSpec
    params = DriftParams(float(cfg["r"]))
    law = yaglom_law_for(params, GridSpec(n_nodes=int(cfg["nodes"])))
    path = _out_path(cfg)
    law.to_csv(path)
    side = path.with_suffix(".json")
    doc = json.loads(side.read_text(encoding="utf-8"))
    doc["config"] = cfg
    write_json(side, doc)
    print(f"wrote {path} ({law.grid.size} nodes)")
    return EXIT_OK


def cmd_lemma1(cfg) -> int:
    from .rates import lemma1_check
    params = DriftParams(float(cfg["r"]))
    measure = parse_measure(cfg["measure"], params)
    f = parse_function(cfg["f"] or "exp-decay")
    t = cfg["t"] or [1.0, 10.0, 100.0, 1000.0]
    return _write_table(lemma1_check(measure, f, t), cfg, measure)


def cmd_sweep_thm1(cfg) -> int:
    from .rates import DEFAULT_T_GRID, theorem1_sweep
    params = DriftParams(float(cfg["r"]))
    measure = parse_measure(cfg["measure"], params)
    table = theorem1_sweep(measure, params, cfg["distance"], cfg["t"] or DEFAULT_T_GRID)
    return _write_table(table, cfg, measure)


def cmd_sweep_thm2(cfg) -> int:
    from .rates import DEFAULT_T_GRID, theorem2_sweep
    params = DriftParams(float(cfg["r"]))
    measure = parse_measure(cfg["measure"], params)
    if cfg.get("s") is None:
        raise InputError("sweep-thm2 needs --s")
    g = parse_function(cfg["f"] or "hinge")
    table = theorem2_sweep(measure, params, float(cfg["s"]), cfg["t"] or DEFAULT_T_GRID,
                           kind=cfg["distance"], g=g)
    return _write_table(table, cfg, measure)


def cmd_psi(cfg) -> int:
    import dataclasses

    from .rates import first_order_constant, psi, theorem1_constants, yaglom_expectation
    params = DriftParams(float(cfg["r"]))
    measure = parse_measure(cfg["measure"], params)
    f = parse_function(cfg["f"] or "one-plus-x")
    consts = theorem1_constants(measure, params)
    values = {"psi_suite": psi(measure, f, params, "suite"),
              "psi_notation": psi(measure, f, params, "notation"),
              "alpha_f": yaglom_expectation(f, params),
              "first_order_constant": first_order_constant(f, measure, params),
              **dataclasses.asdict(consts), "envelope": consts.envelope}
    path = _out_path(cfg)
    lines = ["name,value"] + [f"{k},{v!r}" for k, v in values.items()]
    _atomic_write(path, "\n".join(lines) + "\n")
    write_json(path.with_suffix(".json"), _manifest(cfg, measure, values=values))
    for k, v in values.items():
        print(f"{k:>22s}  {v:.10g}")
    return EXIT_OK


def cmd_mc_validate(cfg) -> int:
    import numpy as np
    from scipy import stats

    from . import montecarlo as mc
    from .laws import qprocess_marginal
    from .distances import _evaluate
    params = DriftParams(float(cfg["r"]))
    measure = parse_measure(cfg["measure"], params)
    t = (cfg["t"] or [1.0])[0]
    mcfg = mc.McConfig(n_paths=int(cfg["n_paths"]), step=float(cfg["step"]), seed=int(cfg["seed"]))
    rows = []

    batch = mc.simulate_killed(params, measure, t, mcfg)
    surv = mc.survival_estimate(batch)
    x, w = measure.nodes_weights()
    closed = float(np.sum(w * survival_probability(params, t, x)))
    rows.append(("survival", surv.mean, closed, surv.std_error))
    law = conditional_law(params, measure, t)
    est = mc.estimate_expectation(batch, lambda y: 1.0 + y)
    rows.append(("conditional_mean_1_plus_x", est.mean, 1.0 + law.first_moment, est.std_error))
    ks_stat, n_eff = mc.weighted_ks(batch.endpoints[batch.survived], lambda y: _evaluate(law, y)[0])
    rows.append(("survivor_ks", ks_stat, 0.0, mc.dkw_bound(n_eff) / 3.0))

    x0 = float(cfg["x0"])
    bes = mc.simulate_bessel3(x0, t, mcfg)
    y = bes.endpoints
    if x0 == 0:
        pvalue = float(stats.kstest(y, stats.maxwell(scale=math.sqrt(t)).cdf).pvalue)
    else:
        qlaw = qprocess_marginal(AtomicMeasure.dirac(x0), params, t)
        pvalue = float(stats.kstest(y, lambda v: _evaluate(qlaw, np.asarray(v, float))[0]).pvalue)
    m2 = mc.estimate_expectation(bes, lambda v: v * v)
    rows.append(("bessel3_second_moment", m2.mean, x0 * x0 + 3.0 * t, m2.std_error))

    failures = []
    out_rows = []
    for name, value, ref, se in rows:
        z = abs(value - ref) / se if se > 0 else (0.0 if value == ref else math.inf)
        if name == "survivor_ks":
            ok = value <= 3.0 * mc.dkw_bound(n_eff)
        else:
            ok = z <= 3.0
        out_rows.append((name, value, ref, se, z, ok))
        if not ok:
            failures.append(name)
    ok_ks = pvalue >= 0.01
    if not ok_ks:
        failures.append("bessel3_ks")
    path = _out_path(cfg)
    lines = ["check,value,reference,se,z,pass"]
    lines += [f"{n},{v!r},{r!r},{s!r},{z!r},{int(o)}" for n, v, r, s, z, o in out_rows]
    lines.append(f"bessel3_ks_pvalue,{pvalue!r},0.01,,,{int(ok_ks)}")
    _atomic_write(path, "\n".join(lines) + "\n")
    write_json(path.with_suffix(".json"), _manifest(
        cfg, measure, killed=mc.batch_summary(batch), bessel3=mc.batch_summary(bes, lambda v: v * v),
        failures=failures))
    for line in lines[1:]:
        print(line)
    if failures:
        print(f"MC cross-checks failed: {', '.join(failures)}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


HANDLERS = {
    "yaglom": cmd_yaglom,
    "lemma1": cmd_lemma1,
    "sweep-thm1": cmd_sweep_thm1,
    "sweep-thm2": cmd_sweep_thm2,
    "psi": cmd_psi,
    "mc-validate": cmd_mc_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_INPUT
    try:
        cfg = resolve(args)
        return HANDLERS[args.command](cfg)
    except IntegrabilityError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, UnderflowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
