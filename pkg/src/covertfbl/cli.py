"""Command-line front end.

Every command writes a ``#``-prefixed ``key = value`` header followed by a
rectangular CSV (or TSV) body. Output is assembled in memory and written
once, so reruns with the same configuration are byte-identical.
"""
import argparse
from dataclasses import dataclass, field
import io
import math
import sys

import numpy as np

from . import __version__
from .bounds import (
    DEFAULT_GRID,
    REFINED_GRID,
    SWEEP_AXES,
    compute_point,
    sweep,
)
from .codesim import constant_tau_rule, generate_codebook, lemma_bounds, simulate_error
from .covert import CovertParams, solve_power, truncation_tail
from .errors import BudgetExhausted, CovertError, ParameterError, SolverError
from .hypotest import (
    REFERENCE_OUTPUT,
    SAMPLES_ENV,
    InfoDensitySpec,
    SamplingConfig,
    beta_at_alpha,
)

EXIT_OK = 0
EXIT_PARAM = 2
EXIT_NUMERIC = 3

SUBCOMMANDS = ("power", "beta", "bound", "sweep", "simulate", "reproduce")
FIGURES = ("fig6", "fig7", "fig8", "fig9", "figDelta")


class ConfigError(CovertError, ValueError):
    """Malformed, incomplete or unknown configuration."""


# key -> parser; every key accepted in a config file or on the command line
_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _bool(text):
    t = str(text).strip().lower()
    if t in _BOOL_TRUE:
        return True
    if t in _BOOL_FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


KEYS = {
    "n": int,
    "epsilon": float,
    "delta": float,
    "mu": float,
    "samples": int,
    "seed": int,
    "method": str,
    "out": str,
    "format": str,
    "neglect_truncation": _bool,
    "refined": _bool,
    "axis": str,
    "values": _float_list,
    "workers": int,
    "power": float,
    "radius_sq": float,
    "alpha": float,
    "m": int,
    "trials": int,
    "tau0": float,
}

REQUIRED = {
    "power": ("n", "delta", "mu"),
    "beta": ("n", "epsilon", "delta", "mu"),
    "bound": ("n", "epsilon", "delta", "mu"),
    "simulate": ("n", "epsilon", "delta", "mu"),
    "reproduce": (),
}


@dataclass
class RunConfig:
    subcommand: str
    figure: str = ""
    values: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def params(self):
        v = self.values
        return CovertParams(v["n"], v["epsilon"], v["delta"], v["mu"])

    @property
    def mc(self):
        base = SamplingConfig.default(seed=self.get("seed", 0),
                                      method=self.get("method", "coordinates"))
        count = self.get("samples")
        return base if count is None else SamplingConfig(count, base.seed, base.method)

    @property
    def grid(self):
        return REFINED_GRID if self.get("refined", False) else DEFAULT_GRID


def parse_config(path):
    """Read ``key = value`` lines; ``#`` starts a comment.

    Returns ``(values, warnings)``. Later duplicates win with a warning;
    unknown keys and malformed lines raise :class:`ConfigError`.
    """
    values = {}
    warnings = []
    unknown = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, text = line.partition("=")
            key = key.strip().replace("-", "_")
            text = text.strip()
            if not key or not text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            if key not in KEYS:
                unknown.append(key)
                continue
            try:
                parsed = KEYS[key](text)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
            if key in values:
                warnings.append(f"{path}:{lineno}: duplicate key {key!r}, last value wins")
            values[key] = parsed
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))
    return values, warnings


# ---------------------------------------------------------------- output

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def render(header, columns, rows, fmt="csv"):
    sep = "\t" if fmt == "tsv" else ","
    buf = io.StringIO()
    for key, value in header:
        buf.write(f"# {key} = {_fmt(value)}\n")
    buf.write(sep.join(columns) + "\n")
    for row in rows:
        cells = []
        for c in columns:
            text = _fmt(row.get(c))
            if sep in text or '"' in text:
                text = '"' + text.replace('"', '""') + '"'
            cells.append(text)
        buf.write(sep.join(cells) + "\n")
    return buf.getvalue()


def _header(cfg, extra=()):
    v = cfg.values
    mc = cfg.mc
    head = [
        ("covertfbl_version", __version__),
        ("command", cfg.subcommand + (f" {cfg.figure}" if cfg.figure else "")),
        ("seed", mc.seed),
        ("samples", mc.count),
        ("method", mc.method),
    ]
    for key in ("n", "epsilon", "delta", "mu", "axis", "values", "power", "radius_sq",
                "alpha", "m", "trials", "tau0"):
        if key in v:
            val = v[key]
            head.append((key, ",".join(_fmt(x) for x in val) if key == "values" else val))
    head.append(("neglect_truncation", bool(v.get("neglect_truncation", False))))
    head.append(("grid", f"{cfg.grid}x{cfg.grid}"))
    head.append(("reference_output", REFERENCE_OUTPUT))
    head.extend(extra)
    return head


# ------------------------------------------------------------- commands

POINT_COLUMNS = [
    "n", "epsilon", "delta", "mu", "power", "one_minus_trunc", "tvd_certificate",
    "achievability_bits", "converse_bits", "achievability_na_bits", "converse_na_bits",
    "achievability_sigma", "converse_sigma", "tau_star", "r_star", "flags", "error",
]


def _cmd_power(cfg):
    v = cfg.values
    p = CovertParams(v["n"], v.get("epsilon", 0.5), v["delta"], v["mu"])
    sol = solve_power(p, neglect_truncation=v.get("neglect_truncation", False))
    row = {"n": p.n, "delta": p.delta, "mu": p.mu, "power": sol.power,
           "trunc_mass": sol.trunc_mass, "one_minus_trunc": sol.one_minus_trunc,
           "kl_nats": sol.kl_nats, "kl_bits": sol.kl_bits,
           "tvd_certificate": sol.tvd_certificate, "residual": sol.residual}
    return list(row), [row], ()


def _resolve_power(cfg, p):
    if "power" in cfg.values:
        return cfg.values["power"]
    return solve_power(p, neglect_truncation=cfg.get("neglect_truncation", False)).power


def _cmd_beta(cfg):
    p = cfg.params
    P = _resolve_power(cfg, p)
    r = cfg.get("radius_sq", P)
    alpha = cfg.get("alpha", 1.0 - p.epsilon)
    mc = cfg.mc
    est = beta_at_alpha(InfoDensitySpec(p.n, P, p.mu, r), alpha, mc.count, mc.seed, mc.method)
    row = {"n": p.n, "power": P, "mu": p.mu, "radius_sq": r, "alpha": alpha,
           "beta": est.value, "log2_beta": est.log2_value, "ci_low": est.ci_low,
           "ci_high": est.ci_high, "alpha_achieved": est.alpha_achieved,
           "tail_samples": est.tail_samples, "samples": est.samples}
    return list(row), [row], ()


def _point_exit(point):
    exc = point.diagnostics.get("exception")
    if exc is not None:
        raise exc


def _cmd_bound(cfg):
    point = compute_point(cfg.params, cfg.mc, cfg.get("neglect_truncation", False),
                          cfg.grid, cfg.grid)
    _point_exit(point)
    return POINT_COLUMNS, [point.row()], ()


def _run_sweep(cfg, base, axis, values):
    points = sweep(base, axis, values, cfg.mc, cfg.get("neglect_truncation", False),
                   cfg.grid, cfg.grid, workers=cfg.get("workers", 1))
    rows = []
    for value, pt in zip(values, points):
        row = pt.row()
        if pt.error:
            row[axis] = value
        rows.append(row)
    return POINT_COLUMNS, rows, ()


def _sweep_base(cfg, axis):
    v = dict(cfg.values)
    needed = [k for k in ("n", "epsilon", "delta", "mu") if k != axis and k not in v]
    if needed:
        raise ConfigError(f"sweep over {axis} needs: " + ", ".join(needed))
    first = v.get("values")[0]
    v.setdefault(axis, int(first) if axis == "n" else first)
    return CovertParams(int(v["n"]), v["epsilon"], v["delta"], v["mu"])


def _cmd_sweep(cfg):
    axis = cfg.get("axis")
    if axis is None:
        raise ConfigError("sweep needs: axis")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {', '.join(SWEEP_AXES)}, got {axis!r}")
    values = cfg.get("values")
    if not values:
        raise ConfigError("sweep needs: values")
    if axis == "n":
        values = [int(round(x)) for x in values]
    return _run_sweep(cfg, _sweep_base(cfg, axis), axis, values)


def _cmd_simulate(cfg):
    p = cfg.params
    notes = []
    try:
        P = _resolve_power(cfg, p)
    except BudgetExhausted:
        P = solve_power(p, neglect_truncation=True).power
        notes.append(("power_fallback", "neglect_truncation"))
    m = cfg.get("m", 2)
    trials = cfg.get("trials", 10000)
    tau0 = cfg.get("tau0", 0.5 * p.epsilon)
    seed = cfg.mc.seed
    rule = constant_tau_rule(p.n, P, p.mu, p.epsilon, tau0,
                             SamplingConfig(20000, seed, cfg.mc.method))
    book = generate_codebook(p.n, m, p.mu, P, rule, seed)
    sim = simulate_error(book, trials, seed)
    lem = lemma_bounds(book, rule, seed=seed)
    row = {"n": p.n, "m": m, "power": P, "tau0": tau0, "trials": trials,
           "max_err": sim.max_err_est.value, "max_err_low": sim.max_err_est.low,
           "max_err_high": sim.max_err_est.high, "avg_err": sim.avg_err_est.value,
           "avg_err_low": sim.avg_err_est.low, "avg_err_high": sim.avg_err_est.high,
           "max_error_rhs": lem.max_error_rhs, "avg_error_rhs": lem.avg_error_rhs,
           "proposals": book.proposals}
    return list(row), [row], notes


PRESETS = {
    "fig6": dict(axis="n", values=[200, 300, 400, 500, 600, 700, 800, 900, 1000],
                 epsilon=0.01, delta=0.1, mu=0.8),
    "fig7": dict(axis="n", values=[200, 300, 400, 500, 600, 700, 800, 900, 1000],
                 epsilon=0.1, delta=0.1, mu=0.8),
    "fig8": dict(axis="delta", values=[0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16,
                                       0.18, 0.2],
                 n=500, epsilon=0.01, mu=0.8),
    "fig9": dict(axis="epsilon", values=[0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1],
                 n=500, delta=0.1, mu=0.8),
}
PRESET_SAMPLES = 200000
PRESET_METHOD = "sufficient"
DELTA_MUS = (0.7, 0.75, 0.8, 0.85)
DELTA_NS = tuple(range(100, 2001, 100))


def _cmd_reproduce(cfg):
    fig = cfg.figure
    if fig == "figDelta":
        rows = []
        for mu in DELTA_MUS:
            for n in DELTA_NS:
                rows.append({"n": n, "mu": mu, "one_minus_trunc": truncation_tail(n, mu)})
        return ["n", "mu", "one_minus_trunc"], rows, ()
    preset = PRESETS[fig]
    v = cfg.values
    # explicit flags may override the pinned values
    for key, val in preset.items():
        v.setdefault(key, val)
    v.setdefault("samples", PRESET_SAMPLES)
    v.setdefault("method", PRESET_METHOD)
    return _cmd_sweep(cfg)


COMMANDS = {
    "power": _cmd_power,
    "beta": _cmd_beta,
    "bound": _cmd_bound,
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
    "reproduce": _cmd_reproduce,
}


def run(cfg):
    """Execute ``cfg`` and return the rendered output text."""
    missing = [k for k in REQUIRED.get(cfg.subcommand, ()) if k not in cfg.values]
    if missing:
        raise ConfigError(f"{cfg.subcommand} needs: " + ", ".join(missing))
    columns, rows, extra = COMMANDS[cfg.subcommand](cfg)
    return render(_header(cfg, extra), columns, rows, cfg.get("format", "csv"))


# ------------------------------------------------------------ arguments

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("parameters")
    g.add_argument("--n", type=int)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--mu", type=float)
    g.add_argument("--samples", type=int,
                   help=f"Monte Carlo draws per sample set (default from ${SAMPLES_ENV} or 200000)")
    g.add_argument("--seed", type=int)
    g.add_argument("--method", choices=("coordinates", "sufficient"))
    g.add_argument("--out", help="output file (default stdout)")
    g.add_argument("--format", choices=("csv", "tsv"))
    g.add_argument("--config", help="key = value configuration file")
    g.add_argument("--neglect-truncation", dest="neglect_truncation", action="store_const",
                   const=True, default=None)
    g.add_argument("--refined", action="store_const", const=True, default=None,
                   help=f"use {REFINED_GRID}x{REFINED_GRID} tau/R grids")
    g.add_argument("--workers", type=int)
    g.add_argument("--power", type=float, help="override the solved per-symbol power")
    g.add_argument("--radius-sq", dest="radius_sq", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--axis", choices=SWEEP_AXES)
    g.add_argument("--values", type=_float_list, help="comma-separated axis values")
    g.add_argument("--m", type=int, help="codebook size for simulate")
    g.add_argument("--trials", type=int)
    g.add_argument("--tau0", type=float)

    parser = argparse.ArgumentParser(prog="covertfbl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"covertfbl {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("power", parents=[common], help="solve the covert power budget")
    sub.add_parser("beta", parents=[common], help="Neyman-Pearson beta at one point")
    sub.add_parser("bound", parents=[common], help="all four bounds at one point")
    sub.add_parser("sweep", parents=[common], help="bounds along n, delta or epsilon")
    sub.add_parser("simulate", parents=[common], help="simulate a random shell codebook")
    rep = sub.add_parser("reproduce", parents=[common], help="figure presets")
    rep.add_argument("figure", choices=FIGURES)
    return parser


def config_from_args(args):
    values = {}
    warnings = []
    if args.config:
        values, warnings = parse_config(args.config)
    for key in KEYS:
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    return RunConfig(args.subcommand, getattr(args, "figure", "") or "", values, warnings)


def _say(level, text):
    sys.stderr.write(f"covertfbl: {level}: {text}\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        for w in cfg.warnings:
            _say("warning", w)
        text = run(cfg)
    except OSError as exc:
        _say("error", str(exc))
        return EXIT_PARAM
    except (SolverError, ArithmeticError) as exc:
        _say("error", f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    except (CovertError, ValueError) as exc:
        _say("error", f"{type(exc).__name__}: {exc}")
        return EXIT_PARAM
    out = cfg.get("out")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
