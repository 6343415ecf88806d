"""Command-line entry point: ``localft <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or domain error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import gamma_crit, sparse_prob_sequence
from .catalog import DEFAULT_CATALOG, local_rect_location_count, validate_against_sources
from .config import NONLOCAL_FIXED_POINT_GUESS, PRESETS, ExperimentConfig, preset
from .errors import ConfigError, DomainError, NumericalError
from .flow import (Ray, bisect_threshold, closest_to_fixed, find_fixed_point,
                   iterate_flow, local_threshold, optimize_local_tau, pseudothreshold,
                   threshold_search)
from .local import local_map
from .model import ProtocolParams, nonlocal_map

SCHEMA_VERSION = 1

log = logging.getLogger("localft")


@dataclass
class Table:
    command: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    footer: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) else float(v)
    return v


def render(table: Table, fmt: str) -> str:
    if fmt == "json":
        doc = {"localft_version": __version__, "schema": SCHEMA_VERSION, "command": table.command,
               "columns": table.columns, "rows": _jsonable(table.rows), "footer": _jsonable(table.footer)}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# localft {__version__} schema={SCHEMA_VERSION} command={table.command}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    for key in sorted(table.footer):
        val = table.footer[key]
        text = json.dumps(_jsonable(val), sort_keys=True) if isinstance(val, (list, tuple, dict, np.ndarray)) \
            else _fmt(val)
        buf.write(f"# {key}={text}\n")
    return buf.getvalue()


def write_plot(table: Table, prefix: str, x_col: int = 0, y_cols: list[int] | None = None,
               logscale: bool = False) -> tuple[Path, Path]:
    """Emit ``prefix.dat`` (whitespace columns) and a gnuplot script ``prefix.gp`` plotting it."""
    dat, gp = Path(prefix + ".dat"), Path(prefix + ".gp")
    numeric = [i for i, v in enumerate(table.rows[0]) if isinstance(v, (int, float, np.number))] \
        if table.rows else []
    y_cols = y_cols or [i for i in numeric if i != x_col]
    with dat.open("w") as fh:
        fh.write("# " + " ".join(table.columns) + "\n")
        for row in table.rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    lines = [f"# localft {__version__} {table.command}", "set datafile commentschars '#'",
             f"set xlabel '{table.columns[x_col]}'", "set key left top"]
    if logscale:
        lines.append("set logscale xy")
    plots = [f"'{dat.name}' using {x_col + 1}:{c + 1} with linespoints title '{table.columns[c]}'"
             for c in y_cols]
    lines.append("plot " + ", \\\n     ".join(plots))
    gp.write_text("\n".join(lines) + "\n")
    return dat, gp


# ---- map construction ----------------------------------------------------

def _params(cfg: ExperimentConfig) -> ProtocolParams:
    return ProtocolParams(cfg.s, cfg.s_prime, cfg.gamma_ws)


def _resolve_tau(cfg: ExperimentConfig) -> int:
    if cfg.tau != "optimize":
        return min(int(cfg.tau), cfg.r)
    return optimize_local_tau(cfg.r, cfg.epsilon, cfg.tau_range(), _params(cfg), rel_tol=cfg.rel_tol,
                              workers=cfg.workers).tau_star


def _map_and_ray(cfg: ExperimentConfig):
    if cfg.model == "nonlocal":
        return nonlocal_map(_params(cfg)), cfg.ray(), None
    tau = _resolve_tau(cfg)
    geom = cfg.geometry(tau)
    return local_map(_params(cfg), DEFAULT_CATALOG, geom), cfg.ray(tau), tau


# ---- subcommands -----------------------------------------------------------

def cmd_flow(cfg: ExperimentConfig) -> Table:
    fn, ray, tau = _map_and_ray(cfg)
    table = Table("flow", ["start", "scale", "level", *cfg.labels, "alpha", "beta"])
    verdicts, seeds = [], []
    for i, scale in enumerate(cfg.scales):
        result = iterate_flow(fn, ray.at(scale), cfg.max_iter)
        for level, x in enumerate(result.trajectory):
            st = fn.stats(x)
            table.rows.append([i, float(scale), level, *map(float, x), st.alpha, st.beta])
        verdicts.append(result.classification)
        if np.any(result.trajectory[-1] > 0):
            seeds.append(closest_to_fixed(fn, result.trajectory))
    table.footer["classification"] = verdicts
    if tau is not None:
        table.footer["tau"] = tau
    fp = _nontrivial_fixed_point(fn, seeds, cfg)
    if fp is not None:
        table.footer["fixed_point"] = [round(float(v), 12) for v in fp.location]
        table.footer["fixed_point_unstable_count"] = fp.unstable_count
    return table


def _nontrivial_fixed_point(fn, seeds, cfg: ExperimentConfig):
    """Newton from trajectory seeds, keeping the first interior solution; model default as fallback."""
    candidates = list(seeds)
    if cfg.model == "nonlocal":
        candidates.append(np.array(NONLOCAL_FIXED_POINT_GUESS))
    for seed in candidates:
        try:
            rep = find_fixed_point(fn, seed)
        except NumericalError:
            continue
        if 1e-9 < rep.location.max() < 0.3 and rep.unstable_count >= 1:
            return rep
    return None


def cmd_threshold(cfg: ExperimentConfig) -> Table:
    if cfg.model == "local" and cfg.tau == "optimize" and cfg.direction is None:
        scan = optimize_local_tau(cfg.r, cfg.epsilon, cfg.tau_range(), _params(cfg), rel_tol=cfg.rel_tol,
                                  workers=cfg.workers)
        table = Table("threshold", ["r", "tau", "epsilon", "threshold"])
        for t, v in scan.thresholds.items():
            table.rows.append([cfg.r, t, cfg.epsilon, v])
        table.footer.update(tau_star=scan.tau_star, threshold=scan.threshold)
        return table
    fn, ray, tau = _map_and_ray(cfg)
    res = threshold_search(fn, ray, rel_tol=cfg.rel_tol, max_iter=cfg.max_iter)
    table = Table("threshold", ["threshold", "lo", "hi", "probes", "undecided_probes"],
                  [[res.value, res.lo, res.hi, res.probes, res.undecided_probes]])
    table.footer["flagged"] = res.flagged
    if tau is not None:
        table.footer["tau"] = tau
    return table


def cmd_threshold_line(cfg: ExperimentConfig) -> Table:
    if cfg.model != "nonlocal":
        raise ConfigError("threshold-line is defined for the nonlocal model")
    if not cfg.gamma_w_grid:
        raise ConfigError("threshold-line needs gamma_w_grid")
    fn = nonlocal_map(_params(cfg))
    direction = np.array(cfg.direction if cfg.direction is not None else (1.0, 1.0, 0.0, 2.0, 1.0))
    if direction[2] != 0:
        raise ConfigError("threshold-line direction must leave gamma_w fixed (component 2 = 0)")

    def cell(gw: float) -> list:
        ray = Ray(np.array([0.0, 0.0, gw, 0.0, 0.0]), direction)
        flags = []
        try:
            thr = threshold_search(fn, ray, rel_tol=cfg.rel_tol, max_iter=cfg.max_iter)
            t = thr.value
            if thr.flagged:
                flags.append("threshold_undecided")
        except DomainError:
            t = math.nan
            flags.append("threshold_bracket")
        pts = []
        for comp, name in ((0, "gamma_1"), (1, "gamma_2"), (2, "gamma_w")):
            try:
                pts.append(pseudothreshold(fn, ray, comp, rel_tol=cfg.rel_tol))
            except DomainError:
                pts.append(math.nan)
                flags.append(f"{name}_bracket")
        return [gw, t, *pts, ";".join(flags) or "ok"]

    with ThreadPoolExecutor(cfg.workers) as pool:
        rows = list(pool.map(cell, cfg.gamma_w_grid))
    table = Table("threshold-line", ["gamma_w", "threshold_else", "pseudo_gamma_1", "pseudo_gamma_2",
                                     "pseudo_gamma_w", "flags"], rows)
    good = [(r[0], r[1]) for r in rows if not math.isnan(r[1])]
    if len(good) >= 2:
        x, y = np.array(good).T
        slope, intercept = np.polyfit(x, y, 1)
        resid = float(np.max(np.abs(y - (slope * x + intercept))))
        table.footer.update(line_slope=float(slope), line_intercept=float(intercept),
                            line_max_residual_over_range=resid / float(np.ptp(y)) if np.ptp(y) > 0 else 0.0)
    return table


def cmd_fixed_point(cfg: ExperimentConfig) -> Table:
    fn, ray, tau = _map_and_ray(cfg)
    if cfg.guess is not None:
        guess = np.array(cfg.guess)
    elif cfg.model == "nonlocal":
        guess = np.array(NONLOCAL_FIXED_POINT_GUESS)
    else:
        # seed from a flow started just below the threshold, which lingers near the fixed point
        scale = threshold_search(fn, ray, rel_tol=1e-6, max_iter=cfg.max_iter).lo
        guess = closest_to_fixed(fn, iterate_flow(fn, ray.at(scale), cfg.max_iter).trajectory)
    rep = find_fixed_point(fn, guess)
    table = Table("fixed-point", ["index", "component", "value", "eigenvalue_magnitude"])
    for i, (name, v) in enumerate(zip(cfg.labels, rep.location)):
        table.rows.append([i, name, float(v), float(rep.jacobian_eigenvalues[i])])
    table.footer.update(residual=rep.residual, unstable_count=rep.unstable_count, newton_steps=rep.newton_steps)
    if rep.location[0] > 0:
        table.footer["ratio_2_to_1"] = float(rep.location[1] / rep.location[0])
    if tau is not None:
        table.footer["tau"] = tau
    return table


def cmd_pseudothreshold(cfg: ExperimentConfig) -> Table:
    fn, ray, tau = _map_and_ray(cfg)
    thr = bisect_threshold(fn, ray, rel_tol=cfg.rel_tol)
    table = Table("pseudothreshold", ["index", "component", "pseudothreshold", "ratio_to_threshold"])
    for i, name in enumerate(cfg.labels):
        try:
            p = pseudothreshold(fn, ray, i, rel_tol=cfg.rel_tol)
        except DomainError:
            p = math.nan
        table.rows.append([i, name, p, p / thr])
    table.footer["threshold"] = thr
    if tau is not None:
        table.footer["tau"] = tau
    return table


def cmd_sweep(cfg: ExperimentConfig) -> Table:
    if cfg.model != "local":
        raise ConfigError("sweeps run on the local model")
    if cfg.sweep is None or not cfg.grid:
        raise ConfigError("sweep needs a sweep variable and a grid")
    params = _params(cfg)

    def cell(value: float) -> list:
        if cfg.sweep == "tau":
            t = int(value)
            if t != value or not 1 <= t <= cfg.r:
                raise ConfigError(f"tau grid value {value} is not an integer in [1, r]")
            return [t, t, local_threshold(cfg.r, t, cfg.epsilon, params, rel_tol=cfg.rel_tol)]
        r = int(value) if cfg.sweep == "r" else cfg.r
        eps = float(value) if cfg.sweep == "epsilon" else cfg.epsilon
        if cfg.sweep == "r" and r != value:
            raise ConfigError(f"r grid value {value} is not an integer")
        if cfg.tau == "optimize":
            scan = optimize_local_tau(r, eps, cfg.tau_range(r), params, rel_tol=cfg.rel_tol)
            return [value, scan.tau_star, scan.threshold]
        t = min(int(cfg.tau), r)
        return [value, t, local_threshold(r, t, eps, params, rel_tol=cfg.rel_tol)]

    with ThreadPoolExecutor(cfg.workers) as pool:
        rows = list(pool.map(cell, cfg.grid))
    table = Table("sweep", [cfg.sweep, "tau_used", "threshold"], rows)
    table.footer["sweep"] = cfg.sweep
    if cfg.sweep != "r":
        table.footer["r"] = cfg.r
    if cfg.sweep != "epsilon":
        table.footer["epsilon"] = cfg.epsilon
    values = np.array([r[0] for r in rows], dtype=float)
    thresholds = np.array([r[2] for r in rows])
    if cfg.sweep == "r" and len(rows) >= 2:
        table.footer["loglog_slope"] = float(np.polyfit(np.log(values), np.log(thresholds), 1)[0])
    if cfg.sweep == "tau":
        best = int(np.argmax(thresholds))
        table.footer["tau_star"] = int(values[best])
        table.footer["unimodal"] = is_unimodal(thresholds, cfg.rel_tol)
    if cfg.sweep == "epsilon":
        order = np.argsort(values)
        table.footer["ratio_smallest_to_largest"] = float(thresholds[order[0]] / thresholds[order[-1]])
    return table


def is_unimodal(values, rel_tol: float = 0.0) -> bool:
    """Nondecreasing up to the maximum, nonincreasing after, allowing ``rel_tol`` relative wobble."""
    v = np.asarray(values, dtype=float)
    k = int(np.argmax(v))
    tol = rel_tol * v[k]
    return bool(np.all(np.diff(v[: k + 1]) >= -tol) and np.all(np.diff(v[k:]) <= tol))


def cmd_analytic(cfg: ExperimentConfig) -> Table:
    a_lc = cfg.a_lc if cfg.a_lc is not None else local_rect_location_count(params=_params(cfg))
    crit = gamma_crit(cfg.r, a_lc, cfg.k)
    if cfg.gamma_0 >= crit:
        raise DomainError(f"gamma_0 = {cfg.gamma_0:g} is above analytic threshold {crit:g}")
    seq = sparse_prob_sequence(cfg.gamma_0, cfg.r, a_lc, cfg.k, cfg.levels)
    table = Table("analytic", ["level", "p_sparse", "log_one_minus_p", "log_bound"])
    log_g = math.log(cfg.gamma_0) if cfg.gamma_0 > 0 else -math.inf
    for n, (p, lq) in enumerate(zip(seq.levels, seq.log_failure), start=1):
        bound = (1 + seq.delta) ** n * log_g if cfg.gamma_0 > 0 else -math.inf
        table.rows.append([n, p, lq, bound])
    table.footer.update(gamma_crit=crit, delta=seq.delta, a_lc=a_lc, r=cfg.r, k=cfg.k, gamma_0=cfg.gamma_0)
    return table


def cmd_catalog(cfg: ExperimentConfig) -> Table:
    from .catalog import LOCATION_TYPES

    table = Table("catalog", ["routine", *LOCATION_TYPES, "total", "time_steps"])
    for name, rc in DEFAULT_CATALOG.routines().items():
        table.rows.append([name, *(rc.counts[t] for t in LOCATION_TYPES), rc.total, rc.time_steps])
    checks = validate_against_sources(DEFAULT_CATALOG)
    table.footer["identities"] = {c.name: c.passed for c in checks}
    table.footer["all_identities_pass"] = all(c.passed for c in checks)
    table.footer["checksum"] = DEFAULT_CATALOG.checksum()
    table.footer["a_lc_default"] = local_rect_location_count(params=_params(cfg))
    return table


COMMANDS = {
    "flow": cmd_flow,
    "threshold": cmd_threshold,
    "threshold-line": cmd_threshold_line,
    "fixed-point": cmd_fixed_point,
    "pseudothreshold": cmd_pseudothreshold,
    "sweep": cmd_sweep,
    "analytic": cmd_analytic,
    "catalog": cmd_catalog,
}

PLOT_AXES = {  # x column, y columns, log-log
    "flow": (3, [4], False),
    "threshold-line": (0, [1, 2, 3, 4], False),
    "sweep": (0, [2], True),
    "analytic": (0, [2, 3], False),
}


# ---- argument parsing ------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _tau(text: str):
    if text == "optimize":
        return text
    try:
        return int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("tau must be an integer or 'optimize'") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=("nonlocal", "local"))
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--workers", type=int)
    common.add_argument("--plot", metavar="PREFIX", help="also write PREFIX.dat and PREFIX.gp")
    common.add_argument("--seedless", action="store_true", help="reserved; the computation has no randomness")
    common.add_argument("--direction", type=_floats)
    common.add_argument("--base", type=_floats)
    common.add_argument("--scales", type=_floats)
    common.add_argument("--guess", type=_floats)
    common.add_argument("--r", type=int)
    common.add_argument("--tau", type=_tau)
    common.add_argument("--tau-max", dest="tau_max", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--sweep", choices=("r", "tau", "epsilon"))
    common.add_argument("--grid", type=_floats)
    common.add_argument("--gamma-w-grid", dest="gamma_w_grid", type=_floats)
    common.add_argument("--component", type=int)
    common.add_argument("--rel-tol", dest="rel_tol", type=float)
    common.add_argument("--a-lc", dest="a_lc", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--gamma0", dest="gamma_0", type=float)
    common.add_argument("--levels", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="localft", description="Threshold calculus for concatenated 7-qubit codes")
    parser.add_argument("--version", action="version", version=f"localft {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


OVERRIDES = ("model", "format", "workers", "out", "plot", "direction", "base", "scales", "guess", "r", "tau",
             "tau_max", "epsilon", "sweep", "grid", "gamma_w_grid", "component", "rel_tol", "a_lc", "k",
             "gamma_0", "levels")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = preset(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        ExperimentConfig.from_json(text)  # validates the file on its own
        merged = cfg.to_dict()
        merged.update(json.loads(text))
        cfg = ExperimentConfig.from_dict(merged)
    return cfg.with_overrides(**{k: getattr(args, k) for k in OVERRIDES})


def run(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.seedless:
            raise ConfigError("--seedless is reserved: no computation here uses randomness")
        cfg = resolve_config(args)
        table = COMMANDS[args.command](cfg)
        text = render(table, cfg.format)
        if cfg.out:
            Path(cfg.out).write_text(text)
        else:
            stdout.write(text)
        if cfg.plot and table.rows:
            x, ys, logscale = PLOT_AXES.get(args.command, (0, None, False))
            write_plot(table, cfg.plot, x, ys, logscale)
    except (ConfigError, DomainError) as exc:
        print(f"localft: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"localft: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
