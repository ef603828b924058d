"""Command-line interface: ``bkshoot {integrate,shoot,sweep,verify,export}``.

Exit codes: 0 success, 1 checks failed, 2 configuration error,
3 integration failure, 4 invalid shooting bracket.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import io as bkio
from .integrator import (
    ConfigError,
    DEFAULT_CONFIG,
    IntegrationConfig,
    IntegrationError,
    StayedInGamma,
    check_blowup,
    check_bounded_orbit,
    integrate_orbit,
)
from .metric import metric_report
from .shooting import (
    BracketError,
    ToleranceError,
    find_lambda_bar,
    lambda_grid,
    sweep,
    verify_connection,
)
from .system import DomainError

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_BRACKET = 4

BOUNDED_LAMBDAS = [round(0.1 * k, 10) for k in range(1, 11)]
BLOWUP_LAMBDAS = [2.1, 2.5, 3.0, 5.0]

# IntegrationConfig fields and their parsers
_CFG_KEYS = {
    "r_max": float, "r0": float, "rel_tol": float, "abs_tol": float, "a_min": float,
    "wp_blowup": float, "min_step": float, "max_steps": int, "series_order": int, "scheme": str,
}
_RUN_KEYS = {
    "lambda_": float, "lo": float, "hi": float, "tol": float, "format": str, "out": str,
    "threads": int, "grid_from": float, "grid_to": float, "grid_step": float,
    "plot_script": str,
}
# config-file spellings that differ from argparse dests
_FILE_ALIASES = {"lambda": "lambda_", "from": "grid_from", "to": "grid_to", "step": "grid_step"}


@dataclass
class RunConfig:
    integration: IntegrationConfig = DEFAULT_CONFIG
    lambda_: Optional[float] = None
    lo: float = 0.1
    hi: float = 2.0
    tol: float = 1e-6
    format: str = "json"
    out: Optional[str] = None
    threads: int = 1
    grid_from: Optional[float] = None
    grid_to: Optional[float] = None
    grid_step: Optional[float] = None
    plot_script: Optional[str] = None


def _shared_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--lambda", dest="lambda_", type=float, help="shooting parameter -w''(0)")
    g.add_argument("--lo", type=float, help="lower bracket end (exits through w=-1)")
    g.add_argument("--hi", type=float, help="upper bracket end (does not exit)")
    g.add_argument("--tol", type=float, help="bisection bracket width")
    g.add_argument("--r-max", dest="r_max", type=float)
    g.add_argument("--r0", type=float, help="ignition radius")
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--a-min", dest="a_min", type=float)
    g.add_argument("--wp-blowup", dest="wp_blowup", type=float)
    g.add_argument("--min-step", dest="min_step", type=float)
    g.add_argument("--max-steps", dest="max_steps", type=int)
    g.add_argument("--series-order", dest="series_order", type=int)
    g.add_argument("--scheme", choices=["dp54", "dop853"])
    g.add_argument("--format", choices=["csv", "json"])
    g.add_argument("--out", help="output path (directory for export)")
    g.add_argument("--config", help="key=value config file; flags override it")
    g.add_argument("--threads", type=int, help="worker processes for sweep (env BKSHOOT_THREADS)")
    return p


def build_parser():
    shared = _shared_parser()
    ap = argparse.ArgumentParser(prog="bkshoot", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("integrate", parents=[shared], help="integrate one orbit")
    sub.add_parser("shoot", parents=[shared], help="bisect for the connecting parameter")
    sp = sub.add_parser("sweep", parents=[shared], help="fate map over a lambda grid")
    sp.add_argument("--from", dest="grid_from", type=float)
    sp.add_argument("--to", dest="grid_to", type=float)
    sp.add_argument("--step", dest="grid_step", type=float)
    sp.add_argument("--plot-script", dest="plot_script",
                    help="write a gnuplot script (plus phase-portrait CSVs) next to this path")
    sub.add_parser("verify", parents=[shared], help="boundedness and blow-up checks")
    sub.add_parser("export", parents=[shared],
                   help="profile CSV + JSON report for --lambda, or for the shot solution")
    return ap


def resolve_config(args) -> RunConfig:
    """Defaults < config file < environment (threads only) < flags."""
    values = {}
    if getattr(args, "config", None):
        try:
            raw = bkio.read_config_file(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for key, text in raw.items():
            key = _FILE_ALIASES.get(key, key)
            conv = _CFG_KEYS.get(key) or _RUN_KEYS.get(key)
            if conv is None:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                values[key] = conv(text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {text!r}") from exc
    env_threads = os.environ.get("BKSHOOT_THREADS")
    if env_threads and "threads" not in values:
        try:
            values["threads"] = int(env_threads)
        except ValueError as exc:
            raise ConfigError(f"BKSHOOT_THREADS must be an integer, got {env_threads!r}") from exc
    for key in list(_CFG_KEYS) + list(_RUN_KEYS):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v

    cfg_kw = {k: values.pop(k) for k in list(values) if k in _CFG_KEYS}
    integration = DEFAULT_CONFIG.with_(**cfg_kw)  # raises ConfigError
    run = RunConfig(integration=integration, **values)
    if run.threads < 1:
        raise ConfigError("threads must be >= 1")
    if run.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if run.lambda_ is not None and not run.lambda_ >= 0:
        raise ConfigError("lambda must be >= 0")
    if not run.tol > 0:
        raise ConfigError("tol must be positive")
    if not (0 <= run.lo < run.hi):
        raise ConfigError("bracket needs 0 <= lo < hi")
    return run


def _emit(run: RunConfig, text: str, summary: str):
    """Document to --out (summary on stdout) or to stdout (summary on stderr)."""
    if run.out:
        bkio.atomic_write(run.out, text)
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)


def _summary(profile) -> str:
    f = profile.fate
    d = profile.diagnostics
    return (f"lambda={profile.lam!r} fate={f.kind} r={f.radius:.10g} "
            f"w={profile.w[-1]:.10g} wp={profile.wp[-1]:.6g} A={profile.A[-1]:.10g} "
            f"nodes={d['node_count']} steps={d['steps']}")


def _profile_report(run, profile, command, **extra):
    metric = metric_report(profile)
    connection = None
    if isinstance(profile.fate, StayedInGamma):
        connection = verify_connection(profile).to_dict()
    diag = dict(profile.diagnostics)
    return metric, bkio.report_json(
        command=command,
        config=bkio.config_dict(run.integration),
        fate=profile.fate.kind,
        fate_detail=profile.fate.to_dict(),
        **{"lambda": profile.lam},
        diagnostics=diag,
        connection=connection,
        metric=metric.to_dict(),
        **extra,
    )


def _profile_csv(profile, metric):
    T = metric.T_samples[1] if metric.T_samples else None
    return bkio.profile_csv(profile, T)


def cmd_integrate(run: RunConfig) -> int:
    if run.lambda_ is None:
        raise ConfigError("integrate needs --lambda")
    profile = integrate_orbit(run.lambda_, run.integration)
    metric, doc = _profile_report(run, profile, "integrate")
    text = doc if run.format == "json" else _profile_csv(profile, metric)
    _emit(run, text, _summary(profile))
    return EXIT_OK


def _shoot(run):
    return find_lambda_bar(run.lo, run.hi, run.tol, run.integration)


def _shoot_summary(res):
    c = res.connection
    return (f"lambda_bar={res.lambda_bar!r} bracket=[{res.lambda_lo!r}, {res.lambda_hi!r}] "
            f"iterations={res.iterations}+{res.refine_iterations} fate={res.profile.fate.kind} "
            f"connection={'pass' if c and c.passed else 'fail'}")


def cmd_shoot(run: RunConfig) -> int:
    res = _shoot(run)
    metric, doc = _profile_report(run, res.profile, "shoot", shooting=res.to_dict())
    text = doc if run.format == "json" else _profile_csv(res.profile, metric)
    _emit(run, text, _shoot_summary(res))
    ok = res.connection is not None and res.connection.passed
    if metric.flatness is not None:
        ok = ok and metric.flatness.passed
    return EXIT_OK if ok else EXIT_CHECKS_FAILED


def cmd_sweep(run: RunConfig) -> int:
    if None in (run.grid_from, run.grid_to, run.grid_step):
        raise ConfigError("sweep needs --from, --to and --step")
    if not run.grid_step > 0:
        raise ConfigError("--step must be positive")
    grid = lambda_grid(run.grid_from, run.grid_to, run.grid_step)
    if not grid:
        raise ConfigError("empty lambda grid")
    if grid[0] < 0:
        raise ConfigError("lambda grid values must be >= 0")
    fmap = sweep(grid, run.integration, threads=run.threads)
    text = bkio.fatemap_csv(fmap)
    counts = {}
    for k in fmap.kinds:
        counts[k or "error"] = counts.get(k or "error", 0) + 1
    summary = f"sweep rows={len(fmap)} " + " ".join(f"{k}={v}" for k, v in counts.items())
    _emit(run, text, summary)
    if run.plot_script:
        _write_plot_bundle(run, fmap)
    return EXIT_OK


def _write_plot_bundle(run, fmap):
    script = Path(run.plot_script)
    base = script.parent
    csv_name = Path(run.out).name if run.out else f"{script.stem}_fates.csv"
    if not run.out:
        bkio.atomic_write(base / csv_name, bkio.fatemap_csv(fmap))
    lams = fmap.lambdas
    picks = sorted({lams[0], lams[len(lams) // 2], lams[-1]})
    portraits = []
    for lam in picks:
        prof = integrate_orbit(lam, run.integration)
        name = f"{script.stem}_portrait_{lam:g}.csv"
        bkio.atomic_write(base / name, bkio.profile_csv(prof))
        portraits.append((lam, name))
    bkio.atomic_write(script, bkio.gnuplot_script(csv_name, portraits))


def run_verify(cfg: IntegrationConfig, rhs=None):
    """Run the boundedness and blow-up checks; returns ``(rows, all_passed)``."""
    rows = []
    for lam in BOUNDED_LAMBDAS:
        try:
            rep = check_bounded_orbit(lam, cfg, rhs=rhs)
            rows.append(("bounded", lam, rep.passed, rep.detail))
        except (IntegrationError, DomainError) as exc:
            rows.append(("bounded", lam, False, f"error: {exc}"))
    for lam in BLOWUP_LAMBDAS:
        try:
            rep = check_blowup(lam, cfg, rhs=rhs)
            rows.append(("blowup", lam, rep.passed, rep.detail))
        except (IntegrationError, DomainError) as exc:
            rows.append(("blowup", lam, False, f"error: {exc}"))
    return rows, all(r[2] for r in rows)


def cmd_verify(run: RunConfig) -> int:
    rows, ok = run_verify(run.integration)
    lines = [f"{'check':<8} {'lambda':>6}  result  detail"]
    for kind, lam, passed, detail in rows:
        lines.append(f"{kind:<8} {lam:>6g}  {'PASS' if passed else 'FAIL':<6}  {detail}")
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    if run.out:
        bkio.atomic_write(run.out, text)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_CHECKS_FAILED


def cmd_export(run: RunConfig) -> int:
    if not run.out:
        raise ConfigError("export needs --out DIR")
    outdir = Path(run.out)
    if run.lambda_ is not None:
        profile = integrate_orbit(run.lambda_, run.integration)
        metric, doc = _profile_report(run, profile, "export")
        summary = _summary(profile)
    else:
        res = _shoot(run)
        profile = res.profile
        metric, doc = _profile_report(run, profile, "export", shooting=res.to_dict())
        summary = _shoot_summary(res)
    bkio.atomic_write(outdir / "profile.csv", _profile_csv(profile, metric))
    bkio.atomic_write(outdir / "report.json", doc)
    print(summary)
    return EXIT_OK


COMMANDS = {
    "integrate": cmd_integrate,
    "shoot": cmd_shoot,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "export": cmd_export,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = resolve_config(args)
        return COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BracketError as exc:
        print(f"bracket error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (IntegrationError, DomainError) as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
