"""Command line entry point: ``adhoccloud run|sweep|report``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from .harness.config import SCHEMES, ConfigError, ScenarioConfig
from .harness.metrics import to_csv
from .harness.report import METRICS, UnknownMetric, emit_plot_data
from .harness.scenarios import PRESETS, preset
from .harness.simulation import run_scenario
from .harness.sweep import improvement_table, summary_table, sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class RunFailure(RuntimeError):
    """Raised once a valid config failed during simulation."""


def _execute(fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except Exception as exc:
        raise RunFailure(f"{type(exc).__name__}: {exc}") from exc


def load_config(ref: str) -> ScenarioConfig:
    """A preset name (S1..S4) or a path to a JSON config."""
    if ref.upper() in PRESETS and not Path(ref).exists():
        return preset(ref)
    return ScenarioConfig.load(ref)


def parse_int_list(text: str) -> list[int]:
    """``10,20,30`` or ``1..10`` (inclusive) or a mix of both."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            a, b = int(lo), int(hi)
            if b < a:
                raise ConfigError(f"empty range {part!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(int(part))
    if not out:
        raise ConfigError(f"no values in {text!r}")
    return out


def parse_schemes(text: str) -> list[str]:
    if text == "all":
        return list(SCHEMES)
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SCHEMES]
    if bad or not names:
        raise ConfigError(f"unknown scheme(s) {bad}; choose from {SCHEMES} or 'all'")
    return names


def _apply(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if getattr(args, "power_mode", None):
        changes["power_mode"] = args.power_mode
    if getattr(args, "scheme", None):
        changes["scheme"] = args.scheme
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    cfg = cfg.replace(**changes) if changes else cfg
    if getattr(args, "tasks", None) is not None and isinstance(args.tasks, int):
        cfg.workload.tasks = args.tasks
        cfg.validate()
    return cfg


def cmd_run(args) -> int:
    cfg = _apply(load_config(args.config), args)
    m = _execute(run_scenario, cfg, args.out)
    print(to_csv([m]), end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _apply(load_config(args.config), args)
    tasks = parse_int_list(args.tasks)
    seeds = parse_int_list(args.seeds)
    schemes = parse_schemes(args.schemes)
    modes = [args.power_mode] if args.power_mode else [base.power_mode]
    rows = _execute(sweep, base, tasks, seeds, schemes, modes, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(to_csv(rows))
    (out / "summary.tsv").write_text(summary_table(rows))
    (out / "improvement.tsv").write_text(improvement_table(rows))
    print(summary_table(rows), end="")
    failed = sum(1 for r in rows if r.error)
    if failed:
        print(f"{failed} run(s) failed; see the error column", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        path = emit_plot_data(args.in_dir, args.metric)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(path)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage mistakes are config errors; exit code 2 is reserved for runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adhoccloud", description="Mobile ad hoc cloud simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--config", required=True, help="preset name (S1..S4) or JSON file")
    run.add_argument("--scheme", choices=SCHEMES, help="override the config's scheme")
    run.add_argument("--seed", type=int, help="override the config's seed")
    run.add_argument("--tasks", type=int, help="override the task count")
    run.add_argument("--power-mode", choices=("multi", "max-only"), help="max-only pins the radio to its top level")
    run.add_argument("--out", required=True, help="directory for metrics.csv and trace.log")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="run a task-count x seed x scheme grid")
    sw.add_argument("--config", required=True, help="preset name (S1..S4) or JSON file")
    sw.add_argument("--tasks", default="10,20,30,40", help="comma list of task counts")
    sw.add_argument("--seeds", default="1..10", help="seeds, e.g. 1..20 or 1,4,9")
    sw.add_argument("--schemes", default="all", help="comma list of proposed, hta, minhop, or all")
    sw.add_argument("--power-mode", choices=("multi", "max-only"))
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sw.add_argument("--out", required=True, help="directory for metrics.csv, summary.tsv, improvement.tsv")
    sw.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="write series_<metric>.tsv from a sweep directory")
    rep.add_argument("--in", dest="in_dir", required=True, help="sweep output directory")
    rep.add_argument("--metric", default="atct", help=f"one of {', '.join(sorted(METRICS))}")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, usage errors exit EXIT_CONFIG
        return int(exc.code or 0)
    try:
        return args.func(args)
    except RunFailure as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, UnknownMetric, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
