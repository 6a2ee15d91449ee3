"""Command-line front end.

    quadformation --preset 2 --out out/
    quadformation --scenario my.json --mode validate-only

Exit status: 0 success, 2 invalid scenario or arguments, 3 run aborted.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .output import summary_dict, write_plots, write_summary, write_trace_csv
from .scenario import Scenario, ScenarioError, preset, scenario_problems
from .simulation import SimulationError, monitors, run

EXIT_OK, EXIT_INVALID, EXIT_ABORTED = 0, 2, 3
CLI_MODES = ("full", "ideal-reference", "validate-only")


@dataclass(frozen=True)
class RunConfig:
    scenario_path: Path | None
    preset_case: int | None
    out: Path
    dt: float | None
    t_final: float | None
    mode: str | None
    plots: bool

    def load(self) -> Scenario:
        sc = preset(self.preset_case) if self.preset_case is not None else Scenario.from_json(self.scenario_path)
        sim_mode = self.mode if self.mode in ("full", "ideal-reference") else None
        return sc.with_overrides(dt=self.dt, t_final=self.t_final, mode=sim_mode)


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadformation", description="Simulate quadrotor formation tracking.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario JSON file")
    src.add_argument("--preset", type=int, choices=(1, 2), help="built-in experiment (1 circle, 2 fixed leader)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--dt", type=_positive, help="override the step size [s]")
    p.add_argument("--t-final", type=_positive, help="override the duration [s]")
    p.add_argument("--mode", choices=CLI_MODES, help="default: the scenario's own mode")
    p.add_argument("--plots", choices=("on", "off"), default="on")
    return p


def parse_config(argv: list[str] | None = None) -> RunConfig:
    a = build_parser().parse_args(argv)
    return RunConfig(a.scenario, a.preset, a.out, a.dt, a.t_final, a.mode, a.plots == "on")


def simulate(cfg: RunConfig) -> int:
    try:
        sc = cfg.load()
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: cannot load scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID

    problems = scenario_problems(sc)
    if problems:
        print("error: invalid scenario:", file=sys.stderr)
        for p in problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_INVALID
    if cfg.mode == "validate-only":
        print(f"{sc.name}: valid")
        return EXIT_OK

    cfg.out.mkdir(parents=True, exist_ok=True)
    try:
        trace = run(sc, validate=False)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        partial = exc.trace
        if partial is not None and len(partial):
            write_trace_csv(partial, cfg.out / "trace.csv")
            write_summary(summary_dict(partial, monitors(partial), str(exc)), cfg.out / "summary.json")
            print(f"partial trace written to {cfg.out}", file=sys.stderr)
        return EXIT_ABORTED
    except ScenarioError as exc:  # pragma: no cover - validated above
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID

    report = monitors(trace)
    write_trace_csv(trace, cfg.out / "trace.csv")
    write_summary(summary_dict(trace, report), cfg.out / "summary.json")
    if cfg.plots:
        write_plots(trace, cfg.out)
    failed = [k for k, v in report.checks.items() if v is False]
    status = "all monitors pass" if not failed else "failed monitors: " + ", ".join(failed)
    print(f"{sc.name}: t={trace.t[-1]:g} s, max formation error {report.final_formation_error:.3g} m, {status}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    return simulate(parse_config(argv))


if __name__ == "__main__":
    sys.exit(main())
