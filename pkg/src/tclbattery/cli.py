"""Command-line entry point.

Subcommands
-----------
run
    Run a scenario and write ``trace.csv``, ``diagnostics.csv`` and ``summary.csv``
    (plus ``unit_trace.csv`` for single-TCL scenarios).
verify
    Recompute the summary of a finished run from its trace and compare it with the written one.
fleet-dump
    Write the sampled fleet to ``fleet.csv``.

Exit codes: 0 success, 1 summary mismatch, 2 configuration error, 3 input/output error,
4 a controller or channel broke the dispatch protocol.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from enum import Enum
from pathlib import Path

from tclbattery.battery import static_params
from tclbattery.config import default_config, parse_config
from tclbattery.engine import Simulator, prepare_fleet
from tclbattery.errors import ProtocolError
from tclbattery.fleet import write_snapshot
from tclbattery.report import (SUMMARY_FILE, TRACE_FILE, compare_summary, read_summary,
                               read_trace, summarize, summarize_trace, write_summary,
                               write_trace)
from tclbattery.signal import load_signal, normalize_and_scale, resample, synthetic_signal

logger = logging.getLogger(__name__)

OUT_DIR_ENV = "TCLBATTERY_OUT_DIR"
EXIT_MISMATCH, EXIT_CONFIG, EXIT_IO, EXIT_PROTOCOL = 1, 2, 3, 4

SINGLE_TCL_STEP_SECONDS = 1.0
SINGLE_TCL_HORIZON_STEPS = 14400


class Scenario(Enum):
    TRACKING = "tracking"
    SINGLE_TCL_LOCKOUT_2S = "single-tcl-lockout-2s"
    SINGLE_TCL_LOCKOUT_6S = "single-tcl-lockout-6s"
    ZERO_SIGNAL = "zero-signal"

    @property
    def lockout_seconds(self):
        """Lockout of a single-TCL scenario, None for fleet scenarios."""
        match self:
            case Scenario.SINGLE_TCL_LOCKOUT_2S:
                return 2.0
            case Scenario.SINGLE_TCL_LOCKOUT_6S:
                return 6.0
        return None


def single_tcl_setup(config, spec, settings, lockout_seconds,
                     horizon_steps=SINGLE_TCL_HORIZON_STEPS):
    """One template TCL on a 1 s grid, driven by a full-scale signal.

    A 1 s step keeps the lockout at exactly `lockout_seconds` steps.
    """
    config = replace(config, step_seconds=SINGLE_TCL_STEP_SECONDS, horizon_steps=horizon_steps,
                     lockout_seconds=lockout_seconds, workers=1)
    spec = replace(spec, count=1, heterogeneity=0.0)
    return config, spec, replace(settings, scale_fraction=1.0)


def regulation_values(settings, config, fleet):
    """Signal of `settings` scaled to `fleet` and held on the simulation grid.

    Raises
    ------
    SignalError
        If the signal cannot be read, is all zero, or ends before the horizon.
    OSError
        If the signal file cannot be opened.
    """
    if settings.path is not None:
        signal = load_signal(settings.path)
    else:
        signal = synthetic_signal(config.horizon_steps * config.step_seconds, seed=settings.seed)
    scaled = normalize_and_scale(signal, static_params(fleet), settings.scale_fraction)
    return resample(scaled, config.step_seconds, config.horizon_steps)


def run_scenario(scenario, config, spec, settings, out_dir):
    """Run one scenario and write its files into `out_dir`.

    Returns
    -------
    (list[Path], RunSummary)
        Files written and the run's summary.
    """
    scenario = Scenario(scenario)
    track = ()
    if scenario.lockout_seconds is not None:
        config, spec, settings = single_tcl_setup(config, spec, settings, scenario.lockout_seconds)
        track = (0,)

    fleet = prepare_fleet(config, spec)
    if scenario is Scenario.ZERO_SIGNAL:
        values = [0.0] * config.horizon_steps
    else:
        values = regulation_values(settings, config, fleet)

    logger.info("Running %s: %d TCLs for %d ticks of %g s.",
                scenario.value, len(fleet), config.horizon_steps, config.step_seconds)
    with Simulator(config, track=track) as simulator:
        trace = simulator.run(fleet, values)

    summary = summarize_trace(trace)
    written = write_trace(trace, out_dir)
    written.append(Path(out_dir) / SUMMARY_FILE)
    write_summary(summary, written[-1])
    return written, summary


def _out_dir(arg):
    if arg is not None:
        return Path(arg)
    if env := os.environ.get(OUT_DIR_ENV):
        logger.info("Output directory %s taken from %s.", env, OUT_DIR_ENV)
        return Path(env)
    return Path("out")


def _load_config(args):
    config, spec, settings = parse_config(args.config) if args.config else default_config()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
        spec = replace(spec, seed=args.seed)
        settings = replace(settings, seed=args.seed)
    if getattr(args, "signal", None) is not None:
        settings = replace(settings, path=Path(args.signal))
    return config, spec, settings


def _run(args):
    config, spec, settings = _load_config(args)
    written, summary = run_scenario(args.scenario, config, spec, settings, _out_dir(args.out))
    print(summary)
    for path in written:
        print(f"wrote {path}")
    return 0


def _verify(args):
    directory = _out_dir(args.directory)
    written = read_summary(directory / SUMMARY_FILE)
    frame = read_trace(directory / TRACE_FILE)
    if "fleet_size" not in written:
        raise ValueError(f"{directory / SUMMARY_FILE} has no fleet_size entry.")
    mismatches = compare_summary(summarize(frame, int(written["fleet_size"])), written)
    if mismatches:
        for name, (recomputed, recorded) in mismatches.items():
            print(f"{name}: trace gives {recomputed}, summary has {recorded}", file=sys.stderr)
        return EXIT_MISMATCH
    print(f"{directory / SUMMARY_FILE} matches {directory / TRACE_FILE}")
    return 0


def _fleet_dump(args):
    config, spec, _ = _load_config(args)
    out_dir = _out_dir(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "fleet.csv"
    write_snapshot(prepare_fleet(config, spec), path)
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="tclbattery",
                                     description="Virtual battery simulator for TCL fleets.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress (-v) or every dispatch detail (-vv)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a scenario and write its trace")
    run.add_argument("--config", help="key = value configuration file")
    run.add_argument("--scenario", default=Scenario.TRACKING.value,
                     choices=[s.value for s in Scenario])
    run.add_argument("--signal", help="two-column CSV regulation signal")
    run.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./out)")
    run.add_argument("--seed", type=int, help="seed for the fleet, noise and synthetic signal")
    run.set_defaults(handler=_run)

    verify = commands.add_parser("verify", help="recompute a run's summary from its trace")
    verify.add_argument("directory", nargs="?", help="output directory of the run")
    verify.set_defaults(handler=_verify)

    dump = commands.add_parser("fleet-dump", help="write the sampled fleet to fleet.csv")
    dump.add_argument("--config")
    dump.add_argument("--out")
    dump.add_argument("--seed", type=int)
    dump.set_defaults(handler=_fleet_dump)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.handler(args)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except ValueError as err:
        # ConfigError, SignalError and InvalidParameterError are all ValueErrors
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as err:
        print(f"protocol error: {err}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
