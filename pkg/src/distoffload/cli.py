"""Command-line driver.

    distoffload simulate face.scenario.json --mode both
    distoffload resend-sweep face.scenario.json --split 70,0 --split 35,35
    distoffload energy-compare face.scenario.json --vms 1 2
    distoffload partition face.scenario.json
    distoffload validate graph.txt

Exit codes: 0 success, 1 parse/validation failure, 2 simulation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from pathlib import Path

from distoffload.callgraph import extract_chains, load_edge_list, validate_graph
from distoffload.commands import (
    BYTES,
    JOULES,
    KWH,
    PERCENT,
    SECONDS,
    ReportBundle,
    cmd_energy_compare,
    cmd_partition,
    cmd_resend_sweep,
    cmd_simulate,
    parse_sequence,
)
from distoffload.engine import CrashEvent
from distoffload.errors import InvalidGraphError, MissingInputError, OffloadError, ScenarioError
from distoffload.partition import SYMBOLS, BreakEvenConfig
from distoffload.scenario import load_scenario

EXIT_OK, EXIT_INVALID, EXIT_SIM = 0, 1, 2

_CRASH = re.compile(r"^(?P<vm>[^@]+)@(?:t=(?P<time>[^@]+)|(?P<frac>[^@]+))$")


def parse_crash(text: str) -> CrashEvent:
    """``vm1@0.5`` (fraction of the VM's work) or ``vm1@t=0.4`` (seconds)."""
    m = _CRASH.match(text.strip())
    if not m:
        raise argparse.ArgumentTypeError(f"bad crash spec {text!r}; use VM@FRACTION or VM@t=SECONDS")
    try:
        if m["time"] is not None:
            return CrashEvent(m["vm"], at_time=float(m["time"]))
        return CrashEvent(m["vm"], at_fraction=float(m["frac"]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _split(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split {text!r}; use comma-separated percents") from None


def _cell(value, kind: str) -> str:
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    if kind in (SECONDS, PERCENT, JOULES):
        return f"{value:.2f}"
    if kind == KWH:
        return f"{value:.6g}"
    if kind == BYTES:
        return f"{value:.0f}"
    return f"{value:.6g}" if isinstance(value, float) else str(value)


def render_table(bundle: ReportBundle) -> str:
    header = [name for name, _ in bundle.columns]
    body = [[_cell(v, kind) for v, (_, kind) in zip(row, bundle.columns)] for row in bundle.rows]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    if bundle.improvement is not None:
        lines.append(f"improvement: {bundle.improvement:.2f}%")
    spread = bundle.details.get("max_relative_spread")
    if spread is not None:
        lines.append(f"max relative spread: {spread:.3g}")
    for stage in bundle.details.get("stages", []):
        lines.append(f"stage: {stage}")
    for w in bundle.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def render_csv(bundle: ReportBundle) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([name for name, _ in bundle.columns])
    for row in bundle.rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    if bundle.improvement is not None:
        writer.writerow(["improvement_percent", repr(bundle.improvement)])
    return buf.getvalue()


def render_json(bundle: ReportBundle) -> str:
    return json.dumps(bundle.to_dict(), indent=2, sort_keys=True) + "\n"


RENDERERS = {"table": render_table, "json": render_json, "csv": render_csv}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distoffload", description=__doc__.split("\n")[0])
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    for target, suppress in ((parser, False), (common, True)):
        def default(value):
            return argparse.SUPPRESS if suppress else value

        target.add_argument("--format", choices=sorted(RENDERERS), default=default("table"))
        target.add_argument("--out", type=Path, default=default(None), help="write the report here instead of stdout")
        target.add_argument("--seed", type=int, default=default(0), help="reserved; the model has no randomness")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="sequential vs distributed makespan and energy")
    p.add_argument("scenario")
    p.add_argument("--mode", choices=("sequential", "distributed", "both"))
    p.add_argument("--crash", type=parse_crash, help="VM@FRACTION or VM@t=SECONDS")

    p = sub.add_parser("resend-sweep", parents=[common], help="worst-case resend per VM split")
    p.add_argument("scenario")
    p.add_argument("--split", type=_split, action="append", required=True, help="e.g. 35,35 (repeatable)")

    p = sub.add_parser("energy-compare", parents=[common], help="cloud kWh for the cloudlet batch per VM count")
    p.add_argument("scenario")
    p.add_argument("--vms", type=int, nargs="+", default=[1, 2])

    p = sub.add_parser("partition", parents=[common], help="offloading decision formulas")
    p.add_argument("input", nargs="?", help="scenario JSON or plain-text graph")
    for sym in SYMBOLS:
        p.add_argument(f"--{sym}", type=float, dest=f"sym_{sym}", metavar="X")
    p.add_argument("--sequence", help="mobile,cloud,upload,return;... per method, in seconds")
    p.add_argument("--break-even", type=float, help="break-even timeout in seconds")
    p.add_argument("--offload-path", type=float, default=0.0, help="remote completion time after the timeout")
    p.add_argument("--elapsed", type=float, default=0.0, help="local time spent so far")

    p = sub.add_parser("validate", parents=[common], help="check a scenario or graph file")
    p.add_argument("input")
    return parser


def _is_json(path: str) -> bool:
    return path.endswith(".json")


def _validate(args) -> tuple[int, str]:
    if _is_json(args.input):
        scenario = load_scenario(args.input)
        graph = scenario.graph
    else:
        graph = load_edge_list(args.input)
        result = validate_graph(graph)
        if not result.ok:
            raise InvalidGraphError(result.violations)
    lines = [f"ok: {len(graph.nodes)} methods, {len(graph.edges)} call links"]
    lines += [f"stage: {s}" for s in extract_chains(graph).describe()]
    return EXIT_OK, "\n".join(lines) + "\n"


def execute(args) -> tuple[int, str, str]:
    """Execute parsed arguments; returns (exit code, stdout text, stderr text)."""
    try:
        if args.command == "validate":
            code, text = _validate(args)
            return code, text, ""
        if args.command == "simulate":
            bundle = cmd_simulate(load_scenario(args.scenario), args.mode, args.crash)
        elif args.command == "resend-sweep":
            bundle = cmd_resend_sweep(load_scenario(args.scenario), args.split)
        elif args.command == "energy-compare":
            bundle = cmd_energy_compare(load_scenario(args.scenario), args.vms)
        else:
            scenario = decomposition = None
            if args.input and _is_json(args.input):
                scenario = load_scenario(args.input)
            elif args.input:
                decomposition = extract_chains(load_edge_list(args.input))
            symbols = {s: getattr(args, f"sym_{s}") for s in SYMBOLS}
            sequence = parse_sequence(args.sequence) if args.sequence else None
            break_even = BreakEvenConfig(args.break_even, args.offload_path) if args.break_even else None
            bundle = cmd_partition(scenario, symbols, sequence, decomposition, break_even, args.elapsed)
    except (ScenarioError, InvalidGraphError, MissingInputError) as exc:
        return EXIT_INVALID, "", f"error: {exc}\n"
    except (OffloadError, ValueError) as exc:
        return EXIT_SIM, "", f"error: {exc}\n"
    return EXIT_OK, RENDERERS[args.format](bundle), ""


def run(argv=None) -> tuple[int, str, str]:
    return execute(build_parser().parse_args(argv))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code, out, err = execute(args)
    if err:
        sys.stderr.write(err)
    if out and args.out is not None:
        args.out.write_text(out)
    elif out:
        sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
