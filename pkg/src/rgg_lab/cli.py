"""Command-line interface for rgg-lab.

Each experiment subcommand builds the same :class:`ExperimentConfig` a TOML file
would and hands it to :func:`rgg_lab.experiments.run_experiment`; ``run`` loads
one from disk. Results go to ``--out`` or stdout as CSV rows or a JSON summary.

Example usage from command line::

    # Thresholds at one (p, d)
    rgg-lab thresholds --p 0.2 --d 200

    # Spherical triangle coefficient
    rgg-lab fourier --seed 7 --model sphere --pattern triangle --d 256 --reps 20000

    # Signed-triangle detection, ER against the spherical model
    rgg-lab detect --seed 7 --n 256 --d 8 --samples 20

    # A config file
    rgg-lab run experiments/phase.toml

Exit codes:
    0: Success.
    2: Invalid arguments, domains, masks or configs.
    3: A size cap or enumeration budget was exceeded.
    4: A numeric routine failed.

Environment Variables:
    RGG_LAB_*: See :mod:`rgg_lab.config`.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from collections.abc import Sequence
from dataclasses import field
from pathlib import Path
from typing import TextIO

from weakincentives import FrozenDataclass
from weakincentives.runtime.logging import configure_logging

from rgg_lab.config import (
    MODEL_KINDS,
    PHASE_STATISTICS,
    SCHEMA_VERSION,
    ConstantsSection,
    ExperimentConfig,
    ExperimentSection,
    LabSettings,
    ModelSection,
    OutputSection,
    load_experiment_config,
    load_lab_settings,
    validate_experiment_config,
)
from rgg_lab.distributions import thresholds
from rgg_lab.edgelist import format_graph, format_masked_graph, read_mask, write_text
from rgg_lab.errors import LabError
from rgg_lab.experiments import (
    ExperimentResult,
    format_csv,
    format_json,
    resolve_pattern,
    run_experiment,
    write_outputs,
)
from rgg_lab.invariants import compute_invariants, delta, oei, soei
from rgg_lab.models import Ordering
from rgg_lab.rng import stream
from rgg_lab.samplers import GraphModel, apply_mask, sample_graph

EXIT_VALIDATION = 2
STOCHASTIC_COMMANDS = frozenset(
    {"sample", "fourier", "detect", "advantage", "pcol", "spectral", "phase"}
)


@FrozenDataclass()
class CliRuntime:
    """I/O streams for the CLI, injectable for tests.

    Example:
        Capture output in a test::

            runtime = CliRuntime(out=StringIO(), err=StringIO())
            exit_code = main(["thresholds", "--p", "0.5", "--d", "10"], runtime=runtime)
            assert "tau" in runtime.out.getvalue()
    """

    out: TextIO = field(default_factory=lambda: sys.stdout)
    err: TextIO = field(default_factory=lambda: sys.stderr)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Root seed (required for stochastic commands).")
    common.add_argument("--threads", type=int, help="Worker count (default: RGG_LAB_THREADS).")
    common.add_argument("--out", help="Write results to this path instead of stdout.")
    common.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="Output format (default: csv)."
    )
    common.add_argument("--log-level", help="Logging level (default: RGG_LAB_LOG_LEVEL).")

    parser = argparse.ArgumentParser(
        prog="rgg-lab",
        description="Experiments on high-dimensional random geometric graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", parents=[common], help="Edge thresholds at (p, d).")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--d", type=int, required=True)

    p = sub.add_parser("sample", parents=[common], help="Draw one graph as an edge list.")
    p.add_argument("--model", choices=MODEL_KINDS, default="sphere")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=int)
    p.add_argument("--mask", help="Mask edge-list file; output keeps only observed pairs.")

    p = sub.add_parser("invariant", parents=[common], help="OEI, SOEI and deficiency.")
    p.add_argument("pattern", help="Builtin pattern name or edge-list file.")
    p.add_argument("--heuristic", action="store_true", help="Allow bounds beyond the caps.")

    p = sub.add_parser("fourier", parents=[common], help="Monte Carlo Fourier coefficient.")
    p.add_argument("--model", choices=MODEL_KINDS, default="sphere")
    p.add_argument("--pattern", default="triangle")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=int)
    p.add_argument("--reps", type=int, default=10000)

    p = sub.add_parser("detect", parents=[common], help="Signed-count detection test.")
    p.add_argument("--model0", choices=MODEL_KINDS, default="er")
    p.add_argument("--model1", choices=MODEL_KINDS, default="sphere")
    p.add_argument("--pattern", default="triangle")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=int)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--mask")
    p.add_argument("--factor", type=float, default=5.0)

    p = sub.add_parser("advantage", parents=[common], help="Low-degree advantage against ER.")
    p.add_argument("--model", choices=MODEL_KINDS, default="sphere")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=int)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--mask")

    p = sub.add_parser("pcol", parents=[common], help="Planted-coloring weight table.")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--q", type=int, help="Colour count (default: selected from d).")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--reps", type=int, default=10000)

    p = sub.add_parser("spectral", parents=[common], help="Second-eigenvalue regimes.")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--d-grid", type=_int_list, required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--polylog-exponent", type=float, default=10.0)
    p.add_argument("--regime-exponent", type=float, default=8.0)

    p = sub.add_parser("phase", parents=[common], help="Detection phase diagram.")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--p-grid", type=_float_list, required=True)
    p.add_argument("--d-grid", type=_int_list, required=True)
    p.add_argument("--statistics", type=lambda s: tuple(s.split(",")), default=PHASE_STATISTICS)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--factor", type=float, default=5.0)
    p.add_argument("--plot", help="PNG path for the pass/fail raster.")

    p = sub.add_parser("run", parents=[common], help="Run a TOML experiment config.")
    p.add_argument("config", help="Path to the config file.")
    return parser


def _section_kwargs(section: type, values: dict[str, object]) -> dict[str, object]:
    names = {f.name for f in dataclasses.fields(section)}
    return {k: v for k, v in values.items() if k in names and v is not None}


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Translate subcommand flags into the config a TOML file would produce."""
    values = dict(vars(args))
    if "samples" in values:
        values["reps"] = values.pop("samples")
    values["kind"] = args.command
    return ExperimentConfig(
        schema_version=SCHEMA_VERSION,
        experiment=ExperimentSection(**_section_kwargs(ExperimentSection, values)),  # pyright: ignore[reportArgumentType]
        model=ModelSection(**_section_kwargs(ModelSection, values)),  # pyright: ignore[reportArgumentType]
        constants=ConstantsSection(**_section_kwargs(ConstantsSection, values)),  # pyright: ignore[reportArgumentType]
        output=OutputSection(plot=values.get("plot")),  # pyright: ignore[reportArgumentType]
        base_dir=str(Path.cwd()),
    )


def _emit(text: str, args: argparse.Namespace, out: TextIO) -> None:
    if args.out:
        write_text(Path(args.out), text)
    else:
        out.write(text)


def _emit_result(result: ExperimentResult, args: argparse.Namespace, out: TextIO) -> None:
    text = format_json(result.summary) if args.format == "json" else format_csv(result.rows)
    _emit(text, args, out)


def _thresholds(args: argparse.Namespace, out: TextIO) -> None:
    ts = thresholds(args.p, args.d)
    if args.format == "json":
        _emit(format_json({"p": args.p, "d": args.d, **dataclasses.asdict(ts)}), args, out)
    else:
        _emit(f"p,d,xi,tau,rho\n{args.p!r},{args.d},{ts.xi!r},{ts.tau!r},{ts.rho!r}\n", args, out)


def _sample(args: argparse.Namespace, out: TextIO) -> None:
    model = GraphModel(kind=args.model, d=args.d, p=args.p, q=args.q)
    graph = sample_graph(model, args.n, stream(args.seed))
    if args.mask:
        _emit(format_masked_graph(apply_mask(graph, read_mask(Path(args.mask)))), args, out)
    else:
        _emit(format_graph(graph), args, out)


def _ordering_text(ordering: Ordering) -> str:
    return " ".join(str(v) for v in ordering.ranks)


def _invariant(args: argparse.Namespace, settings: LabSettings, out: TextIO) -> None:
    h = resolve_pattern(args.pattern, Path.cwd())
    if args.heuristic:
        seed = args.seed or 0
        a = oei(h, settings=settings, heuristic=True, seed=seed)
        b = soei(h, settings=settings, heuristic=True, seed=seed)
        deficiency = delta(h)
    else:
        result = compute_invariants(h, settings)
        a, b, deficiency = result.oei, result.soei, result.delta
    summary = {
        "pattern": args.pattern,
        "vertices": h.k,
        "edges": h.m,
        "delta": deficiency,
        "oei": {
            "value": a.value,
            "exact": a.exact,
            "lower_bound": a.lower_bound,
            "upper_bound": a.upper_bound,
            "ranks": list(a.ordering.ranks),
            "cover": sorted(list(e) for e in a.cover),
        },
        "soei": {
            "value": b.value,
            "exact": b.exact,
            "lower_bound": b.lower_bound,
            "upper_bound": b.upper_bound,
            "ranks": list(b.ordering.ranks),
            "cover": sorted(list(e) for e in b.cover),
        },
    }
    if args.format == "json":
        _emit(format_json(summary), args, out)
        return
    lines = ["invariant,value,exact,lower_bound,upper_bound,ranks"]
    for name, inv in (("oei", a), ("soei", b)):
        lines.append(
            f"{name},{inv.value},{str(inv.exact).lower()},{inv.lower_bound},"
            f"{inv.upper_bound},{_ordering_text(inv.ordering)}"
        )
    lines.append(f"delta,{deficiency},true,{deficiency},{deficiency},")
    _emit("\n".join(lines) + "\n", args, out)


def main(
    argv: Sequence[str] | None = None,
    *,
    runtime: CliRuntime | None = None,
) -> int:
    """Entry point for the ``rgg-lab`` command.

    Args:
        argv: Command-line arguments. When None, uses ``sys.argv[1:]``.
        runtime: Injected output streams for testing.

    Returns:
        ``0`` on success, otherwise the exit code of the failure class (see the
        module docstring).

    Raises:
        SystemExit: Only from argparse, for malformed arguments (code 2).
    """
    rt = runtime or CliRuntime()
    out = rt.out
    err = rt.err

    args = _build_parser().parse_args(argv)

    settings, error = load_lab_settings(os.environ)
    if error:
        err.write(f"Configuration error: {error}\n")
        return EXIT_VALIDATION
    assert settings is not None  # for type checker

    if args.threads is not None:
        if args.threads < 1:
            err.write("Error: --threads must be >= 1\n")
            return EXIT_VALIDATION
        settings = dataclasses.replace(settings, threads=args.threads)
    if args.log_level:
        settings = dataclasses.replace(settings, log_level=args.log_level.upper())
    configure_logging(level=settings.log_level)

    if args.command in STOCHASTIC_COMMANDS and args.seed is None:
        err.write(f"Error: --seed is required for '{args.command}'\n")
        return EXIT_VALIDATION
    if args.seed is not None and args.seed < 0:
        err.write("Error: --seed must be a non-negative integer\n")
        return EXIT_VALIDATION

    try:
        if args.command == "thresholds":
            _thresholds(args, out)
            return 0
        if args.command == "sample":
            _sample(args, out)
            return 0
        if args.command == "invariant":
            _invariant(args, settings, out)
            return 0

        if args.command == "run":
            config, error = load_experiment_config(Path(args.config))
            if error:
                err.write(f"Configuration error: {error}\n")
                return EXIT_VALIDATION
            assert config is not None  # for type checker
            if args.seed is not None:
                config = dataclasses.replace(
                    config, experiment=dataclasses.replace(config.experiment, seed=args.seed)
                )
            result = run_experiment(config, settings)
            for path in write_outputs(config, result, settings):
                err.write(f"Wrote {path}\n")
            if not (config.output.csv or config.output.json) or args.out:
                _emit_result(result, args, out)
            return 0

        config = _config_from_args(args)
        problem = validate_experiment_config(config)
        if problem:
            err.write(f"Error: {problem}\n")
            return EXIT_VALIDATION
        result = run_experiment(config, settings)
        if config.output.plot:
            write_outputs(config, result, settings)
        _emit_result(result, args, out)
        return 0
    except LabError as exc:
        err.write(f"Error: {exc}\n")
        return exc.exit_code
