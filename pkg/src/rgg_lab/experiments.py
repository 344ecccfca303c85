"""Config-driven experiment runner and result emission.

Every experiment produces :class:`ResultRow` values with a fixed column order
(:data:`RESULT_COLUMNS`) plus a JSON summary. Floats are written with ``repr`` so
a rerun with the same config and seed yields byte-identical files; wall-clock
times are recorded only when ``experiment.record_timing`` is set.

Example:
    Run a config file and write its outputs::

        from pathlib import Path
        from rgg_lab.config import load_experiment_config
        from rgg_lab.experiments import run_experiment, write_outputs

        config, error = load_experiment_config(Path("triangle.toml"))
        assert config is not None, error
        result = run_experiment(config)
        write_outputs(config, result)
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Any

from weakincentives import FrozenDataclass
from weakincentives.runtime.logging import get_logger

from rgg_lab.config import DEFAULT_SETTINGS, ExperimentConfig, LabSettings
from rgg_lab.edgelist import read_mask, read_pattern, write_text
from rgg_lab.errors import LabError, ValidationError
from rgg_lab.invariants import oei
from rgg_lab.models import Mask, McEstimate, Pattern
from rgg_lab.patterns import BUILTIN_PATTERNS, TRIANGLE, WEDGE
from rgg_lab.pcol import advantage_bound_pcol, psi, select_q, w_table
from rgg_lab.rng import child_seed
from rgg_lab.samplers import GraphModel
from rgg_lab.spectral import lambda2_regime_experiment
from rgg_lab.statistics import (
    coefficient_bound,
    detection_test,
    low_degree_advantage_er,
    mc_fourier,
    mc_phi_source,
)

logger = get_logger(__name__)

RESULT_COLUMNS = (
    "experiment",
    "point",
    "statistic",
    "estimate",
    "stderr",
    "bound",
    "passed",
    "wall_time",
)

PHASE_MODELS = ("sphere", "gauss")


@FrozenDataclass()
class ResultRow:
    """One line of experiment output.

    Attributes:
        experiment: Experiment kind.
        point: Parameter point, e.g. ``n=64;d=256;p=0.5``.
        statistic: What was measured.
        estimate: The measured value.
        stderr: Its standard error, when it has one.
        bound: The value it was compared against, when there is one.
        passed: Outcome of the comparison, when there is one.
        wall_time: Seconds spent, or ``0.0`` when timing is off.
    """

    experiment: str
    point: str
    statistic: str
    estimate: float
    stderr: float | None = None
    bound: float | None = None
    passed: bool | None = None
    wall_time: float = 0.0


@FrozenDataclass()
class ExperimentResult:
    rows: tuple[ResultRow, ...]
    summary: dict[str, Any]


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows: Sequence[ResultRow]) -> str:
    """Render rows as CSV with the fixed header."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow(_cell(getattr(row, column)) for column in RESULT_COLUMNS)
    return buffer.getvalue()


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}  # pyright: ignore[reportUnknownVariableType]
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]  # pyright: ignore[reportUnknownVariableType]
    return value


def format_json(payload: dict[str, Any]) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def point_label(**params: object) -> str:
    """``key=value`` pairs joined with ``;`` in argument order."""
    return ";".join(f"{k}={_cell(v)}" for k, v in params.items())


@contextmanager
def _at_point(point: str) -> Iterator[None]:
    try:
        yield
    except LabError as exc:
        exc.args = (f"at {point}: {exc}",)
        raise


class _Clock:
    def __init__(self, enabled: bool) -> None:
        self._enabled = enabled
        self._start = time.perf_counter()

    def lap(self) -> float:
        if not self._enabled:
            return 0.0
        now = time.perf_counter()
        elapsed, self._start = now - self._start, now
        return elapsed


def resolve_pattern(name: str, base_dir: Path) -> Pattern:
    """A builtin pattern by name, otherwise an edge-list file relative to ``base_dir``."""
    if name in BUILTIN_PATTERNS:
        return BUILTIN_PATTERNS[name]
    return read_pattern(base_dir / name)


def _model(config: ExperimentConfig, kind: str, q: int | None = None) -> GraphModel:
    m = config.model
    return GraphModel(kind=kind, d=m.d, p=m.p, q=q if q is not None else m.q)


# -- experiment kinds ----------------------------------------------------------------


def _run_fourier(config: ExperimentConfig, settings: LabSettings) -> ExperimentResult:
    exp, m = config.experiment, config.model
    h = resolve_pattern(exp.pattern, Path(config.base_dir))
    point = point_label(model=m.model, d=m.d, p=m.p)
    clock = _Clock(exp.record_timing)
    with _at_point(point):
        estimate = mc_fourier(_model(config, m.model), h, exp.reps, exp.seed, settings=settings)
        bound: float | None = None
        passed: bool | None = None
        if m.model in ("sphere", "gauss"):
            exponent = oei(h, settings).value
            bound = coefficient_bound(h, m.d, m.p, exponent, config.constants.kappa)
            passed = abs(estimate.mean) - 3.0 * estimate.stderr <= bound
    label = exp.pattern
    row = ResultRow(
        experiment="fourier",
        point=point,
        statistic=label,
        estimate=estimate.mean,
        stderr=estimate.stderr,
        bound=bound,
        passed=passed,
        wall_time=clock.lap(),
    )
    summary = {
        "mean": estimate.mean,
        "stderr": estimate.stderr,
        "reps": estimate.replicates,
        "bound": bound,
        "pass": passed,
    }
    return ExperimentResult(rows=(row,), summary=summary)


def _load_mask(config: ExperimentConfig) -> Mask | None:
    if config.experiment.mask is None:
        return None
    return read_mask(Path(config.base_dir) / config.experiment.mask)


def _run_detect(config: ExperimentConfig, settings: LabSettings) -> ExperimentResult:
    exp, m = config.experiment, config.model
    h = resolve_pattern(exp.pattern, Path(config.base_dir))
    mask = _load_mask(config)
    n = mask.n if mask is not None else m.n
    point = point_label(model0=m.model0, model1=m.model1, n=n, d=m.d, p=m.p)
    clock = _Clock(exp.record_timing)
    with _at_point(point):
        report = detection_test(
            _model(config, m.model0),
            _model(config, m.model1),
            h,
            n,
            m.p,
            exp.reps,
            exp.seed,
            mask=mask,
            factor=config.constants.factor,
            settings=settings,
        )
    row = ResultRow(
        experiment="detect",
        point=point,
        statistic=exp.pattern,
        estimate=report.ratio,
        bound=report.factor,
        passed=report.passed,
        wall_time=clock.lap(),
    )
    summary = {
        "mean0": report.mean0,
        "var0": report.var0,
        "mean1": report.mean1,
        "var1": report.var1,
        "ratio": report.ratio,
        "pass": report.passed,
        "null_variance_oracle": report.null_variance_oracle,
    }
    return ExperimentResult(rows=(row,), summary=summary)


def _run_advantage(config: ExperimentConfig, settings: LabSettings) -> ExperimentResult:
    exp, m = config.experiment, config.model
    mask = _load_mask(config) or Mask.complete(m.n)
    point = point_label(model=m.model, n=mask.n, d=m.d, p=m.p, degree=exp.degree)
    clock = _Clock(exp.record_timing)
    with _at_point(point):
        report = low_degree_advantage_er(
            _model(config, m.model),
            mask,
            exp.degree,
            replicates=exp.reps,
            seed=exp.seed,
            settings=settings,
        )
    rows = [
        ResultRow(
            experiment="advantage",
            point=point,
            statistic=term.label,
            estimate=term.value,
            stderr=term.coefficient.stderr if term.coefficient is not None else None,
        )
        for term in report.terms
    ]
    rows.append(
        ResultRow(
            experiment="advantage",
            point=point,
            statistic="total",
            estimate=report.total,
            wall_time=clock.lap(),
        )
    )
    summary = {
        "total": report.total,
        "classes": {
            term.label: {"copies": term.copies, "value": term.value} for term in report.terms
        },
    }
    return ExperimentResult(rows=tuple(rows), summary=summary)


def _run_pcol(config: ExperimentConfig, settings: LabSettings) -> ExperimentResult:
    exp, m = config.experiment, config.model
    clock = _Clock(exp.record_timing)
    geometry = GraphModel(kind="sphere", d=m.d, p=0.5)
    point = point_label(n=m.n, d=m.d, degree=exp.degree)
    with _at_point(point):
        triangle: McEstimate | None = None
        q = m.q
        if q is None:
            triangle = mc_fourier(
                geometry, TRIANGLE, exp.reps, child_seed(exp.seed, 0), settings=settings
            )
            q = select_q(m.d, triangle)
        source = mc_phi_source(
            geometry, psi(q), replicates=exp.reps, seed=child_seed(exp.seed, 1), settings=settings
        )
        table = w_table(m.n, exp.degree, q, source, settings=settings)
        bound = advantage_bound_pcol(table)
    point = point_label(n=m.n, d=m.d, degree=exp.degree, q=q)
    rows = [
        ResultRow(experiment="pcol", point=point, statistic=f"w:{entry.label}", estimate=entry.w)
        for entry in table.entries
    ]
    rows.append(
        ResultRow(
            experiment="pcol",
            point=point,
            statistic="advantage",
            estimate=bound.total,
            passed=bound.bounded,
            wall_time=clock.lap(),
        )
    )
    summary = {
        "q": q,
        "psi": table.psi,
        "triangle_estimate": triangle.mean if triangle is not None else None,
        "advantage": bound.total,
        "bounded": bound.bounded,
        "offending": bound.offending,
        "table": [
            {
                "class": e.label,
                "copies": e.copies,
                "phi_rgg": e.phi_rgg,
                "phi_pcol": e.phi_pcol,
                "m_diag": e.m_diag,
                "w_hat": e.w_hat,
                "w": e.w,
            }
            for e in table.entries
        ],
    }
    return ExperimentResult(rows=tuple(rows), summary=summary)


def _run_spectral(config: ExperimentConfig, settings: LabSettings) -> ExperimentResult:
    exp, m, constants = config.experiment, config.model, config.constants
    clock = _Clock(exp.record_timing)
    with _at_point(point_label(n=m.n, d_grid=",".join(map(str, m.d_grid)))):
        report = lambda2_regime_experiment(
            m.n,
            m.d_grid,
            exp.trials,
            exp.seed,
            polylog_exponent=constants.polylog_exponent,
            regime_exponent=constants.regime_exponent,
            settings=settings,
        )
    rows = [
        ResultRow(
            experiment="spectral",
            point=point_label(n=m.n, d=pt.d, regime=pt.regime),
            statistic="abs_lambda2",
            estimate=pt.mean_abs_lambda2,
            bound=pt.bound,
            passed=pt.bound_holds,
            wall_time=clock.lap(),
        )
        for pt in report.points
    ]
    summary = {
        "points": [
            {
                "d": pt.d,
                "mean_abs_lambda2": pt.mean_abs_lambda2,
                "max_abs_lambda2": pt.max_abs_lambda2,
                "er_mean_abs_lambda2": pt.er_mean_abs_lambda2,
                "ratio": pt.ratio,
                "regime": pt.regime,
            }
            for pt in report.points
        ],
        "trials": [
            {
                "d": s.d,
                "lambda1": s.lambda1,
                "lambda2": s.lambda2,
                "centered_lambda1": s.centered_lambda1,
            }
            for s in report.trials
        ],
    }
    return ExperimentResult(rows=tuple(rows), summary=summary)


# -- phase diagram -------------------------------------------------------------------


_PHASE_PATTERNS: dict[str, Pattern] = {"triangle": TRIANGLE, "wedge": WEDGE}


def phase_diagram(
    n: int,
    p_grid: Sequence[float],
    d_grid: Sequence[int],
    statistics: Sequence[str],
    samples: int,
    seed: int,
    *,
    factor: float = 5.0,
    record_timing: bool = False,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> tuple[ResultRow, ...]:
    """Detection outcomes over the ``(p, d)`` grid for both geometric models against ER.

    Grid points run on a pool of ``settings.threads`` workers; rows come back in
    grid order (``p`` outer, ``d`` inner, then model, then statistic).

    Raises:
        ValidationError: For an unknown statistic or an empty grid.
    """
    for stat in statistics:
        if stat not in _PHASE_PATTERNS:
            raise ValidationError(f"unknown phase statistic {stat!r}")
    if not p_grid or not d_grid:
        raise ValidationError("phase grids must be non-empty")
    points = [(p, d) for p in p_grid for d in d_grid]
    inner = dataclasses.replace(settings, threads=1)

    def run_point(job: tuple[int, tuple[float, int]]) -> list[ResultRow]:
        index, (p, d) = job
        clock = _Clock(record_timing)
        rows: list[ResultRow] = []
        point = point_label(n=n, d=d, p=p)
        with _at_point(point):
            for model in PHASE_MODELS:
                for s, stat in enumerate(statistics):
                    report = detection_test(
                        GraphModel(kind="er", p=p),
                        GraphModel(kind=model, d=d, p=p),
                        _PHASE_PATTERNS[stat],
                        n,
                        p,
                        samples,
                        child_seed(seed, index, PHASE_MODELS.index(model), s),
                        factor=factor,
                        settings=inner,
                    )
                    rows.append(
                        ResultRow(
                            experiment="phase",
                            point=point,
                            statistic=f"{model}:{stat}",
                            estimate=report.ratio,
                            bound=factor,
                            passed=report.passed,
                            wall_time=clock.lap(),
                        )
                    )
        logger.info(
            "Phase point finished.",
            event="experiments.phase.point",
            context={"n": n, "p": p, "d": d, "index": index},
        )
        return rows

    jobs = list(enumerate(points))
    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            chunks = list(pool.map(run_point, jobs))
    else:
        chunks = [run_point(job) for job in jobs]
    return tuple(row for chunk in chunks for row in chunk)


def plot_phase_diagram(
    rows: Sequence[ResultRow], p_grid: Sequence[float], d_grid: Sequence[int], path: Path
) -> None:
    """Write a pass/fail raster per model and statistic as a PNG.

    Raises:
        ValidationError: If matplotlib is not installed.
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ValidationError(
            "plotting needs matplotlib; install the 'plot' extra or drop output.plot"
        ) from exc

    import numpy as np

    panels = sorted({row.statistic for row in rows})
    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 4), squeeze=False)  # pyright: ignore[reportUnknownMemberType,reportUnknownVariableType]
    for ax, panel in zip(axes[0], panels, strict=True):  # pyright: ignore[reportUnknownArgumentType,reportUnknownVariableType]
        grid = np.zeros((len(p_grid), len(d_grid)))
        selected = [row for row in rows if row.statistic == panel]
        for row, (i, j) in zip(
            selected, [(i, j) for i in range(len(p_grid)) for j in range(len(d_grid))], strict=True
        ):
            grid[i, j] = 1.0 if row.passed else 0.0
        ax.imshow(grid, origin="lower", cmap="RdYlGn", vmin=0.0, vmax=1.0, aspect="auto")  # pyright: ignore[reportUnknownMemberType]
        ax.set_xticks(range(len(d_grid)), [str(d) for d in d_grid])  # pyright: ignore[reportUnknownMemberType]
        ax.set_yticks(range(len(p_grid)), [f"{p:g}" for p in p_grid])  # pyright: ignore[reportUnknownMemberType]
        ax.set_xlabel("d")  # pyright: ignore[reportUnknownMemberType]
        ax.set_ylabel("p")  # pyright: ignore[reportUnknownMemberType]
        ax.set_title(panel)  # pyright: ignore[reportUnknownMemberType]
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")  # pyright: ignore[reportUnknownMemberType]
    plt.close(fig)  # pyright: ignore[reportUnknownMemberType]


def _run_phase(config: ExperimentConfig, settings: LabSettings) -> ExperimentResult:
    exp, m = config.experiment, config.model
    rows = phase_diagram(
        m.n,
        m.p_grid,
        m.d_grid,
        exp.statistics,
        exp.reps,
        exp.seed,
        factor=config.constants.factor,
        record_timing=exp.record_timing,
        settings=settings,
    )
    passed: dict[str, int] = {}
    for row in rows:
        passed[row.statistic] = passed.get(row.statistic, 0) + (1 if row.passed else 0)
    summary = {"points": len(m.p_grid) * len(m.d_grid), "passed": passed}
    return ExperimentResult(rows=rows, summary=summary)


_RUNNERS: dict[str, Callable[[ExperimentConfig, LabSettings], ExperimentResult]] = {
    "fourier": _run_fourier,
    "detect": _run_detect,
    "advantage": _run_advantage,
    "pcol": _run_pcol,
    "spectral": _run_spectral,
    "phase": _run_phase,
}


def run_experiment(
    config: ExperimentConfig, settings: LabSettings = DEFAULT_SETTINGS
) -> ExperimentResult:
    """Execute the experiment a validated config names.

    Raises:
        LabError: Whatever the experiment raises, with the parameter point
            prepended to the message.
    """
    kind = config.experiment.kind
    logger.info(
        "Experiment started.",
        event="experiments.run.start",
        context={"kind": kind, "seed": config.experiment.seed},
    )
    result = _RUNNERS[kind](config, settings)
    summary = {"experiment": kind, "seed": config.experiment.seed, **result.summary}
    logger.info(
        "Experiment finished.",
        event="experiments.run.done",
        context={"kind": kind, "rows": len(result.rows)},
    )
    return ExperimentResult(rows=result.rows, summary=summary)


def _output_path(config: ExperimentConfig, value: str, settings: LabSettings) -> Path:
    path = Path(value)
    if path.is_absolute():
        return path
    base = settings.output_dir or Path(config.base_dir)
    return base / path


def write_outputs(
    config: ExperimentConfig,
    result: ExperimentResult,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> list[Path]:
    """Write the CSV, JSON and optional plot named in ``config.output``.

    Relative paths go under ``RGG_LAB_OUTPUT_DIR`` when it is set and next to
    the config file otherwise.
    """
    written: list[Path] = []
    out = config.output
    if out.csv:
        path = _output_path(config, out.csv, settings)
        write_text(path, format_csv(result.rows))
        written.append(path)
    if out.json:
        path = _output_path(config, out.json, settings)
        write_text(path, format_json(result.summary))
        written.append(path)
    if out.plot and config.experiment.kind == "phase":
        path = _output_path(config, out.plot, settings)
        plot_phase_diagram(result.rows, config.model.p_grid, config.model.d_grid, path)
        written.append(path)
    return written
