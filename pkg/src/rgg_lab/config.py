"""Environment and experiment configuration for rgg-lab.

Two layers of configuration exist. Process-wide knobs (thread counts, size caps,
output directory) come from environment variables through
:func:`load_lab_settings`. Individual experiments are described by a versioned
TOML file loaded through :func:`load_experiment_config`. Both loaders return a
``(value, error)`` tuple instead of raising, so the CLI can report problems and
choose an exit code in one place.

Example:
    Load settings from the current environment::

        import os
        from rgg_lab.config import load_lab_settings

        settings, error = load_lab_settings(os.environ)
        if error:
            raise RuntimeError(error)
        print(f"Running with {settings.threads} threads")

Environment Variables:
    RGG_LAB_THREADS: Optional. Worker count for replicate and grid pools. Defaults to 1.
    RGG_LAB_PATTERN_CAP: Optional. Vertex cap for exact pattern searches. Defaults to 10.
    RGG_LAB_EDGE_CAP: Optional. Edge cap for exact invariant searches. Defaults to 16.
    RGG_LAB_DEGREE_CAP: Optional. Maximum pattern edge count for counting. Defaults to 8.
    RGG_LAB_DENSE_EIG_CAP: Optional. Largest n for the dense eigensolver. Defaults to 4096.
    RGG_LAB_EMBEDDING_BUDGET: Optional. Embeddings enumerated per count. Defaults to 5000000.
    RGG_LAB_OUTPUT_DIR: Optional. Directory for experiment outputs.
        Created if it does not exist.
    RGG_LAB_LOG_LEVEL: Optional. Logging level name. Defaults to "INFO".
"""

from __future__ import annotations

import tomllib
from collections.abc import Mapping
from dataclasses import field
from pathlib import Path
from typing import Any

from weakincentives import FrozenDataclass
from weakincentives.serde import parse

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = ("fourier", "detect", "advantage", "pcol", "spectral", "phase")
MODEL_KINDS = ("er", "sphere", "gauss", "pcol")
PHASE_STATISTICS = ("triangle", "wedge")

_INT_DEFAULTS: dict[str, int] = {
    "RGG_LAB_THREADS": 1,
    "RGG_LAB_PATTERN_CAP": 10,
    "RGG_LAB_EDGE_CAP": 16,
    "RGG_LAB_DEGREE_CAP": 8,
    "RGG_LAB_DENSE_EIG_CAP": 4096,
    "RGG_LAB_EMBEDDING_BUDGET": 5_000_000,
}


@FrozenDataclass()
class LabSettings:
    """Process-wide knobs read from the environment.

    Instances are created via :func:`load_lab_settings`; :data:`DEFAULT_SETTINGS`
    holds the values used when no environment is consulted (library calls and
    tests).

    Attributes:
        threads: Worker count for replicate chunks and grid points.
        pattern_cap: Maximum pattern vertex count for exact OEI/SOEI, canonical
            keys and set-partition enumeration.
        edge_cap: Maximum pattern edge count for exact invariant searches.
        degree_cap: Maximum pattern edge count ``D`` accepted by subgraph counting.
        dense_eig_cap: Largest vertex count handed to the dense eigensolver.
        embedding_budget: Maximum number of labeled embeddings a single count may
            enumerate before raising a budget error.
        output_dir: Optional absolute directory for experiment outputs.
        log_level: Logging level name passed to ``configure_logging``.
    """

    threads: int = 1
    pattern_cap: int = 10
    edge_cap: int = 16
    degree_cap: int = 8
    dense_eig_cap: int = 4096
    embedding_budget: int = 5_000_000
    output_dir: Path | None = None
    log_level: str = "INFO"


DEFAULT_SETTINGS = LabSettings()


def load_lab_settings(env: Mapping[str, str]) -> tuple[LabSettings | None, str | None]:
    """Load lab settings from environment variables.

    Integer knobs must parse as positive integers. If ``RGG_LAB_OUTPUT_DIR`` is
    provided it is resolved to an absolute path and created (including parents).

    Args:
        env: A mapping of environment variable names to values, typically
            ``os.environ``.

    Returns:
        ``(LabSettings(...), None)`` on success, ``(None, message)`` on failure.

    Example:
        Testing with a custom environment::

            settings, error = load_lab_settings({"RGG_LAB_THREADS": "4"})
            assert error is None
            assert settings.threads == 4
    """
    values: dict[str, int] = {}
    for name, default in _INT_DEFAULTS.items():
        raw = env.get(name)
        if not raw:
            values[name] = default
            continue
        try:
            value = int(raw)
        except ValueError:
            return None, f"{name} must be a positive integer"
        if value < 1:
            return None, f"{name} must be a positive integer"
        values[name] = value

    output_str = env.get("RGG_LAB_OUTPUT_DIR")
    output_dir: Path | None = None
    if output_str:
        output_dir = Path(output_str).resolve()
        output_dir.mkdir(parents=True, exist_ok=True)

    return (
        LabSettings(
            threads=values["RGG_LAB_THREADS"],
            pattern_cap=values["RGG_LAB_PATTERN_CAP"],
            edge_cap=values["RGG_LAB_EDGE_CAP"],
            degree_cap=values["RGG_LAB_DEGREE_CAP"],
            dense_eig_cap=values["RGG_LAB_DENSE_EIG_CAP"],
            embedding_budget=values["RGG_LAB_EMBEDDING_BUDGET"],
            output_dir=output_dir,
            log_level=env.get("RGG_LAB_LOG_LEVEL", "INFO").upper(),
        ),
        None,
    )


@FrozenDataclass()
class ExperimentSection:
    """The ``[experiment]`` table: what to run and how many replicates.

    Attributes:
        kind: One of ``fourier``, ``detect``, ``advantage``, ``pcol``,
            ``spectral`` or ``phase``.
        seed: Root seed. Mandatory; there is no wall-clock default.
        reps: Replicates per estimate (samples per side for detection).
        pattern: A builtin pattern name (see :data:`rgg_lab.patterns.BUILTIN_PATTERNS`)
            or a path to an edge-list file.
        mask: Optional path to a mask edge-list file.
        statistics: Statistics evaluated by the phase diagram.
        degree: Degree ``D`` for the advantage sums.
        trials: Trials per grid point for the spectral experiment.
        record_timing: When true, rows carry wall-clock durations. Off by default
            so reruns produce byte-identical CSV files.
    """

    kind: str
    seed: int
    reps: int = 1000
    pattern: str = "triangle"
    mask: str | None = None
    statistics: tuple[str, ...] = PHASE_STATISTICS
    degree: int = 3
    trials: int = 5
    record_timing: bool = False


@FrozenDataclass()
class ModelSection:
    """The ``[model]`` table: the graph models and parameter grids.

    Attributes:
        model: Model for single-model experiments.
        model0: Null model for detection.
        model1: Alternative model for detection.
        n: Vertex count.
        d: Latent dimension.
        p: Edge density.
        q: Color count for planted coloring; ``None`` selects it from ``d``.
        d_grid: Dimensions swept by ``spectral`` and ``phase``.
        p_grid: Densities swept by ``phase``.
    """

    model: str = "sphere"
    model0: str = "er"
    model1: str = "sphere"
    n: int = 64
    d: int = 64
    p: float = 0.5
    q: int | None = None
    d_grid: tuple[int, ...] = ()
    p_grid: tuple[float, ...] = ()


@FrozenDataclass()
class ConstantsSection:
    """The ``[constants]`` table: knobs standing in for unspecified constants.

    Attributes:
        kappa: Constant inside the coefficient bound ``(kappa k m (log d)^1.5 / sqrt d)``.
        epsilon: Density exponent of the standing assumption ``p >= n^(-1+epsilon)``.
        gamma: Dimension exponent of the standing assumption ``d >= n^gamma``.
        factor: Separation ratio a detection test must reach to pass.
        polylog_exponent: Exponent ``e`` of the spectral bound ``n (log n)^e / sqrt d``.
        regime_exponent: Exponent of the regime boundary ``d = n (log n)^e``.
    """

    kappa: float = 1.0
    epsilon: float = 0.1
    gamma: float = 0.1
    factor: float = 5.0
    polylog_exponent: float = 10.0
    regime_exponent: float = 8.0


@FrozenDataclass()
class OutputSection:
    """The ``[output]`` table: where rows, the summary and the plot go.

    Relative paths are resolved against the config file's directory.
    """

    csv: str | None = None
    json: str | None = None
    plot: str | None = None


@FrozenDataclass()
class ExperimentConfig:
    """A complete, versioned experiment description.

    Example:
        A minimal config file::

            schema_version = 1

            [experiment]
            kind = "fourier"
            seed = 7
            reps = 20000
            pattern = "triangle"

            [model]
            model = "sphere"
            d = 256
            p = 0.5
    """

    schema_version: int
    experiment: ExperimentSection
    model: ModelSection = field(default_factory=ModelSection)
    constants: ConstantsSection = field(default_factory=ConstantsSection)
    output: OutputSection = field(default_factory=OutputSection)
    base_dir: str = "."


def _tupled(data: Any) -> Any:
    if isinstance(data, dict):
        return {str(k): _tupled(v) for k, v in data.items()}  # pyright: ignore[reportUnknownVariableType]
    if isinstance(data, list):
        return tuple(_tupled(v) for v in data)  # pyright: ignore[reportUnknownVariableType]
    return data


def validate_experiment_config(config: ExperimentConfig) -> str | None:
    """Check semantic constraints that the TOML schema cannot express.

    Returns:
        ``None`` when the config is valid, otherwise ``"<field path>: <problem>"``.
    """
    from rgg_lab.patterns import BUILTIN_PATTERNS

    if config.schema_version != SCHEMA_VERSION:
        return f"schema_version: expected {SCHEMA_VERSION}, got {config.schema_version}"
    exp = config.experiment
    model = config.model
    if exp.kind not in EXPERIMENT_KINDS:
        return f"experiment.kind: must be one of {', '.join(EXPERIMENT_KINDS)}"
    if exp.seed < 0:
        return "experiment.seed: must be a non-negative integer"
    if exp.reps < 1:
        return "experiment.reps: must be >= 1"
    if exp.trials < 1:
        return "experiment.trials: must be >= 1"
    if exp.degree < 1:
        return "experiment.degree: must be >= 1"
    for stat in exp.statistics:
        if stat not in PHASE_STATISTICS:
            return f"experiment.statistics: unknown statistic {stat!r}"
    base = Path(config.base_dir)
    if exp.pattern not in BUILTIN_PATTERNS and not (base / exp.pattern).is_file():
        return f"experiment.pattern: no builtin pattern or file named {exp.pattern!r}"
    if exp.mask is not None and not (base / exp.mask).is_file():
        return f"experiment.mask: file not found: {exp.mask}"
    for name in ("model", "model0", "model1"):
        if getattr(model, name) not in MODEL_KINDS:
            return f"model.{name}: must be one of {', '.join(MODEL_KINDS)}"
    if model.n < 2:
        return "model.n: must be >= 2"
    if model.d < 1:
        return "model.d: must be >= 1"
    if not 0.0 < model.p < 1.0:
        return "model.p: must lie in (0, 1)"
    if model.q is not None and model.q < 3:
        return "model.q: must be >= 3"
    if exp.kind in ("spectral", "phase") and not model.d_grid:
        return "model.d_grid: must be non-empty"
    if exp.kind == "phase" and not model.p_grid:
        return "model.p_grid: must be non-empty"
    if any(d < 1 for d in model.d_grid):
        return "model.d_grid: dimensions must be >= 1"
    if any(not 0.0 < p < 1.0 for p in model.p_grid):
        return "model.p_grid: densities must lie in (0, 1)"
    return None


def load_experiment_config(path: Path) -> tuple[ExperimentConfig | None, str | None]:
    """Load and validate an experiment config from a TOML file.

    Args:
        path: Path to the TOML file. Relative pattern, mask and output paths
            inside it are resolved against the file's directory.

    Returns:
        ``(ExperimentConfig(...), None)`` on success, ``(None, message)`` on
        failure. Messages start with the offending field path.
    """
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        return None, f"config: cannot read {path}: {exc.strerror}"
    except tomllib.TOMLDecodeError as exc:
        return None, f"config: invalid TOML: {exc}"

    if "experiment" not in raw:
        return None, "experiment: section is required"
    if "seed" not in raw["experiment"]:
        return None, "experiment.seed: a seed is required"
    raw["base_dir"] = str(path.resolve().parent)

    try:
        config = parse(ExperimentConfig, _tupled(raw))
    except (TypeError, ValueError) as exc:
        return None, f"config: {exc}"

    problem = validate_experiment_config(config)
    if problem:
        return None, problem
    return config, None
