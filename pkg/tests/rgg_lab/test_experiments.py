"""Tests for the experiment runner and result formats."""

import json
import math
import sys
from pathlib import Path
from unittest.mock import patch

import pytest

from rgg_lab.config import (
    ExperimentConfig,
    ExperimentSection,
    LabSettings,
    ModelSection,
    OutputSection,
)
from rgg_lab.errors import DomainError, ValidationError
from rgg_lab.experiments import (
    RESULT_COLUMNS,
    ExperimentResult,
    ResultRow,
    format_csv,
    format_json,
    phase_diagram,
    plot_phase_diagram,
    point_label,
    resolve_pattern,
    run_experiment,
    write_outputs,
)
from rgg_lab.patterns import TRIANGLE


def _config(
    tmp_path: Path,
    experiment: ExperimentSection,
    model: ModelSection | None = None,
    output: OutputSection | None = None,
) -> ExperimentConfig:
    return ExperimentConfig(
        schema_version=1,
        experiment=experiment,
        model=model or ModelSection(),
        output=output or OutputSection(),
        base_dir=str(tmp_path),
    )


class TestFormats:
    """Tests for CSV and JSON rendering."""

    def test_csv_header(self) -> None:
        """Test the fixed column order."""
        assert format_csv([]) == ",".join(RESULT_COLUMNS) + "\n"
        assert format_csv([]) == (
            "experiment,point,statistic,estimate,stderr,bound,passed,wall_time\n"
        )

    def test_csv_cells(self) -> None:
        """Test how missing values, booleans and floats are written."""
        row = ResultRow(
            experiment="fourier",
            point="d=1",
            statistic="triangle",
            estimate=0.1,
            bound=2.0,
            passed=True,
        )
        assert format_csv([row]).splitlines()[1] == "fourier,d=1,triangle,0.1,,2.0,true,0.0"

    def test_csv_quotes_separators(self) -> None:
        """Test that labels containing commas are quoted."""
        row = ResultRow(experiment="advantage", point="n=4", statistic="a,b", estimate=1.0)
        assert '"a,b"' in format_csv([row])

    def test_json(self) -> None:
        """Test sorted keys and non-finite floats."""
        text = format_json({"b": math.inf, "a": [1, (2, 3)]})
        assert text.endswith("\n")
        assert json.loads(text) == {"a": [1, [2, 3]], "b": "inf"}
        assert text.index('"a"') < text.index('"b"')

    def test_point_label(self) -> None:
        """Test parameter point labels."""
        assert point_label(n=64, d=256, p=0.5) == "n=64;d=256;p=0.5"


class TestResolvePattern:
    """Tests for pattern resolution."""

    def test_builtin(self, tmp_path: Path) -> None:
        """Test that builtin names win."""
        assert resolve_pattern("triangle", tmp_path) == TRIANGLE

    def test_file(self, tmp_path: Path) -> None:
        """Test that other names are read relative to the base directory."""
        (tmp_path / "c4.txt").write_text("0 1\n1 2\n2 3\n3 0\n")
        assert resolve_pattern("c4.txt", tmp_path).m == 4


class TestRunExperiment:
    """Tests for each experiment kind."""

    def test_fourier(self, tmp_path: Path) -> None:
        """Test a spherical coefficient against its bound."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="fourier", seed=7, reps=2000),
            ModelSection(model="sphere", d=64),
        )
        result = run_experiment(config)
        (row,) = result.rows
        assert row.statistic == "triangle"
        assert row.passed is True
        assert row.bound is not None
        assert result.summary["experiment"] == "fourier"
        assert result.summary["seed"] == 7
        assert result.summary["reps"] == 2000

    def test_fourier_is_reproducible(self, tmp_path: Path) -> None:
        """Test that reruns give byte-identical CSV."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="fourier", seed=3, reps=500, pattern="wedge"),
            ModelSection(model="gauss", d=20, p=0.3),
        )
        assert format_csv(run_experiment(config).rows) == format_csv(run_experiment(config).rows)

    def test_fourier_er_has_no_bound(self, tmp_path: Path) -> None:
        """Test that Erdos-Renyi rows leave the bound cells empty."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="fourier", seed=1, reps=100),
            ModelSection(model="er"),
        )
        line = format_csv(run_experiment(config).rows).splitlines()[1]
        assert line.endswith(",,,0.0")

    def test_detect(self, tmp_path: Path) -> None:
        """Test a detection run that separates the models."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="detect", seed=2, reps=5),
            ModelSection(model0="er", model1="sphere", n=40, d=2, p=0.5),
        )
        result = run_experiment(config)
        (row,) = result.rows
        assert row.point == "model0=er;model1=sphere;n=40;d=2;p=0.5"
        assert row.passed is True
        assert result.summary["pass"] is True

    def test_error_names_point(self, tmp_path: Path) -> None:
        """Test that failures carry the parameter point."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="detect", seed=2, reps=5),
            ModelSection(model0="er", model1="pcol", q=3, n=10, p=0.3),
        )
        with pytest.raises(DomainError, match=r"^at model0=er;model1=pcol;n=10;d=64;p=0.3: "):
            run_experiment(config)

    def test_advantage_with_mask(self, tmp_path: Path) -> None:
        """Test the advantage sum over a star mask read from disk."""
        (tmp_path / "star.txt").write_text("n 5\n0 1\n0 2\n0 3\n0 4\n")
        config = _config(
            tmp_path,
            ExperimentSection(kind="advantage", seed=1, reps=50, mask="star.txt", degree=2),
            ModelSection(model="sphere", d=10),
        )
        result = run_experiment(config)
        assert result.rows[-1].statistic == "total"
        assert result.rows[-1].estimate == 0.0
        assert result.summary["total"] == 0.0
        assert len(result.summary["classes"]) == 2

    def test_pcol_given_q(self, tmp_path: Path) -> None:
        """Test the weight table with a fixed colour count."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="pcol", seed=4, reps=500, degree=2),
            ModelSection(n=4, d=32, q=3),
        )
        result = run_experiment(config)
        assert [row.statistic.startswith("w:") for row in result.rows] == [True] * 3 + [False]
        assert result.rows[-1].statistic == "advantage"
        assert result.summary["q"] == 3
        assert result.summary["triangle_estimate"] is None
        assert len(result.summary["table"]) == 3

    def test_pcol_selects_q(self, tmp_path: Path) -> None:
        """Test that q is chosen from the triangle estimate when omitted."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="pcol", seed=4, reps=20000, degree=1),
            ModelSection(n=4, d=64),
        )
        result = run_experiment(config)
        assert result.summary["triangle_estimate"] > 0.0
        assert result.summary["q"] >= 3
        assert result.rows[0].point.endswith(f"q={result.summary['q']}")

    def test_spectral(self, tmp_path: Path) -> None:
        """Test one row per dimension."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="spectral", seed=1, trials=1),
            ModelSection(n=30, d_grid=(4, 400)),
        )
        result = run_experiment(config)
        assert [row.statistic for row in result.rows] == ["abs_lambda2", "abs_lambda2"]
        assert result.rows[0].point == "n=30;d=4;regime=geometric"
        assert len(result.summary["trials"]) == 2

    def test_phase(self, tmp_path: Path) -> None:
        """Test the phase summary counts."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="phase", seed=1, reps=3, statistics=("triangle",)),
            ModelSection(n=20, p_grid=(0.5,), d_grid=(3, 50)),
        )
        result = run_experiment(config)
        assert len(result.rows) == 4
        assert result.summary["points"] == 2
        assert set(result.summary["passed"]) == {"sphere:triangle", "gauss:triangle"}


class TestPhaseDiagram:
    """Tests for the phase diagram grid."""

    def test_grid_order(self) -> None:
        """Test that rows follow p, then d, then model, then statistic."""
        rows = phase_diagram(20, (0.3, 0.5), (4, 100), ("triangle", "wedge"), 3, 1)
        assert len(rows) == 2 * 2 * 2 * 2
        assert rows[0].point == "n=20;d=4;p=0.3"
        assert [row.statistic for row in rows[:4]] == [
            "sphere:triangle",
            "sphere:wedge",
            "gauss:triangle",
            "gauss:wedge",
        ]
        assert rows[4].point == "n=20;d=100;p=0.3"
        assert rows[-1].point == "n=20;d=100;p=0.5"

    def test_worker_count_invariant(self) -> None:
        """Test that the grid pool does not change results."""
        serial = phase_diagram(16, (0.5,), (3, 30), ("triangle",), 3, 9)
        pooled = phase_diagram(
            16, (0.5,), (3, 30), ("triangle",), 3, 9, settings=LabSettings(threads=2)
        )
        assert serial == pooled

    def test_validation(self) -> None:
        """Test statistic and grid validation."""
        with pytest.raises(ValidationError, match="unknown phase statistic"):
            phase_diagram(16, (0.5,), (3,), ("square",), 3, 0)
        with pytest.raises(ValidationError, match="non-empty"):
            phase_diagram(16, (), (3,), ("triangle",), 3, 0)


class TestWriteOutputs:
    """Tests for writing result files."""

    @staticmethod
    def _result() -> ExperimentResult:
        row = ResultRow(experiment="fourier", point="d=4", statistic="triangle", estimate=0.5)
        return ExperimentResult(rows=(row,), summary={"experiment": "fourier", "seed": 1})

    def test_relative_to_config(self, tmp_path: Path) -> None:
        """Test that relative paths land next to the config."""
        config = _config(
            tmp_path,
            ExperimentSection(kind="fourier", seed=1),
            output=OutputSection(csv="out/rows.csv", json="out/summary.json"),
        )
        written = write_outputs(config, self._result())
        assert written == [tmp_path / "out" / "rows.csv", tmp_path / "out" / "summary.json"]
        assert written[0].read_text().startswith("experiment,point,")
        assert json.loads(written[1].read_text())["seed"] == 1

    def test_output_dir_setting(self, tmp_path: Path) -> None:
        """Test that the output directory setting takes precedence."""
        target = tmp_path / "results"
        config = _config(
            tmp_path / "configs",
            ExperimentSection(kind="fourier", seed=1),
            output=OutputSection(csv="rows.csv"),
        )
        written = write_outputs(config, self._result(), LabSettings(output_dir=target))
        assert written == [target / "rows.csv"]
        assert written[0].is_file()

    def test_nothing_requested(self, tmp_path: Path) -> None:
        """Test that an empty output table writes nothing."""
        config = _config(tmp_path, ExperimentSection(kind="fourier", seed=1))
        assert write_outputs(config, self._result()) == []

    def test_plot_needs_matplotlib(self, tmp_path: Path) -> None:
        """Test the error when matplotlib is unavailable."""
        with patch.dict(sys.modules, {"matplotlib": None}):
            with pytest.raises(ValidationError, match="matplotlib"):
                plot_phase_diagram([], (0.5,), (3,), tmp_path / "phase.png")

    def test_plot(self, tmp_path: Path) -> None:
        """Test that a phase run writes its raster."""
        pytest.importorskip("matplotlib")
        rows = phase_diagram(16, (0.5,), (3, 30), ("triangle",), 3, 2)
        path = tmp_path / "plots" / "phase.png"
        plot_phase_diagram(rows, (0.5,), (3, 30), path)
        assert path.read_bytes().startswith(b"\x89PNG")
