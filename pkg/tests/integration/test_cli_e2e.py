"""
End-to-end integration tests for CLI workflows.

Tests complete experiment runs: corpus verification, the finite-mesh
identity, strip, coupling and trace runs on the strip, and the cylinder limit.

Version: 0.1.0
"""

import csv
import json
import math
from pathlib import Path

import pytest
from typer.testing import CliRunner

from dimerfold.capabilities.cylinder import limit_product, limit_table
from dimerfold.services.cli import EXIT_TOLERANCE, app

runner = CliRunner()

pytestmark = pytest.mark.integration


def write_config(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


class TestVerifyKenyon:
    """Corpus verification runs."""

    @pytest.mark.slow
    def test_corpus_passes(self, tmp_path: Path):
        """Test every one of at least 20 corpus graphs passes under 20 connections."""
        cfg = write_config(tmp_path / "k.yaml", "connections: 20\n")
        result = runner.invoke(app, ["verify-kenyon", "-c", str(cfg), "-o", str(tmp_path / "out")])
        assert result.exit_code == 0, result.output
        data = read_json(tmp_path / "out" / "kenyon.json")
        assert data["graphs"] >= 20
        assert data["connections"] == 20
        assert data["failed"] == []
        assert data["max_error"] < 1e-8

    def test_fault_injection_fails(self, tmp_path: Path):
        """Test a flipped Kasteleyn phase is detected."""
        cfg = write_config(tmp_path / "k.yaml", "connections: 3\ninject_fault: true\n")
        result = runner.invoke(app, ["verify-kenyon", "-c", str(cfg), "-o", str(tmp_path / "out")])
        assert result.exit_code == EXIT_TOLERANCE
        data = read_json(tmp_path / "out" / "kenyon.json")
        assert data["inject_fault"] is True
        assert data["failed"]


class TestIdentity:
    """Finite-mesh identity over the corpus."""

    def test_corpus_identity(self, tmp_path: Path):
        """Test enumeration, Pf ratio and det series agree for both models."""
        out = tmp_path / "out"
        result = runner.invoke(app, ["identity", "-o", str(out), "--no-timestamp"])
        assert result.exit_code == 0, result.output
        data = read_json(out / "identity.json")
        assert data["rows"] > 0
        assert data["max_error"] < 1e-8
        with (out / "identity.csv").open(encoding="utf-8") as handle:
            models = {row["model"] for row in csv.DictReader(handle)}
        assert models == {"folded", "shifted"}


@pytest.mark.slow
class TestStrip:
    """Runs on the strip."""

    def test_strip_check(self, tmp_path: Path):
        """Test one sample batch serves every height."""
        cfg = write_config(
            tmp_path / "s.yaml",
            "height: 8\nhalf_width: 3.14159\nsamples: 200\nseed: 5\n"
            "tolerance_o: 1.0\ntolerance_n: 1.0\nconfirm: false\n",
        )
        out = tmp_path / "out"
        result = runner.invoke(app, ["strip-check", "-c", str(cfg), "-o", str(out), "--threads", "2"])
        assert result.exit_code == 0, result.output
        data = read_json(out / "strip_check.json")
        assert data["samples"] == 200
        assert len(data["rows"]) == 3
        assert data["confirmation"] == []
        for row in data["rows"]:
            assert 0 <= row["mean_o"] <= 1
            assert row["bell_n"] == pytest.approx(row["target_n"], abs=1e-7)
            assert row["gap_o"] == pytest.approx(abs(row["mean_o"] - row["target_o"]))

    def test_strip_check_gap_fails(self, tmp_path: Path):
        """Test a gap above the tolerance exits with the tolerance code."""
        cfg = write_config(
            tmp_path / "s.yaml",
            "height: 6\nhalf_width: 3.14159\nsamples: 20\nseed: 5\n"
            "y_values: [0.5235987755982988]\ntolerance_o: 1.0e-9\nconfirm: false\n",
        )
        out = tmp_path / "out"
        result = runner.invoke(app, ["strip-check", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code == EXIT_TOLERANCE
        data = read_json(out / "strip_check.json")
        assert data["rows"][0]["gap_o"] > 1e-9

    def test_strip_check_confirmation(self, tmp_path: Path):
        """Test the rerun at twice the height samples the y of z only."""
        cfg = write_config(
            tmp_path / "s.yaml",
            "height: 8\nhalf_width: 3.14159\nsamples: 50\nseed: 5\n"
            "tolerance_o: 1.0\ntolerance_n: 1.0\n",
        )
        out = tmp_path / "out"
        result = runner.invoke(app, ["strip-check", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code in (0, EXIT_TOLERANCE), result.output
        data = read_json(out / "strip_check.json")
        (fine,) = data["confirmation"]
        assert fine["height"] == 16
        assert fine["y"] == pytest.approx(math.pi / 4)
        if result.exit_code == EXIT_TOLERANCE:
            coarse = next(row for row in data["rows"] if row["y"] == fine["y"])
            assert fine["gap_o"] >= coarse["gap_o"] or fine["gap_n"] >= coarse["gap_n"]

    def test_coupling_identity_fails(self, tmp_path: Path):
        """Test the coupling command exits 1 when the identity tolerance is unreachable."""
        cfg = write_config(tmp_path / "c.yaml", "height: 6\nhalf_width: 3.14159\ntolerance: 1.0e-30\n")
        out = tmp_path / "out"
        result = runner.invoke(app, ["coupling", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code == EXIT_TOLERANCE
        data = read_json(out / "coupling.json")
        assert data["heights"] == [6, 12]
        assert set(data["orders"]) == {"1,1", "1,-1", "-1,1", "-1,-1"}
        assert data["identity_error"] < 1e-8

    @pytest.mark.parametrize("model", ["folded", "shifted"])
    def test_coupling_order(self, tmp_path: Path, model: str):
        """Test couplings converge with order at least 1.7 from H=16 to H=32."""
        cfg = write_config(tmp_path / "c.yaml", f"height: 16\nmodel: {model}\n")
        out = tmp_path / "out"
        result = runner.invoke(app, ["coupling", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code == 0, result.output
        data = read_json(out / "coupling.json")
        assert data["model"] == model
        assert data["min_order"] >= 1.7
        assert data["identity_error"] < 1e-9

    def test_strip_acceptance(self, tmp_path: Path):
        """Test folded H=40 moments sit within (0.03, 0.05) of the limits and shrink at H=80."""
        cfg = write_config(
            tmp_path / "s.yaml",
            "height: 40\nmodel: folded\ny_values: [0.7853981633974483]\n"
            "samples: 10000\nseed: 11\nthreads: 4\n",
        )
        out = tmp_path / "out"
        result = runner.invoke(app, ["strip-check", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code == 0, result.output
        data = read_json(out / "strip_check.json")
        (row,) = data["rows"]
        assert row["gap_o"] <= 0.03
        assert row["gap_n"] <= 0.05
        assert data["confirmation"][0]["height"] == 80

    def test_models_agree(self, tmp_path: Path):
        """Test folded and shifted moments at H=40 agree within three combined sigma."""
        rows = {}
        for model in ("folded", "shifted"):
            cfg = write_config(
                tmp_path / f"{model}.yaml",
                f"height: 40\nmodel: {model}\ny_values: [0.7853981633974483]\n"
                "samples: 4000\nseed: 13\nthreads: 4\ntolerance_o: 1.0\ntolerance_n: 1.0\nconfirm: false\n",
            )
            out = tmp_path / model
            result = runner.invoke(app, ["strip-check", "-c", str(cfg), "-o", str(out)])
            assert result.exit_code == 0, result.output
            (rows[model],) = read_json(out / "strip_check.json")["rows"]
        folded, shifted = rows["folded"], rows["shifted"]
        for key in ("o", "n"):
            sigma = math.hypot(folded[f"stderr_{key}"], shifted[f"stderr_{key}"])
            assert abs(folded[f"mean_{key}"] - shifted[f"mean_{key}"]) <= 3 * sigma

    def test_trace(self, tmp_path: Path):
        """Test the trace series is written next to the continuum values."""
        cfg = write_config(tmp_path / "t.yaml", "height: 8\nhalf_width: 3.14159\nn_max: 4\n")
        out = tmp_path / "out"
        result = runner.invoke(app, ["trace", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code == 0, result.output
        data = read_json(out / "trace.json")
        assert len(data["c"]) == 4
        assert all(c is not None for c in data["c"])
        assert data["zipper_edges"] > 0


@pytest.mark.slow
class TestCylinderLimit:
    """Finite cylinders against the limit product."""

    def test_close_to_limit(self):
        """Test a 12 x 12 cylinder is within 0.02 of the limit at Y = 1.25."""
        (row,) = limit_table([(12, 12)], [1.25])
        assert row.limit == pytest.approx(limit_product(math.exp(-12 * math.pi / 13), 1.25))
        assert row.gap < 0.02

    def test_gap_shrinks(self):
        """Test the gap to the limit shrinks along square cylinders."""
        rows = limit_table([(4, 4), (8, 8), (12, 12), (16, 16)], [1.25])
        gaps = [row.gap for row in rows]
        assert all(a > b for a, b in zip(gaps, gaps[1:], strict=False))

    def test_cli_limit_sizes(self, tmp_path: Path):
        """Test limit sizes are tabulated separately from enumerated ones."""
        cfg = write_config(
            tmp_path / "c.yaml",
            "cylinder_sizes: [[3, 2]]\nlimit_sizes: [[5, 4], [7, 6]]\ny_grid: [1.0, 1.5]\n",
        )
        out = tmp_path / "out"
        result = runner.invoke(app, ["cylinder", "-c", str(cfg), "-o", str(out)])
        assert result.exit_code == 0, result.output
        with (out / "cylinder_limit.csv").open(encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert [(r["n"], r["m"]) for r in rows] == [("5", "4"), ("5", "4"), ("7", "6"), ("7", "6")]
        assert float(rows[0]["finite"]) == pytest.approx(1.0)
