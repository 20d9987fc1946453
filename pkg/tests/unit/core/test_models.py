"""
Unit tests for run configurations and shared enums.

Version: 0.1.0
"""

import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from dimerfold.core.exceptions import (
    ConfigNotFoundError,
    ConfigParseError,
    ConfigValidationError,
)
from dimerfold.core.models import Model, Provenance, RunConfig, load_run_config


class TestModel:
    """Tests for the Model enum."""

    def test_values(self):
        """Test enum values."""
        assert Model.FOLDED == "folded"
        assert Model.SHIFTED == "shifted"

    def test_series_constant(self):
        """Test c = 2 for folded and 1 for shifted."""
        assert Model.FOLDED.series_constant == 2.0
        assert Model.SHIFTED.series_constant == 1.0

    def test_provenance_values(self):
        """Test provenance labels."""
        assert Provenance.EXACT.value == "exact-enumeration"
        assert Provenance.MONTE_CARLO.value == "monte-carlo"


class TestRunConfig:
    """Tests for RunConfig validation."""

    def test_defaults(self):
        """Test default values."""
        cfg = RunConfig()
        assert cfg.model is Model.FOLDED
        assert cfg.seed == 0
        assert cfg.z == (0.0, math.pi / 4)
        assert cfg.timestamp is True

    def test_unknown_key_rejected(self, tmp_path: Path):
        """Test unknown keys fail validation."""
        path = tmp_path / "run.yaml"
        path.write_text("sampels: 10\n", encoding="utf-8")
        with pytest.raises(ConfigValidationError) as info:
            load_run_config(path)
        assert any("sampels" in line for line in info.value.details["validation_errors"])

    @pytest.mark.parametrize("alpha", [1.0, -0.1])
    def test_alpha_range(self, alpha: float):
        """Test alphas outside [0, 1) are rejected."""
        with pytest.raises(ValueError):
            RunConfig(alphas=[0.1, alpha])

    def test_y_range(self):
        """Test y values outside (0, pi/2] are rejected."""
        with pytest.raises(ValueError):
            RunConfig(y_values=[0.0])

    def test_missing_domain_file(self, tmp_path: Path):
        """Test a domain path must exist."""
        with pytest.raises(ValueError):
            RunConfig(domain=tmp_path / "absent.yaml")

    def test_frozen(self):
        """Test instances are immutable."""
        cfg = RunConfig()
        with pytest.raises(ValidationError):
            cfg.seed = 3  # type: ignore[misc]


class TestOverrides:
    """Tests for with_overrides."""

    def test_none_means_not_given(self):
        """Test None leaves the file value in place."""
        cfg = RunConfig(seed=5).with_overrides(seed=None, threads=4)
        assert cfg.seed == 5
        assert cfg.threads == 4

    def test_invalid_override(self):
        """Test an invalid override raises a config error."""
        with pytest.raises(ConfigValidationError):
            RunConfig().with_overrides(threads=0)


class TestDigest:
    """Tests for the config digest."""

    def test_stable(self):
        """Test equal configs share a digest."""
        assert RunConfig(seed=1).digest() == RunConfig(seed=1).digest()
        assert len(RunConfig().digest()) == 64

    def test_seed_changes_digest(self):
        """Test results-relevant fields change the digest."""
        assert RunConfig(seed=1).digest() != RunConfig(seed=2).digest()

    def test_output_and_timestamp_excluded(self):
        """Test output directory and timestamp flag do not change the digest."""
        a = RunConfig(output_dir=Path("a"), timestamp=True)
        b = RunConfig(output_dir=Path("b"), timestamp=False)
        assert a.digest() == b.digest()


class TestLoadRunConfig:
    """Tests for load_run_config."""

    def test_none_gives_defaults(self):
        """Test no path gives the defaults."""
        assert load_run_config(None) == RunConfig()

    def test_reads_yaml(self, tmp_path: Path):
        """Test values are read from YAML."""
        path = tmp_path / "run.yaml"
        path.write_text("model: shifted\nsamples: 50\nz: [0.5, 1.0]\n", encoding="utf-8")
        cfg = load_run_config(path)
        assert cfg.model is Model.SHIFTED
        assert cfg.samples == 50
        assert cfg.z == (0.5, 1.0)

    def test_missing(self, tmp_path: Path):
        """Test a missing file raises."""
        with pytest.raises(ConfigNotFoundError):
            load_run_config(tmp_path / "absent.yaml")

    def test_not_mapping(self, tmp_path: Path):
        """Test a non-mapping top level raises."""
        path = tmp_path / "run.yaml"
        path.write_text("- 1\n", encoding="utf-8")
        with pytest.raises(ConfigParseError):
            load_run_config(path)
