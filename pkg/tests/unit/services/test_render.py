"""
Unit tests for SVG rendering.

Version: 0.1.0
"""

from pathlib import Path

from dimerfold.capabilities.arcs import fold
from dimerfold.capabilities.enumeration import Arc, LoopsArcsConfig, Matching
from dimerfold.services.render import arc_orientation, render_configuration

PAIRS = [
    ((0, 0), (0, 1)),
    ((1, 0), (1, 1)),
    ((2, 1), (2, 2)),
    ((0, 2), (1, 2)),
    ((0, -1), (0, -2)),
    ((1, -1), (1, -2)),
    ((2, -1), (2, -2)),
]


class TestArcOrientation:
    """Tests for arc_orientation."""

    def test_directions(self):
        """Test arcs are classified by the side of their black end."""
        assert arc_orientation(Arc(((1, 0), (1, 1), (0, 1), (0, 0)), (1, 2, 1))) == -1
        assert arc_orientation(Arc(((0, 0), (0, 1), (1, 1), (1, 0)), (1, 2, 1))) == 1


class TestRender:
    """Tests for render_configuration."""

    def test_writes_svg(self, unit_upper, tmp_path: Path):
        """Test an SVG with the metadata description is written."""
        cfg = fold(Matching.of(PAIRS))
        path = render_configuration(
            cfg, unit_upper, tmp_path / "svg" / "c.svg", face=(0, 1), metadata={"seed": 3}
        )
        text = path.read_text(encoding="utf-8")
        assert text.lstrip().startswith("<?xml")
        assert "<svg" in text
        assert "seed" in text

    def test_reproducible(self, unit_upper, tmp_path: Path):
        """Test reruns without a timestamp are byte-identical."""
        cfg = fold(Matching.of(PAIRS))
        a = render_configuration(cfg, unit_upper, tmp_path / "a.svg", title="t")
        b = render_configuration(cfg, unit_upper, tmp_path / "b.svg", title="t")
        assert a.read_bytes() == b.read_bytes()

    def test_empty_configuration(self, unit_upper, tmp_path: Path):
        """Test a configuration without components still renders the grid."""
        path = render_configuration(LoopsArcsConfig(), unit_upper, tmp_path / "e.svg")
        assert path.stat().st_size > 0
