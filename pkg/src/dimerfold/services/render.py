"""
SVG rendering of a loops-and-arcs configuration.

Uses matplotlib's object API (no pyplot state), so rendering is safe inside
tests and worker threads. Arcs run from white to black end and are coloured by
the direction they travel along the axis.

Version: 0.1.0
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib as mpl
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure

from dimerfold.capabilities.enumeration import Arc, LoopsArcsConfig
from dimerfold.core.logging import get_logger
from dimerfold.domain.lattice import LatticeGraph, Point

logger = get_logger(__name__)

ARC_COLOURS = {1: "tab:red", -1: "tab:blue"}
LOOP_COLOUR = "0.15"
DOUBLED_COLOUR = "0.55"
GRID_COLOUR = "0.9"


def arc_orientation(arc: Arc) -> int:
    """+1 if the arc ends to the right of (or level with) where it starts."""
    return 1 if arc.black_end[0] >= arc.white_end[0] else -1


def _segments(g: LatticeGraph, points: list[Point], closed: bool = False) -> list[list[tuple[float, float]]]:
    xy = [(g.position(p).real, g.position(p).imag) for p in points]
    if closed:
        xy.append(xy[0])
    return [[a, b] for a, b in zip(xy, xy[1:], strict=False)]


def render_configuration(
    cfg: LoopsArcsConfig,
    g: LatticeGraph,
    path: Path,
    face: Point | None = None,
    title: str | None = None,
    metadata: dict[str, object] | None = None,
) -> Path:
    """Write ``cfg`` on ``g`` as SVG.

    ``metadata`` is stored in the SVG description; without a ``"timestamp"``
    entry the file carries no date, so reruns are byte-identical.
    """
    fig = Figure(figsize=(8, 4))
    ax = fig.add_subplot()
    ax.set_aspect("equal")
    ax.axis("off")

    grid = [
        [(g.position(u).real, g.position(u).imag), (g.position(v).real, g.position(v).imag)]
        for u, v in g.edges
    ]
    ax.add_collection(LineCollection(grid, colors=GRID_COLOUR, linewidths=0.4))

    doubled = [seg for w, b in cfg.doubled for seg in _segments(g, [w, b])]
    ax.add_collection(LineCollection(doubled, colors=DOUBLED_COLOUR, linewidths=1.6))

    loops = [seg for loop in cfg.loops for seg in _segments(g, list(loop.cycle), closed=True)]
    ax.add_collection(LineCollection(loops, colors=LOOP_COLOUR, linewidths=1.0))

    for arc in cfg.arcs:
        ax.add_collection(
            LineCollection(
                _segments(g, list(arc.path)),
                colors=ARC_COLOURS[arc_orientation(arc)],
                linewidths=1.4,
            )
        )

    if face is not None:
        centre = g.position((face[0], face[1])) + complex(0.5, 0.5) * g.scale
        ax.plot([centre.real], [centre.imag], marker="*", color="tab:green", markersize=9)
    if title:
        ax.set_title(title, fontsize=9)
    ax.autoscale_view()

    stamp = (metadata or {}).get("timestamp")
    with mpl.rc_context({"svg.hashsalt": "dimerfold", "svg.fonttype": "none"}):
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(
            path,
            format="svg",
            metadata={
                "Creator": "dimerfold",
                "Date": str(stamp) if stamp else None,
                "Description": json.dumps(metadata or {}, sort_keys=True, default=str),
            },
        )
    logger.debug("configuration_rendered", path=str(path), arcs=len(cfg.arcs), loops=len(cfg.loops))
    return path
