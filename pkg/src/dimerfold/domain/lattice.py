"""
Lattice domains and Temperleyan graphs.

All graph vertices live on the doubled square lattice: a vertex of the
original lattice εZ² at (i, j) has doubled coordinates (2i, 2j), the midpoint
of a lattice edge has one odd coordinate and the centre of a lattice cell has
two. The parity pattern fixes the vertex class:

    B1 = (even, even)   lattice vertices (minus the removed corner b0)
    W1 = (odd, even)    horizontal lattice edges
    W0 = (even, odd)    vertical lattice edges
    B0 = (odd, odd)     inner faces

so W/B positions are exact integers and ε only enters through the embedding
``position(p) = (X + iY) * ε / 2``.

Version: 0.1.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Literal

import networkx as nx
import numpy as np
import yaml
from matplotlib.path import Path as PolygonPath
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dimerfold.core.exceptions import DomainError, GraphError
from dimerfold.core.logging import get_logger

if TYPE_CHECKING:
    from collections.abc import Iterable

logger = get_logger(__name__)

Point = tuple[int, int]
Edge = tuple[Point, Point]

_STEPS: tuple[Point, ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))


class VertexClass(str, Enum):
    """Vertex classes of a Temperleyan graph."""

    W0 = "W0"
    W1 = "W1"
    B0 = "B0"
    B1 = "B1"

    @property
    def is_white(self) -> bool:
        return self in (VertexClass.W0, VertexClass.W1)


class GraphVariant(str, Enum):
    """Which graph of the construction a LatticeGraph is."""

    SYMMETRIC = "symmetric-r"
    UPPER = "upper-1"
    STRICT_UPPER = "strict-upper-2"
    CYLINDER = "cylinder"
    PLAIN = "plain"


def vertex_class(p: Point) -> VertexClass:
    """Class of a doubled-coordinate point from its parity pattern."""
    x_odd, y_odd = p[0] % 2, p[1] % 2
    if x_odd and y_odd:
        return VertexClass.B0
    if x_odd:
        return VertexClass.W1
    if y_odd:
        return VertexClass.W0
    return VertexClass.B1


def reflect(p: Point) -> Point:
    """Mirror image across the horizontal axis."""
    return (p[0], -p[1])


# =============================================================================
# Domain descriptors
# =============================================================================


class DomainDescriptor(BaseModel):
    """Key-value description of a symmetric rectilinear domain.

    Coordinates are continuum values; they must be multiples of ``eps``.
    For ``kind="strip"`` the mesh is ``eps = pi / height`` and the domain is
    ``[-half_width, half_width] x [-pi/2, pi/2]``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["rectangle", "strip", "polygon"]
    eps: float | None = Field(default=None, gt=0)
    x_min: float | None = None
    x_max: float | None = None
    y_max: float | None = Field(default=None, gt=0)
    height: int | None = Field(default=None, ge=2)
    half_width: float = Field(default=2 * math.pi, gt=0)
    vertices: list[tuple[float, float]] | None = None
    anchor: tuple[float, float] | None = None
    delta: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_kind_fields(self) -> DomainDescriptor:
        if self.kind == "strip":
            if self.height is None or self.height % 2:
                raise ValueError("strip needs an even 'height' (rows of cells)")
        elif self.eps is None:
            raise ValueError(f"{self.kind} needs 'eps'")
        if self.kind == "rectangle" and None in (self.x_min, self.x_max, self.y_max):
            raise ValueError("rectangle needs x_min, x_max and y_max")
        if self.kind == "polygon" and (not self.vertices or len(self.vertices) < 4):
            raise ValueError("polygon needs at least four vertices")
        return self

    @property
    def mesh(self) -> float:
        if self.kind == "strip":
            assert self.height is not None
            return math.pi / self.height
        assert self.eps is not None
        return self.eps


def load_descriptor(path: Path) -> DomainDescriptor:
    """Read a descriptor from a YAML file."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return DomainDescriptor.model_validate(data)
    except FileNotFoundError as e:
        raise DomainError(f"Descriptor not found: {path}", str(path)) from e
    except (yaml.YAMLError, ValidationError) as e:
        raise DomainError(
            "Invalid domain descriptor", str(path), {"reason": str(e)}
        ) from e


def rectangle(
    x_min: float, x_max: float, y_max: float, eps: float, **kwargs: object
) -> DomainDescriptor:
    """Shortcut for ``[x_min, x_max] x [-y_max, y_max]``."""
    return DomainDescriptor(
        kind="rectangle", eps=eps, x_min=x_min, x_max=x_max, y_max=y_max, **kwargs
    )


def strip(height: int, half_width: float = 2 * math.pi) -> DomainDescriptor:
    """Shortcut for the truncated strip with ``height`` cell rows."""
    return DomainDescriptor(kind="strip", height=height, half_width=half_width)


# =============================================================================
# Symmetric lattice domain
# =============================================================================


@dataclass(frozen=True, eq=False)
class SymmetricLatticeDomain:
    """Union of closed unit cells of εZ², symmetric across y=0.

    A cell (i, j) is the square [i, i+1] x [j, j+1] in lattice units.
    """

    eps: float
    cells: frozenset[Point]
    anchor: Point
    delta: float
    kind: str = "rectangle"

    @cached_property
    def vertices(self) -> frozenset[Point]:
        return frozenset(
            (i + a, j + b) for i, j in self.cells for a in (0, 1) for b in (0, 1)
        )

    @cached_property
    def lattice_edges(self) -> frozenset[Edge]:
        edges: set[Edge] = set()
        for i, j in self.cells:
            edges.update(
                {
                    ((i, j), (i + 1, j)),
                    ((i, j + 1), (i + 1, j + 1)),
                    ((i, j), (i, j + 1)),
                    ((i + 1, j), (i + 1, j + 1)),
                }
            )
        return frozenset(edges)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), max(xs), min(ys), max(ys)

    @property
    def shape(self) -> tuple[int, int]:
        """(columns, rows) of vertices of the bounding box."""
        x0, x1, y0, y1 = self.bbox
        return x1 - x0 + 1, y1 - y0 + 1


def _as_lattice(value: float, eps: float, what: str) -> int:
    ratio = value / eps
    nearest = round(ratio)
    if abs(ratio - nearest) > 1e-9:
        raise DomainError(f"{what}={value} is not a multiple of eps={eps}")
    return int(nearest)


def _cells_from_descriptor(desc: DomainDescriptor) -> frozenset[Point]:
    eps = desc.mesh
    if desc.kind == "rectangle":
        assert desc.x_min is not None and desc.x_max is not None
        assert desc.y_max is not None
        i0 = _as_lattice(desc.x_min, eps, "x_min")
        i1 = _as_lattice(desc.x_max, eps, "x_max")
        jm = _as_lattice(desc.y_max, eps, "y_max")
        if i1 <= i0:
            raise DomainError("empty rectangle", desc.kind)
        return frozenset((i, j) for i in range(i0, i1) for j in range(-jm, jm))

    if desc.kind == "strip":
        assert desc.height is not None
        half_cols = max(1, round(desc.half_width / eps))
        half_rows = desc.height // 2
        return frozenset(
            (i, j)
            for i in range(-half_cols, half_cols)
            for j in range(-half_rows, half_rows)
        )

    assert desc.vertices is not None
    corners = np.array(
        [
            (_as_lattice(x, eps, "vertex x"), _as_lattice(y, eps, "vertex y"))
            for x, y in desc.vertices
        ],
        dtype=float,
    )
    polygon = PolygonPath(corners)
    i0, j0 = corners.min(axis=0).astype(int)
    i1, j1 = corners.max(axis=0).astype(int)
    candidates = [(i, j) for i in range(i0, i1) for j in range(j0, j1)]
    centres = np.array([(i + 0.5, j + 0.5) for i, j in candidates])
    inside = polygon.contains_points(centres)
    return frozenset(c for c, keep in zip(candidates, inside, strict=True) if keep)


def _check_simply_connected(cells: frozenset[Point]) -> None:
    cover = nx.Graph()
    cover.add_nodes_from(cells)
    for i, j in cells:
        for di, dj in ((1, 0), (0, 1)):
            if (i + di, j + dj) in cells:
                cover.add_edge((i, j), (i + di, j + dj))
    if not nx.is_connected(cover):
        raise DomainError("square cover is not connected")

    vertices = {(i + a, j + b) for i, j in cells for a in (0, 1) for b in (0, 1)}
    for x, y in vertices:
        around = [(x - 1, y - 1) in cells, (x, y - 1) in cells]
        around += [(x, y) in cells, (x - 1, y) in cells]
        # diagonal pinch: two opposite cells present, the other two absent
        if around in ([True, False, True, False], [False, True, False, True]):
            raise DomainError("square cover pinches at a vertex", details={"vertex": (x, y)})

    edges = set()
    for i, j in cells:
        edges.update(
            {(i, j, "h"), (i, j + 1, "h"), (i, j, "v"), (i + 1, j, "v")}
        )
    euler = len(vertices) - len(edges) + len(cells)
    if euler != 1:
        raise DomainError(
            "square cover is not simply connected", details={"euler": euler}
        )


def _check_flat_top(
    cells: frozenset[Point], vertices: frozenset[Point], anchor: Point, radius: int
) -> None:
    ia, ja = anchor
    if anchor not in vertices:
        raise DomainError("anchor is not a domain vertex", details={"anchor": anchor})
    for i in range(ia - radius, ia + radius + 1):
        column = [y for x, y in vertices if x == i]
        if not column or max(column) != ja:
            raise DomainError(
                "no flat horizontal segment around the anchor",
                details={"column": i, "anchor": anchor},
            )
    for i in range(ia - radius, ia + radius):
        if (i, ja - 1) not in cells:
            raise DomainError(
                "domain does not lie below the flat segment",
                details={"cell": (i, ja - 1)},
            )


def build_symmetric_domain(
    descriptor: DomainDescriptor, eps: float | None = None
) -> SymmetricLatticeDomain:
    """Discretize a symmetric descriptor into a SymmetricLatticeDomain.

    Args:
        descriptor: rectangle, strip or rectilinear polygon description.
        eps: optional mesh overriding ``descriptor.eps`` (ignored for strips).

    Raises:
        DomainError: asymmetric descriptor, non-simply-connected cover, or no
            flat horizontal boundary segment around the anchor.
    """
    if eps is not None and descriptor.kind != "strip":
        descriptor = descriptor.model_copy(update={"eps": eps})
    mesh = descriptor.mesh
    cells = _cells_from_descriptor(descriptor)
    if not cells:
        raise DomainError("descriptor covers no lattice cell", descriptor.kind)

    mirrored = frozenset((i, -j - 1) for i, j in cells)
    if mirrored != cells:
        raise DomainError("descriptor is not symmetric across y=0", descriptor.kind)
    _check_simply_connected(cells)

    vertices = frozenset(
        (i + a, j + b) for i, j in cells for a in (0, 1) for b in (0, 1)
    )
    top = max(y for _, y in vertices)
    if descriptor.anchor is not None:
        anchor = (
            _as_lattice(descriptor.anchor[0], mesh, "anchor x"),
            _as_lattice(descriptor.anchor[1], mesh, "anchor y"),
        )
    else:
        top_row = sorted(x for x, y in vertices if y == top)
        anchor = (top_row[len(top_row) // 2], top)

    if descriptor.delta is not None:
        delta = descriptor.delta
    else:
        row = sorted(x for x, y in vertices if y == anchor[1])
        delta = min(anchor[0] - row[0], row[-1] - anchor[0]) * mesh
    radius = int(math.floor(delta / mesh + 1e-9))
    _check_flat_top(cells, vertices, anchor, radius)

    domain = SymmetricLatticeDomain(
        eps=mesh, cells=cells, anchor=anchor, delta=delta, kind=descriptor.kind
    )
    logger.debug(
        "domain_built",
        kind=descriptor.kind,
        eps=mesh,
        cells=len(cells),
        vertices=len(vertices),
    )
    return domain


# =============================================================================
# Graphs on the doubled lattice
# =============================================================================


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    """Bipartite graph whose vertices are integer points, edges unit steps.

    Attributes:
        vertices: all vertices.
        black: the black vertices; every other vertex is white.
        scale: embedding factor, ``position(p) = (p[0] + i p[1]) * scale``.
        variant: which construction produced the graph.
    """

    vertices: frozenset[Point]
    black: frozenset[Point]
    scale: float = 1.0
    variant: GraphVariant = GraphVariant.PLAIN

    def is_black(self, p: Point) -> bool:
        return p in self.black

    def position(self, p: Point) -> complex:
        return complex(p[0], p[1]) * self.scale

    @cached_property
    def whites(self) -> tuple[Point, ...]:
        return tuple(sorted(self.vertices - self.black))

    @cached_property
    def blacks(self) -> tuple[Point, ...]:
        return tuple(sorted(self.black))

    @cached_property
    def adjacency(self) -> dict[Point, tuple[Point, ...]]:
        adj: dict[Point, tuple[Point, ...]] = {}
        for p in self.vertices:
            black = p in self.black
            adj[p] = tuple(
                q
                for dx, dy in _STEPS
                if (q := (p[0] + dx, p[1] + dy)) in self.vertices
                and (q in self.black) != black
            )
        return adj

    def neighbors(self, p: Point) -> tuple[Point, ...]:
        return self.adjacency[p]

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        """Undirected edges as (white, black) pairs, sorted."""
        return tuple(sorted((w, b) for w in self.whites for b in self.adjacency[w]))

    @cached_property
    def faces(self) -> tuple[Point, ...]:
        """Lower-left corners of unit squares whose four edges are present."""
        result = []
        for x, y in self.vertices:
            square = ((x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1))
            if all(q in self.vertices for q in square) and all(
                square[(k + 1) % 4] in self.adjacency[square[k]] for k in range(4)
            ):
                result.append((x, y))
        return tuple(sorted(result))

    def face_cycle(self, face: Point) -> tuple[Point, Point, Point, Point]:
        """Corners of a face in counterclockwise order from the lower left."""
        x, y = face
        return ((x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1))

    def degree(self, p: Point) -> int:
        return len(self.adjacency[p])

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        for p in self.vertices:
            graph.add_node(p, black=p in self.black)
        graph.add_edges_from(self.edges)
        return graph

    def dump(self) -> str:
        """Adjacency list text, one vertex per line, for debugging."""
        lines = []
        for p in sorted(self.vertices):
            colour = "B" if p in self.black else "W"
            nbrs = " ".join(f"{q[0]},{q[1]}" for q in sorted(self.adjacency[p]))
            lines.append(f"{p[0]},{p[1]} {self._label(p) or colour}: {nbrs}")
        return "\n".join(lines) + "\n"

    def _label(self, p: Point) -> str:
        return ""


@dataclass(frozen=True, eq=False)
class TemperleyanGraph(LatticeGraph):
    """(Piecewise) Temperleyan graph on the doubled lattice.

    Attributes:
        eps: lattice mesh of the underlying εZ².
        b0: the removed B1 vertex (doubled coordinates).
        anchor: flat-boundary anchor z_∂ (doubled coordinates).
        delta: radius of the flat boundary ball.
        convex_corners: convex white corners (strict-upper variant only).
    """

    eps: float = 1.0
    b0: Point | None = None
    anchor: Point | None = None
    delta: float = 0.0
    convex_corners: tuple[Point, ...] = ()

    def vertex_class(self, p: Point) -> VertexClass:
        return vertex_class(p)

    def _label(self, p: Point) -> str:
        return vertex_class(p).value

    def of_class(self, cls: VertexClass) -> tuple[Point, ...]:
        return tuple(p for p in sorted(self.vertices) if vertex_class(p) == cls)

    @cached_property
    def axis(self) -> tuple[Point, ...]:
        """Vertices on y=0 ordered clockwise for the upper graph (right to left)."""
        return tuple(sorted((p for p in self.vertices if p[1] == 0), reverse=True))

    @property
    def top(self) -> int:
        return max(y for _, y in self.vertices)


def _temperleyan_vertices(domain: SymmetricLatticeDomain) -> set[Point]:
    pts: set[Point] = {(2 * i, 2 * j) for i, j in domain.vertices}
    for (i0, j0), (i1, j1) in domain.lattice_edges:
        pts.add((i0 + i1, j0 + j1))
    pts.update((2 * i + 1, 2 * j + 1) for i, j in domain.cells)
    return pts


def _make_graph(
    points: Iterable[Point],
    variant: GraphVariant,
    eps: float,
    b0: Point | None,
    anchor: Point | None,
    delta: float,
    corners: tuple[Point, ...] = (),
) -> TemperleyanGraph:
    vertices = frozenset(points)
    black = frozenset(p for p in vertices if not vertex_class(p).is_white)
    return TemperleyanGraph(
        vertices=vertices,
        black=black,
        scale=eps / 2,
        variant=variant,
        eps=eps,
        b0=b0,
        anchor=anchor,
        delta=delta,
        convex_corners=corners,
    )


def _check_balanced(g: LatticeGraph) -> None:
    n_black = len(g.black)
    n_white = len(g.vertices) - n_black
    if n_black != n_white:
        raise GraphError(
            "graph is not balanced",
            g.variant.value,
            {"black": n_black, "white": n_white},
        )


def build_temperleyan(
    domain: SymmetricLatticeDomain, b0: Point | None = None
) -> TemperleyanGraph:
    """Temperleyan graph G^r of a symmetric domain.

    Args:
        domain: validated symmetric domain.
        b0: removed B1 vertex in doubled coordinates; default is the
            rightmost lattice vertex on the axis.

    Raises:
        GraphError: no vertex on the axis, or b0 not a B1 vertex.
    """
    points = _temperleyan_vertices(domain)
    if b0 is None:
        axis = [p for p in points if p[1] == 0 and vertex_class(p) == VertexClass.B1]
        if not axis:
            raise GraphError("no lattice vertex on the axis, b0 undefined")
        b0 = max(axis)
    elif b0 not in points or vertex_class(b0) != VertexClass.B1:
        raise GraphError("b0 must be a lattice vertex of the domain", details={"b0": b0})
    points.discard(b0)

    anchor = (2 * domain.anchor[0], 2 * domain.anchor[1])
    g = _make_graph(
        points, GraphVariant.SYMMETRIC, domain.eps, b0, anchor, domain.delta
    )
    _check_balanced(g)
    logger.debug("temperleyan_built", vertices=len(g.vertices), b0=b0)
    return g


def _convex_white_corners(points: frozenset[Point]) -> tuple[Point, ...]:
    corners = []
    for p in points:
        if not vertex_class(p).is_white:
            continue
        nbrs = [(dx, dy) for dx, dy in _STEPS if (p[0] + dx, p[1] + dy) in points]
        if len(nbrs) == 2 and nbrs[0][0] * nbrs[1][0] + nbrs[0][1] * nbrs[1][1] == 0:
            corners.append(p)
    return tuple(sorted(corners))


def restrict_upper(g: TemperleyanGraph, strict: bool = False) -> TemperleyanGraph:
    """Upper graph G^1 (axis kept) or strict upper graph G^2 (axis removed).

    Raises:
        GraphError: input is not the symmetric variant, or G^2 does not have
            exactly two convex white corners.
    """
    if g.variant != GraphVariant.SYMMETRIC:
        raise GraphError("restriction needs the symmetric graph", g.variant.value)

    if not strict:
        upper = _make_graph(
            (p for p in g.vertices if p[1] >= 0),
            GraphVariant.UPPER,
            g.eps,
            g.b0,
            g.anchor,
            g.delta,
        )
        _check_balanced(upper)
        return upper

    points = frozenset(p for p in g.vertices if p[1] > 0)
    corners = _convex_white_corners(points)
    if len(corners) != 2:
        raise GraphError(
            "strict upper graph must have exactly two convex white corners",
            GraphVariant.STRICT_UPPER.value,
            {"corners": list(corners)},
        )
    strict_upper = _make_graph(
        points, GraphVariant.STRICT_UPPER, g.eps, g.b0, g.anchor, g.delta, corners
    )
    _check_balanced(strict_upper)
    return strict_upper


def build_grid(
    columns: int,
    rows: int,
    origin: Point = (0, 0),
    variant: GraphVariant = GraphVariant.PLAIN,
    scale: float = 1.0,
) -> LatticeGraph:
    """Plain ``columns x rows`` grid graph; black where x + y is even."""
    x0, y0 = origin
    vertices = frozenset(
        (x0 + a, y0 + b) for a in range(columns) for b in range(rows)
    )
    black = frozenset(p for p in vertices if (p[0] + p[1]) % 2 == 0)
    return LatticeGraph(vertices=vertices, black=black, scale=scale, variant=variant)


@dataclass(frozen=True)
class FacePoint:
    """A continuum point snapped to the centre of a graph face."""

    face: Point
    centre: complex
    offset: complex

    @property
    def snap_distance(self) -> float:
        return abs(self.offset)


def snap_to_face(g: LatticeGraph, z: complex) -> FacePoint:
    """Nearest face centre of ``g`` to the continuum point ``z``."""
    if not g.faces:
        raise GraphError("graph has no faces", g.variant.value)
    faces = np.array(g.faces, dtype=float)
    centres = (faces[:, 0] + 0.5 + 1j * (faces[:, 1] + 0.5)) * g.scale
    k = int(np.argmin(np.abs(centres - z)))
    face = g.faces[k]
    return FacePoint(face=face, centre=complex(centres[k]), offset=z - centres[k])
