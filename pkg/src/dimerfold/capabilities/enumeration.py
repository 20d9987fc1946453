"""
Brute-force oracles on small graphs.

Exhaustive perfect-matching enumeration, projection of G× matchings to
loops-and-arcs configurations, the loop/arc side of Kenyon's formula, and the
crossing-sign lemma. Everything here is exponential and meant for graphs of a
few dozen vertices.

Version: 0.1.0
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Literal

import networkx as nx
import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from dimerfold.capabilities.linalg import chord_crossings, pfaffian
from dimerfold.core.config import get_config
from dimerfold.core.exceptions import (
    ConfigValidationError,
    EnumerationCapError,
    InvariantError,
    OracleError,
)
from dimerfold.core.logging import get_logger
from dimerfold.domain.kasteleyn import (
    Connection,
    FoldedGraph,
    FoldedVertex,
    PhaseAssignment,
    assemble_K,
    build_folded_graph,
    complex_phases,
    random_sl2_connection,
    trivial_connection,
)
from dimerfold.domain.lattice import (
    Edge,
    LatticeGraph,
    Point,
    build_grid,
    build_symmetric_domain,
    build_temperleyan,
    rectangle,
    restrict_upper,
)

logger = get_logger(__name__)


# =============================================================================
# Matchings
# =============================================================================


@dataclass(frozen=True)
class Matching:
    """A perfect matching stored as sorted vertex pairs."""

    pairs: tuple[tuple[Any, Any], ...]

    @classmethod
    def of(cls, pairs: Iterable[tuple[Any, Any]]) -> Matching:
        return cls(tuple(sorted(tuple(sorted(p)) for p in pairs)))

    @cached_property
    def partner(self) -> dict[Any, Any]:
        mate: dict[Any, Any] = {}
        for u, v in self.pairs:
            mate[u] = v
            mate[v] = u
        return mate

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Any:
        return iter(self.pairs)

    def is_perfect_on(self, graph: nx.Graph) -> bool:
        covered = [v for pair in self.pairs for v in pair]
        return (
            len(covered) == len(set(covered)) == graph.number_of_nodes()
            and set(covered) == set(graph.nodes)
            and all(graph.has_edge(u, v) for u, v in self.pairs)
        )


def as_networkx(g: nx.Graph | LatticeGraph | FoldedGraph, straight: bool = False) -> nx.Graph:
    if isinstance(g, nx.Graph):
        return g
    if isinstance(g, FoldedGraph):
        return g.to_networkx(straight=straight)
    return g.to_networkx()


def enumerate_matchings(
    g: nx.Graph | LatticeGraph | FoldedGraph,
    *,
    straight: bool = False,
    max_vertices: int | None = None,
    max_matchings: int | None = None,
) -> list[Matching]:
    """All perfect matchings by recursive elimination of a minimum-degree vertex.

    Args:
        g: graph to enumerate.
        straight: for a FoldedGraph, drop the cross-copy bulk edges.
        max_vertices / max_matchings: caps, defaulting to the ``enumeration``
            config section.

    Raises:
        EnumerationCapError: a cap is exceeded.
    """
    cfg = get_config().enumeration
    max_vertices = max_vertices or cfg.max_vertices
    max_matchings = max_matchings or cfg.max_matchings
    graph = as_networkx(g, straight)
    n = graph.number_of_nodes()
    if n > max_vertices:
        raise EnumerationCapError(f"graph has {n} vertices", limit=max_vertices)
    if n % 2:
        return []

    adjacency = {v: set(graph.neighbors(v)) for v in graph.nodes}
    found: list[Matching] = []
    chosen: list[tuple[Hashable, Hashable]] = []
    free = set(adjacency)

    def recurse() -> None:
        if not free:
            if len(found) >= max_matchings:
                raise EnumerationCapError("too many matchings", limit=max_matchings)
            found.append(Matching.of(chosen))
            return
        pivot = min(free, key=lambda v: (len(adjacency[v] & free), v))
        options = sorted(adjacency[pivot] & free)
        free.discard(pivot)
        for mate in options:
            free.discard(mate)
            chosen.append((pivot, mate))
            recurse()
            chosen.pop()
            free.add(mate)
        free.add(pivot)

    recurse()
    found.sort(key=lambda m: m.pairs)
    logger.debug("matchings_enumerated", vertices=n, matchings=len(found))
    return found


# =============================================================================
# Loops and arcs
# =============================================================================


@dataclass(frozen=True)
class Arc:
    """Path between two boundary vertices, listed from its white end.

    ``layers[k]`` labels the edge ``path[k]-path[k+1]``: 1 upper/first copy,
    2 lower/second copy, 0 for an edge joining two boundary vertices.
    """

    path: tuple[Point, ...]
    layers: tuple[int, ...]

    @property
    def white_end(self) -> Point:
        return self.path[0]

    @property
    def black_end(self) -> Point:
        return self.path[-1]

    @property
    def length(self) -> int:
        return len(self.path) - 1


@dataclass(frozen=True)
class Loop:
    """Closed cycle; ``layers[k]`` labels edge ``cycle[k]-cycle[k+1 mod len]``."""

    cycle: tuple[Point, ...]
    layers: tuple[int, ...]


@dataclass(frozen=True)
class LoopsArcsConfig:
    """Decomposition of a doubled configuration into components."""

    loops: tuple[Loop, ...] = ()
    doubled: tuple[Edge, ...] = ()
    arcs: tuple[Arc, ...] = ()

    @cached_property
    def key(self) -> tuple[tuple[Point, Point], ...]:
        """Canonical edge multiset, independent of lifts and layers."""
        edges: list[tuple[Point, Point]] = []
        for w, b in self.doubled:
            edges += [tuple(sorted((w, b)))] * 2  # type: ignore[list-item]
        for arc in self.arcs:
            edges += [tuple(sorted(e)) for e in zip(arc.path, arc.path[1:])]  # type: ignore[misc]
        for loop in self.loops:
            cyc = loop.cycle
            edges += [
                tuple(sorted((cyc[k], cyc[(k + 1) % len(cyc)])))  # type: ignore[misc]
                for k in range(len(cyc))
            ]
        return tuple(sorted(edges))

    @property
    def nontrivial_arcs(self) -> tuple[Arc, ...]:
        return tuple(a for a in self.arcs if a.length > 1)

    def oriented_edges(self, is_black: Any) -> list[tuple[Point, Point]]:
        """Non-doubled edges oriented by layer: layer 1 runs black to white,
        layer 2 and boundary edges run white to black."""
        result = []
        segments = [(a.path, a.layers, False) for a in self.arcs]
        segments += [(lp.cycle, lp.layers, True) for lp in self.loops]
        for verts, layers, closed in segments:
            count = len(verts) if closed else len(verts) - 1
            for k in range(count):
                u, v = verts[k], verts[(k + 1) % len(verts)]
                w, b = (v, u) if is_black(u) else (u, v)
                result.append((b, w) if layers[k] == 1 else (w, b))
        return result


@dataclass
class _Piece:
    kind: Literal["doubled", "arc", "loop"]
    vertices: list[Any]
    edges: list[int] = field(default_factory=list)


def _walk_components(
    edges: Sequence[tuple[Any, Any]], boundary: frozenset[Any]
) -> list[_Piece]:
    """Split an edge multiset into doubled edges, boundary paths and cycles.

    Every boundary vertex must have degree 1 and every other vertex degree 2.
    """
    by_key: dict[tuple[Any, Any], list[int]] = {}
    for k, (u, v) in enumerate(edges):
        by_key.setdefault(tuple(sorted((u, v))), []).append(k)

    pieces: list[_Piece] = []
    incident: dict[Any, list[int]] = {}
    for key, ids in by_key.items():
        if len(ids) == 2:
            pieces.append(_Piece("doubled", list(key), ids))
        elif len(ids) == 1:
            for v in key:
                incident.setdefault(v, []).append(ids[0])
        else:
            raise InvariantError("edge used more than twice", {"edge": key})

    for v, ids in incident.items():
        wanted = 1 if v in boundary else 2
        if len(ids) != wanted:
            raise InvariantError("vertex has the wrong degree", {"vertex": v, "degree": len(ids)})

    used: set[int] = set()

    def other(eid: int, v: Any) -> Any:
        a, b = edges[eid]
        return b if a == v else a

    for start in sorted(v for v in incident if v in boundary):
        eid = incident[start][0]
        if eid in used:
            continue
        piece = _Piece("arc", [start])
        cur = start
        while True:
            used.add(eid)
            piece.edges.append(eid)
            cur = other(eid, cur)
            piece.vertices.append(cur)
            if cur in boundary:
                break
            eid = next(e for e in incident[cur] if e not in used)
        pieces.append(piece)

    remaining = sorted({v for v, ids in incident.items() if any(e not in used for e in ids)})
    while remaining:
        start = remaining[0]
        first = min(incident[start], key=lambda e: other(e, start))
        piece = _Piece("loop", [start])
        cur, eid = start, first
        while True:
            used.add(eid)
            piece.edges.append(eid)
            cur = other(eid, cur)
            if cur == start:
                break
            piece.vertices.append(cur)
            eid = next(e for e in incident[cur] if e not in used)
        pieces.append(piece)
        done = set(piece.vertices)
        remaining = [v for v in remaining if v not in done]
    return pieces


def decompose(
    edges: Sequence[tuple[Point, Point, int]],
    boundary: Iterable[Point],
    is_black: Any,
) -> LoopsArcsConfig:
    """Loops-and-arcs decomposition of layer-labelled base edges.

    Raises:
        InvariantError: degrees are not 1 on the boundary and 2 elsewhere,
            or an arc joins two vertices of the same colour.
    """
    plain = [(u, v) for u, v, _ in edges]
    layer_of = [layer for _, _, layer in edges]
    loops: list[Loop] = []
    doubled: list[Edge] = []
    arcs: list[Arc] = []
    for piece in _walk_components(plain, frozenset(boundary)):
        if piece.kind == "doubled":
            u, v = piece.vertices
            doubled.append((v, u) if is_black(u) else (u, v))
        elif piece.kind == "arc":
            path = list(piece.vertices)
            layers = [layer_of[e] for e in piece.edges]
            if is_black(path[0]) == is_black(path[-1]):
                raise InvariantError("arc endpoints share a colour", {"path": path})
            if is_black(path[0]):
                path.reverse()
                layers.reverse()
            arcs.append(Arc(tuple(path), tuple(layers)))
        else:
            loops.append(Loop(tuple(piece.vertices), tuple(layer_of[e] for e in piece.edges)))
    return LoopsArcsConfig(
        loops=tuple(loops), doubled=tuple(sorted(doubled)), arcs=tuple(sorted(arcs, key=lambda a: a.path))
    )


def project(m: Matching, fg: FoldedGraph) -> LoopsArcsConfig:
    """Projection p(m) of a G× matching onto the base graph.

    Edge layers are the copy index of the bulk end (the white end's copy for
    cross-copy edges).
    """
    labelled = []
    for x, y in m.pairs:
        if x[1] == 0 or y[1] == 0 or x[1] == y[1]:
            layer = x[1] or y[1]
        else:
            layer = y[1] if fg.is_black(x) else x[1]
        labelled.append((x[0], y[0], layer))
    return decompose(labelled, fg.boundary, fg.base.is_black)


@dataclass(frozen=True)
class Omega:
    """Deduplicated configurations with the number of straight lifts of each."""

    configs: tuple[LoopsArcsConfig, ...]
    lifts: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.configs)


def enumerate_configurations(
    fg: FoldedGraph,
    max_vertices: int | None = None,
    max_matchings: int | None = None,
) -> Omega:
    """Ω(G×): all loops-and-arcs configurations, via straight G× matchings."""
    seen: dict[tuple[Any, ...], LoopsArcsConfig] = {}
    counts: Counter[tuple[Any, ...]] = Counter()
    for m in enumerate_matchings(
        fg, straight=True, max_vertices=max_vertices, max_matchings=max_matchings
    ):
        cfg = project(m, fg)
        seen.setdefault(cfg.key, cfg)
        counts[cfg.key] += 1
    keys = sorted(seen)
    return Omega(tuple(seen[k] for k in keys), tuple(counts[k] for k in keys))


# =============================================================================
# Kenyon's formula
# =============================================================================


def configuration_weight(cfg: LoopsArcsConfig, connection: Connection) -> complex:
    """prod tr(monodromy) over loops times prod psi^T phi psi over arcs."""
    weight = 1.0 + 0j
    for loop in cfg.loops:
        cyc = loop.cycle
        mono = np.eye(2, dtype=complex)
        for k in range(len(cyc)):
            mono = mono @ connection.transport(cyc[k], cyc[(k + 1) % len(cyc)])
        weight *= np.trace(mono)
    for arc in cfg.arcs:
        path = arc.path
        if len(path) == 2:
            continue
        row = connection.boundary_vector(path[0], path[1])
        for k in range(1, len(path) - 2):
            row = row @ connection.transport(path[k], path[k + 1])
        weight *= row @ connection.boundary_vector(path[-1], path[-2])
    return complex(weight)


def kenyon_rhs(configs: Omega | Iterable[LoopsArcsConfig], connection: Connection) -> complex:
    """Sum over Ω of the loop traces and arc transports.

    Raises:
        ConnectionDataError: the connection misses an edge.
    """
    items = configs.configs if isinstance(configs, Omega) else configs
    return complex(sum(configuration_weight(c, connection) for c in items))


# =============================================================================
# Crossing signs
# =============================================================================


def crossing_sign(m: Matching, order: Sequence[Any] | dict[Any, int]) -> int:
    """(-1)^(chord crossings) with vertices placed around a disc in ``order``."""
    position = order if isinstance(order, dict) else {v: k for k, v in enumerate(order)}
    chords = [(position[u], position[v]) for u, v in m.pairs]
    return -1 if chord_crossings(chords) % 2 else 1


def lemma_sign(m: Matching, fg: FoldedGraph) -> int:
    """Product formula for the crossing sign from the lifted indices.

    Doubled edge with lift (a, b): (-1)^(a+b+1). Loop: (-1)^(1 + indices on
    alternate edges). Arc through the bulk: (-1)^(indices on its bulk-bulk
    edges counted from the black end) times -1 if the black end comes after
    the white end in the vertex order. Arc of one boundary edge: +1.
    """
    lifts = [(x, y) for x, y in m.pairs]
    plain = [(x[0], y[0]) for x, y in lifts]
    position = fg.index
    sign = 1
    for piece in _walk_components(plain, fg.boundary_set):
        if piece.kind == "doubled":
            x, y = lifts[piece.edges[0]]
            sign *= (-1) ** (x[1] + y[1] + 1)
        elif piece.kind == "loop":
            total = sum(lifts[e][0][1] + lifts[e][1][1] for e in piece.edges[::2])
            sign *= (-1) ** (1 + total)
        elif len(piece.edges) > 1:
            verts, eids = piece.vertices, piece.edges
            if not fg.is_black((verts[0], 0)):
                verts, eids = verts[::-1], eids[::-1]
            total = sum(lifts[e][0][1] + lifts[e][1][1] for e in eids[1::2])
            black_end, white_end = (verts[0], 0), (verts[-1], 0)
            late = position[black_end] > position[white_end]
            sign *= (-1) ** (total + int(late))
    return sign


def sign_lemma_check(m: Matching, fg: FoldedGraph) -> bool:
    """Whether the product formula agrees with the direct crossing count."""
    return crossing_sign(m, fg.index) == lemma_sign(m, fg)


# =============================================================================
# Kenyon identity verification
# =============================================================================


@dataclass(frozen=True)
class KenyonReport:
    """Result of checking Pf K = s * RHS over random connections.

    ``scale`` is s = Pf K / RHS at the trivial connection; it must be unimodular.
    """

    name: str
    vertices: int
    configurations: int
    scale: complex
    max_error: float
    connections: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(
            abs(abs(self.scale) - 1) <= self.tolerance and self.max_error <= self.tolerance
        )

    def to_row(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "vertices": self.vertices,
            "configurations": self.configurations,
            "scale_re": self.scale.real,
            "scale_im": self.scale.imag,
            "max_error": self.max_error,
            "connections": self.connections,
            "passed": self.passed,
        }


def fault_edge(fg: FoldedGraph) -> Edge:
    """An edge whose phase flip breaks the Kasteleyn condition when faces exist."""
    g = fg.base
    if g.faces:
        a, b = g.face_cycle(g.faces[0])[:2]
        return (b, a) if g.is_black(a) else (a, b)
    return g.edges[0]


def verify_kenyon(
    fg: FoldedGraph,
    rng: np.random.Generator,
    connections: int = 20,
    tolerance: float = 1e-9,
    phases: PhaseAssignment | None = None,
    name: str = "graph",
) -> KenyonReport:
    """Compare Pf K with the loop/arc sum for random SL(2) connections.

    The unit-modulus gauge factor between the two sides is measured once at
    the trivial connection and reused for every random connection.
    """
    phases = phases or complex_phases(fg.base)
    omega = enumerate_configurations(fg)
    if not omega.configs:
        raise OracleError("graph has no configurations", details={"name": name})

    trivial = trivial_connection(fg)
    rhs = kenyon_rhs(omega, trivial)
    scale = pfaffian(assemble_K(fg, trivial, phases)).value / rhs

    worst = 0.0
    for _ in range(connections):
        connection = random_sl2_connection(fg, rng)
        pf = pfaffian(assemble_K(fg, connection, phases)).value
        error = abs(pf - scale * kenyon_rhs(omega, connection)) / max(1.0, abs(pf))
        worst = max(worst, error)

    report = KenyonReport(
        name=name,
        vertices=fg.size,
        configurations=len(omega),
        scale=complex(scale),
        max_error=worst,
        connections=connections,
        tolerance=tolerance,
    )
    logger.debug("kenyon_verified", name=name, max_error=worst, passed=report.passed)
    return report


# =============================================================================
# Corpus
# =============================================================================


class CorpusEntry(BaseModel):
    """One small graph of the oracle corpus."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    kind: Literal["grid", "upper"]
    columns: int = Field(default=2, ge=1)
    rows: int = Field(default=1, ge=1)
    x_max: int = Field(default=1, ge=1)
    y_max: int = Field(default=1, ge=1)
    boundary: Literal["none", "bottom", "ends", "axis"] = "none"
    matchings: int | None = None

    def base_graph(self) -> LatticeGraph:
        if self.kind == "grid":
            return build_grid(self.columns, self.rows)
        domain = build_symmetric_domain(rectangle(0, self.x_max, self.y_max, eps=1.0))
        return restrict_upper(build_temperleyan(domain))

    def folded(self) -> FoldedGraph:
        g = self.base_graph()
        if self.boundary == "none":
            boundary: list[Point] = []
        elif self.boundary == "bottom":
            boundary = sorted((p for p in g.vertices if p[1] == 0), reverse=True)
        elif self.boundary == "ends":
            row = sorted(p for p in g.vertices if p[1] == 0)
            boundary = [row[-1], row[0]]
        else:
            boundary = list(g.axis)  # type: ignore[attr-defined]
        return build_folded_graph(g, boundary)


def load_corpus(path: Path | None = None) -> list[CorpusEntry]:
    """Read the oracle corpus (packaged ``data/corpus.yaml`` by default).

    Raises:
        ConfigValidationError: malformed corpus file.
    """
    if path is None:
        text = resources.files("dimerfold.data").joinpath("corpus.yaml").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = yaml.safe_load(text) or {}
    try:
        return [CorpusEntry.model_validate(item) for item in raw.get("graphs", [])]
    except ValidationError as e:
        raise ConfigValidationError("Invalid corpus file", errors=[str(e)]) from e
