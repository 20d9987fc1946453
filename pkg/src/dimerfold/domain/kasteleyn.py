"""
Kasteleyn phases, folded graphs, SL(2) connections and matrix assembly.

Conventions used throughout:

* Phases are stored per undirected edge keyed ``(white, black)``.
* In a skew Kasteleyn matrix the entry in the row of the white end and the
  column of the black end is ``phase * weight``; the transposed entry is its
  negative.
* For a bulk edge the weight between copies ``(w, i)`` and ``(b, j)`` is
  ``phi[w -> b][i, j]``. For an edge between a boundary vertex and a bulk
  vertex ``v`` it is ``psi[(boundary, v)][copy of v]``; two boundary vertices
  are joined with weight 1.

Version: 0.1.0
"""

from __future__ import annotations

from collections import deque
from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Protocol

import networkx as nx
import numpy as np
from scipy import sparse

from dimerfold.core.exceptions import (
    ConnectionDataError,
    GraphError,
    PhaseError,
)
from dimerfold.core.logging import get_logger
from dimerfold.core.models import Model
from dimerfold.domain.lattice import (
    Edge,
    LatticeGraph,
    Point,
    VertexClass,
    vertex_class,
)

logger = get_logger(__name__)

FoldedVertex = tuple[Point, int]
"""A vertex of G×: (base point, copy) with copy 0 for boundary vertices."""

_UNIT_TOL = 1e-12


# =============================================================================
# Phases
# =============================================================================


class PhaseKind(str, Enum):
    REAL = "real-xi"
    COMPLEX = "complex-zeta"


@dataclass(frozen=True)
class PhaseAssignment:
    """Unit-modulus edge phases keyed by (white, black)."""

    kind: PhaseKind
    phases: Mapping[Edge, complex]

    def __getitem__(self, edge: Edge) -> complex:
        if edge in self.phases:
            return self.phases[edge]
        flipped = (edge[1], edge[0])
        if flipped in self.phases:
            return self.phases[flipped]
        raise ConnectionDataError("no phase for edge", edge)

    def __len__(self) -> int:
        return len(self.phases)

    def face_defect(self, g: LatticeGraph) -> float:
        """Largest deviation of the alternating face product from -1."""
        worst = 0.0
        for face in g.faces:
            c = g.face_cycle(face)
            e = [self[(c[k], c[(k + 1) % 4])] for k in range(4)]
            worst = max(worst, abs(e[0] * e[2] / (e[1] * e[3]) + 1))
        return worst

    def with_phase(self, edge: Edge, value: complex) -> PhaseAssignment:
        """Copy with one edge phase replaced (used for negative controls)."""
        key = edge if edge in self.phases else (edge[1], edge[0])
        updated = dict(self.phases)
        updated[key] = value
        return PhaseAssignment(self.kind, updated)


def _edge_key(g: LatticeGraph, u: Point, v: Point) -> Edge:
    return (v, u) if g.is_black(u) else (u, v)


def real_phases(g: LatticeGraph, boundary: Sequence[Point] = ()) -> PhaseAssignment:
    """±1 Kasteleyn phases with the alternating boundary pattern.

    Tree edges of a BFS spanning forest get +1; every co-tree edge is then
    fixed by peeling faces with a single undetermined edge. Finally vertex
    flips along ``boundary`` (listed clockwise) make each boundary edge
    satisfy ``xi[w, b] = -1`` exactly when w comes after b.

    Raises:
        PhaseError: face peeling stalls (a bounded face is not a unit square).
    """
    graph = g.to_networkx()
    xi: dict[Edge, int] = {}
    for component in nx.connected_components(graph):
        root = min(component)
        for u, v in nx.bfs_edges(graph, root):
            xi[_edge_key(g, u, v)] = 1

    pending = deque(g.faces)
    stalled = 0
    while pending:
        face = pending.popleft()
        corners = g.face_cycle(face)
        edges = [_edge_key(g, corners[k], corners[(k + 1) % 4]) for k in range(4)]
        missing = [e for e in edges if e not in xi]
        if len(missing) > 1:
            pending.append(face)
            stalled += 1
            if stalled > len(pending):
                raise PhaseError(
                    "face peeling stalled", {"remaining_faces": len(pending)}
                )
            continue
        stalled = 0
        if missing:
            known = int(np.prod([xi[e] for e in edges if e in xi]))
            xi[missing[0]] = -known

    unset = [e for e in g.edges if e not in xi]
    if unset:
        raise PhaseError("edges outside every face and tree", {"edges": unset[:5]})

    sign = {p: 1 for p in g.vertices}
    order = {p: k for k, p in enumerate(boundary)}
    for u, v in zip(boundary, boundary[1:]):
        if v not in g.adjacency[u]:
            continue
        w, b = (u, v) if not g.is_black(u) else (v, u)
        wanted = -1 if order[w] > order[b] else 1
        if xi[(w, b)] * sign[w] * sign[b] != wanted:
            sign[v] = -sign[v]

    phases = {e: complex(xi[e] * sign[e[0]] * sign[e[1]]) for e in g.edges}
    assignment = PhaseAssignment(PhaseKind.REAL, phases)
    logger.debug("real_phases", edges=len(phases), defect=assignment.face_defect(g))
    return assignment


def complex_phases(g: LatticeGraph) -> PhaseAssignment:
    """Discrete holomorphy phases zeta[w, b] = (b - w) / |b - w|."""
    phases = {}
    for w, b in g.edges:
        step = complex(b[0] - w[0], b[1] - w[1])
        phases[(w, b)] = step / abs(step)
    return PhaseAssignment(PhaseKind.COMPLEX, phases)


def gauge_transform(
    xi: PhaseAssignment, gauge: Callable[[Point], complex]
) -> PhaseAssignment:
    """Phases ``gauge(w) * gauge(b) * xi[w, b]``.

    Raises:
        PhaseError: the gauge is not unit modulus somewhere.
    """
    cache: dict[Point, complex] = {}

    def value(p: Point) -> complex:
        if p not in cache:
            g = complex(gauge(p))
            if abs(abs(g) - 1) > _UNIT_TOL:
                raise PhaseError("gauge must be unit modulus", {"vertex": p, "value": g})
            cache[p] = g
        return cache[p]

    phases = {(w, b): value(w) * value(b) * z for (w, b), z in xi.phases.items()}
    real = all(abs(z.imag) < _UNIT_TOL for z in phases.values())
    if real:
        phases = {e: complex(round(z.real)) for e, z in phases.items()}
    return PhaseAssignment(PhaseKind.REAL if real else PhaseKind.COMPLEX, phases)


def holomorphy_gauge(p: Point) -> complex:
    """(-i)^[odd vertical coordinate] * (-1)^[white] for doubled coordinates."""
    value = -1j if p[1] % 2 else 1.0 + 0j
    return -value if vertex_class(p).is_white else value


# =============================================================================
# Folded graph
# =============================================================================


@dataclass(frozen=True, eq=False)
class FoldedGraph:
    """G×: two copies of a base graph glued along the boundary set.

    Attributes:
        base: the base graph G.
        boundary: the glued vertices, listed clockwise.
        order: all G× vertices in matrix order: boundary, whites, blacks.
    """

    base: LatticeGraph
    boundary: tuple[Point, ...]
    order: tuple[FoldedVertex, ...]

    @cached_property
    def index(self) -> dict[FoldedVertex, int]:
        return {v: k for k, v in enumerate(self.order)}

    @cached_property
    def boundary_set(self) -> frozenset[Point]:
        return frozenset(self.boundary)

    @property
    def size(self) -> int:
        return len(self.order)

    def is_boundary(self, p: Point) -> bool:
        return p in self.boundary_set

    def lifts(self, p: Point) -> tuple[FoldedVertex, ...]:
        return ((p, 0),) if p in self.boundary_set else ((p, 1), (p, 2))

    @staticmethod
    def project(v: FoldedVertex) -> Point:
        return v[0]

    def is_black(self, v: FoldedVertex) -> bool:
        return self.base.is_black(v[0])

    def edges(self, straight: bool = False) -> list[tuple[FoldedVertex, FoldedVertex]]:
        """Edges of G× as (white lift, black lift).

        With ``straight=True`` only same-copy bulk edges are kept; matchings
        of that graph project onto every loops-and-arcs configuration.
        """
        result = []
        for w, b in self.base.edges:
            for x in self.lifts(w):
                for y in self.lifts(b):
                    if straight and x[1] and y[1] and x[1] != y[1]:
                        continue
                    result.append((x, y))
        return result

    def to_networkx(self, straight: bool = False) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.order)
        graph.add_edges_from(self.edges(straight))
        return graph


def build_folded_graph(g: LatticeGraph, boundary: Sequence[Point]) -> FoldedGraph:
    """Fold two copies of ``g`` along ``boundary`` (clockwise order).

    Raises:
        GraphError: boundary contains foreign or repeated vertices, or is
            all of the graph.
        ConnectionDataError: boundary has unequal black and white counts.
    """
    boundary = tuple(boundary)
    if len(set(boundary)) != len(boundary) or not set(boundary) <= g.vertices:
        raise GraphError("boundary must be distinct vertices of the graph")
    if boundary and len(boundary) == len(g.vertices):
        raise GraphError("boundary must be a strict subset of the vertices")
    n_black = sum(1 for p in boundary if g.is_black(p))
    if 2 * n_black != len(boundary):
        raise ConnectionDataError(
            "boundary must contain as many black as white vertices",
            details={"black": n_black, "white": len(boundary) - n_black},
        )

    bset = set(boundary)
    order: list[FoldedVertex] = [(p, 0) for p in boundary]
    for group in (g.whites, g.blacks):
        for p in group:
            if p not in bset:
                order.extend([(p, 1), (p, 2)])
    fg = FoldedGraph(base=g, boundary=boundary, order=tuple(order))
    logger.debug("folded_graph", vertices=fg.size, boundary=len(boundary))
    return fg


# =============================================================================
# Connections
# =============================================================================


@dataclass(frozen=True, eq=False)
class Connection:
    """SL(2, C) transports on directed bulk edges and boundary vectors.

    ``phi[(u, v)]`` is the transport from u to v and ``phi[(v, u)]`` its
    inverse. ``psi[(boundary, v)]`` is the 2-vector on the edge joining a
    boundary vertex to the bulk vertex ``v``.
    """

    phi: Mapping[tuple[Point, Point], np.ndarray]
    psi: Mapping[tuple[Point, Point], np.ndarray] = field(default_factory=dict)

    def transport(self, u: Point, v: Point) -> np.ndarray:
        try:
            return self.phi[(u, v)]
        except KeyError:
            raise ConnectionDataError("missing transport", (u, v)) from None

    def boundary_vector(self, boundary: Point, v: Point) -> np.ndarray:
        try:
            return self.psi[(boundary, v)]
        except KeyError:
            raise ConnectionDataError("missing boundary vector", (boundary, v)) from None

    def validate(self, tol: float = _UNIT_TOL) -> None:
        """Check det = 1 and inverse pairing on every stored transport."""
        for (u, v), mat in self.phi.items():
            if abs(np.linalg.det(mat) - 1) > tol * max(1.0, float(np.abs(mat).max()) ** 2):
                raise ConnectionDataError("transport is not unimodular", (u, v))
            back = self.phi.get((v, u))
            if back is None or np.abs(back @ mat - np.eye(2)).max() > 1e3 * tol * (
                1 + float(np.abs(mat).max()) ** 2
            ):
                raise ConnectionDataError("reverse transport is not the inverse", (u, v))


def _sl2_inverse(mat: np.ndarray) -> np.ndarray:
    a, b = mat[0]
    c, d = mat[1]
    return np.array([[d, -b], [-c, a]], dtype=complex) / (a * d - b * c)


def build_connection(
    fg: FoldedGraph,
    transport: Callable[[Point, Point], np.ndarray | None],
    boundary_vector: Callable[[Point, Point], Sequence[complex]],
) -> Connection:
    """Connection from per-edge callbacks.

    ``transport(w, b)`` returns phi for the white-to-black direction of a
    bulk edge (``None`` means identity); ``boundary_vector(p, v)`` returns
    psi for the edge between boundary vertex p and bulk vertex v.
    """
    phi: dict[tuple[Point, Point], np.ndarray] = {}
    psi: dict[tuple[Point, Point], np.ndarray] = {}
    identity = np.eye(2, dtype=complex)
    for w, b in fg.base.edges:
        w_in, b_in = fg.is_boundary(w), fg.is_boundary(b)
        if w_in and b_in:
            continue
        if w_in or b_in:
            p, v = (w, b) if w_in else (b, w)
            psi[(p, v)] = np.asarray(boundary_vector(p, v), dtype=complex)
            continue
        mat = transport(w, b)
        mat = identity if mat is None else np.asarray(mat, dtype=complex)
        phi[(w, b)] = mat
        phi[(b, w)] = _sl2_inverse(mat)
    return Connection(phi=phi, psi=psi)


def trivial_connection(
    fg: FoldedGraph, psi: Sequence[complex] = (1.0, 1.0)
) -> Connection:
    """Identity transports and a constant boundary vector."""
    vector = tuple(psi)
    return build_connection(fg, lambda w, b: None, lambda p, v: vector)


def random_sl2_matrix(rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian 2×2 matrix with its second column rescaled to det 1."""
    while True:
        mat = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
        if abs(det) > 0.1:
            mat[:, 1] /= det
            return mat


def random_sl2_connection(
    fg: FoldedGraph,
    rng: np.random.Generator,
    psi: Sequence[complex] | None = None,
) -> Connection:
    """Independent random SL(2) transports; random boundary vectors unless given."""

    def vector(p: Point, v: Point) -> Sequence[complex]:
        if psi is not None:
            return psi
        return list(rng.standard_normal(2) + 1j * rng.standard_normal(2))

    return build_connection(fg, lambda w, b: random_sl2_matrix(rng), vector)


# =============================================================================
# Skew matrices
# =============================================================================


@dataclass(frozen=True, eq=False)
class SkewMatrix:
    """Dense complex skew matrix with labelled rows and columns."""

    data: np.ndarray
    labels: tuple[Hashable, ...]

    @classmethod
    def from_entries(
        cls,
        labels: Sequence[Hashable],
        entries: Iterable[tuple[int, int, complex]],
    ) -> SkewMatrix:
        """Build from (row, col, value) with each unordered pair given once."""
        n = len(labels)
        upper = np.zeros((n, n), dtype=complex)
        for r, c, value in entries:
            upper[r, c] += value
        data = upper - upper.T
        data.setflags(write=False)
        return cls(data=data, labels=tuple(labels))

    @cached_property
    def index(self) -> dict[Hashable, int]:
        return {label: k for k, label in enumerate(self.labels)}

    @property
    def dimension(self) -> int:
        return self.data.shape[0]

    def entry(self, x: Hashable, y: Hashable) -> complex:
        return complex(self.data[self.index[x], self.index[y]])

    def gauged(self, diagonal: np.ndarray) -> SkewMatrix:
        """D M D for a diagonal D given as a vector."""
        data = diagonal[:, None] * self.data * diagonal[None, :]
        data.setflags(write=False)
        return SkewMatrix(data=data, labels=self.labels)

    def triplets(self) -> np.ndarray:
        """Nonzero entries as rows (row, col, re, im)."""
        rows, cols = np.nonzero(self.data)
        values = self.data[rows, cols]
        return np.column_stack([rows, cols, values.real, values.imag])

    def dump_triplets(self, path: Path) -> None:
        np.savetxt(
            path,
            self.triplets(),
            fmt=["%d", "%d", "%.17g", "%.17g"],
            delimiter=",",
            header="row,col,re,im",
            comments="",
        )


def kasteleyn_entries(
    fg: FoldedGraph, connection: Connection, phases: PhaseAssignment
) -> list[tuple[int, int, complex]]:
    """Entries (white-side row, black-side column, value), one per unordered pair.

    Raises:
        ConnectionDataError: a phase, transport or boundary vector is missing.
    """
    idx = fg.index
    entries: list[tuple[int, int, complex]] = []
    for w, b in fg.base.edges:
        zeta = phases[(w, b)]
        w_in, b_in = fg.is_boundary(w), fg.is_boundary(b)
        if w_in and b_in:
            entries.append((idx[(w, 0)], idx[(b, 0)], zeta))
        elif w_in:
            vec = connection.boundary_vector(w, b)
            for j in (1, 2):
                entries.append((idx[(w, 0)], idx[(b, j)], zeta * vec[j - 1]))
        elif b_in:
            vec = connection.boundary_vector(b, w)
            for i in (1, 2):
                entries.append((idx[(w, i)], idx[(b, 0)], zeta * vec[i - 1]))
        else:
            mat = connection.transport(w, b)
            for i in (1, 2):
                for j in (1, 2):
                    value = zeta * mat[i - 1, j - 1]
                    if value != 0:
                        entries.append((idx[(w, i)], idx[(b, j)], value))
    return entries


def assemble_K(
    fg: FoldedGraph, connection: Connection, phases: PhaseAssignment
) -> SkewMatrix:
    """Dense skew Kasteleyn matrix of G× for a connection and edge phases.

    Raises:
        ConnectionDataError: a phase, transport or boundary vector is missing.
    """
    return SkewMatrix.from_entries(fg.order, kasteleyn_entries(fg, connection, phases))


def assemble_sparse(
    fg: FoldedGraph, connection: Connection, phases: PhaseAssignment
) -> sparse.csr_matrix:
    """Sparse (CSR) skew Kasteleyn matrix, same layout as ``assemble_K``."""
    entries = kasteleyn_entries(fg, connection, phases)
    n = fg.size
    if not entries:
        return sparse.csr_matrix((n, n), dtype=complex)
    rows, cols, values = zip(*entries, strict=True)
    upper = sparse.coo_matrix((values, (rows, cols)), shape=(n, n), dtype=complex)
    return (upper - upper.T).tocsr()


# =============================================================================
# Model matrices
# =============================================================================


class ZipperLike(Protocol):
    """Anything exposing zipper edges directed left to right across the path."""

    @property
    def directed_edges(self) -> tuple[tuple[Point, Point], ...]: ...


def zipper_transport(model: Model, alpha: float) -> np.ndarray:
    """phi on a zipper edge crossed left to right."""
    if model is Model.FOLDED:
        return np.array([[1.0, alpha], [0.0, 1.0]], dtype=complex)
    half = alpha / 2
    return np.array([[1 + half, -half], [half, 1 - half]], dtype=complex)


def model_psi(model: Model) -> tuple[complex, complex]:
    return (1.0, 1.0) if model is Model.FOLDED else (1.0, 0.0)


def model_connection(
    fg: FoldedGraph, zipper: ZipperLike, alpha: float, model: Model
) -> Connection:
    """Zipper connection of a model at parameter alpha."""
    forward = zipper_transport(model, alpha)
    backward = _sl2_inverse(forward)
    crossing: dict[tuple[Point, Point], np.ndarray] = {}
    for p, q in zipper.directed_edges:
        crossing[(p, q)] = forward
        crossing[(q, p)] = backward
    for p, q in crossing:
        if fg.is_boundary(p) or fg.is_boundary(q):
            raise GraphError("zipper edge touches the folding boundary", details={"edge": (p, q)})
        if q not in fg.base.adjacency.get(p, ()):
            raise GraphError("zipper edge is not an edge of the graph", details={"edge": (p, q)})
    psi = model_psi(model)
    return build_connection(fg, lambda w, b: crossing.get((w, b)), lambda p, v: psi)


def folded_gauge(fg: FoldedGraph) -> np.ndarray:
    """Diagonal D with -1 on (x, 2) for x in W0 or B0, +1 elsewhere.

    D K D turns the folded matrix into the holomorphy matrix of the
    symmetric graph, the second copy standing for the mirrored lower half.
    """
    odd_rows = {VertexClass.W0, VertexClass.B0}
    return np.array(
        [
            -1.0 if copy == 2 and vertex_class(p) in odd_rows else 1.0
            for p, copy in fg.order
        ]
    )


@dataclass(frozen=True, eq=False)
class ModelMatrices:
    """K and K_{2 alpha} of a model together with the perturbation S.

    ``K_alpha = K + c * alpha * S`` with ``c = model.series_constant``.
    For the folded model the matrices are the gauged ones.
    """

    model: Model
    alpha: float
    K: SkewMatrix
    K_alpha: SkewMatrix
    S: SkewMatrix
    folded: FoldedGraph

    @property
    def c(self) -> float:
        return self.model.series_constant


def assemble_model_matrices(
    fg: FoldedGraph,
    zipper: ZipperLike,
    alpha: float,
    model: Model,
    phases: PhaseAssignment | None = None,
) -> ModelMatrices:
    """Unperturbed and perturbed matrices of the folded or shifted model.

    ``fg`` is the upper graph G^1 folded along its axis; in the shifted model
    copy 2 carries G^2 because psi = (1, 0) cuts it off the axis.

    Raises:
        GraphError: zipper edges are not bulk edges of ``fg``.
        ValueError: alpha outside [0, 1).
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    phases = phases or complex_phases(fg.base)
    K = assemble_K(fg, model_connection(fg, zipper, 0.0, model), phases)
    K_unit = assemble_K(fg, model_connection(fg, zipper, 1.0, model), phases)
    scale = 1.0 if model is Model.FOLDED else 2.0
    S = SkewMatrix(data=scale * (K_unit.data - K.data), labels=K.labels)
    K_alpha = SkewMatrix(
        data=K.data + model.series_constant * alpha * S.data, labels=K.labels
    )
    if model is Model.FOLDED:
        d = folded_gauge(fg)
        K, K_alpha, S = K.gauged(d), K_alpha.gauged(d), S.gauged(d)
    logger.debug(
        "model_matrices",
        model=model.value,
        dimension=K.dimension,
        zipper_edges=len(zipper.directed_edges),
    )
    return ModelMatrices(model=model, alpha=alpha, K=K, K_alpha=K_alpha, S=S, folded=fg)


@dataclass(frozen=True, eq=False)
class SparseModelMatrices:
    """Sparse K and S of a model; ``K_at(alpha)`` gives K + c alpha S."""

    model: Model
    K: sparse.csr_matrix
    S: sparse.csr_matrix
    folded: FoldedGraph

    @property
    def c(self) -> float:
        return self.model.series_constant

    def K_at(self, alpha: float) -> sparse.csr_matrix:
        return (self.K + self.c * alpha * self.S).tocsr()


def assemble_sparse_model(
    fg: FoldedGraph,
    zipper: ZipperLike,
    model: Model,
    phases: PhaseAssignment | None = None,
) -> SparseModelMatrices:
    """Sparse counterpart of ``assemble_model_matrices`` for large graphs."""
    phases = phases or complex_phases(fg.base)
    K = assemble_sparse(fg, model_connection(fg, zipper, 0.0, model), phases)
    K_unit = assemble_sparse(fg, model_connection(fg, zipper, 1.0, model), phases)
    scale = 1.0 if model is Model.FOLDED else 2.0
    S = (scale * (K_unit - K)).tocsr()
    S.eliminate_zeros()
    if model is Model.FOLDED:
        d = sparse.diags(folded_gauge(fg))
        K, S = (d @ K @ d).tocsr(), (d @ S @ d).tocsr()
    return SparseModelMatrices(model=model, K=K, S=S, folded=fg)
