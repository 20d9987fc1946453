"""
Arc statistics of folded and shifted configurations.

A configuration lives on the upper graph G^1 with the axis as folding
boundary. Arcs are stored from their white end to their black end; an arc
enclosing z is clockwise (kappa = +1) when that path crosses the reference
path from z to the boundary from left to right.

Version: 0.1.0
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import comb

from dimerfold.capabilities.enumeration import (
    Arc,
    LoopsArcsConfig,
    Matching,
    decompose,
    enumerate_matchings,
)
from dimerfold.capabilities.sampler import SamplerState, draw_samples
from dimerfold.core.config import get_config
from dimerfold.core.exceptions import (
    DomainError,
    EnumerationCapError,
    GraphError,
    InvariantError,
)
from dimerfold.core.logging import get_logger
from dimerfold.core.models import Model, Provenance
from dimerfold.domain.lattice import (
    LatticeGraph,
    Point,
    SymmetricLatticeDomain,
    TemperleyanGraph,
    build_temperleyan,
    reflect,
    restrict_upper,
    vertex_class,
)

logger = get_logger(__name__)

RefPath = Sequence[tuple[float, float]]


def _is_black(p: Point) -> bool:
    return not vertex_class(p).is_white


# =============================================================================
# Folding and superposition
# =============================================================================


def fold(m: Matching) -> LoopsArcsConfig:
    """Fold a matching of the symmetric graph onto its upper half.

    Upper dimers become layer 1, mirrored lower dimers layer 2, axis dimers
    single-edge arcs.
    """
    labelled = []
    axis = set()
    for u, v in m.pairs:
        for p in (u, v):
            if p[1] == 0:
                axis.add(p)
        if u[1] > 0 or v[1] > 0:
            labelled.append((u, v, 1))
        elif u[1] < 0 or v[1] < 0:
            labelled.append((reflect(u), reflect(v), 2))
        else:
            labelled.append((u, v, 0))
    return decompose(labelled, axis, _is_black)


def superimpose(m1: Matching, m2: Matching) -> LoopsArcsConfig:
    """Union of a G^1 matching (layer 1) and a G^2 matching (layer 2).

    Raises:
        GraphError: m2 does not cover exactly the off-axis vertices of m1.
    """
    v1 = set(m1.partner)
    v2 = set(m2.partner)
    axis = {p for p in v1 if p[1] == 0}
    if v2 != v1 - axis:
        raise GraphError(
            "matchings are not on a paired upper and strict-upper graph",
            details={"upper": len(v1), "strict_upper": len(v2), "axis": len(axis)},
        )
    labelled = [(u, v, 1) for u, v in m1.pairs] + [(u, v, 2) for u, v in m2.pairs]
    return decompose(labelled, axis, _is_black)


# =============================================================================
# Enclosure
# =============================================================================


@dataclass(frozen=True)
class EnclosingArc:
    white_end: Point
    black_end: Point
    kappa: int


@dataclass(frozen=True)
class ArcStatistics:
    """Arcs enclosing a face: n = l + r, o = l - r = n mod 2."""

    n: int
    o: int
    r: int
    l: int  # noqa: E741
    arcs: tuple[EnclosingArc, ...] = ()

    def as_row(self) -> dict[str, int]:
        return {"n": self.n, "o": self.o, "r": self.r, "l": self.l}


def upward_path(z: Point, top: int) -> list[tuple[float, float]]:
    """Vertical reference path from the centre of face z out through the top."""
    x, y = z[0] + 0.5, z[1] + 0.5
    return [(x, y), (x, top + 0.5)]


def sideways_path(z: Point, g: LatticeGraph, direction: int = 1) -> list[tuple[float, float]]:
    """Horizontal reference path from face z out through the left or right side."""
    xs = [p[0] for p in g.vertices]
    x, y = z[0] + 0.5, z[1] + 0.5
    end = max(xs) + 0.5 if direction > 0 else min(xs) - 0.5
    return [(x, y), (end, y)]


def signed_crossings(arc: Arc, path: RefPath) -> int:
    """Net crossings of an arc with an axis-parallel half-integer polyline.

    An arc edge crossing the path from its left to its right counts +1. Only
    horizontal and vertical path segments are supported.

    Raises:
        ValueError: a path segment is neither horizontal nor vertical.
    """
    for (ax, ay), (bx, by) in itertools.pairwise(path):
        if ax != bx and ay != by:
            raise ValueError("reference path segments must be axis-parallel")
    total = 0
    for (ax, ay), (bx, by) in itertools.pairwise(path):
        for p, q in itertools.pairwise(arc.path):
            if ax == bx and p[1] == q[1]:
                lo, hi = sorted((ay, by))
                if min(p[0], q[0]) < ax < max(p[0], q[0]) and lo < p[1] < hi:
                    total += int(math.copysign(1, by - ay)) * (q[0] - p[0])
            elif ay == by and p[0] == q[0]:
                lo, hi = sorted((ax, bx))
                if min(p[1], q[1]) < ay < max(p[1], q[1]) and lo < p[0] < hi:
                    total -= int(math.copysign(1, bx - ax)) * (q[1] - p[1])
    return total


def arc_stats(
    cfg: LoopsArcsConfig,
    z: Point,
    g: LatticeGraph,
    path: RefPath | None = None,
    check_path: bool = False,
) -> ArcStatistics:
    """n, o, r, l for the face with lower-left corner z.

    Args:
        cfg: configuration on ``g`` (the upper graph).
        z: face of ``g``.
        path: reference polyline from the face centre to the non-axis
            boundary; defaults to the vertical ray through the top.
        check_path: recount with a horizontal ray and compare.

    Raises:
        DomainError: z is not a face of g.
        InvariantError: l - r outside {0, 1}, or the two reference paths disagree.
    """
    if z not in set(g.faces):
        raise DomainError("point is not a face of the graph", details={"face": z})
    top = max(p[1] for p in g.vertices)
    path = path if path is not None else upward_path(z, top)

    enclosing = []
    for arc in cfg.arcs:
        net = signed_crossings(arc, path)
        if net % 2:
            enclosing.append(EnclosingArc(arc.white_end, arc.black_end, 1 if net > 0 else -1))
    r = sum(1 for a in enclosing if a.kappa > 0)
    l = len(enclosing) - r  # noqa: E741
    n = len(enclosing)
    if l - r not in (0, 1) or (l - r) != n % 2:
        raise InvariantError(
            "enclosing arcs do not alternate in orientation",
            {"face": z, "clockwise": r, "counterclockwise": l},
        )
    if check_path:
        other = sideways_path(z, g)
        n_other = sum(1 for arc in cfg.arcs if signed_crossings(arc, other) % 2)
        if n_other != n:
            raise InvariantError("enclosure depends on the reference path", {"face": z, "n": n, "other": n_other})
    return ArcStatistics(n=n, o=l - r, r=r, l=l, arcs=tuple(enclosing))


# =============================================================================
# Heights
# =============================================================================


def _cross(d: tuple[int, int], e: tuple[int, int]) -> int:
    return d[0] * e[1] - d[1] * e[0]


def height_increments(cfg: LoopsArcsConfig, g: LatticeGraph) -> dict[Point, int]:
    """Face heights up to a constant: stepping across an oriented edge that
    points to the left of the step adds 1, to the right subtracts 1.

    Raises:
        InvariantError: the increments do not close around some vertex.
    """
    oriented = {}
    for p, q in cfg.oriented_edges(_is_black):
        oriented[(p, q)] = oriented.get((p, q), 0) + 1
        oriented[(q, p)] = oriented.get((q, p), 0) - 1

    faces = set(g.faces)

    def increment(f: Point, step: tuple[int, int]) -> int:
        x, y = f
        if step == (1, 0):
            a, b = (x + 1, y), (x + 1, y + 1)
        elif step == (-1, 0):
            a, b = (x, y), (x, y + 1)
        elif step == (0, 1):
            a, b = (x, y + 1), (x + 1, y + 1)
        else:
            a, b = (x, y), (x + 1, y)
        flow = oriented.get((a, b), 0)
        return flow * _cross(step, (b[0] - a[0], b[1] - a[1]))

    heights: dict[Point, int] = {}
    for seed in sorted(faces):
        if seed in heights:
            continue
        heights[seed] = 0
        stack = [seed]
        while stack:
            f = stack.pop()
            for step in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                h = (f[0] + step[0], f[1] + step[1])
                if h not in faces:
                    continue
                value = heights[f] + increment(f, step)
                if h not in heights:
                    heights[h] = value
                    stack.append(h)
                elif heights[h] != value:
                    raise InvariantError("height increments do not close", {"face": h})
    return heights


# =============================================================================
# Moments
# =============================================================================


@dataclass
class MomentReport:
    """Moment estimates of the enclosing-arc statistics at one face.

    ``binomial[(k, sigma)]`` estimates E[binom((n - o)/2, k) o^sigma].
    """

    model: Model
    provenance: Provenance
    eps: float
    samples: int
    face: Point
    mean_o: float
    mean_n: float
    var_n: float
    stderr_o: float = 0.0
    stderr_n: float = 0.0
    stderr_var_n: float = 0.0
    binomial: dict[tuple[int, int], float] = field(default_factory=dict)
    binomial_stderr: dict[tuple[int, int], float] = field(default_factory=dict)
    rows: list[ArcStatistics] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.value,
            "provenance": self.provenance.value,
            "eps": self.eps,
            "samples": self.samples,
            "face": list(self.face),
            "mean_o": self.mean_o,
            "mean_n": self.mean_n,
            "var_n": self.var_n,
            "stderr_o": self.stderr_o,
            "stderr_n": self.stderr_n,
            "stderr_var_n": self.stderr_var_n,
            "binomial": {f"{k},{s}": v for (k, s), v in sorted(self.binomial.items())},
            "binomial_stderr": {
                f"{k},{s}": v for (k, s), v in sorted(self.binomial_stderr.items())
            },
        }


def _features(stats: Sequence[ArcStatistics], k_max: int) -> dict[str, np.ndarray]:
    n = np.array([s.n for s in stats], dtype=float)
    o = np.array([s.o for s in stats], dtype=float)
    r = np.array([s.r for s in stats], dtype=float)
    cols = {"n": n, "o": o, "n2": n * n}
    for k in range(k_max + 1):
        for sigma in (0, 1):
            cols[f"b{k}{sigma}"] = comb(r, k) * o**sigma
    return cols


def _jackknife(values: np.ndarray, weights: np.ndarray | None = None) -> tuple[float, float]:
    """Mean and delete-one jackknife standard error of a sample mean."""
    if weights is not None:
        return float(np.dot(weights, values)), 0.0
    count = len(values)
    mean = float(values.mean())
    if count < 2:
        return mean, 0.0
    loo = (values.sum() - values) / (count - 1)
    return mean, float(math.sqrt((count - 1) / count * np.sum((loo - loo.mean()) ** 2)))


def _variance_jackknife(n: np.ndarray) -> float:
    count = len(n)
    if count < 2:
        return 0.0
    s1, s2 = n.sum(), (n * n).sum()
    m1 = (s1 - n) / (count - 1)
    m2 = (s2 - n * n) / (count - 1)
    theta = m2 - m1 * m1
    return float(math.sqrt((count - 1) / count * np.sum((theta - theta.mean()) ** 2)))


def summarize(
    stats: Sequence[ArcStatistics],
    model: Model,
    provenance: Provenance,
    eps: float,
    face: Point,
    weights: np.ndarray | None = None,
    k_max: int = 2,
) -> MomentReport:
    """MomentReport from per-configuration statistics.

    With ``weights`` (exact enumeration) the entries are weighted averages
    with zero error; otherwise sample means with jackknife errors.
    """
    cols = _features(stats, k_max)
    mean_o, se_o = _jackknife(cols["o"], weights)
    mean_n, se_n = _jackknife(cols["n"], weights)
    mean_n2, _ = _jackknife(cols["n2"], weights)
    var_n = mean_n2 - mean_n**2
    se_var = 0.0 if weights is not None else _variance_jackknife(cols["n"])
    binomial, binomial_se = {}, {}
    for k in range(k_max + 1):
        for sigma in (0, 1):
            binomial[(k, sigma)], binomial_se[(k, sigma)] = _jackknife(
                cols[f"b{k}{sigma}"], weights
            )
    return MomentReport(
        model=model,
        provenance=provenance,
        eps=eps,
        samples=len(stats),
        face=face,
        mean_o=mean_o,
        mean_n=mean_n,
        var_n=var_n,
        stderr_o=se_o,
        stderr_n=se_n,
        stderr_var_n=se_var,
        binomial=binomial,
        binomial_stderr=binomial_se,
        rows=list(stats),
    )


@dataclass(frozen=True, eq=False)
class ModelGraphs:
    """The graphs a model samples from; ``upper`` carries the configurations."""

    model: Model
    symmetric: TemperleyanGraph
    upper: TemperleyanGraph
    strict_upper: TemperleyanGraph | None

    @classmethod
    def build(cls, domain: SymmetricLatticeDomain, model: Model) -> ModelGraphs:
        gr = build_temperleyan(domain)
        strict = restrict_upper(gr, strict=True) if model is Model.SHIFTED else None
        return cls(model=model, symmetric=gr, upper=restrict_upper(gr), strict_upper=strict)


def exact_configurations(graphs: ModelGraphs) -> list[LoopsArcsConfig]:
    """Every configuration of the model, each with equal weight.

    Raises:
        EnumerationCapError: the graphs are over the enumeration caps.
    """
    if graphs.model is Model.FOLDED:
        return [fold(m) for m in enumerate_matchings(graphs.symmetric)]
    ones = enumerate_matchings(graphs.upper)
    twos = enumerate_matchings(graphs.strict_upper)  # type: ignore[arg-type]
    limit = get_config().enumeration.max_matchings * 10
    if len(ones) * len(twos) > limit:
        raise EnumerationCapError("too many matching pairs", limit=limit)
    return [superimpose(m1, m2) for m1 in ones for m2 in twos]


def sample_matchings(
    graphs: ModelGraphs,
    samples: int,
    seed: int,
    method: str = "auto",
    threads: int = 1,
) -> list[tuple[Matching, ...]]:
    """Raw covers behind ``samples`` configurations.

    Folded: one cover of the symmetric graph per sample. Shifted: a cover of
    the upper graph and an independent one of the strict upper graph.
    """
    if graphs.model is Model.FOLDED:
        return [
            (m,)
            for m in draw_samples(graphs.symmetric, samples, seed, method, threads)  # type: ignore[arg-type]
        ]
    seq_one, seq_two = np.random.SeedSequence(seed).spawn(2)
    ones = draw_samples(graphs.upper, samples, seq_one, method, threads)  # type: ignore[arg-type]
    state = SamplerState.for_graph(graphs.strict_upper, "determinantal")  # type: ignore[arg-type]
    twos = draw_samples(graphs.strict_upper, samples, seq_two, threads=threads, state=state)  # type: ignore[arg-type]
    return list(zip(ones, twos, strict=True))


def combine(graphs: ModelGraphs, covers: tuple[Matching, ...]) -> LoopsArcsConfig:
    return fold(covers[0]) if graphs.model is Model.FOLDED else superimpose(*covers)


def sample_configurations(
    graphs: ModelGraphs,
    samples: int,
    seed: int,
    method: str = "auto",
    threads: int = 1,
) -> list[LoopsArcsConfig]:
    """``samples`` independent configurations of the model."""
    return [combine(graphs, c) for c in sample_matchings(graphs, samples, seed, method, threads)]


def estimate_moments(
    model: Model,
    domain: SymmetricLatticeDomain,
    z: Point,
    samples: int,
    seed: int = 0,
    method: str = "auto",
    threads: int = 1,
    exact: bool | None = None,
    graphs: ModelGraphs | None = None,
) -> MomentReport:
    """Moments of (n, o) at face z of the upper graph.

    Exact enumeration is used when ``exact`` is true, or when it is ``None``
    and the model graphs are within the enumeration caps; Monte Carlo with
    jackknife errors otherwise.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    graphs = graphs or ModelGraphs.build(domain, model)
    if exact is None:
        exact = _within_caps(graphs)

    if exact:
        configs = exact_configurations(graphs)
        weights = np.full(len(configs), 1.0 / len(configs))
        provenance = Provenance.EXACT
    else:
        configs = sample_configurations(graphs, samples, seed, method, threads)
        weights = None
        provenance = Provenance.MONTE_CARLO

    stats = [arc_stats(c, z, graphs.upper) for c in configs]
    report = summarize(stats, model, provenance, domain.eps, z, weights)
    logger.info(
        "moments_estimated",
        model=model.value,
        provenance=provenance.value,
        samples=report.samples,
        mean_o=report.mean_o,
        mean_n=report.mean_n,
    )
    return report


def _within_caps(graphs: ModelGraphs) -> bool:
    cap = get_config().enumeration.max_vertices
    if graphs.model is Model.FOLDED:
        return len(graphs.symmetric.vertices) <= cap
    return len(graphs.upper.vertices) <= cap and len(graphs.strict_upper.vertices) <= cap  # type: ignore[union-attr]
