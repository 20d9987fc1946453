"""
Unit tests for the exact dimer samplers.

Version: 0.1.0
"""

import gzip
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import chisquare

from dimerfold.capabilities.enumeration import Matching, enumerate_matchings, load_corpus
from dimerfold.capabilities.sampler import (
    SamplerMethod,
    SamplerState,
    bipartite_kasteleyn,
    draw_samples,
    dump_matchings,
    resolve_method,
    sample_determinantal,
    sample_wilson,
    substreams,
)
from dimerfold.core.exceptions import SamplerError
from dimerfold.domain.lattice import (
    LatticeGraph,
    TemperleyanGraph,
    build_grid,
    build_symmetric_domain,
    build_temperleyan,
    rectangle,
    restrict_upper,
)


class TestResolveMethod:
    """Tests for resolve_method."""

    def test_auto_temperleyan(self, unit_graph, unit_upper):
        """Test rooted Temperleyan graphs use Wilson's algorithm."""
        assert resolve_method(unit_graph) is SamplerMethod.WILSON
        assert resolve_method(unit_upper) is SamplerMethod.WILSON

    def test_auto_other(self, unit_strict_upper):
        """Test other graphs use the determinantal sampler."""
        assert resolve_method(unit_strict_upper) is SamplerMethod.DETERMINANTAL
        assert resolve_method(build_grid(2, 2)) is SamplerMethod.DETERMINANTAL

    def test_explicit(self, unit_graph):
        """Test explicit names win over auto-detection."""
        assert resolve_method(unit_graph, "determinantal") is SamplerMethod.DETERMINANTAL
        assert resolve_method(build_grid(2, 2), "wilson") is SamplerMethod.WILSON


class TestWilson:
    """Tests for the Wilson-Temperley sampler."""

    def test_perfect_on_symmetric(self, unit_graph, rng):
        """Test samples are perfect matchings of the symmetric graph."""
        graph = unit_graph.to_networkx()
        for _ in range(10):
            assert sample_wilson(unit_graph, rng).is_perfect_on(graph)

    def test_uniform_on_upper(self, unit_upper, rng):
        """Test the four covers of the upper graph appear equally often."""
        all_covers = set(enumerate_matchings(unit_upper))
        counts = Counter(sample_wilson(unit_upper, rng) for _ in range(400))
        assert set(counts) == all_covers
        assert all(50 < c < 150 for c in counts.values())

    def test_strict_upper_refused(self, unit_strict_upper, rng):
        """Test graphs without the Temperley structure are refused."""
        with pytest.raises(SamplerError):
            sample_wilson(unit_strict_upper, rng)

    def test_plain_graph_refused(self, rng):
        """Test plain grids are refused."""
        with pytest.raises(SamplerError):
            sample_wilson(build_grid(2, 2), rng)  # type: ignore[arg-type]


class TestDeterminantal:
    """Tests for the sequential determinantal sampler."""

    def test_kasteleyn_matrix(self):
        """Test the bipartite matrix has one entry per edge."""
        g = build_grid(2, 2)
        A = bipartite_kasteleyn(g)
        assert A.shape == (2, 2)
        assert np.count_nonzero(A) == 4
        assert abs(np.linalg.det(A)) == pytest.approx(2.0)

    def test_perfect_on_strict_upper(self, unit_strict_upper, rng):
        """Test samples on the strict upper graph are perfect matchings."""
        graph = unit_strict_upper.to_networkx()
        for _ in range(10):
            assert sample_determinantal(unit_strict_upper, rng).is_perfect_on(graph)

    def test_uniform_on_grid(self, rng):
        """Test the five tilings of a 4x2 grid appear equally often."""
        g = build_grid(4, 2)
        state = SamplerState.for_graph(g)
        counts = Counter(sample_determinantal(g, rng, state) for _ in range(500))
        assert set(counts) == set(enumerate_matchings(g))
        assert all(50 < c < 150 for c in counts.values())

    def test_larger_grid(self, rng):
        """Test a 6x6 grid samples cleanly."""
        g = build_grid(6, 6)
        assert sample_determinantal(g, rng).is_perfect_on(g.to_networkx())

    def test_no_matching(self):
        """Test a balanced graph without covers is reported."""
        vertices = frozenset({(0, 0), (1, 0), (2, 0), (4, 1)})
        g = LatticeGraph(vertices=vertices, black=frozenset({(0, 0), (2, 0)}))
        with pytest.raises(SamplerError):
            SamplerState.for_graph(g, "determinantal")


class TestBatches:
    """Tests for batched sampling."""

    def test_substreams(self):
        """Test substreams are reproducible and distinct."""
        a = [r.random() for r in substreams(7, 3)]
        b = [r.random() for r in substreams(7, 3)]
        assert a == b
        assert len(set(a)) == 3

    @pytest.mark.parametrize("method", ["wilson", "determinantal"])
    def test_threads_do_not_change_samples(self, unit_upper, method):
        """Test identical samples for one and four threads."""
        serial = draw_samples(unit_upper, 24, seed=5, method=method, threads=1)
        parallel = draw_samples(unit_upper, 24, seed=5, method=method, threads=4)
        assert serial == parallel

    def test_stats(self, unit_upper):
        """Test the shared state counts draws."""
        state = SamplerState.for_graph(unit_upper)
        draw_samples(unit_upper, 6, seed=1, state=state)
        assert state.stats.draws == 6
        assert state.stats.walk_steps > 0

    def test_check_in_debug(self, unit_upper, monkeypatch: pytest.MonkeyPatch):
        """Test samples are validated when logging at DEBUG."""
        monkeypatch.setenv("DIMERFOLD_LOGGING__LEVEL", "DEBUG")
        samples = draw_samples(unit_upper, 3, seed=2)
        assert len(samples) == 3


class TestDumpMatchings:
    """Tests for dump_matchings."""

    def test_plain_text(self, unit_upper, tmp_path: Path):
        """Test one line of edge indices per sample."""
        samples = draw_samples(unit_upper, 3, seed=0)
        path = dump_matchings(samples, unit_upper, tmp_path / "m.txt")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 3
        assert all(len(line.split()) == 4 for line in lines)

    def test_gzip(self, unit_upper, tmp_path: Path):
        """Test a .gz suffix writes gzip."""
        samples = draw_samples(unit_upper, 2, seed=0)
        path = dump_matchings(samples, unit_upper, tmp_path / "out" / "m.txt.gz")
        with gzip.open(path, "rt", encoding="utf-8") as handle:
            assert len(handle.read().splitlines()) == 2

    def test_non_edge(self, tmp_path: Path):
        """Test a pair that is not an edge is rejected."""
        g = build_grid(2, 2)
        bad = Matching.of([((0, 0), (1, 1)), ((1, 0), (0, 1))])
        with pytest.raises(SamplerError):
            dump_matchings([bad], g, tmp_path / "m.txt")


GOF_SAMPLES = 10_000
GOF_DOMAINS = ["upper-1x1", "upper-2x1", "upper-1x2"]


def corpus_graphs(name: str) -> dict[str, TemperleyanGraph]:
    """Symmetric, upper and strict upper graphs of a corpus rectangle."""
    entry = next(e for e in load_corpus() if e.name == name)
    symmetric = build_temperleyan(build_symmetric_domain(rectangle(0, entry.x_max, entry.y_max, eps=1.0)))
    return {
        "symmetric": symmetric,
        "upper": restrict_upper(symmetric),
        "strict": restrict_upper(symmetric, strict=True),
    }


@pytest.mark.slow
class TestGoodnessOfFit:
    """Chi-square tests of the samplers against enumerated uniform laws."""

    @pytest.mark.parametrize("name", GOF_DOMAINS)
    @pytest.mark.parametrize(
        ("variant", "method"),
        [
            ("symmetric", "wilson"),
            ("upper", "wilson"),
            ("upper", "determinantal"),
            ("strict", "determinantal"),
        ],
    )
    def test_uniform(self, name, variant, method):
        """Test 10^4 samples pass a 1% chi-square test for uniformity."""
        g = corpus_graphs(name)[variant]
        covers = list(enumerate_matchings(g))
        assert 5 * len(covers) <= GOF_SAMPLES
        counts = Counter(draw_samples(g, GOF_SAMPLES, seed=17, method=method))
        assert set(counts) <= set(covers)
        result = chisquare([counts[m] for m in covers])
        assert result.pvalue > 0.01

    def test_edge_marginals(self):
        """Test both samplers reproduce the determinantal edge probabilities."""
        g = corpus_graphs("upper-3x1")["upper"]
        A = bipartite_kasteleyn(g)
        inverse = np.linalg.inv(A)
        w_index = {w: k for k, w in enumerate(g.whites)}
        b_index = {b: k for k, b in enumerate(g.blacks)}
        exact = {
            tuple(sorted((w, b))): abs(A[w_index[w], b_index[b]] * inverse[b_index[b], w_index[w]])
            for w, b in g.edges
        }
        assert sum(exact.values()) == pytest.approx(len(g.whites))
        n = 4000
        for method in ("wilson", "determinantal"):
            edges = Counter(pair for m in draw_samples(g, n, seed=23, method=method) for pair in m)
            for pair, p in exact.items():
                assert edges[pair] / n == pytest.approx(p, abs=0.035)
