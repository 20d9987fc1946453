"""
Unit tests for zippers, trace series and the finite-eps identity.

Version: 0.1.0
"""

import math

import numpy as np
import pytest
from scipy import sparse

from dimerfold.capabilities.arcs import estimate_moments
from dimerfold.capabilities.continuum import compute_cn, strip_kernel
from dimerfold.capabilities.enumeration import Arc, LoopsArcsConfig
from dimerfold.capabilities.zipper import (
    DenseInverse,
    SparseInverse,
    TraceSeries,
    bell_arguments,
    build_S,
    build_zipper,
    compressed_product,
    domain_trace_series,
    finite_eps_identity,
    legs_from_waypoints,
    moments_from_traces,
    trace_series,
    zipper_weight,
)
from dimerfold.core.exceptions import SingularMatrixError, ZipperError
from dimerfold.core.models import Model
from dimerfold.domain.kasteleyn import assemble_model_matrices, assemble_sparse_model
from dimerfold.domain.lattice import (
    VertexClass,
    build_symmetric_domain,
    build_temperleyan,
    rectangle,
    restrict_upper,
    snap_to_face,
    strip,
    vertex_class,
)

LEFT_ARC = ((1, 0), (1, 1), (1, 2), (0, 2), (0, 1), (0, 0))
AROUND_ARC = ((1, 0), (1, 1), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1), (0, 0))


@pytest.fixture
def unit_zipper(unit_upper):
    """Zipper from face (1, 1) of the unit upper graph, leaving to the left."""
    return build_zipper(unit_upper, (1, 1), final="NW", check_flat=False)


@pytest.fixture
def fine_upper():
    """Upper graph of [0, 2] x [-1, 1] at eps = 1/4."""
    domain = build_symmetric_domain(rectangle(0, 2, 1, eps=0.25))
    return restrict_upper(build_temperleyan(domain))


def arc(path):
    """Arc with alternating layers along ``path``."""
    return Arc(path, tuple(1 + k % 2 for k in range(len(path) - 1)))


class TestLegs:
    """Tests for legs_from_waypoints."""

    def test_alternating_legs(self):
        """Test each waypoint ends a leg and directions alternate."""
        legs, final = legs_from_waypoints(0.5 + 1j, [(0.7, 1.5), (0.3, 2.0)], "NE", 0.5)
        assert legs == [("NE", 2), ("NW", 2)]
        assert final == "NE"

    def test_waypoints_must_climb(self):
        """Test a waypoint below the start is rejected."""
        with pytest.raises(ZipperError):
            legs_from_waypoints(0.5 + 1j, [(0.7, 0.9)], "NE", 0.5)


class TestBuildZipper:
    """Tests for build_zipper."""

    def test_unit_zipper(self, unit_zipper):
        """Test the two crossed edges and the exit."""
        assert unit_zipper.faces == ((1, 1), (0, 1))
        assert unit_zipper.edges == (((1, 1), (1, 2)), ((0, 2), (1, 2)))
        assert unit_zipper.exit_x == 0.5
        assert unit_zipper.packets == ()
        assert len(unit_zipper.leftovers) == 2
        assert unit_zipper.reference_path() == [(1.5, 1.5), (0.5, 1.5), (0.5, 2.5)]

    def test_crossing(self, unit_zipper):
        """Test net crossings of arcs that miss and enclose the start face."""
        assert unit_zipper.crossing(LEFT_ARC) == 0
        assert unit_zipper.crossing(AROUND_ARC) == -1
        assert unit_zipper.crossing(tuple(reversed(AROUND_ARC))) == 1

    def test_not_a_face(self, unit_upper):
        """Test the start must be a face."""
        with pytest.raises(ZipperError):
            build_zipper(unit_upper, (1, 0), check_flat=False)

    def test_touches_axis(self, unit_upper):
        """Test faces on the axis are refused."""
        with pytest.raises(ZipperError):
            build_zipper(unit_upper, (0, 0), check_flat=False)

    def test_leaves_through_side(self, unit_upper):
        """Test a path running off the side is refused."""
        with pytest.raises(ZipperError):
            build_zipper(unit_upper, (1, 1), final="NE", check_flat=False)

    def test_packets(self, fine_upper):
        """Test a long NE staircase splits into packets and leftovers."""
        zipper = build_zipper(fine_upper, (2, 1), final="NE", check_flat=False)
        assert len(zipper) == 14
        assert zipper.exit_x == 9.5
        assert len(zipper.packets) == 3
        assert len(zipper.leftovers) <= 2
        assert zipper.leftovers == (((9, 8), (9, 7)), ((9, 8), (10, 8)))
        first = zipper.packets[0]
        assert first.vertices == ((3, 1), (3, 2), (4, 2), (4, 3), (5, 3))
        assert first.anchor == pytest.approx(0.5 + 0.375j)
        assert first.displacement == pytest.approx(0.25 + 0.25j)
        for packet in zipper.packets:
            classes = {vertex_class(p) for p in packet.vertices[:4]}
            assert classes == set(VertexClass)
        anchors = [p.anchor for p in zipper.packets]
        steps = [b - a for a, b in zip(anchors, anchors[1:], strict=False)]
        assert steps == pytest.approx([0.25 + 0.25j] * 2)

    def test_packets_across_turn(self, fine_upper):
        """Test a NE then NW staircase keeps packets on both legs."""
        zipper = build_zipper(fine_upper, (4, 1), [("NE", 2)], final="NW", check_flat=False)
        assert len(zipper) == 14
        assert zipper.exit_x == 1.5
        assert [p.displacement for p in zipper.packets] == pytest.approx(
            [0.25 + 0.25j, -0.25 + 0.25j, -0.25 + 0.25j]
        )
        assert zipper.packets[1].anchor == pytest.approx(0.75 + 0.375j)
        assert len(zipper.leftovers) == 2

    def test_packets_on_strip(self):
        """Test the 32-row strip zipper is tiled by packets."""
        upper = restrict_upper(build_temperleyan(build_symmetric_domain(strip(32))))
        face = snap_to_face(upper, complex(0.0, math.pi / 4)).face
        zipper = build_zipper(upper, face, final="NE", check_flat=False)
        assert len(zipper.leftovers) <= 2
        assert 4 * len(zipper.packets) + len(zipper.leftovers) == len(zipper)
        assert len(zipper.packets) >= 8


class TestZipperWeight:
    """Tests for zipper_weight."""

    def test_weights(self, unit_zipper):
        """Test (1 + kappa alpha) per arc."""
        assert zipper_weight(LoopsArcsConfig(arcs=(arc(LEFT_ARC),)), unit_zipper, 0.3) == 1.0
        around = LoopsArcsConfig(arcs=(arc(AROUND_ARC),))
        assert zipper_weight(around, unit_zipper, 0.3) == pytest.approx(0.7)

    def test_no_arcs(self, unit_zipper):
        """Test a configuration without arcs has weight one."""
        assert zipper_weight(LoopsArcsConfig(), unit_zipper, 0.5) == 1.0


class TestTraceSeries:
    """Tests for S, compressed products and trace series."""

    @pytest.mark.parametrize("model", list(Model))
    def test_build_S(self, unit_zipper, model):
        """Test S is skew and supported on the zipper."""
        S = build_S(unit_zipper, model)
        assert np.allclose(S.data, -S.data.T)
        assert 0 < np.count_nonzero(S.data) < S.data.size

    @pytest.mark.parametrize("model", list(Model))
    def test_compressed_spectrum(self, unit_zipper, model):
        """Test the compressed product has the traces of the full product."""
        mats = assemble_model_matrices(unit_zipper.folded, unit_zipper, 0.0, model)
        K_inverse = np.linalg.inv(mats.K.data)
        full = mats.S.data @ K_inverse
        small = compressed_product(mats.S, K_inverse)
        assert small.shape[0] < full.shape[0]
        for n in range(1, 5):
            assert np.trace(np.linalg.matrix_power(small, n)) == pytest.approx(
                np.trace(np.linalg.matrix_power(full, n)), abs=1e-10
            )

    @pytest.mark.parametrize("model", list(Model))
    def test_sparse_matches_dense(self, unit_zipper, model):
        """Test sparse LU blocks give the dense trace series."""
        dense = assemble_model_matrices(unit_zipper.folded, unit_zipper, 0.0, model)
        sparse_mats = assemble_sparse_model(unit_zipper.folded, unit_zipper, model)
        a = trace_series(dense.S, DenseInverse(np.linalg.inv(dense.K.data)), 4, dense.c)
        b = trace_series(sparse_mats.S, SparseInverse(sparse_mats.K), 4, sparse_mats.c)
        assert np.allclose(a.traces, b.traces)

    def test_empty_support(self):
        """Test a zero S gives zero traces."""
        series = trace_series(np.zeros((2, 2)), np.eye(2), 3)
        assert np.array_equal(series.traces, np.zeros(3))
        assert series.spectral_radius == 0.0

    def test_n_max_positive(self):
        """Test n_max below 1 is rejected."""
        with pytest.raises(ValueError):
            trace_series(np.zeros((2, 2)), np.eye(2), 0)

    def test_sparse_singular(self):
        """Test a singular sparse K is reported."""
        with pytest.raises(SingularMatrixError):
            SparseInverse(sparse.csc_matrix(np.zeros((2, 2))))

    def test_normalized(self):
        """Test the (c/2)^n rescaling and the imaginary residue."""
        series = TraceSeries(np.array([1.0, 1.0 + 0.5j]), c=1.0)
        assert np.allclose(series.normalized, [0.5, 0.25 + 0.125j])
        assert series.max_imaginary() == pytest.approx(0.5 / (1 + abs(1 + 0.5j)))
        assert series.to_dict()["traces_im"] == [0.0, 0.5]


class TestMomentsFromTraces:
    """Tests for bell_arguments and moments_from_traces."""

    def test_bell_arguments(self):
        """Test (-2)^(k-1) (k-1)! T_k at c = 2."""
        assert np.allclose(bell_arguments([1, 1, 1], 2.0), [1, -2, 8])

    @staticmethod
    def series_of(eigenvalues, c=2.0, n_max=4):
        k = np.arange(1, n_max + 1)
        traces = np.array([np.sum(np.asarray(eigenvalues) ** n) for n in k], dtype=complex)
        return TraceSeries(traces, c)

    def test_odd_only(self):
        """Test det = (1 - p alpha)^2 gives E[o] = p and E[r] = 0."""
        p, c = 0.4, 2.0
        ts = self.series_of([-p / c, -p / c], c)
        assert moments_from_traces(ts, 0, 0) == pytest.approx(1.0)
        assert moments_from_traces(ts, 0, 1) == pytest.approx(p)
        assert moments_from_traces(ts, 1, 0) == pytest.approx(0.0, abs=1e-12)

    def test_pairs_only(self):
        """Test det = (1 - q alpha^2)^2 gives E[r] = q and E[binom(r, 2)] = 0."""
        q, c = 0.3, 1.0
        s = math.sqrt(q) / c
        ts = self.series_of([-s, -s, s, s], c)
        assert moments_from_traces(ts, 0, 1) == pytest.approx(0.0, abs=1e-12)
        assert moments_from_traces(ts, 1, 0) == pytest.approx(q)
        assert moments_from_traces(ts, 2, 0) == pytest.approx(0.0, abs=1e-12)

    def test_too_short(self):
        """Test a series shorter than 2 order + sigma is refused."""
        with pytest.raises(ZipperError):
            moments_from_traces(self.series_of([0.1], n_max=2), 1, 1)

    def test_bad_sigma(self):
        """Test sigma must be 0 or 1."""
        with pytest.raises(ValueError):
            moments_from_traces(self.series_of([0.1]), 0, 2)


class TestFiniteEpsIdentity:
    """Tests for the generating identity on enumerable domains."""

    @pytest.mark.parametrize("model", list(Model))
    def test_unit_domain(self, unit_domain, model):
        """Test the enclosure average equals both Pfaffian forms."""
        rows = finite_eps_identity(unit_domain, (1, 1), model, [0.0, 0.25, 0.5], final="NW")
        assert rows[0].lhs == pytest.approx(1.0)
        for row in rows:
            assert row.lhs == pytest.approx(row.lhs_zipper)
            assert row.rhs_pfaffian == pytest.approx(row.lhs, abs=1e-9)
            assert row.rhs_det == pytest.approx(row.lhs, abs=1e-9)
            assert row.error < 1e-9
            assert row.to_row()["rhs_imag"] < 1e-9

    @pytest.mark.parametrize("model", list(Model))
    def test_wide_domain(self, wide_domain, model):
        """Test the identity with two axis arcs possible."""
        rows = finite_eps_identity(wide_domain, (1, 1), model, [0.1, 0.3], final="NE")
        assert max(row.error for row in rows) < 1e-9

    @pytest.mark.parametrize("model", list(Model))
    def test_traces_give_exact_moments(self, wide_domain, model):
        """Test trace-series moments match exact enumeration."""
        series, _ = domain_trace_series(wide_domain, (1, 1), model, 4, check_flat=False)
        exact = estimate_moments(model, wide_domain, (1, 1), 1, exact=True)
        assert series.max_imaginary() < 1e-8
        assert moments_from_traces(series, 0, 1) == pytest.approx(exact.mean_o, abs=1e-9)
        assert moments_from_traces(series, 1, 0) == pytest.approx(
            exact.binomial[(1, 0)], abs=1e-9
        )


@pytest.mark.slow
class TestStripTraceConvergence:
    """Normalized traces on the strip against the continuum c_k."""

    @pytest.mark.parametrize("model", [Model.FOLDED, Model.SHIFTED])
    def test_gap_shrinks(self, model):
        """Test |T_k - c_k| for k = 1, 2 shrinks by at least 1.5 from H=16 to H=32."""
        gaps = []
        for height in (16, 32):
            domain = build_symmetric_domain(strip(height, 2 * math.pi))
            upper = restrict_upper(build_temperleyan(domain))
            snapped = snap_to_face(upper, complex(0.0, math.pi / 4))
            series, zipper = domain_trace_series(domain, snapped.face, model, 2)
            exit_point = complex(zipper.exit_x * upper.scale, math.pi / 2)
            c = compute_cn(strip_kernel(), snapped.centre, exit_point, n_max=2)
            gaps.append([abs(float(series.normalized[k - 1].real) - c[k]) for k in (1, 2)])
        coarse, fine = gaps
        for k in range(2):
            assert coarse[k] >= 1.5 * fine[k]
