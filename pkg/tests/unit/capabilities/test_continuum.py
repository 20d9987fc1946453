"""
Unit tests for continuum kernels, c_n integrals and Bell-polynomial moments.

Version: 0.1.0
"""

import math

import numpy as np
import pytest

from dimerfold.capabilities.continuum import (
    MIN_COUPLING_ORDER,
    STRIP_COUPLING_PAIRS,
    CouplingReport,
    CouplingRow,
    GreenKernel,
    ShiftedInverse,
    ale_targets,
    bell_arguments,
    bell_moments,
    bell_polynomial,
    compute_cn,
    conformal_check,
    convergence_order,
    coupling_asymptotic_check,
    coupling_prediction,
    half_plane_kernel,
    holomorphy_matrix,
    limit_moments,
    mapped_kernel,
    path_nodes,
    shifted_coupling_prediction,
    strip_c1,
    strip_c2,
    strip_cn,
    strip_kernel,
    strip_to_half_plane,
)
from dimerfold.core.exceptions import DomainError, NumericalError, QuadratureError
from dimerfold.core.models import Model
from dimerfold.domain.lattice import (
    VertexClass,
    build_symmetric_domain,
    build_temperleyan,
    restrict_upper,
    strip,
)

Y_VALUES = [math.pi / 6, math.pi / 4, math.pi / 3]


class TestKernels:
    """Tests for the strip, half-plane and mapped kernels."""

    def test_strip_singularity(self):
        """Test F_+ refuses coincident points."""
        with pytest.raises(NumericalError):
            strip_kernel().F_plus(0.2j, 0.2j)

    def test_half_plane_reflection(self):
        """Test the half-plane folds along the imaginary axis."""
        kernel = half_plane_kernel()
        assert kernel.reflect(1 + 2j) == -1 + 2j
        assert kernel.orientation == -1

    @pytest.mark.parametrize(("u", "v"), [(0.1 + 0.3j, -0.2 + 0.5j), (0.4 - 0.2j, 0.7j)])
    def test_pullback_is_strip(self, u, v):
        """Test pulling the half-plane kernel back along i e^u gives the strip kernel."""
        pulled = mapped_kernel(strip_to_half_plane, lambda w: 1j * np.exp(w))
        strip = strip_kernel()
        assert pulled.F_plus(u, v) == pytest.approx(strip.F_plus(u, v))
        assert pulled.F_minus(u, v) == pytest.approx(strip.F_minus(u, v))

    def test_select_by_sign(self):
        """Test F picks F_+ or F_- by sign."""
        kernel = half_plane_kernel()
        u, v = 0.3 + 1j, -0.5 + 2j
        assert kernel.F(1, u, v) == kernel.F_plus(u, v)
        assert kernel.F(-1, u, v) == kernel.F_minus(u, v)


class TestPathNodes:
    """Tests for path_nodes."""

    def test_weights_sum_to_displacement(self):
        """Test the weights integrate dz exactly."""
        nodes = path_nodes([0.2j, 1 + 0.2j, 1 + 1j], 6)
        assert len(nodes.points) == 12
        assert np.sum(nodes.weights) == pytest.approx(1 + 0.8j)

    def test_short_path(self):
        """Test one point is not a path."""
        with pytest.raises(ValueError):
            path_nodes([0.5j], 4)


class TestComputeCn:
    """Tests for compute_cn on the strip."""

    @pytest.mark.parametrize("y", Y_VALUES)
    def test_closed_forms(self, y):
        """Test c_1 and c_2 against their closed forms."""
        table = strip_cn(y, n_max=4)
        assert len(table) == 4
        assert table[1] == pytest.approx(strip_c1(y), abs=1e-9)
        assert table[2] == pytest.approx(strip_c2(y), abs=1e-8)
        assert np.all(np.abs(table.imaginary) < 1e-9)

    def test_path_independence(self):
        """Test a bent path gives the same values."""
        z, top = 0.3j, complex(0, math.pi / 2)
        straight = compute_cn(strip_kernel(), z, top, n_max=4)
        bent = compute_cn(strip_kernel(), z, top, path=[0.4 + 0.8j], n_max=4)
        assert np.allclose(straight.values, bent.values, atol=1e-7)

    def test_horizontal_shift(self):
        """Test the strip is translation invariant."""
        y = math.pi / 4
        assert np.allclose(strip_cn(y, 3).values, strip_cn(y, 3, x=0.7).values, atol=1e-8)

    def test_unconverged(self):
        """Test one node per segment fails the doubling check."""
        with pytest.raises(QuadratureError):
            compute_cn(strip_kernel(), 0.3j, complex(0, math.pi / 2), n_max=2, nodes=1)

    def test_settings_defaults(self):
        """Test n_max and the node count come from settings."""
        table = strip_cn(math.pi / 4)
        assert len(table) == 6
        assert table.nodes == 48
        assert table.rule == "gauss-legendre"
        assert table.to_dict()["path"][0] == [0.0, math.pi / 4]

    def test_growth(self):
        """Test the n-th root growth is finite."""
        growth = strip_cn(math.pi / 4, 4).growth()
        assert np.all(np.isfinite(growth))
        assert np.all(growth >= 0)

    @pytest.mark.parametrize("y", [math.pi / 6, math.pi / 3])
    def test_conformal_invariance(self, y):
        """Test strip and half-plane values agree at image points."""
        assert np.all(conformal_check(y, n_max=4) < 1e-7)


class TestBell:
    """Tests for complete Bell polynomials."""

    @pytest.mark.parametrize(("m", "expected"), [(0, 1), (1, 1), (2, 2), (3, 5), (4, 15)])
    def test_bell_numbers(self, m, expected):
        """Test all-ones arguments give the Bell numbers."""
        assert bell_polynomial(m, [1.0] * 4) == pytest.approx(expected)

    def test_explicit(self):
        """Test B_3 = x1^3 + 3 x1 x2 + x3."""
        x = [2.0, -1.0, 0.5]
        assert bell_polynomial(3, x) == pytest.approx(8 - 6 + 0.5)

    def test_too_few_arguments(self):
        """Test B_m needs m arguments."""
        with pytest.raises(ValueError):
            bell_polynomial(3, [1.0, 1.0])

    def test_arguments(self):
        """Test (-2)^(k-1) (k-1)! c_k."""
        assert np.allclose(bell_arguments([1.0, 1.0, 1.0]), [1, -2, 8])


class TestMoments:
    """Tests for bell_moments, limit_moments and ale_targets."""

    def test_low_orders(self):
        """Test E[o] = -c_1 and E[r] = c_2 - c_1^2 / 2."""
        c = [0.2, 0.3]
        assert bell_moments(c, 0, 0) == pytest.approx(1.0)
        assert bell_moments(c, 0, 1) == pytest.approx(-0.2)
        assert bell_moments(c, 1, 0) == pytest.approx(0.28)

    def test_bad_arguments(self):
        """Test sigma and table length are checked."""
        with pytest.raises(ValueError):
            bell_moments([0.1, 0.2], 0, 2)
        with pytest.raises(ValueError):
            bell_moments([0.1, 0.2], 1, 1)

    @pytest.mark.parametrize("y", Y_VALUES)
    def test_strip_targets(self, y):
        """Test moments of the strip c_n reproduce the closed forms."""
        moments = limit_moments(strip_cn(y, 4))
        mean_n, p_odd = ale_targets(y)
        assert moments.mean_o == pytest.approx(p_odd, abs=1e-8)
        assert moments.mean_n == pytest.approx(mean_n, abs=1e-7)
        assert moments.to_dict()["var_n"] == moments.var_n

    def test_closed_form_moments(self):
        """Test limit_moments on exact c_1, c_2 agree with ale_targets."""
        y = 1.0
        c = [strip_c1(y), strip_c2(y), 0.0, 0.0]
        moments = limit_moments(c)
        assert moments.mean_n == pytest.approx(ale_targets(y)[0])

    def test_top_boundary(self):
        """Test no arcs separate a point on the boundary."""
        assert ale_targets(math.pi / 2) == pytest.approx((0.0, 0.0))

    @pytest.mark.parametrize("y", [0.0, -0.1, 2.0])
    def test_y_range(self, y):
        """Test y outside (0, pi/2] is rejected."""
        with pytest.raises(ValueError):
            ale_targets(y)


class TestCoupling:
    """Tests for the inverse Kasteleyn comparison."""

    def test_report_shape(self, wide_domain):
        """Test four class pairs per point pair and the Green identity."""
        g = build_temperleyan(wide_domain)
        report = coupling_asymptotic_check(g, half_plane_kernel())
        assert len(report.rows) == 4
        assert {(row.r, row.s) for row in report.rows} == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
        assert report.green_identity_error < 1e-8
        assert len(report.to_dict()["rows"]) == 4

    def test_pair_too_close(self, wide_domain):
        """Test points closer than delta/2 are refused."""
        g = build_temperleyan(wide_domain)
        with pytest.raises(DomainError):
            coupling_asymptotic_check(g, half_plane_kernel(), pairs=[(0.5j, 0.1 + 0.5j)])

    def test_convergence_order(self):
        """Test halving eps and quartering the error is order two."""

        def report(eps, error):
            row = CouplingRow(r=1, s=1, black=(1, 1), white=(0, 1), value=error, prediction=0)
            return CouplingReport(eps=eps, rows=(row,), green_identity_error=0.0)

        orders = convergence_order(report(0.2, 0.04), report(0.1, 0.01))
        assert orders[(1, 1)] == pytest.approx(2.0)
        assert orders[(-1, -1)] == math.inf


class TestShiftedCoupling:
    """Tests for the shifted-model difference (K^1)^-1 - (K^2)^-1."""

    @pytest.fixture
    def strip_graph(self):
        """Symmetric graph of the strip with 16 rows and half width pi."""
        return build_temperleyan(build_symmetric_domain(strip(16, math.pi)))

    def test_prediction_is_copy_difference(self):
        """Test the prediction is the folded formula for F^1 minus that for F^2."""
        base = strip_kernel()

        def copy_kernel(j):
            sign = (-1) ** j
            return GreenKernel(
                f"copy{j}",
                lambda u, v: base.F_plus(u, v) + sign * base.F_minus(u, base.reflect(v)),
                lambda u, v: base.F_minus(u, v) + sign * base.F_plus(u, base.reflect(v)),
            )

        u, v = 0.1 + 0.4j, 0.9 + 1.1j
        for r in (1, -1):
            for s in (1, -1):
                expected = coupling_prediction(copy_kernel(1), 0.1, u, v, r, s) - coupling_prediction(
                    copy_kernel(2), 0.1, u, v, r, s
                )
                assert shifted_coupling_prediction(base, 0.1, u, v, r, s) == pytest.approx(expected)

    def test_report(self, strip_graph):
        """Test the shifted check restricts to the upper graph and keeps the identity."""
        report = coupling_asymptotic_check(
            strip_graph, strip_kernel(), STRIP_COUPLING_PAIRS, model=Model.SHIFTED
        )
        assert report.model is Model.SHIFTED
        assert len(report.rows) == 4 * len(STRIP_COUPLING_PAIRS)
        assert all(row.black[1] > 0 and row.white[1] > 0 for row in report.rows)
        assert report.green_identity_error < 1e-8
        assert report.to_dict()["model"] == "shifted"

    def test_copy_blocks(self, strip_graph):
        """Test copy 1 of the shifted matrix inverts the holomorphy matrix of the upper graph."""
        upper = restrict_upper(strip_graph)
        inverse = ShiftedInverse(upper)
        w = next(p for p in upper.whites if p[1] > 2)
        A = holomorphy_matrix(upper)
        column = inverse.copy_one(w)
        unit = np.zeros(len(upper.whites), dtype=complex)
        unit[upper.whites.index(w)] = 1.0
        assert np.allclose(A @ column, unit, atol=1e-10)

    def test_bulk_terms_cancel(self, strip_graph):
        """Test adjacent couplings of size about 1/4 nearly cancel between the copies."""
        upper = restrict_upper(strip_graph)
        inverse = ShiftedInverse(upper)
        b = min(
            (p for p in upper.of_class(VertexClass.B0) if p[1] > 0),
            key=lambda p: abs(upper.position(p) - 1j * math.pi / 4),
        )
        w = min(w for w, black in upper.edges if black == b)
        first, second = inverse.entries(b, w)
        assert 0.15 < abs(first) < 0.35
        assert 0.15 < abs(second) < 0.35
        assert abs(first - second) < 0.5 * min(abs(first), abs(second))

    @pytest.mark.slow
    def test_difference_is_order_eps(self):
        """Test the adjacent difference halves with the mesh while the couplings do not."""
        sizes = []
        for height in (16, 32):
            upper = restrict_upper(build_temperleyan(build_symmetric_domain(strip(height, math.pi))))
            inverse = ShiftedInverse(upper)
            b = min(
                (p for p in upper.of_class(VertexClass.B0) if p[1] > 0),
                key=lambda p: abs(upper.position(p) - 1j * math.pi / 4),
            )
            w = min(w for w, black in upper.edges if black == b)
            sizes.append(inverse.entries(b, w))
        (coarse_1, coarse_2), (fine_1, fine_2) = sizes
        assert abs(fine_1) == pytest.approx(abs(coarse_1), abs=0.05)
        assert abs(coarse_1 - coarse_2) / abs(fine_1 - fine_2) > 1.5


@pytest.mark.slow
class TestCouplingConvergence:
    """Two-mesh convergence of the couplings on the strip."""

    @pytest.mark.parametrize("model", [Model.FOLDED, Model.SHIFTED])
    def test_order(self, model):
        """Test every class pair converges with order at least 1.7 from H=16 to H=32."""
        reports = [
            coupling_asymptotic_check(
                build_temperleyan(build_symmetric_domain(strip(height, 2 * math.pi))),
                strip_kernel(),
                STRIP_COUPLING_PAIRS,
                model=model,
            )
            for height in (16, 32)
        ]
        orders = convergence_order(*reports)
        assert min(orders.values()) >= MIN_COUPLING_ORDER
        assert max(report.green_identity_error for report in reports) < 1e-9
