import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropylab import collapse
from entropylab.geometry import AnalyticDomain, PlanarCurve


class TestBallIntersectionPolyline:
    def test_disk_fully_inside(self):
        c = PlanarCurve.circle(1.0, 4096)
        v, err = collapse.ball_intersection_volume(c, (0.0, 0.0), 0.5)
        assert err == 0.0
        assert v == pytest.approx(np.pi * 0.25, abs=1e-6)

    def test_ball_contains_polygon(self):
        c = PlanarCurve.circle(1.0, 4096)
        v, _ = collapse.ball_intersection_volume(c, (0.0, 0.0), 3.0)
        assert v == pytest.approx(c.enclosed_area(), rel=1e-12)

    def test_lens_area(self):
        # unit disks with centers distance 1 apart: area 2 pi/3 - sqrt(3)/2
        c = PlanarCurve.circle(1.0, 4096)
        v, _ = collapse.ball_intersection_volume(c, (1.0, 0.0), 1.0)
        assert v == pytest.approx(2 * np.pi / 3 - np.sqrt(3) / 2, abs=1e-5)

    def test_disjoint_is_zero(self):
        c = PlanarCurve.circle(1.0, 512)
        v, _ = collapse.ball_intersection_volume(c, (10.0, 0.0), 1.0)
        assert v < 1e-12

    @given(
        cx=st.floats(-2, 2),
        cy=st.floats(-2, 2),
        r=st.floats(0.1, 3),
    )
    @settings(max_examples=50, deadline=None)
    def test_clip_area_bounds(self, cx, cy, r):
        c = PlanarCurve.circle(1.0, 256)
        v, _ = collapse.ball_intersection_volume(c, (cx, cy), r)
        assert -1e-12 <= v <= min(np.pi * r**2, c.enclosed_area()) + 1e-9


class TestBallIntersectionAnalytic:
    def test_slab_matches_closed_form(self):
        # area of B_r n {|y| < d}: 2 (r^2 asin(d/r) + d sqrt(r^2 - d^2))
        slab = AnalyticDomain.slab(1.0, dim=2)
        r = 4.0
        exact = 2.0 * (r**2 * np.arcsin(1.0 / r) + np.sqrt(r**2 - 1.0))
        v, err = collapse.ball_intersection_volume(slab, (0.0, 0.0), r, budget=10**5)
        assert v == pytest.approx(exact, rel=1e-3)
        assert err < 0.05 * exact

    def test_deterministic_in_seed(self):
        slab = AnalyticDomain.slab(1.0, dim=2)
        v1, _ = collapse.ball_intersection_volume(slab, (0.0, 0.0), 2.0, budget=10**4)
        v2, _ = collapse.ball_intersection_volume(slab, (0.0, 0.0), 2.0, budget=10**4)
        assert v1 == v2

    def test_empty_box_short_circuits(self):
        slab = AnalyticDomain.slab(1.0, dim=2)
        v, err = collapse.ball_intersection_volume(slab, (0.0, 10.0), 1.0)
        assert v == 0.0 and err == 0.0

    def test_budget_validation(self):
        slab = AnalyticDomain.slab(1.0, dim=2)
        with pytest.raises(collapse.CollapseError):
            collapse.ball_intersection_volume(slab, (0.0, 0.0), 1.0, budget=100)

    def test_radius_validation(self):
        with pytest.raises(collapse.CollapseError):
            collapse.ball_intersection_volume(PlanarCurve.circle(1.0, 64), (0, 0), 0.0)

    def test_row_seed_distinguishes_rows(self):
        s1 = collapse._row_seed((0.0, 0.0), 1.0, 0)
        s2 = collapse._row_seed((0.0, 0.0), 2.0, 0)
        s3 = collapse._row_seed((0.0, 0.0), 1.0, 0)
        assert s1 != s2
        assert s1 == s3


class TestBoundaryIntegral:
    def test_zero_spec(self):
        slab = AnalyticDomain.slab(1.0, dim=2)
        assert collapse.boundary_beta_integral(slab, (0.0, 0.0), 5.0, "zero") == 0.0

    def test_slab_flat_boundary_curvature(self):
        slab = AnalyticDomain.slab(1.0, dim=2)
        out = collapse.boundary_beta_integral(slab, (0.0, 0.0), 5.0, "mean_curvature")
        assert out == 0.0

    def test_polyline_circle_curvature(self):
        # int |H| ds over the whole unit circle = 2 pi
        c = PlanarCurve.circle(1.0, 2048)
        out = collapse.boundary_beta_integral(c, (0.0, 0.0), 3.0, "mean_curvature")
        assert out == pytest.approx(2 * np.pi, rel=1e-4)

    def test_grim_reaper_h_ds_is_x_measure(self):
        # H ds = dx1 on the grim reaper, so the full-curve integral is pi
        gr = AnalyticDomain.grim_reaper_2d()
        small = collapse.boundary_beta_integral(gr, (0.0, 0.0), 0.5, "mean_curvature")
        large = collapse.boundary_beta_integral(gr, (0.0, 0.0), 50.0, "mean_curvature")
        assert 0.0 < small < large <= np.pi + 1e-9
        assert large == pytest.approx(np.pi, abs=1e-2)

    def test_sphere_fully_inside(self):
        ball = AnalyticDomain.ball(2.0, dim=3)
        out = collapse.boundary_beta_integral(ball, (0.0, 0.0, 0.0), 5.0, "mean_curvature")
        # H = 1/2 per principal curvature pair: (dim-1)/R = 1, area 16 pi
        assert out == pytest.approx(16 * np.pi, rel=1e-12)

    def test_partial_sphere_not_implemented(self):
        ball = AnalyticDomain.ball(2.0, dim=3)
        with pytest.raises(collapse.CollapseError):
            collapse.boundary_beta_integral(ball, (0.0, 0.0, 0.0), 1.0, "mean_curvature")


class TestRatioScan:
    def test_disk_ratio_saturates_and_decays(self):
        c = PlanarCurve.circle(1.0, 2048)
        radii = [0.5, 1.0, 2.0, 4.0, 8.0]
        scan = collapse.ratio_scan(c, [(0.0, 0.0)], radii)
        ratios = scan.column("ratio")
        assert ratios[0] == pytest.approx(np.pi, rel=1e-4)
        assert ratios[-1] == pytest.approx(np.pi / 64, rel=1e-4)
        assert scan.collapsed_trend
        assert scan.dim == 2

    def test_empty_half_ball_flagged(self):
        c = PlanarCurve.circle(1.0, 512)
        scan = collapse.ratio_scan(c, [(10.0, 0.0)], [1.0, 2.0, 4.0])
        assert scan.rows[0]["empty_half_ball"]
        assert scan.rows[0]["c1"] == np.inf
        assert not scan.collapsed_trend

    def test_columns_present(self):
        c = PlanarCurve.circle(1.0, 512)
        scan = collapse.ratio_scan(c, [(0.0, 0.0)], [1.0, 2.0, 4.0])
        for name in collapse.RatioScan.COLUMNS:
            assert len(scan.column(name)) == 3

    def test_input_validation(self):
        c = PlanarCurve.circle(1.0, 64)
        with pytest.raises(collapse.CollapseError):
            collapse.ratio_scan(c, [], [1.0])
        with pytest.raises(collapse.CollapseError):
            collapse.ratio_scan(c, [(0, 0), (1, 0)], [1.0, 2.0, 3.0])


class TestShrinkingSphere:
    def test_reference_value(self):
        # n = 2, s = -1/4, r = 2: rho = 1, ratio = n(n+1) r^2/rho^2 = 24
        assert collapse.shrinking_sphere_ratio(2, -0.25, 2.0) == pytest.approx(24.0)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_rate_constant(self, n):
        # ratio = -(n+1) r^2 / (2 s) once B_{r/2} contains the sphere
        s, r = -0.01, 2.0
        out = collapse.shrinking_sphere_ratio(n, s, r)
        assert out == pytest.approx(-(n + 1) * r**2 / (2 * s), rel=1e-12)

    def test_nonnegative_time_rejected(self):
        with pytest.raises(collapse.CollapseError):
            collapse.shrinking_sphere_ratio(2, 0.0, 1.0)

    def test_ball_missing_sphere(self):
        assert collapse.shrinking_sphere_ratio(2, -10.0, 0.1) == 0.0
