"""Grid geometry, sampling, ball averages, finite differences, and field I/O."""
import numpy as np
import pytest

from morreylab.grid import (
    Ball,
    GridError,
    GridSpec,
    ResolutionError,
    SampleError,
    ball_average,
    ball_node_mask,
    derivative,
    export_csv,
    gradient,
    jet,
    load_field,
    sample_field,
    sample_vector_field,
    save_field,
)


def norm_sq(x):
    return (x**2).sum(axis=-1)


class TestGridSpecValidation:
    def test_dimension_outside_supported_range_rejected(self):
        with pytest.raises(GridError):
            GridSpec.centered_box(5, 1.0, 16)
        with pytest.raises(GridError):
            GridSpec.centered_box(0, 1.0, 16)

    def test_non_cubic_bounds_rejected(self):
        with pytest.raises(GridError, match="cubic"):
            GridSpec(2, ((0.0, 1.0), (0.0, 2.0)), 16)

    def test_too_few_cells_rejected(self):
        with pytest.raises(GridError):
            GridSpec.centered_box(2, 1.0, 4)

    def test_ball_domain_must_fit_inside_hull(self):
        with pytest.raises(GridError, match="inside the box hull"):
            GridSpec(2, ((-1.0, 1.0), (-1.0, 1.0)), 16, kind="ball", center=(0.5, 0.0), radius=0.8)

    def test_unknown_domain_kind_rejected(self):
        with pytest.raises(GridError, match="unknown domain kind"):
            GridSpec(2, ((-1.0, 1.0), (-1.0, 1.0)), 16, kind="disk")


class TestLattice:
    def test_nodes_sit_at_cell_centers(self):
        spec = GridSpec.centered_box(3, 1.0, 32)
        x0 = spec.axis_coords(0)
        assert x0[0] == pytest.approx(-1.0 + spec.h / 2.0, abs=1e-15)
        assert x0[-1] == pytest.approx(1.0 - spec.h / 2.0, abs=1e-15)
        # the origin is a cell corner, so the nearest nodes are at h/2 per axis
        f = sample_field(spec, norm_sq)
        nearest = float(f.values.min())
        assert nearest == pytest.approx(3.0 * spec.h**2 / 4.0, rel=1e-12)

    def test_ball_domain_mask_is_strict(self):
        spec = GridSpec.centered_ball(3, 1.0, 32)
        mask = spec.mask()
        assert 0 < mask.sum() < spec.node_count
        d = np.sqrt(norm_sq(spec.coords()))
        assert (d[mask] < spec.radius).all()
        assert (d[~mask] >= spec.radius).all()

    def test_contains_ball_respects_domain_kind(self):
        box = GridSpec.centered_box(2, 1.0, 16)
        ball_dom = GridSpec.centered_ball(2, 1.0, 16)
        corner_ball = Ball((0.6, 0.6), 0.3)
        assert box.contains_ball(corner_ball)
        assert not ball_dom.contains_ball(corner_ball)
        assert ball_dom.contains_ball(Ball((0.0, 0.0), 1.0))
        assert not box.contains_ball(Ball((0.9, 0.0), 0.2))

    def test_allowed_radius_bounded_by_inradius(self):
        spec = GridSpec.centered_box(2, 1.0, 16)
        r = spec.allowed_radius()
        assert r.shape == spec.shape
        assert float(r.max()) <= spec.inradius + 1e-12
        assert float(r.min()) > 0.0


class TestSampling:
    def test_non_finite_sample_names_the_node(self):
        spec = GridSpec.centered_box(2, 1.0, 16)

        def bad(x):
            v = np.ones(x.shape[:-1])
            v[(x[..., 0] > 0) & (x[..., 1] > 0)] = np.nan
            return v

        with pytest.raises(SampleError, match="is not finite at node"):
            sample_field(spec, bad)

    def test_scalar_evaluator_with_wrong_shape_rejected(self):
        spec = GridSpec.centered_box(2, 1.0, 16)
        with pytest.raises(GridError):
            sample_field(spec, lambda x: x)  # returns (..., n), not scalar

    def test_vector_component_count_enforced(self):
        spec = GridSpec.centered_box(2, 1.0, 16)
        with pytest.raises(GridError):
            sample_vector_field(spec, lambda x: x, m=3)

    def test_ball_domain_tolerates_singularity_on_excluded_nodes(self):
        # |x - c|^{-1} blows up only outside the masked-in ball
        spec = GridSpec.centered_ball(2, 0.5, 16)
        f = sample_field(
            spec, lambda x: 1.0 / np.maximum(np.sqrt(norm_sq(x - np.array([0.45, 0.45]))), 1e-300)
        )
        assert np.isfinite(f.values[f.mask]).all()


class TestBallAverage:
    def test_average_of_inverse_norm_matches_closed_form(self):
        # mean of |x|^{-1} over B_R(0) is 3 / (2 R)
        spec = GridSpec.centered_box(3, 1.0, 64)
        f = sample_field(spec, lambda x: 1.0 / np.sqrt(norm_sq(x)))
        avg = ball_average(f, Ball((0.0, 0.0, 0.0), 0.5), p=1)
        assert avg == pytest.approx(3.0, rel=2e-2)

    def test_average_of_quadratic_matches_closed_form(self):
        # mean of |x|^2 over B_R(0) is 3 R^2 / 5
        spec = GridSpec.centered_box(3, 1.2, 32)
        f = sample_field(spec, norm_sq)
        avg = ball_average(f, Ball((0.0, 0.0, 0.0), 1.0), p=1)
        assert avg == pytest.approx(0.6, rel=2e-2)

    def test_average_error_shrinks_under_refinement(self):
        errs = []
        for cells in (16, 32, 64):
            spec = GridSpec.centered_box(3, 1.0, cells)
            f = sample_field(spec, norm_sq)
            avg = ball_average(f, Ball((0.0, 0.0, 0.0), 0.5), p=1)
            errs.append(abs(avg - 0.15))
        assert errs[0] > errs[1] > errs[2]
        hs = [2.0 / c for c in (16, 32, 64)]
        slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        assert slope >= 1.0

    def test_radius_below_two_cells_rejected(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        f = sample_field(spec, norm_sq)
        with pytest.raises(ResolutionError):
            ball_average(f, Ball((0.0, 0.0, 0.0), 1.5 * spec.h), p=1)

    def test_ball_leaving_domain_rejected(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        f = sample_field(spec, norm_sq)
        with pytest.raises(GridError):
            ball_average(f, Ball((0.9, 0.0, 0.0), 0.3), p=1)

    def test_node_mask_agrees_with_distance(self):
        spec = GridSpec.centered_box(2, 1.0, 16)
        ball = Ball((0.1, -0.2), 0.4)
        mask = ball_node_mask(spec, ball)
        d = np.sqrt(norm_sq(spec.coords() - np.array(ball.center)))
        assert np.array_equal(mask, d < ball.radius)


class TestDerivatives:
    def test_first_derivative_is_second_order_in_the_interior(self):
        errs = []
        for cells in (32, 64):
            spec = GridSpec.centered_box(1, 1.0, cells)
            f = sample_field(spec, lambda x: np.sin(np.pi * x[..., 0]))
            d = derivative(f, (1,))
            exact = np.pi * np.cos(np.pi * spec.coords()[..., 0])
            inner = ~d.extrapolated
            errs.append(float(np.abs(d.values - exact)[inner].max()))
        ratio = errs[0] / errs[1]
        assert 3.5 <= ratio <= 4.5

    def test_mixed_partials_commute(self):
        spec = GridSpec.centered_box(2, 1.0, 32)
        f = sample_field(spec, lambda x: np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1]))
        a = derivative(derivative(f, (1, 0)), (0, 1))
        b = derivative(derivative(f, (0, 1)), (1, 0))
        assert float(np.abs(a.values - b.values).max()) <= 1e-12

    def test_gradient_energy_of_sphere_map_matches_closed_form(self):
        # the unit-sphere projection has squared gradient magnitude 2 / |x|^2
        from morreylab import make_fixture, sample_fixture

        spec = GridSpec.centered_box(3, 1.0, 32)
        u = sample_fixture(make_fixture("harmonic_map_sphere", 3), spec)
        J = jet(u, 1)
        tn2 = J.top_norm() ** 2
        r2 = norm_sq(spec.coords())
        far = (np.sqrt(r2) >= 4 * spec.h) & ~J.extrapolated
        rel = np.abs(tn2 * r2 / 2.0 - 1.0)
        assert float(rel[far].max()) <= 5e-2

    def test_gradient_returns_array_and_edge_flag(self):
        spec = GridSpec.centered_box(2, 1.0, 16)
        u = sample_vector_field(spec, lambda x: np.stack([x[..., 0], 2 * x[..., 1]], axis=-1))
        g, flagged = gradient(u)
        assert g.shape == spec.shape + (2, 2)
        assert flagged.dtype == bool
        inner = ~flagged
        assert np.allclose(g[inner][:, 0, 0], 1.0, atol=1e-12)
        assert np.allclose(g[inner][:, 1, 1], 2.0, atol=1e-12)
        assert np.allclose(g[inner][:, 0, 1], 0.0, atol=1e-12)


class TestFieldIO:
    def test_round_trip_preserves_values_and_grid(self, tmp_path):
        spec = GridSpec.centered_ball(2, 1.0, 16)
        f = sample_field(spec, norm_sq)
        path = tmp_path / "field.dat"
        save_field(f, path)
        g = load_field(path)
        assert g.spec == spec
        assert np.array_equal(g.values, f.values)
        assert np.array_equal(g.mask, f.mask)

    def test_save_is_byte_deterministic(self, tmp_path):
        spec = GridSpec.centered_box(2, 1.0, 16)
        f = sample_field(spec, norm_sq)
        p1, p2 = tmp_path / "a.dat", tmp_path / "b.dat"
        save_field(f, p1)
        save_field(f, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert (tmp_path / "a.dat.json").read_bytes() == (tmp_path / "b.dat.json").read_bytes()

    def test_csv_export_is_deterministic_with_headers(self, tmp_path):
        spec = GridSpec.centered_box(2, 1.0, 16)
        f = sample_field(spec, norm_sq)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        export_csv(f, p1)
        export_csv(f, p2)
        text = p1.read_text()
        assert text.splitlines()[0] == "x1,x2,value"
        assert p1.read_bytes() == p2.read_bytes()
