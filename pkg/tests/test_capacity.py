"""Capacity solver invariants, Hausdorff-content covers, box dimensions, and
the content-versus-capacity comparison in both exponent regimes."""
import math

import numpy as np
import pytest

from morreylab.analysis import BallFamily, MorreyParams, ParameterError
from morreylab.capacity import (
    CapacityConfigError,
    CapacityProblem,
    FitError,
    ball_capacity_scaling,
    box_dimension,
    hausdorff_content,
    isocapacitary_check,
    morrey_capacity,
)
from morreylab.grid import Ball, GridSpec, ball_node_mask


def single_node_mask(spec, point=(0.0, 0.0, 0.0)):
    coords = spec.coords().reshape(-1, spec.n)
    mask = np.zeros(spec.shape, dtype=bool)
    mask.reshape(-1)[int(np.argmin(((coords - np.asarray(point)) ** 2).sum(axis=1)))] = True
    return mask


def cap_of(spec, mask, params, r0=1.0):
    fam = BallFamily.dyadic(spec, r0=r0)
    return morrey_capacity(CapacityProblem(spec, mask, params, fam))


class TestProblemValidation:
    def test_mask_shape_must_match_grid(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        with pytest.raises(CapacityConfigError, match="shape"):
            CapacityProblem(spec, np.zeros((8, 8, 8), bool), MorreyParams(3, 2.0, 2.5, alpha=1.0),
                            BallFamily.dyadic(spec, r0=0.5))

    def test_missing_riesz_order_rejected(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        with pytest.raises(CapacityConfigError, match="alpha"):
            CapacityProblem(spec, np.zeros(spec.shape, bool), MorreyParams(3, 2.0, 2.5),
                            BallFamily.dyadic(spec, r0=0.5))

    def test_family_from_other_grid_rejected(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        other = GridSpec.centered_box(3, 1.0, 32)
        with pytest.raises(CapacityConfigError, match="different grid"):
            CapacityProblem(spec, np.zeros(spec.shape, bool), MorreyParams(3, 2.0, 2.5, alpha=1.0),
                            BallFamily.dyadic(other, r0=0.5))

    def test_regime_flag_marks_vanishing_scaling(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        fam = BallFamily.dyadic(spec, r0=0.5)
        mask = single_node_mask(spec)
        assert CapacityProblem(spec, mask, MorreyParams(3, 2.0, 1.5, alpha=1.0), fam).regime_flag
        assert not CapacityProblem(spec, mask, MorreyParams(3, 2.0, 2.5, alpha=1.0), fam).regime_flag


class TestCapacitySolver:
    def test_empty_target_has_zero_capacity(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        res = cap_of(spec, np.zeros(spec.shape, bool), MorreyParams(3, 2.0, 2.5, alpha=1.0))
        assert res.value == 0.0
        assert res.start_label == "empty"
        assert res.feasibility_margin == math.inf

    def test_point_capacity_vanishes_under_refinement(self):
        # gap lam - alpha p = 2, so halving h should at least halve the value
        params = MorreyParams(3, 2.0, 3.0, alpha=0.5)
        values = []
        for cells in (16, 32, 64):
            spec = GridSpec.centered_box(3, 1.0, cells)
            values.append(cap_of(spec, single_node_mask(spec), params).value)
        assert values[0] > values[1] > values[2] > 0.0
        assert values[0] / values[1] >= 2.0
        assert values[1] / values[2] >= 2.0

    def test_certificate_is_feasible_and_history_improves(self):
        spec = GridSpec.centered_box(3, 1.0, 24)
        res = cap_of(spec, ball_node_mask(spec, Ball((0.0, 0.0, 0.0), 0.26)),
                     MorreyParams(3, 2.0, 2.5, alpha=1.0))
        assert res.feasibility_margin == pytest.approx(1.0, abs=1e-6)
        assert res.history[-1] <= res.history[0]
        assert res.value == res.history[-1]
        assert res.start_label in ("wide_indicator", "power_decay", "tight_indicator")

    def test_monotone_in_the_target_set(self):
        spec = GridSpec.centered_box(3, 1.0, 24)
        params = MorreyParams(3, 2.0, 2.5, alpha=1.0)
        small = ball_node_mask(spec, Ball((0.0, 0.0, 0.0), 0.26))
        big = ball_node_mask(spec, Ball((0.0, 0.0, 0.0), 0.51))
        assert (small & ~big).sum() == 0
        c_small = cap_of(spec, small, params).value
        c_big = cap_of(spec, big, params).value
        assert 0.0 < c_small <= c_big * (1.0 + 1e-9)

    def test_subadditive_over_disjoint_pieces(self):
        spec = GridSpec.centered_box(3, 1.0, 24)
        params = MorreyParams(3, 2.0, 2.5, alpha=1.0)
        a = ball_node_mask(spec, Ball((-0.3, 0.0, 0.0), 0.15))
        b = ball_node_mask(spec, Ball((0.3, 0.0, 0.0), 0.15))
        c_ab = cap_of(spec, a | b, params).value
        assert c_ab <= (cap_of(spec, a, params).value + cap_of(spec, b, params).value) * (1 + 1e-9)

    def test_scaling_fit_guards(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        with pytest.raises(FitError, match="at least 3 radii"):
            ball_capacity_scaling(spec, MorreyParams(3, 2.0, 2.5, alpha=1.0), (0.5, 0.25))
        with pytest.raises(ParameterError, match="1 < p <= lam/alpha"):
            ball_capacity_scaling(spec, MorreyParams(3, 2.0, 1.5, alpha=1.0), (0.5, 0.25, 0.125))


class TestHausdorffContent:
    def test_single_node_costs_one_smallest_ball(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        sol = hausdorff_content(spec, single_node_mask(spec), 1.5)
        assert sol.content_value == pytest.approx((2.0 * spec.h) ** 1.5, rel=1e-12)
        assert len(sol.balls) == 1

    def test_empty_target_has_zero_content(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        sol = hausdorff_content(spec, np.zeros(spec.shape, bool), 1.0)
        assert sol.content_value == 0.0
        assert sol.method == "empty"

    def test_ball_content_bracketed_by_single_cover(self):
        # with the exact covering ball available, content lands in [r^n / 2, r^n]
        spec = GridSpec.centered_box(3, 1.0, 48)
        r = 1.0 / 3.0
        target = ball_node_mask(spec, Ball((0.0, 0.0, 0.0), r))
        pool = [Ball((0.0, 0.0, 0.0), r), Ball((0.0, 0.0, 0.0), r / 2.0)]
        pool += [
            Ball(tuple(c), 2 * spec.h)
            for c in spec.coords()[target][::6]
        ]
        sol = hausdorff_content(spec, target, 3.0, pool=pool)
        assert r**3 / 2.0 <= sol.content_value <= r**3 * (1 + 1e-12)

    def test_uncoverable_pool_is_an_error(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        pool = [Ball((0.5, 0.5, 0.5), 2 * spec.h)]
        with pytest.raises(CapacityConfigError, match="does not cover"):
            hausdorff_content(spec, single_node_mask(spec), 1.0, pool=pool)

    def test_dimension_parameter_range(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        for d in (0.0, 3.5):
            with pytest.raises(ParameterError, match="0 < d <= n"):
                hausdorff_content(spec, single_node_mask(spec), d)

    def test_greedy_stays_near_exact_on_seeded_pools(self, cover_battery):
        assert len(cover_battery) == 50
        for greedy_val, exact_val in cover_battery:
            assert greedy_val <= 1.4 * exact_val


class TestBoxDimension:
    def test_single_node_is_zero_dimensional(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        assert abs(box_dimension(spec, single_node_mask(spec))) <= 1e-12

    def test_axis_line_is_one_dimensional_in_four_dimensions(self):
        spec = GridSpec.centered_box(4, 1.0, 16)
        mask = np.zeros(spec.shape, dtype=bool)
        mask[:, 8, 8, 8] = True
        assert box_dimension(spec, mask) == pytest.approx(1.0, abs=0.05)

    def test_full_grid_has_ambient_dimension(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        mask = np.ones(spec.shape, dtype=bool)
        assert box_dimension(spec, mask) == pytest.approx(3.0, abs=0.05)

    def test_too_few_scales_rejected(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        mask = single_node_mask(spec)
        with pytest.raises(FitError, match=">= 3 scales"):
            box_dimension(spec, mask, scales=[2 * spec.h, 4 * spec.h])
        with pytest.raises(FitError, match=">= 3 scales"):
            box_dimension(spec, mask, scales=[0.5 * spec.h, spec.h, 4 * spec.h])

    def test_empty_set_rejected(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        with pytest.raises(FitError, match="empty set"):
            box_dimension(spec, np.zeros(spec.shape, bool))


class TestIsocapacitary:
    def test_regime_violation_rejected(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        targets = [("x", single_node_mask(spec))]
        with pytest.raises(CapacityConfigError, match="isocapacitary regime violated"):
            isocapacitary_check(spec, targets, MorreyParams(3, 2.0, 2.0, alpha=1.5), d=1.0, q=0.5)

    def test_exponent_windows_per_case(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        targets = [("x", single_node_mask(spec))]
        with pytest.raises(CapacityConfigError, match=r"case \(i\) needs"):
            isocapacitary_check(spec, targets, MorreyParams(3, 2.0, 2.5, alpha=1.0), d=1.0, q=4.0)
        with pytest.raises(CapacityConfigError, match=r"case \(ii\) needs"):
            isocapacitary_check(spec, targets, MorreyParams(3, 2.0, 2.0, alpha=1.0), d=1.0, q=1.5)

    def test_all_empty_targets_report_vacuous(self):
        spec = GridSpec.centered_box(3, 1.0, 16)
        empty = np.zeros(spec.shape, bool)
        rep = isocapacitary_check(
            spec, [("a", empty), ("b", empty)], MorreyParams(3, 2.0, 2.5, alpha=1.0), d=1.0, q=3.0
        )
        assert rep.vacuous
        assert rep.rows == []

    def test_ratio_bound_on_concentric_balls(self):
        spec = GridSpec.centered_box(3, 1.0, 24)
        targets = [
            (f"r={r}", ball_node_mask(spec, Ball((0.0, 0.0, 0.0), r))) for r in (0.5, 0.35, 0.25)
        ]
        rep = isocapacitary_check(spec, targets, MorreyParams(3, 2.0, 2.5, alpha=1.0), d=1.0, q=3.0)
        assert rep.case == "i"
        assert len(rep.rows) == 3
        assert rep.bound_ratio <= 4.0

    def test_borderline_case_decays_with_positive_witness(self):
        spec = GridSpec.centered_box(3, 1.0, 48)
        targets = [
            (f"r={r}", ball_node_mask(spec, Ball((0.0, 0.0, 0.0), r))) for r in (0.5, 0.25, 0.125)
        ]
        rep = isocapacitary_check(spec, targets, MorreyParams(3, 2.0, 2.0, alpha=1.0), d=1.0, q=0.5)
        assert rep.case == "ii"
        assert rep.decreasing
        assert rep.bound_witness is not None and rep.bound_witness > 0.0
        contents = [row[1] for row in rep.rows]
        assert contents[0] > contents[1] > contents[2]
