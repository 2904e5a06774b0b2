"""Model solution families: closed-form values, exact gradients, coefficient
structure (symmetry, coercivity, growth), and the seeded structure battery."""
import math

import numpy as np
import pytest

from morreylab.fixtures import (
    CoefficientField,
    FixtureError,
    SingularEvaluationError,
    de_giorgi_gamma,
    fixture_coefficients,
    fixture_gradient,
    fixture_solution,
    identity_coefficients,
    make_fixture,
    structure_battery,
)
from morreylab.grid import GridSpec
from morreylab import sample_fixture
from morreylab.weak_form import bump_battery, structure_check

ALL_KINDS = [
    ("de_giorgi", 3, {}),
    ("giusti_miranda", 3, {}),
    ("koshelev", 3, {}),
    ("harmonic_map_sphere", 3, {}),
    ("split_harmonic_map", 4, {}),
    ("morrey_test", 3, dict(lam=1.5, p=2.0)),
    ("gaussian", 3, {}),
    ("affine", 3, {}),
    ("quadratic", 3, {}),
]


class TestConstruction:
    def test_unknown_kind_rejected(self):
        with pytest.raises(FixtureError, match="unknown fixture kind"):
            make_fixture("mystery", 3)

    @pytest.mark.parametrize(
        "kind,n",
        [
            ("de_giorgi", 1),
            ("giusti_miranda", 2),
            ("koshelev", 2),
            ("harmonic_map_sphere", 1),
            ("split_harmonic_map", 3),
        ],
    )
    def test_dimension_guards(self, kind, n):
        with pytest.raises(FixtureError):
            make_fixture(kind, n)

    def test_flat_profile_exponent_window(self):
        for bad in (dict(lam=0.0, p=2.0), dict(lam=3.0, p=2.0), dict(lam=1.0, p=0.5)):
            with pytest.raises(FixtureError):
                make_fixture("morrey_test", 3, **bad)

    def test_power_decay_exponent_closed_form(self):
        assert de_giorgi_gamma(1) == 0.0
        for n in (2, 3, 4):
            g = de_giorgi_gamma(n)
            assert 0.0 < g < n / 2.0
        assert de_giorgi_gamma(3) == pytest.approx(1.5 * (1.0 - 1.0 / math.sqrt(17.0)), rel=1e-14)

    def test_refined_coefficient_constants(self):
        fx = make_fixture("koshelev", 3)
        assert fx.param("c") == pytest.approx(0.6389431042462725, rel=1e-12)
        assert fx.param("d") == pytest.approx(2.2040276843195596, rel=1e-12)

    def test_affine_fixture_is_seeded_and_reproducible(self):
        a, b = make_fixture("affine", 3), make_fixture("affine", 3)
        assert a.params == b.params

    def test_singular_locus_labels(self):
        assert make_fixture("harmonic_map_sphere", 3).singular_locus == ("point", (0.0, 0.0, 0.0))
        assert make_fixture("split_harmonic_map", 4).singular_locus == ("line", 3)
        assert make_fixture("gaussian", 3).singular_locus is None
        assert make_fixture("affine", 3).singular_locus is None


class TestEvaluation:
    @pytest.mark.parametrize("kind,n,kw", ALL_KINDS)
    def test_gradient_matches_finite_differences(self, kind, n, kw):
        fx = make_fixture(kind, n, **kw)
        rng = np.random.default_rng(11)
        x = rng.uniform(0.2, 0.7, size=(6, n)) * rng.choice([-1.0, 1.0], size=(6, n))
        grad = fixture_gradient(fx, x)
        assert grad.shape == (6, n, fx.m)
        step = 1e-6
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            num = (fixture_solution(fx, x + e) - fixture_solution(fx, x - e)) / (2 * step)
            assert np.allclose(num, grad[:, i, :], rtol=1e-5, atol=1e-7)

    @pytest.mark.parametrize("kind,n", [("harmonic_map_sphere", 3), ("giusti_miranda", 3),
                                        ("koshelev", 3), ("split_harmonic_map", 4)])
    def test_unit_sphere_range(self, kind, n):
        fx = make_fixture(kind, n)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(50, n))
        u = fixture_solution(fx, x)
        assert np.allclose((u**2).sum(axis=-1), 1.0, atol=1e-12)

    def test_evaluation_on_the_locus_rejected(self):
        fx = make_fixture("harmonic_map_sphere", 3)
        with pytest.raises(SingularEvaluationError, match="singular locus"):
            fixture_solution(fx, np.zeros((1, 3)))
        fx4 = make_fixture("split_harmonic_map", 4)
        with pytest.raises(SingularEvaluationError):
            fixture_solution(fx4, np.array([[0.0, 0.0, 0.0, 0.7]]))

    def test_grid_dimension_mismatch_rejected(self):
        with pytest.raises(FixtureError):
            sample_fixture(make_fixture("harmonic_map_sphere", 3), GridSpec.centered_box(2, 1.0, 16))


class TestCoefficients:
    def test_tensor_symmetry_is_exact(self):
        fx = make_fixture("de_giorgi", 3)
        A = fixture_coefficients(fx)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(7, 3))
        T = A.tensor(x, fixture_solution(fx, x))
        assert np.array_equal(T, T.transpose(0, 3, 4, 1, 2))

    def test_energy_dominates_unit_ellipticity(self):
        fx = make_fixture("giusti_miranda", 3)
        A = fixture_coefficients(fx)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(30, 3))
        u = fixture_solution(fx, x)
        xi = rng.normal(size=(30, 3, 3))
        assert (A.energy(x, u, xi) >= (xi**2).sum(axis=(-2, -1)) - 1e-12).all()

    def test_entry_bound_for_position_coefficients(self):
        A = fixture_coefficients(make_fixture("de_giorgi", 3))
        assert A.c == 1.0 and A.d == 3.0
        assert A.entry_bound == 17.0

    def test_position_direction_rejected_on_locus(self):
        A = fixture_coefficients(make_fixture("de_giorgi", 3))
        with pytest.raises(SingularEvaluationError):
            A.directions(np.zeros((1, 3)), np.zeros((1, 3)))

    def test_identity_coefficients_touch_nothing(self):
        A = identity_coefficients(3)
        rng = np.random.default_rng(6)
        x = rng.normal(size=(10, 3))
        xi = rng.normal(size=(10, 3, 3))
        assert np.array_equal(A.flux(x, x, xi), xi)
        assert np.allclose(A.energy(x, x, xi), (xi**2).sum(axis=(-2, -1)), rtol=1e-15)

    def test_smooth_kinds_get_identity_others_refuse(self):
        assert fixture_coefficients(make_fixture("gaussian", 3)).name == "identity"
        with pytest.raises(FixtureError, match="no coefficient field"):
            fixture_coefficients(make_fixture("morrey_test", 3, lam=1.0, p=2.0))


class TestStructureBattery:
    def test_identity_constants_are_exactly_one(self):
        fx = make_fixture("harmonic_map_sphere", 3)
        A = fixture_coefficients(fx)
        rep = structure_check(A, structure_battery(fx, A))
        assert rep.a0_emp == 1.0
        assert rep.M_emp == 1.0
        assert rep.ok

    def test_declared_bounds_hold_for_position_coefficients(self):
        fx = make_fixture("de_giorgi", 3)
        A = fixture_coefficients(fx)
        rep = structure_check(A, structure_battery(fx, A))
        assert rep.a0_emp >= 1.0 - 1e-9
        assert rep.M_emp <= 17.0 + 1e-9
        assert rep.ok
        assert rep.samples > 0

    def test_overdeclared_coercivity_is_flagged(self):
        fx = make_fixture("harmonic_map_sphere", 3)
        A = fixture_coefficients(fx)
        rep = structure_check(A, structure_battery(fx, A), a0_declared=2.0)
        assert not rep.ok
        assert rep.violations[0][0] == "coercivity"


def test_bump_battery_is_reproducible_with_disjoint_supports():
    b1 = bump_battery(3, 3)
    b2 = bump_battery(3, 3)
    assert len(b1) == 15
    assert [phi.center for phi in b1] == [phi.center for phi in b2]
    for phi in b1:
        ball = phi.support_ball
        r = math.sqrt(sum(c * c for c in ball.center))
        assert r + 0.0 <= 0.95  # stays away from the unit-box boundary
        assert r - ball.radius > 0.0  # and away from the origin
