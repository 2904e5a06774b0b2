"""Shared heavy samples and the acceptance-criterion recorder.

Session-scoped fixtures hold the expensive computations (128^3 samples,
battery residual ladders, the 64^3 scans of the unit-sphere map) so the
acceptance tests and the module tests reuse a single evaluation.
"""
import numpy as np
import pytest

from morreylab import (
    battery_residuals,
    bump_battery,
    fixture_coefficients,
    make_fixture,
    oscillation_scan,
    riesz_divergence_scan,
    riesz_probe_plan,
    sample_fixture,
    unbounded_average_scan,
)
from morreylab.capacity import _cover_matrix, _exact_cover, _greedy_cover
from morreylab.grid import Ball, GridSpec

_CRITERION_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def check(num, name, ok, detail):
        line = f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        _CRITERION_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in sorted(_CRITERION_LINES):
            terminalreporter.write_line("  " + line)


@pytest.fixture(scope="session")
def equator_map_64():
    """x/|x| sampled on the 64^3 unit box; origin sits at a cell corner."""
    spec = GridSpec.centered_box(3, 1.0, 64)
    return spec, sample_fixture(make_fixture("harmonic_map_sphere", 3), spec)


@pytest.fixture(scope="session")
def equator_map_128():
    spec = GridSpec.centered_box(3, 1.0, 128)
    return spec, sample_fixture(make_fixture("harmonic_map_sphere", 3), spec)


@pytest.fixture(scope="session")
def equator_scans(equator_map_64):
    """Oscillation + average profiles on the dyadic ladder 16h .. 2h."""
    spec, u = equator_map_64
    radii = tuple(k * spec.h for k in (16, 8, 4, 2))
    return oscillation_scan(u, 2.0, radii), unbounded_average_scan(u, radii)


@pytest.fixture(scope="session")
def equator_riesz(equator_map_64, equator_scans):
    """Probe plan from the flagged nodes plus a two-resolution potential scan."""
    spec, u = equator_map_64
    osc, _ = equator_scans
    plan = riesz_probe_plan(spec, osc.singular_mask(), control_distances=(8.0, 16.0))
    coarse = sample_fixture(
        make_fixture("harmonic_map_sphere", 3), GridSpec.centered_box(3, 1.0, 32)
    )
    return plan, riesz_divergence_scan([coarse, u], plan.points)


@pytest.fixture(scope="session")
def residual_ladders():
    """Mean relative weak-form residuals of both verified solution families
    over the fixed 15-bump battery at cells = 32, 48, 64."""
    out = {}
    for kind in ("de_giorgi", "giusti_miranda"):
        fx = make_fixture(kind, 3)
        A = fixture_coefficients(fx)
        battery = bump_battery(3, fx.m)
        rows = []
        for cells in (32, 48, 64):
            spec = GridSpec.centered_box(3, 1.0, cells)
            rows.append((spec.h, battery_residuals(sample_fixture(fx, spec), A, battery)))
        hs, rels = zip(*rows)
        slope = float(np.polyfit(np.log(hs), np.log(rels), 1)[0])
        out[kind] = (rows, slope)
    return out


@pytest.fixture(scope="session")
def cover_battery():
    """50 seeded two-cluster covering instances with pools small enough for
    the exact branch-and-bound; yields (greedy content, exact content) rows."""
    spec = GridSpec.centered_box(3, 1.0, 48)
    coords = spec.coords()
    rng = np.random.default_rng(42)
    rows = []
    for _ in range(50):
        ctrs = rng.uniform(-0.55, 0.55, (2, 3))
        while np.linalg.norm(ctrs[0] - ctrs[1]) < 0.6:
            ctrs = rng.uniform(-0.55, 0.55, (2, 3))
        tmask = np.zeros(spec.shape, dtype=bool)
        for c in ctrs:
            tmask |= ((coords - c) ** 2).sum(axis=-1) < rng.uniform(0.08, 0.16) ** 2
        m = int(rng.integers(6, 13))
        pool = [
            Ball(ctrs[j % 2] + rng.uniform(-0.08, 0.08, 3), 2 * spec.h * 2 ** int(rng.integers(0, 3)))
            for j in range(m)
        ]
        d = float(rng.choice([1.0, 1.5, 2.0, 2.5]))
        target_idx = np.nonzero(tmask.reshape(-1))[0]
        cover = _cover_matrix(spec, target_idx, pool)
        if not cover.any(axis=0).all():
            # cap at 12 balls so the exact solver still applies
            pool = pool[:10] + [Ball(tuple(ctrs[0]), 0.28), Ball(tuple(ctrs[1]), 0.28)]
            cover = _cover_matrix(spec, target_idx, pool)
            if not cover.any(axis=0).all():
                continue
        g = _greedy_cover(pool, cover, d)
        e = _exact_cover(pool, cover, d)
        rows.append((g.content_value, e.content_value))
    return rows
