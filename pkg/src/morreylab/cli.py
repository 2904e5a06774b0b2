"""Batch front end: run named experiments and emit plot-ready artifacts.

Each invocation runs one experiment described by a plain-text config file
(``key = value`` lines under ``[section]`` headers) and writes its results
under ``--out``: a ``summary.json`` with sorted keys, per-operation CSV
tables, and field binaries in the grid layout.  Nothing in the artifacts
depends on wall-clock time or worker count, so identical config + seed
reproduce byte-identical output.

Exit codes: 0 all assertions pass, 1 an assertion failed (the message
names it), 2 the configuration is invalid.
"""

import argparse
import configparser
import csv
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .analysis import (
    BallFamily,
    MorreyParams,
    ParameterError,
    morrey_norm,
    representation_reconstruct,
    riesz_potential,
)
from .capacity import (
    CapacityConfigError,
    FitError,
    SolverOptions,
    ball_capacity_scaling,
    hausdorff_content,
    isocapacitary_check,
)
from .fixtures import (
    FixtureError,
    fixture_coefficients,
    identity_coefficients,
    make_fixture,
    sample_fixture,
    structure_battery,
)
from .grid import Ball, GridError, GridSpec, VectorField, ball_node_mask, save_field, sphere_surface
from .singular import (
    ScanError,
    ScanThresholds,
    classify_and_report,
    oscillation_scan,
    riesz_divergence_scan,
    riesz_probe_plan,
    unbounded_average_scan,
)
from .weak_form import (
    TestFunctionError,
    battery_residuals,
    bump_battery,
    caccioppoli_check,
    structure_check,
)

__all__ = ["ExperimentConfig", "AssertionFailure", "run", "main"]

CONFIG_ERRORS = (
    configparser.Error,
    CapacityConfigError,
    FitError,
    FixtureError,
    GridError,
    ParameterError,
    ScanError,
    TestFunctionError,
    OSError,
)


class CliConfigError(ValueError):
    pass


class AssertionFailure(Exception):
    """A quantitative check failed; ``criterion`` names it for the exit message."""

    def __init__(self, criterion, message):
        super().__init__(message)
        self.criterion = criterion


# -- configuration ------------------------------------------------------------

_SECTION_KEYS = {
    "experiment": {"command", "fixture", "seed", "coefficients", "p_hat", "k",
                   "bumps", "order", "target", "length", "centers", "max_centers"},
    "fixture": None,  # free-form kwargs for make_fixture
    "grid": {"n", "cells", "half", "kind"},
    "morrey": {"p", "lam", "alpha", "mu", "q", "d"},
    "ladders": {"radii", "resolutions", "eps", "t", "control_distances", "scales"},
    "solver": {"max_iterations", "tolerance", "probe_limit", "first_step_fraction"},
    "thresholds": {f.name for f in fields(ScanThresholds)},
    "expect": {"slope", "slope_tol", "residual_tol", "bound", "dimension",
               "dimension_tol", "constant_rel_tol", "l2_tol", "content",
               "content_tol", "center_value", "center_tol", "norm_value",
               "norm_tol"},
    "output": {"dir"},
}


def _tokens(s):
    return [tok for tok in re.split(r"[,\s]+", s.strip()) if tok]


def _floats(s):
    return tuple(float(tok) for tok in _tokens(s))


def _ints(s):
    return tuple(int(tok) for tok in _tokens(s))


def _auto(s):
    """int if it looks like one, else float, else the bare string."""
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            continue
    return s


@dataclass
class ExperimentConfig:
    """One experiment: a command plus every knob it may need.

    Field groups mirror the config sections; CLI flags override the file.
    """

    command: str = None
    fixture: str = None
    fixture_kwargs: dict = field(default_factory=dict)
    seed: int = 42
    threads: int = 1
    out: Path = Path("out")
    extras: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    morrey: dict = field(default_factory=dict)
    ladders: dict = field(default_factory=dict)
    solver: SolverOptions = field(default_factory=SolverOptions)
    thresholds: ScanThresholds = field(default_factory=ScanThresholds)
    expect: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path=None):
        cfg = cls()
        if path is None:
            return cfg
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
        for section in cp.sections():
            if section not in _SECTION_KEYS:
                raise CliConfigError(f"unknown config section [{section}]")
            allowed = _SECTION_KEYS[section]
            for key, raw in cp.items(section):
                if allowed is not None and key not in allowed:
                    raise CliConfigError(f"unknown key {key!r} in section [{section}]")
                cfg._apply(section, key, raw)
        return cfg

    def _apply(self, section, key, raw):
        if section == "experiment":
            if key == "command":
                self.command = raw.strip()
            elif key == "fixture":
                self.fixture = raw.strip()
            elif key in ("seed", "bumps", "order", "k", "max_centers"):
                self.extras[key] = int(raw)
                if key == "seed":
                    self.seed = int(raw)
            elif key in ("p_hat", "length"):
                self.extras[key] = float(raw)
            else:
                self.extras[key] = raw.strip()
        elif section == "fixture":
            self.fixture_kwargs[key] = _auto(raw.strip())
        elif section == "grid":
            self.grid[key] = raw.strip() if key == "kind" else _auto(raw.strip())
        elif section == "morrey":
            self.morrey[key] = float(raw)
        elif section == "ladders":
            self.ladders[key] = _ints(raw) if key == "resolutions" else _floats(raw)
        elif section == "solver":
            kw = asdict(self.solver)
            kw[key] = int(raw) if key in ("max_iterations", "probe_limit") else float(raw)
            self.solver = SolverOptions(**kw)
        elif section == "thresholds":
            kw = asdict(self.thresholds)
            kw[key] = float(raw)
            self.thresholds = ScanThresholds(**kw)
        elif section == "expect":
            self.expect[key] = float(raw)
        elif section == "output":
            self.out = Path(raw.strip())

    # typed lookups with per-command defaults ---------------------------------

    def grid_spec(self, cells=32, half=1.0, n=3):
        n = int(self.grid.get("n", n))
        cells = int(self.grid.get("cells", cells))
        half = float(self.grid.get("half", half))
        kind = self.grid.get("kind", "box")
        if kind == "box":
            return GridSpec.centered_box(n, half, cells)
        if kind == "ball":
            return GridSpec.centered_ball(n, half, cells)
        raise CliConfigError(f"unknown grid kind {kind!r}")

    def params(self, **defaults):
        vals = dict(defaults)
        vals.update(self.morrey)
        n = int(self.grid.get("n", defaults.get("n", 3)))
        return MorreyParams(n, vals.get("p", 2.0), vals.get("lam", 2.0),
                            alpha=vals.get("alpha"), mu=vals.get("mu"), q=vals.get("q"))

    def make_fixture(self, default_kind, n):
        kind = self.fixture or default_kind
        return make_fixture(kind, n, **self.fixture_kwargs)


def _parallel_map(fn, items, threads):
    """Ordered map; thread count never changes the gathered result."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- artifact writers ---------------------------------------------------------


def _write_summary(out, payload):
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n"
    (out / "summary.json").write_text(text, encoding="utf-8")


def _write_csv(out, name, header, rows):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / name, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else repr(x) if isinstance(x, float) else x for x in row])


# -- commands ------------------------------------------------------------------


def cmd_verify_fixture(cfg):
    """Weak residual battery + structure constants + interior energy ratios."""
    n = int(cfg.grid.get("n", 3))
    fx = cfg.make_fixture("affine", n)
    if cfg.extras.get("coefficients", "fixture") == "identity":
        A = identity_coefficients(fx.n, fx.m)
    else:
        A = fixture_coefficients(fx)
    p = float(cfg.morrey.get("p", 2.0))
    resolutions = cfg.ladders.get("resolutions", (32, 48))
    half = float(cfg.grid.get("half", 1.0))
    battery = bump_battery(fx.n, fx.m, count=cfg.extras.get("bumps", 15), seed=cfg.seed)
    order = cfg.extras.get("order", 1)

    def one(cells):
        spec = GridSpec.centered_box(fx.n, half, cells)
        u = sample_fixture(fx, spec)
        return spec, u, battery_residuals(u, A, battery, order=order)

    runs = _parallel_map(one, list(resolutions), cfg.threads)
    rows = [(s.cells_per_axis, s.h, rel) for s, _, rel in runs]
    rels = [rel for _, _, rel in runs]
    slope = None
    if min(rels) > 1e-14:
        slope = float(np.polyfit(np.log([r[1] for r in rows]), np.log(rels), 1)[0])
    _write_csv(cfg.out, "residuals.csv", ("cells", "h", "relative_residual"), rows)

    srep = structure_check(A, structure_battery(fx, A), p=p)

    cacc = None
    radii = cfg.ladders.get("radii", (0.5, 0.25))
    try:
        prof = caccioppoli_check(runs[-1][1], cfg.extras.get("order", 1), p, (0.0,) * fx.n, radii)
        _write_csv(cfg.out, "caccioppoli.csv", ("r", "ratio"), prof.rows)
        cacc = {"rows": prof.rows, "bound": prof.bound, "vacuous": prof.vacuous}
    except GridError as exc:  # ladder outside this grid: report, don't fail
        cacc = {"error": str(exc)}

    payload = {
        "command": "verify-fixture",
        "fixture": fx.kind,
        "seed": cfg.seed,
        "residuals": [{"cells": c, "h": h, "relative": r} for c, h, r in rows],
        "residual_slope": slope,
        "structure": {"a0_emp": srep.a0_emp, "M_emp": srep.M_emp,
                      "flux_ratio_max": srep.flux_ratio_max, "ok": srep.ok,
                      "samples": srep.samples},
        "caccioppoli": cacc,
    }
    if not srep.ok:
        raise AssertionFailure("structure constants", f"violations: {srep.violations[:3]}")
    tol = cfg.expect.get("residual_tol", 5e-2)
    if rels[-1] > tol:
        raise AssertionFailure("weak-residual finest",
                               f"relative residual {rels[-1]:.3e} above {tol:.3e}")
    return payload


def cmd_morrey_norm(cfg):
    n = int(cfg.grid.get("n", 3))
    kwargs = dict(cfg.fixture_kwargs)
    if (cfg.fixture or "morrey_test") == "morrey_test" and not kwargs:
        kwargs = {"lam": cfg.morrey.get("lam", 2.0), "p": cfg.morrey.get("p", 2.0)}
    fx = make_fixture(cfg.fixture or "morrey_test", n, **kwargs)
    spec = cfg.grid_spec(cells=32)
    f = sample_fixture(fx, spec)
    params = cfg.params()
    radii = cfg.ladders.get("radii")
    if radii:
        family = BallFamily(spec, ((0.0,) * spec.n,), tuple(sorted(radii, reverse=True)))
    else:
        family = BallFamily.dyadic(spec, centers=cfg.extras.get("centers", "origin"),
                                   max_centers=cfg.extras.get("max_centers", 64))
    res = morrey_norm(f, params, family)
    _write_csv(cfg.out, "morrey_norm.csv",
               tuple(f"c{i}" for i in range(spec.n)) + ("r", "quotient"),
               [tuple(b.center) + (b.radius, q) for b, q in res.table])
    payload = {
        "command": "morrey-norm",
        "fixture": fx.kind,
        "p": params.p,
        "lam": params.lam,
        "value": res.value,
        "argmax": {"center": list(res.argmax.center), "radius": res.argmax.radius},
        "balls": len(res.table),
    }
    if not math.isfinite(res.value):
        raise AssertionFailure("morrey-norm value", f"norm is {res.value}")
    if "norm_value" in cfg.expect:
        tol = cfg.expect.get("norm_tol", 0.05)
        want = cfg.expect["norm_value"]
        if abs(res.value - want) > tol * abs(want):
            raise AssertionFailure("morrey-norm value",
                                   f"{res.value:.6f} not within {tol:.0%} of {want:.6f}")
    return payload


def cmd_riesz(cfg):
    n = int(cfg.grid.get("n", 3))
    fx = cfg.make_fixture("gaussian", n)
    spec = cfg.grid_spec(cells=32, half=1.5)
    f = sample_fixture(fx, spec)
    alpha = float(cfg.morrey.get("alpha", 1.0))
    pot = riesz_potential(f, alpha)
    save_field(pot, cfg.out / "riesz_potential.bin")
    mid = tuple(s // 2 for s in spec.shape)
    axis_nodes = [(spec.coords()[(i,) + mid[1:]][0], float(pot.values[(i,) + mid[1:]]))
                  for i in range(spec.shape[0])]
    _write_csv(cfg.out, "riesz_axis_profile.csv", ("x0", "value"), axis_nodes)
    center_value = float(pot.values[mid])
    payload = {
        "command": "riesz",
        "fixture": fx.kind,
        "alpha": alpha,
        "cells": spec.cells_per_axis,
        "center_value": center_value,
        "max_value": float(pot.values.max()),
    }
    if "center_value" in cfg.expect:
        tol = cfg.expect.get("center_tol", 0.02)
        want = cfg.expect["center_value"]
        if abs(center_value - want) > tol * abs(want):
            raise AssertionFailure("riesz center value",
                                   f"{center_value:.6f} not within {tol:.0%} of {want:.6f}")
    return payload


def cmd_capacity_scaling(cfg):
    spec = cfg.grid_spec(cells=64, half=2.0)
    params = cfg.params(p=2.0, lam=2.5, alpha=1.0)
    if params.alpha is None:
        params = cfg.params(alpha=1.0)
    radii = cfg.ladders.get("radii", (0.5, 0.25, 0.125, 0.0625))
    if min(radii) <= spec.h / 2.0 * math.sqrt(spec.n):
        raise CliConfigError(f"radius {min(radii)} holds no node at h = {spec.h}")
    values, slope = ball_capacity_scaling(spec, params, radii, solver=cfg.solver)
    borderline = abs(params.p - params.lam / params.alpha) < 1e-12
    _write_csv(cfg.out, "capacity.csv", ("r", "capacity"), values)
    payload = {
        "command": "capacity-scaling",
        "p": params.p,
        "lam": params.lam,
        "alpha": params.alpha,
        "regime": "borderline" if borderline else "power",
        "values": [{"r": r, "capacity": c} for r, c in values],
        "slope": slope,
    }
    if "slope" in cfg.expect:
        tol = cfg.expect.get("slope_tol", 0.15)
        want = cfg.expect["slope"]
        if abs(slope - want) > tol:
            raise AssertionFailure("capacity-scaling slope",
                                   f"fitted {slope:.4f}, wanted {want} +- {tol}")
    return payload


def _segment_mask(spec, length):
    """Nodes hugging the first-axis segment |x0| <= length/2."""
    c = spec.coords()
    mask = np.abs(c[..., 0]) <= length / 2.0
    for a in range(1, spec.n):
        mask &= np.abs(c[..., a]) < spec.h  # the two straddling node rows
    return mask


def cmd_hausdorff(cfg):
    spec = cfg.grid_spec(cells=48)
    d = float(cfg.morrey.get("d", 1.0))
    target = cfg.extras.get("target", "segment")
    length = float(cfg.extras.get("length", 1.2))
    if target == "segment":
        mask = _segment_mask(spec, length)
    elif target == "ball":
        mask = ball_node_mask(spec, Ball(spec.domain_center, length / 2.0))
    else:
        raise CliConfigError(f"unknown target {target!r} (segment or ball)")
    sol = hausdorff_content(spec, mask, d)
    _write_csv(cfg.out, "cover.csv",
               tuple(f"c{i}" for i in range(spec.n)) + ("radius",),
               [tuple(b.center) + (b.radius,) for b in sol.balls])
    payload = {
        "command": "hausdorff",
        "d": d,
        "target": target,
        "length": length,
        "target_nodes": int(mask.sum()),
        "content": sol.content_value,
        "method": sol.method,
        "cover_size": len(sol.balls),
    }
    if "content" in cfg.expect:
        tol = cfg.expect.get("content_tol", 0.2)
        want = cfg.expect["content"]
        if abs(sol.content_value - want) > tol * abs(want):
            raise AssertionFailure("hausdorff content",
                                   f"{sol.content_value:.6f} not within {tol:.0%} of {want:.6f}")
    return payload


def cmd_isocap_check(cfg):
    spec = cfg.grid_spec(cells=24)
    params = cfg.params(p=2.0, lam=2.5, alpha=1.0)
    d = float(cfg.morrey.get("d", 1.0))
    q = float(cfg.morrey.get("q", 3.0))
    radii = cfg.ladders.get("radii", (0.5, 0.35, 0.25, 0.175))
    targets = [(f"r={r}", ball_node_mask(spec, Ball(spec.domain_center, r))) for r in radii]
    rep = isocapacitary_check(spec, targets, params, d, q, solver=cfg.solver)
    if rep.case == "i":
        _write_csv(cfg.out, "isocap.csv", ("label", "content", "capacity", "ratio"), rep.rows)
    else:
        _write_csv(cfg.out, "isocap.csv", ("label", "content", "capacity", "cap_pow", "log_content"),
                   [(lbl, c, cap, x, y) for (lbl, c, cap, (x, y)) in rep.rows])
    payload = {
        "command": "isocap-check",
        "case": rep.case,
        "d": d,
        "q": q,
        "rows": [list(r) for r in rep.rows],
        "bound_ratio": rep.bound_ratio,
    }
    if rep.case == "ii":
        payload.update({"decreasing": rep.decreasing, "convex": rep.convex,
                        "bound_witness": rep.bound_witness})
    bound = cfg.expect.get("bound")
    if bound is not None and rep.case == "i" and rep.bound_ratio > bound:
        raise AssertionFailure("isocap bound ratio",
                               f"max/min ratio {rep.bound_ratio:.3f} exceeds {bound}")
    return payload


def cmd_scan_singular(cfg):
    n = int(cfg.grid.get("n", 3))
    fx = cfg.make_fixture("harmonic_map_sphere" if n == 3 else "split_harmonic_map", n)
    cells = 64 if n == 3 else 32
    spec = cfg.grid_spec(cells=cells)
    u = sample_fixture(fx, spec)
    h = spec.h
    default_radii = tuple(k * h for k in ((16, 8, 4, 2) if n == 3 else (8, 4, 2)))
    radii = cfg.ladders.get("radii", default_radii)
    p_hat = cfg.extras.get("p_hat", 2.0)
    osc = oscillation_scan(u, p_hat, radii)
    avg = unbounded_average_scan(u, radii)
    mask = osc.singular_mask(cfg.thresholds)

    riesz = plan = None
    resolutions = cfg.ladders.get("resolutions", (32, 64) if n == 3 else (20, 40))
    if mask.any() and len(resolutions) >= 2:
        plan = riesz_probe_plan(spec, mask,
                                cfg.ladders.get("control_distances", (8.0, 16.0) if n == 3 else (8.0, 12.0)))
        half = float(cfg.grid.get("half", 1.0))
        fields = _parallel_map(
            lambda c: sample_fixture(fx, GridSpec.centered_box(spec.n, half, c)),
            list(resolutions), cfg.threads)
        riesz = riesz_divergence_scan(fields, plan.points)

    report = classify_and_report(osc, avg, riesz=riesz, probe_plan=plan, thresholds=cfg.thresholds)
    info = report.as_dict()
    (cfg.out / "report.json").parent.mkdir(parents=True, exist_ok=True)
    (cfg.out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    if riesz is not None:
        rows = []
        for j, (pt, role, cl) in enumerate(zip(plan.points, plan.roles, plan.cluster_ids)):
            for cells_k, hk, val in zip(riesz.resolutions, riesz.cell_sizes, riesz.values[j]):
                rows.append((j, role, cl) + tuple(pt) + (cells_k, hk, val))
        _write_csv(cfg.out, "probes.csv",
                   ("probe", "role", "cluster") + tuple(f"x{i}" for i in range(spec.n))
                   + ("cells", "h", "potential"), rows)
    payload = {
        "command": "scan-singular",
        "fixture": fx.kind,
        "cells": spec.cells_per_axis,
        "counts": {k: info[k]["count"] for k in ("S", "T", "R")},
        "dimensions": info["dimensions"],
        "cross_check": info.get("cross_check"),
    }
    if "dimension" in cfg.expect:
        want = cfg.expect["dimension"]
        tol = cfg.expect.get("dimension_tol", 0.2)
        got = info["dimensions"]["S"]
        if not isinstance(got, float) or abs(got - want) > tol:
            raise AssertionFailure("scan-singular dimension",
                                   f"S dimension {got!r}, wanted {want} +- {tol}")
    return payload


def cmd_reconstruct(cfg):
    n = int(cfg.grid.get("n", 3))
    fx = cfg.make_fixture("gaussian", n)
    spec = cfg.grid_spec(cells=32)
    hf = sample_fixture(fx, spec)
    if isinstance(hf, VectorField):
        raise CliConfigError("reconstruct needs a scalar fixture")
    k = cfg.extras.get("k", 2)
    rec = representation_reconstruct(hf, k=k)
    classical = 1.0 / ((n - 2) * sphere_surface(n)) if k == 2 else 1.0 / sphere_surface(n)
    l2 = float(np.sqrt(((rec.field.values - hf.values) ** 2).sum()
                       / max((hf.values**2).sum(), 1e-300)))
    save_field(rec.field, cfg.out / "reconstruction.bin")
    payload = {
        "command": "reconstruct",
        "fixture": fx.kind,
        "k": k,
        "cells": spec.cells_per_axis,
        "constant": rec.constant,
        "classical": classical,
        "constant_rel_dev": None if rec.absent else rec.constant / classical - 1.0,
        "l2_rel_error": l2,
        "support_warning": rec.support_warning,
    }
    if "constant_rel_tol" in cfg.expect:
        tol = cfg.expect["constant_rel_tol"]
        if rec.absent or abs(rec.constant / classical - 1.0) > tol:
            raise AssertionFailure("reconstruct constant",
                                   f"constant {rec.constant!r} not within {tol:.0%} of {classical:.6f}")
    if "l2_tol" in cfg.expect and l2 > cfg.expect["l2_tol"]:
        raise AssertionFailure("reconstruct l2",
                               f"relative L2 error {l2:.4f} above {cfg.expect['l2_tol']}")
    return payload


def cmd_report(cfg):
    """Aggregate every summary.json / report.json below --out into one file."""
    base = cfg.out
    target = base / "summary.json"
    merged = {}
    for path in sorted(base.rglob("*.json")):
        if path == target or path.name not in ("summary.json", "report.json"):
            continue
        merged[path.relative_to(base).as_posix()] = json.loads(path.read_text(encoding="utf-8"))
    if not merged:
        raise CliConfigError(f"no artifacts to aggregate under {base}")
    return {"command": "report", "artifacts": merged, "count": len(merged)}


COMMANDS = {
    "verify-fixture": cmd_verify_fixture,
    "morrey-norm": cmd_morrey_norm,
    "riesz": cmd_riesz,
    "capacity-scaling": cmd_capacity_scaling,
    "hausdorff": cmd_hausdorff,
    "isocap-check": cmd_isocap_check,
    "scan-singular": cmd_scan_singular,
    "reconstruct": cmd_reconstruct,
    "report": cmd_report,
}


def run(cfg):
    """Execute one experiment; returns the summary payload it wrote."""
    if cfg.command not in COMMANDS:
        raise CliConfigError(f"unknown command {cfg.command!r}; known: {sorted(COMMANDS)}")
    cfg.out.mkdir(parents=True, exist_ok=True)
    payload = COMMANDS[cfg.command](cfg)
    _write_summary(cfg.out, payload)
    return payload


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="morreylab",
        description="Run one named experiment and write JSON/CSV artifacts.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, default=None, help="key = value config file")
    parser.add_argument("--out", type=Path, default=None, help="artifact directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--resolution", type=int, default=None, help="override grid cells per axis")
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        cfg.command = args.command
        cfg.threads = max(1, args.threads)
        if args.out is not None:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.resolution is not None:
            cfg.grid["cells"] = args.resolution
        run(cfg)
    except AssertionFailure as exc:
        print(f"FAIL [{exc.criterion}]: {exc}", file=sys.stderr)
        return 1
    except (CliConfigError, *CONFIG_ERRORS) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    print(f"ok: artifacts in {args.out or 'out'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
