"""Cell-centered uniform grids on boxes and balls in R^n (n = 1..4).

Nodes sit at cell centers ``lo + (i + 1/2) h``.  A model function whose
singular point is pinned to a cell corner (the origin, for symmetric
bounds and an even cell count) is therefore finite at every node.
Fields are read-only after construction and every reduction runs in a
fixed order, so results do not depend on scheduling or worker count.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

__all__ = [
    "GridError",
    "ResolutionError",
    "SampleError",
    "GridSpec",
    "Ball",
    "ScalarField",
    "VectorField",
    "Jet",
    "unit_ball_volume",
    "sphere_surface",
    "ball_volume",
    "multi_indices",
    "sample_field",
    "sample_vector_field",
    "ball_node_mask",
    "ball_average",
    "derivative",
    "gradient",
    "jet",
    "save_field",
    "load_field",
    "export_csv",
]


class GridError(ValueError):
    """Invalid grid construction or geometry."""


class ResolutionError(GridError):
    """Requested operation sits below the resolution floor."""


class SampleError(GridError):
    """Evaluator returned a non-finite value at a masked-in node."""


def unit_ball_volume(n):
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_surface(n):
    """Surface area of the unit sphere S^{n-1} in R^n: 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n, r):
    """Volume of a ball of radius r in R^n."""
    return unit_ball_volume(n) * float(r) ** n


@dataclass(frozen=True)
class Ball:
    """Ball B_r(center); membership of a node is decided by its center point."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise GridError(f"ball radius must be positive, got {self.radius}")


_COORDS_CACHE = {}


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a uniform grid: cubic cells, optional ball-shaped domain.

    Parameters
    ----------
    n : int
        Dimension, 1..4.
    bounds : tuple of (lo, hi) pairs
        Box hull of the domain.  All axes must share one extent so that
        cells are cubes.
    cells_per_axis : int
        Number of cells per axis, >= 8.
    kind : str
        "box" (domain = box hull) or "ball" (domain = inscribed ball,
        nodes outside are masked out).
    center, radius : optional
        Ball domains only.
    """

    n: int
    bounds: tuple
    cells_per_axis: int
    kind: str = "box"
    center: tuple = None
    radius: float = None

    def __post_init__(self):
        if not isinstance(self.n, int) or not 1 <= self.n <= 4:
            raise GridError(f"dimension must be an integer in 1..4, got {self.n}")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) != self.n:
            raise GridError(f"expected {self.n} bound pairs, got {len(bounds)}")
        extents = [hi - lo for lo, hi in bounds]
        if min(extents) <= 0.0:
            raise GridError(f"empty axis in bounds {bounds}")
        if max(extents) - min(extents) > 1e-12 * max(extents):
            raise GridError("axes must share one extent (cubic cells), got " f"{extents}")
        object.__setattr__(self, "bounds", bounds)
        if not isinstance(self.cells_per_axis, int) or self.cells_per_axis < 8:
            raise GridError(f"cells_per_axis must be an integer >= 8, got {self.cells_per_axis}")
        if self.kind not in ("box", "ball"):
            raise GridError(f"unknown domain kind {self.kind!r}")
        if self.kind == "ball":
            if self.center is None or self.radius is None:
                raise GridError("ball domains need center and radius")
            center = tuple(float(c) for c in self.center)
            if len(center) != self.n:
                raise GridError("ball center has wrong dimension")
            object.__setattr__(self, "center", center)
            object.__setattr__(self, "radius", float(self.radius))
            if not self.radius > 0.0:
                raise GridError("ball radius must be positive")
            for (lo, hi), c in zip(bounds, center):
                if c - self.radius < lo - 1e-12 or c + self.radius > hi + 1e-12:
                    raise GridError("domain ball must sit inside the box hull")

    @classmethod
    def centered_box(cls, n, half_width, cells_per_axis):
        b = tuple((-float(half_width), float(half_width)) for _ in range(n))
        return cls(n, b, cells_per_axis)

    @classmethod
    def centered_ball(cls, n, radius, cells_per_axis):
        """Ball domain of the given radius, inscribed in its bounding box."""
        b = tuple((-float(radius), float(radius)) for _ in range(n))
        return cls(n, b, cells_per_axis, kind="ball", center=(0.0,) * n, radius=float(radius))

    @property
    def h(self):
        lo, hi = self.bounds[0]
        return (hi - lo) / self.cells_per_axis

    @property
    def shape(self):
        return (self.cells_per_axis,) * self.n

    @property
    def node_count(self):
        return self.cells_per_axis ** self.n

    def axis_coords(self, axis):
        lo, hi = self.bounds[axis]
        return lo + (np.arange(self.cells_per_axis) + 0.5) * self.h

    def coords(self):
        """Node coordinates, shape (*shape, n).  Cached per spec."""
        got = _COORDS_CACHE.get(self)
        if got is None:
            axes = [self.axis_coords(a) for a in range(self.n)]
            mesh = np.meshgrid(*axes, indexing="ij")
            got = np.stack(mesh, axis=-1)
            got.setflags(write=False)
            if len(_COORDS_CACHE) > 32:
                _COORDS_CACHE.clear()
            _COORDS_CACHE[self] = got
        return got

    def mask(self):
        """Boolean node mask of the domain (all True for boxes)."""
        if self.kind == "box":
            return np.ones(self.shape, dtype=bool)
        d2 = ((self.coords() - np.asarray(self.center)) ** 2).sum(axis=-1)
        return d2 < self.radius**2

    @property
    def domain_center(self):
        if self.kind == "ball":
            return self.center
        return tuple((lo + hi) / 2.0 for lo, hi in self.bounds)

    @property
    def inradius(self):
        if self.kind == "ball":
            return self.radius
        lo, hi = self.bounds[0]
        return (hi - lo) / 2.0

    def contains_ball(self, ball, slack=1e-9):
        """Whether B stays inside the domain (up to a tiny slack)."""
        if self.kind == "ball":
            dc = math.dist(ball.center, self.center)
            return dc + ball.radius <= self.radius + slack
        for (lo, hi), c in zip(self.bounds, ball.center):
            if c - ball.radius < lo - slack or c + ball.radius > hi + slack:
                return False
        return True

    def allowed_radius(self):
        """Per-node largest r with B_r(node) inside the domain, shape like mask."""
        x = self.coords()
        if self.kind == "ball":
            d = np.sqrt(((x - np.asarray(self.center)) ** 2).sum(axis=-1))
            return self.radius - d
        sides = [np.minimum(x[..., a] - lo, hi - x[..., a]) for a, (lo, hi) in enumerate(self.bounds)]
        out = sides[0]
        for s in sides[1:]:
            out = np.minimum(out, s)
        return out

    def header_bytes(self):
        ncomp = 0  # placeholder, fields overwrite the component count
        head = [np.int64(self.n).tobytes(), np.int64(self.cells_per_axis).tobytes()]
        for lo, hi in self.bounds:
            head.append(np.float64(lo).tobytes())
            head.append(np.float64(hi).tobytes())
        head.append(np.int64(ncomp).tobytes())
        return b"".join(head)

    def grid_hash(self):
        return hashlib.sha256(self.header_bytes()).hexdigest()[:16]


def _lock(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass
class ScalarField:
    """Real values at grid nodes; ``mask`` marks nodes inside the domain."""

    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray = None
    extrapolated: np.ndarray = None  # nodes whose stencils left the domain

    def __post_init__(self):
        v = _lock(self.values)
        if v.shape != self.spec.shape:
            raise GridError(f"values shape {v.shape} does not match grid {self.spec.shape}")
        self.values = v
        if self.mask is None:
            self.mask = self.spec.mask()
        self.mask.setflags(write=False)

    @property
    def m(self):
        return 1

    def magnitude(self):
        return np.abs(self.values)

    def components(self):
        return self.values[..., None]

    def with_values(self, values, extrapolated=None):
        return ScalarField(self.spec, values, self.mask.copy(), extrapolated)


@dataclass
class VectorField:
    """Vector values at grid nodes, components on the trailing axis."""

    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray = None
    extrapolated: np.ndarray = None

    def __post_init__(self):
        v = _lock(self.values)
        if v.ndim != self.spec.n + 1 or v.shape[:-1] != self.spec.shape:
            raise GridError(f"values shape {v.shape} does not match grid {self.spec.shape} + components")
        self.values = v
        if self.mask is None:
            self.mask = self.spec.mask()
        self.mask.setflags(write=False)

    @property
    def m(self):
        return self.values.shape[-1]

    def magnitude(self):
        return np.sqrt((self.values**2).sum(axis=-1))

    def components(self):
        return self.values

    def with_values(self, values, extrapolated=None):
        return VectorField(self.spec, values, self.mask.copy(), extrapolated)


def _check_finite(values, mask, spec, what):
    bad = ~np.isfinite(values)
    while bad.ndim > mask.ndim:
        bad = bad.any(axis=-1)
    bad &= mask
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        xy = tuple(float(c) for c in spec.coords()[idx])
        raise SampleError(f"{what} is not finite at node {idx} (x = {xy})")


def sample_field(spec, evaluator):
    """Sample a scalar evaluator at all nodes.

    ``evaluator`` receives an array of points with shape (..., n) and must
    return values of shape (...).  Non-finite values at masked-in nodes
    raise :class:`SampleError` naming the offending node.
    """
    vals = np.asarray(evaluator(spec.coords()), dtype=np.float64)
    if vals.shape != spec.shape:
        raise GridError(f"evaluator returned shape {vals.shape}, expected {spec.shape}")
    mask = spec.mask()
    _check_finite(vals, mask, spec, "sampled field")
    return ScalarField(spec, vals, mask)


def sample_vector_field(spec, evaluator, m=None):
    """Sample a vector evaluator; it maps points (..., n) to values (..., m)."""
    vals = np.asarray(evaluator(spec.coords()), dtype=np.float64)
    if vals.ndim != spec.n + 1 or vals.shape[:-1] != spec.shape:
        raise GridError(f"evaluator returned shape {vals.shape}, expected {spec.shape} + (m,)")
    if m is not None and vals.shape[-1] != m:
        raise GridError(f"evaluator returned {vals.shape[-1]} components, expected {m}")
    mask = spec.mask()
    _check_finite(vals, mask, spec, "sampled field")
    return VectorField(spec, vals, mask)


def ball_node_mask(spec, ball):
    """Boolean mask of nodes whose centers lie strictly inside the ball."""
    d2 = ((spec.coords() - np.asarray(ball.center)) ** 2).sum(axis=-1)
    return d2 < ball.radius**2


def ball_average(f, ball, p=1):
    """Discrete p-mean over a ball: sum |f|^p h^n / |B| with the exact ball volume.

    Requires ``ball.radius >= 2 h`` (resolution floor) and B inside the
    domain.  For vector fields |f| is the Euclidean magnitude.
    """
    spec = f.spec
    if ball.radius < 2.0 * spec.h - 1e-12:
        raise ResolutionError(f"ball radius {ball.radius} below resolution floor 2h = {2 * spec.h}")
    if not spec.contains_ball(ball):
        raise GridError(f"ball {ball} is not contained in the domain")
    sel = ball_node_mask(spec, ball)
    vals = f.magnitude()[sel]
    total = float(np.sum(vals ** p) * spec.h**spec.n)
    return total / ball_volume(spec.n, ball.radius)


def multi_indices(n, order, exact=False):
    """All derivative multi-indices with |gamma| <= order (or == order)."""
    out = []
    for gamma in product(range(order + 1), repeat=n):
        s = sum(gamma)
        if (s == order) if exact else (s <= order):
            out.append(gamma)
    return sorted(out, key=lambda g: (sum(g), g))


def _axis_first_derivative(a, axis, h):
    """Second-order first derivative along one axis; one-sided at the edges."""
    a = np.moveaxis(a, axis, 0)
    d = np.empty_like(a)
    d[1:-1] = (a[2:] - a[:-2]) / (2.0 * h)
    d[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h)
    d[-1] = (3.0 * a[-1] - 4.0 * a[-2] + a[-3]) / (2.0 * h)
    return np.moveaxis(d, 0, axis)


def _spread_flag(flag, axis):
    """Widen a stencil-contamination flag by one node along an axis."""
    f = np.moveaxis(flag, axis, 0)
    out = f.copy()
    out[1:] |= f[:-1]
    out[:-1] |= f[1:]
    out[0] = True
    out[-1] = True
    return np.moveaxis(out, 0, axis)


def _derivative_array(values, spec, gamma):
    order = sum(gamma)
    if order > 4:
        raise GridError(f"derivative order {order} > 4 is not supported")
    out = values
    flag = np.zeros(spec.shape, dtype=bool)
    for axis, k in enumerate(gamma):
        for _ in range(k):
            out = _axis_first_derivative(out, axis, spec.h)
            flag = _spread_flag(flag, axis)
    if spec.kind == "ball":
        # Stencils that reach outside the mask still use the (finite)
        # exterior samples; the flag records the loss of interior accuracy.
        reach = max(gamma) if gamma else 0
        outside = ~spec.mask()
        near = outside.copy()
        for _ in range(reach):
            for axis in range(spec.n):
                near = _spread_flag(near, axis) | near
        flag |= near
    return out, flag


def derivative(f, gamma):
    """Finite-difference partial derivative for a multi-index gamma.

    Central differences of second-order accuracy in the interior,
    one-sided stencils at the grid edge.  Nodes whose stencil touched an
    edge (or, for ball domains, exterior samples) are marked in the
    ``extrapolated`` flag of the result.
    """
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != f.spec.n or min(gamma) < 0:
        raise GridError(f"bad multi-index {gamma} for dimension {f.spec.n}")
    if isinstance(f, VectorField):
        outs = []
        flag = np.zeros(f.spec.shape, dtype=bool)
        for c in range(f.m):
            o, fl = _derivative_array(f.values[..., c], f.spec, gamma)
            outs.append(o)
            flag |= fl
        return VectorField(f.spec, np.stack(outs, axis=-1), f.mask.copy(), flag)
    out, flag = _derivative_array(f.values, f.spec, gamma)
    return ScalarField(f.spec, out, f.mask.copy(), flag)


def gradient(u):
    """First derivatives of every component: array of shape (*shape, n, m)."""
    spec = u.spec
    comps = u.components()
    m = comps.shape[-1]
    out = np.empty(spec.shape + (spec.n, m))
    flag = np.zeros(spec.shape, dtype=bool)
    for a in range(spec.n):
        gamma = tuple(1 if i == a else 0 for i in range(spec.n))
        for c in range(m):
            arr, fl = _derivative_array(comps[..., c], spec, gamma)
            out[..., a, c] = arr
            flag |= fl
    return out, flag


@dataclass
class Jet:
    """Collection of derivative fields of a vector field up to one order."""

    u: VectorField
    order: int
    fields: dict = field(repr=False)  # gamma tuple -> ndarray (*shape, m)
    extrapolated: np.ndarray = None

    def top(self):
        """The order-m subcollection {gamma: values} with |gamma| == order."""
        return {g: v for g, v in self.fields.items() if sum(g) == self.order}

    def top_norm(self):
        """Euclidean norm over top-order derivatives and components."""
        acc = np.zeros(self.u.spec.shape)
        for v in self.top().values():
            acc += (v**2).sum(axis=-1)
        return np.sqrt(acc)

    def top_norm_field(self):
        return ScalarField(self.u.spec, self.top_norm(), self.u.mask.copy(), self.extrapolated)


def jet(u, order):
    """All partial derivatives of u with |gamma| <= order.

    Order 0 returns the field itself; |gamma| <= 4 supported.
    """
    if isinstance(u, ScalarField):
        u = VectorField(u.spec, u.values[..., None], u.mask.copy())
    if order < 0 or order > 4:
        raise GridError(f"jet order must be 0..4, got {order}")
    fields = {}
    flag = np.zeros(u.spec.shape, dtype=bool)
    for g in multi_indices(u.spec.n, order):
        if sum(g) == 0:
            fields[g] = u.values
            continue
        cols = []
        for c in range(u.m):
            arr, fl = _derivative_array(u.values[..., c], u.spec, g)
            cols.append(arr)
            flag |= fl
        fields[g] = np.stack(cols, axis=-1)
    return Jet(u, order, fields, flag)


# -- serialization -----------------------------------------------------------
#
# Binary layout (little endian, 64-bit words):
#   int64 n | int64 cells_per_axis | float64 lo,hi per axis | int64 ncomp
# followed by float64 node values in row-major order, components last.
# A JSON sidecar carries the domain kind and provenance.


def _field_header(spec, ncomp):
    parts = [np.int64(spec.n).tobytes(), np.int64(spec.cells_per_axis).tobytes()]
    for lo, hi in spec.bounds:
        parts.append(np.float64(lo).tobytes())
        parts.append(np.float64(hi).tobytes())
    parts.append(np.int64(ncomp).tobytes())
    return b"".join(parts)


def save_field(f, path, provenance=None):
    """Write ``path`` (binary values) and ``path + '.json'`` (sidecar)."""
    path = Path(path)
    ncomp = 0 if isinstance(f, ScalarField) else f.m
    header = _field_header(f.spec, ncomp)
    body = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    path.write_bytes(header + body)
    sidecar = {
        "n": f.spec.n,
        "cells_per_axis": f.spec.cells_per_axis,
        "bounds": [list(b) for b in f.spec.bounds],
        "components": ncomp,
        "domain": {
            "kind": f.spec.kind,
            "center": list(f.spec.center) if f.spec.center else None,
            "radius": f.spec.radius,
        },
        "layout": "row-major, components last, little-endian float64",
        "grid_hash": f.spec.grid_hash(),
        "provenance": provenance or {},
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def load_field(path):
    """Round-trip loader for :func:`save_field` output."""
    path = Path(path)
    raw = path.read_bytes()
    n = int(np.frombuffer(raw, "<i8", count=1)[0])
    cells = int(np.frombuffer(raw, "<i8", count=1, offset=8)[0])
    bounds = np.frombuffer(raw, "<f8", count=2 * n, offset=16).reshape(n, 2)
    off = 16 + 16 * n
    ncomp = int(np.frombuffer(raw, "<i8", count=1, offset=off)[0])
    off += 8
    side = Path(str(path) + ".json")
    kind, center, radius = "box", None, None
    if side.exists():
        meta = json.loads(side.read_text())
        dom = meta.get("domain", {})
        kind = dom.get("kind", "box")
        center = tuple(dom["center"]) if dom.get("center") else None
        radius = dom.get("radius")
    spec = GridSpec(n, tuple(map(tuple, bounds)), cells, kind=kind, center=center, radius=radius)
    count = cells**n * max(ncomp, 1)
    vals = np.frombuffer(raw, "<f8", count=count, offset=off)
    if ncomp == 0:
        return ScalarField(spec, vals.reshape(spec.shape))
    return VectorField(spec, vals.reshape(spec.shape + (ncomp,)))


def export_csv(f, path):
    """Node table: one row per node, coordinates then value(s)."""
    path = Path(path)
    spec = f.spec
    coords = spec.coords().reshape(-1, spec.n)
    comps = f.components().reshape(len(coords), -1)
    cols = [f"x{i + 1}" for i in range(spec.n)]
    cols += ["value"] if comps.shape[1] == 1 else [f"v{j + 1}" for j in range(comps.shape[1])]
    with path.open("w") as fh:
        fh.write(",".join(cols) + "\n")
        for row_xy, row_v in zip(coords, comps):
            cells = [repr(float(v)) for v in row_xy] + [repr(float(v)) for v in row_v]
            fh.write(",".join(cells) + "\n")
    return path
