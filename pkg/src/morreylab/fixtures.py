"""Reference velocity fields for the scans and the weak-form checks.

Each fixture bundles a closed-form solution u, its exact gradient, the
location of its singular set, and (for the named elliptic examples) the
quadratic coefficient tensor a_{ij}^{kl} = delta_ij delta_kl +
(c delta_ik + d b_ik)(c delta_jl + d b_jl) it solves against.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridError, sample_field, sample_vector_field

__all__ = [
    "FixtureError",
    "SingularEvaluationError",
    "FixtureSpec",
    "CoefficientField",
    "de_giorgi_gamma",
    "de_giorgi",
    "giusti_miranda",
    "koshelev",
    "harmonic_map_sphere",
    "split_harmonic_map",
    "morrey_test",
    "gaussian_bump",
    "affine_map",
    "quadratic_map",
    "make_fixture",
    "FIXTURE_KINDS",
    "fixture_solution",
    "fixture_gradient",
    "sample_fixture",
    "fixture_coefficients",
    "identity_coefficients",
    "morrey_test_function",
    "structure_battery",
]


class FixtureError(ValueError):
    pass


class SingularEvaluationError(FixtureError):
    """Evaluation requested exactly on the singular locus."""


def de_giorgi_gamma(n):
    """Power gamma(n) = (n/2) (1 - 1/sqrt(4 (n-1)^2 + 1)).

    Collapses to 0 at n = 1; always < n/2.
    """
    if n < 1:
        raise FixtureError(f"dimension must be >= 1, got {n}")
    g = (n / 2.0) * (1.0 - 1.0 / math.sqrt(4.0 * (n - 1.0) ** 2 + 1.0))
    assert g < n / 2.0 + 1e-15
    return g


@dataclass(frozen=True)
class FixtureSpec:
    """A named model field: kind, dimension, target components, parameters."""

    kind: str
    n: int
    m: int
    params: tuple = ()  # sorted (key, value) pairs; hashable

    def param(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    @property
    def gamma(self):
        return self.param("gamma")

    @property
    def singular_locus(self):
        """("point", origin) / ("line", collapsed dims) / None for smooth kinds."""
        if self.kind in ("de_giorgi", "giusti_miranda", "koshelev", "harmonic_map_sphere", "morrey_test"):
            return ("point", (0.0,) * self.n)
        if self.kind == "split_harmonic_map":
            return ("line", 3)  # u depends on the first 3 coordinates only
        return None


def _spec(kind, n, m, **params):
    return FixtureSpec(kind, n, m, tuple(sorted(params.items())))


def de_giorgi(n):
    """u = x / |x|^gamma with the De Giorgi coefficients c = n-2, d = n."""
    if n < 2:
        raise FixtureError("De Giorgi example needs n >= 2")
    return _spec("de_giorgi", n, n, gamma=de_giorgi_gamma(n), c=float(n - 2), d=float(n))


def giusti_miranda(n):
    """u = x / |x| with c = 1, d = 4/(n-2) and b built from u."""
    if n < 3:
        raise FixtureError("Giusti-Miranda example needs n >= 3")
    return _spec("giusti_miranda", n, n, gamma=1.0, c=1.0, d=4.0 / (n - 2.0))


def koshelev(n):
    """u = x / |x| with the Koshelev constants; refines the De Giorgi pair."""
    if n < 3:
        raise FixtureError("Koshelev example needs n >= 3")
    c = (n - 1.0) ** -0.5 * (1.0 + (n - 2.0) ** 2 / (n - 1.0)) ** -0.25
    d = (c + 1.0 / c) / (n - 2.0)
    return _spec("koshelev", n, n, gamma=1.0, c=c, d=d)


def harmonic_map_sphere(n):
    """The equator map u = x/|x| : R^n -> S^{n-1}."""
    if n < 2:
        raise FixtureError("equator map needs n >= 2")
    return _spec("harmonic_map_sphere", n, n, gamma=1.0)


def split_harmonic_map(n):
    """u(x, y) = x/|x| on R^3 x R^{n-3}; singular on the (n-3)-plane {0} x R^{n-3}."""
    if n < 4:
        raise FixtureError("split map needs n >= 4")
    return _spec("split_harmonic_map", n, 3, gamma=1.0)


def morrey_test(n, lam, p):
    """Scalar profile |x|^{-lam/p}; its Morrey quotient is flat across radii."""
    if not 0 < lam < n:
        raise FixtureError(f"need 0 < lambda < n, got lambda={lam}, n={n}")
    if not p >= 1:
        raise FixtureError(f"need p >= 1, got {p}")
    return _spec("morrey_test", n, 1, lam=float(lam), p=float(p))


def gaussian_bump(n, sigma=0.25):
    return _spec("gaussian", n, 1, sigma=float(sigma))


def affine_map(n, m=None, seed=7):
    """u = C x + b with a small fixed random matrix (seeded)."""
    m = n if m is None else m
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(n, m)).round(3)
    b = rng.normal(size=m).round(3)
    return _spec("affine", n, m, C=tuple(map(tuple, C)), b=tuple(b))


def quadratic_map(n):
    """u^k = |x|^2 for every component k = 1."""
    return _spec("quadratic", n, 1)


FIXTURE_KINDS = {
    "de_giorgi": de_giorgi,
    "giusti_miranda": giusti_miranda,
    "koshelev": koshelev,
    "harmonic_map_sphere": harmonic_map_sphere,
    "split_harmonic_map": split_harmonic_map,
    "morrey_test": morrey_test,
    "gaussian": gaussian_bump,
    "affine": affine_map,
    "quadratic": quadratic_map,
}


def make_fixture(kind, n, **kwargs):
    if kind not in FIXTURE_KINDS:
        raise FixtureError(f"unknown fixture kind {kind!r}; known: {sorted(FIXTURE_KINDS)}")
    return FIXTURE_KINDS[kind](n, **kwargs)


def _radial_norm(x, dims):
    return np.sqrt((x[..., :dims] ** 2).sum(axis=-1))


def _check_off_locus(r, what):
    if np.any(r == 0.0):
        raise SingularEvaluationError(f"{what} evaluated on its singular locus")


def fixture_solution(fx, x):
    """Evaluate the fixture at points x of shape (..., n)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != fx.n:
        raise FixtureError(f"points have dimension {x.shape[-1]}, fixture has {fx.n}")
    kind = fx.kind
    if kind in ("de_giorgi", "giusti_miranda", "koshelev", "harmonic_map_sphere"):
        r = _radial_norm(x, fx.n)
        _check_off_locus(r, kind)
        return x / r[..., None] ** fx.gamma
    if kind == "split_harmonic_map":
        r = _radial_norm(x, 3)
        _check_off_locus(r, kind)
        return x[..., :3] / r[..., None]
    if kind == "morrey_test":
        r = _radial_norm(x, fx.n)
        _check_off_locus(r, kind)
        return (r ** (-fx.param("lam") / fx.param("p")))[..., None]
    if kind == "gaussian":
        s = fx.param("sigma")
        return np.exp(-(x**2).sum(axis=-1) / (2.0 * s * s))[..., None]
    if kind == "affine":
        C = np.asarray(fx.param("C"))
        b = np.asarray(fx.param("b"))
        return x @ C + b
    if kind == "quadratic":
        return (x**2).sum(axis=-1)[..., None]
    raise FixtureError(f"unknown fixture kind {kind!r}")


def fixture_gradient(fx, x):
    """Exact gradient, shape (..., n, m) with entries du^k/dx_i."""
    x = np.asarray(x, dtype=np.float64)
    kind = fx.kind
    n, m = fx.n, fx.m
    if kind in ("de_giorgi", "giusti_miranda", "koshelev", "harmonic_map_sphere"):
        g = fx.gamma
        r = _radial_norm(x, n)
        _check_off_locus(r, kind)
        eye = np.eye(n)
        xi = x / r[..., None]
        out = r[..., None, None] ** (-g) * (eye - g * xi[..., :, None] * xi[..., None, :])
        return out
    if kind == "split_harmonic_map":
        r = _radial_norm(x, 3)
        _check_off_locus(r, kind)
        eye = np.eye(3)
        xi = x[..., :3] / r[..., None]
        core = r[..., None, None] ** (-1.0) * (eye - xi[..., :, None] * xi[..., None, :])
        out = np.zeros(x.shape[:-1] + (n, m))
        out[..., :3, :] = core
        return out
    if kind == "morrey_test":
        s = fx.param("lam") / fx.param("p")
        r = _radial_norm(x, n)
        _check_off_locus(r, kind)
        return (-s * r[..., None] ** (-s - 2.0) * x)[..., None]
    if kind == "gaussian":
        s = fx.param("sigma")
        v = np.exp(-(x**2).sum(axis=-1) / (2.0 * s * s))
        return (-(x / (s * s)) * v[..., None])[..., None]
    if kind == "affine":
        C = np.asarray(fx.param("C"))
        return np.broadcast_to(C, x.shape[:-1] + (n, m)).copy()
    if kind == "quadratic":
        return (2.0 * x)[..., None]
    raise FixtureError(f"unknown fixture kind {kind!r}")


def sample_fixture(fx, spec):
    """Sample a fixture on a grid; scalar kinds give a ScalarField."""
    if spec.n != fx.n:
        raise FixtureError(f"grid dimension {spec.n} != fixture dimension {fx.n}")
    if fx.m == 1:
        return sample_field(spec, lambda x: fixture_solution(fx, x)[..., 0])
    return sample_vector_field(spec, lambda x: fixture_solution(fx, x), m=fx.m)


def morrey_test_function(spec, lam, p):
    """|x|^{-lam/p} sampled on the grid (lam < n so the norm is finite)."""
    fx = morrey_test(spec.n, lam, p)
    return sample_fixture(fx, spec)


@dataclass(frozen=True)
class CoefficientField:
    """Quadratic coefficients a_{ij}^{kl}(x, u) for second-order systems.

    ``tensor(x, u)`` returns an array A with shape (..., n, m, n, m) and
    index order A[i, k, j, l] = a_{ij}^{kl}; the flux against a gradient
    xi[i, k] is F[j, l] = sum_{ik} A[i,k,j,l] xi[i,k].  ``b_source`` picks
    the rank-one direction: "position" uses x x^T/|x|^2, "solution" uses
    u u^T/(1 + |u|^2); identity coefficients have c = d = 0.
    """

    n: int
    m: int
    c: float
    d: float
    b_source: str  # "position" | "solution" | "none"
    holder_beta: float = 1.0
    name: str = "identity"

    def directions(self, x, u):
        """The matrix v_ik = c delta_ik + d b_ik, shape (..., n, m)."""
        if self.b_source == "none" or (self.c == 0.0 and self.d == 0.0):
            return np.zeros(np.shape(x)[:-1] + (self.n, self.m))
        eye = np.eye(self.n, self.m)
        if self.b_source == "position":
            r2 = (np.asarray(x) ** 2).sum(axis=-1)
            _check_off_locus(r2, self.name + " coefficients")
            b = x[..., :, None] * x[..., None, :] / r2[..., None, None]
        else:
            den = 1.0 + (np.asarray(u) ** 2).sum(axis=-1)
            b = u[..., :, None] * u[..., None, :] / den[..., None, None]
        return self.c * eye + self.d * b

    def tensor(self, x, u):
        eye_n = np.eye(self.n)
        eye_m = np.eye(self.m)
        base = eye_n[:, None, :, None] * eye_m[None, :, None, :]
        v = self.directions(x, u)
        A = np.broadcast_to(base, np.shape(x)[:-1] + base.shape).copy()
        A += v[..., :, :, None, None] * v[..., None, None, :, :]
        return A

    def flux(self, x, u, xi):
        """F[j, l] = sum_{ik} a_{ij}^{kl} xi[i, k]; xi has shape (..., n, m)."""
        v = self.directions(x, u)
        s = (v * xi).sum(axis=(-2, -1))
        return xi + s[..., None, None] * v

    def energy(self, x, u, xi):
        """sum a_{ij}^{kl} xi[i,k] xi[j,l] = |xi|^2 + (v : xi)^2 >= |xi|^2."""
        v = self.directions(x, u)
        s = (v * xi).sum(axis=(-2, -1))
        return (xi**2).sum(axis=(-2, -1)) + s**2

    @property
    def entry_bound(self):
        """Worst-case |a_{ij}^{kl}| when |b| <= 1: 1 + (|c| + |d|)^2."""
        return 1.0 + (abs(self.c) + abs(self.d)) ** 2


def identity_coefficients(n, m=None):
    return CoefficientField(n, n if m is None else m, 0.0, 0.0, "none", name="identity")


def fixture_coefficients(fx):
    """Coefficient field the named fixture solves against."""
    if fx.kind == "de_giorgi":
        return CoefficientField(fx.n, fx.m, fx.param("c"), fx.param("d"), "position", name="de_giorgi")
    if fx.kind == "koshelev":
        return CoefficientField(fx.n, fx.m, fx.param("c"), fx.param("d"), "position", name="koshelev")
    if fx.kind == "giusti_miranda":
        return CoefficientField(fx.n, fx.m, fx.param("c"), fx.param("d"), "solution", name="giusti_miranda")
    if fx.kind in ("harmonic_map_sphere", "split_harmonic_map", "affine", "quadratic", "gaussian"):
        return identity_coefficients(fx.n, fx.m)
    raise FixtureError(f"no coefficient field for fixture kind {fx.kind!r}")


def structure_battery(fx, A, n_points=200, n_dirs=5, seed=1234, r_range=(0.15, 0.9)):
    """Seeded (x, xi) samples for empirical structure constants.

    Points avoid the singular locus; directions mix the exact solution
    gradient, the coordinate axes, and random matrices.
    """
    rng = np.random.default_rng(seed)
    n, m = fx.n, fx.m
    x = rng.normal(size=(n_points, n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    x *= rng.uniform(*r_range, size=(n_points, 1))
    u = fixture_solution(fx, x)
    xis = [fixture_gradient(fx, x)]
    axis = np.zeros((n * m, n, m))
    for i in range(n):
        for k in range(m):
            axis[i * m + k, i, k] = 1.0
    for a in axis:
        xis.append(np.broadcast_to(a, (n_points, n, m)).copy())
    for _ in range(n_dirs):
        xis.append(rng.normal(size=(n_points, n, m)))
    return x, u, np.concatenate(xis, axis=0), np.tile(np.arange(n_points), len(xis))
