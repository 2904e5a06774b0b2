"""Integral operators over grid fields.

The Morrey norm takes a supremum of scaled ball p-means over an explicit
ball family; the Riesz potential and maximal operator use the same ball
conventions as :mod:`morreylab.grid`.  All kernels are evaluated by direct
quadrature except the compactly supported mollifier, whose convolution may
go through an FFT (it is an ordinary smooth kernel, not a singular one).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage, signal

from .grid import (
    Ball,
    ResolutionError,
    ScalarField,
    VectorField,
    ball_volume,
    derivative,
    sphere_surface,
)

__all__ = [
    "ParameterError",
    "MorreyParams",
    "BallFamily",
    "MorreyNormResult",
    "morrey_norm",
    "riesz_potential",
    "riesz_potential_at",
    "maximal_function",
    "mollify",
    "zorko_distance",
    "ReconstructionResult",
    "representation_reconstruct",
]


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class MorreyParams:
    """Exponents for L^{p,lambda} work: p > 1, 0 < lam <= n.

    ``alpha`` is the Riesz order for capacity work, ``mu`` a second Morrey
    exponent for mollification distances.  ``scaling_vanishes`` flags
    lam - alpha p < 0, where shrinking-ball capacities lose their power
    scaling.
    """

    n: int
    p: float
    lam: float
    alpha: float = None
    mu: float = None
    m: int = None
    q: float = None

    def __post_init__(self):
        if not self.p > 1.0:
            raise ParameterError(f"need p > 1, got p = {self.p}")
        if not 0.0 < self.lam <= self.n:
            raise ParameterError(f"need 0 < lambda <= n, got lambda = {self.lam}")
        if self.alpha is not None and not 0.0 < self.alpha < self.n:
            raise ParameterError(f"need 0 < alpha < n, got alpha = {self.alpha}")
        if self.mu is not None and not 0.0 < self.mu <= self.n:
            raise ParameterError(f"need 0 < mu <= n, got mu = {self.mu}")

    @classmethod
    def from_solution_class(cls, n, p, m, q, **kw):
        """lambda = (m + n/q) p, the exponent attached to order-m systems
        whose top derivatives lie in L^q; q = inf gives lambda = m p."""
        lam = (m + (0.0 if math.isinf(q) else n / q)) * p
        return cls(n=n, p=p, lam=lam, m=m, q=q, **kw)

    @property
    def scaling_vanishes(self):
        return self.alpha is not None and self.lam - self.alpha * self.p < 0.0

    def with_(self, **kw):
        d = self.__dict__.copy()
        d.update(kw)
        return MorreyParams(**d)


@dataclass(frozen=True)
class BallFamily:
    """Centers x dyadic radii, filtered so every ball sits in the domain.

    ``radii`` descend from r0 by halving; each is >= 2h.  ``centers`` is an
    array of points (k, n).  Iteration yields concrete :class:`Ball`s.
    """

    spec: object
    centers: tuple  # tuple of coordinate tuples
    radii: tuple

    def __post_init__(self):
        h = self.spec.h
        radii = tuple(float(r) for r in self.radii)
        if not radii:
            raise ParameterError("ball family needs at least one radius")
        for r in radii:
            if r < 2.0 * h - 1e-12:
                raise ParameterError(f"family radius {r} below resolution floor 2h = {2 * h}")
        if max(radii) > self.spec.inradius + 1e-12:
            raise ParameterError("largest family radius exceeds the domain inradius")
        object.__setattr__(self, "radii", tuple(sorted(radii, reverse=True)))
        object.__setattr__(self, "centers", tuple(tuple(float(c) for c in ctr) for ctr in self.centers))

    @classmethod
    def dyadic(cls, spec, r0=None, levels=None, centers="origin", max_centers=64):
        """Radii r0 * 2^{-k}; centers "origin", "nodes" (strided subset), or points."""
        h = spec.h
        if r0 is None:
            r0 = spec.inradius
        if levels is None:
            levels = int(math.floor(math.log2(r0 / (2.0 * h)))) + 1
        radii = [r0 * 2.0**-k for k in range(levels)]
        radii = [r for r in radii if r >= 2.0 * h - 1e-12]
        if not radii:
            raise ParameterError("no admissible radii: raise r0 or refine the grid")
        if isinstance(centers, str) and centers == "origin":
            pts = [spec.domain_center]
        elif isinstance(centers, str) and centers == "nodes":
            arr = spec.coords().reshape(-1, spec.n)
            stride = max(1, int(math.ceil((len(arr) / max_centers) ** (1.0 / spec.n))))
            sl = (slice(None, None, stride),) * spec.n
            pts = spec.coords()[sl].reshape(-1, spec.n)
            pts = [tuple(p) for p in pts]
            pts.append(spec.domain_center)
        else:
            pts = [tuple(p) for p in np.atleast_2d(np.asarray(centers, dtype=float))]
        return cls(spec, tuple(pts), tuple(radii))

    def balls(self):
        """All (center, radius) pairs that fit inside the domain."""
        for ctr in self.centers:
            for r in self.radii:
                b = Ball(ctr, r)
                if self.spec.contains_ball(b):
                    yield b

    def __len__(self):
        return sum(1 for _ in self.balls())


@dataclass
class MorreyNormResult:
    value: float
    argmax: Ball
    table: list  # (ball, quotient r^lam * mean) rows

    def __float__(self):
        return self.value


def _magnitude_power(f, p):
    return f.magnitude() ** p


def morrey_norm(f, params, family):
    """sup over the family of (r^lam * ball p-mean of |f|^p)^{1/p}.

    Returns the norm value together with the arg-max ball and the full
    quotient table.  Balls are grouped by center so each center's distance
    field is computed once.
    """
    spec = f.spec
    if family.spec != spec:
        raise ParameterError("family was built for a different grid")
    p, lam = params.p, params.lam
    vals = _magnitude_power(f, p)
    vals = np.where(f.mask, vals, 0.0)
    coords = spec.coords()
    hn = spec.h**spec.n
    best = None
    table = []
    for ctr in family.centers:
        d2 = ((coords - np.asarray(ctr)) ** 2).sum(axis=-1)
        for r in family.radii:
            b = Ball(ctr, r)
            if not spec.contains_ball(b):
                continue
            mean = float(vals[d2 < r * r].sum()) * hn / ball_volume(spec.n, r)
            quot = r**lam * mean
            table.append((b, quot))
            if best is None or quot > best[1]:
                best = (b, quot)
    if best is None:
        raise ParameterError("ball family is empty on this domain")
    return MorreyNormResult(best[1] ** (1.0 / p), best[0], table)


# -- Riesz potential ---------------------------------------------------------


def _equal_volume_radius(n, h):
    """rho with |B_rho| = h^n, the radius of the self-cell correction."""
    return (h**n * n / sphere_surface(n)) ** (1.0 / n)


def _kernel_of_r2(r2, expo):
    """|x - y|^{2 expo} with cheap paths for the common exponents."""
    if expo == -1.0:
        return 1.0 / r2
    if expo == -0.5:
        return 1.0 / np.sqrt(r2)
    return r2**expo


def _pairwise_d2(A, B, B_sq):
    """Squared distances via the Gram expansion; clipped at 0."""
    d2 = (A * A).sum(axis=1)[:, None] + B_sq[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d2, 0.0)


@lru_cache(maxsize=16)
def _near_cell_correction(n, alpha):
    """Kernel-weight corrections for the two cell shells around a node.

    Midpoint quadrature of |x - y|^{alpha - n} is exact only far from
    the kernel singularity; over the nearest shells its errors sum to
    O(h) when alpha - n <= -2.  This table holds, per integer offset
    delta with 0 < |delta|_inf <= 2, the difference between the exact
    kernel integral over the unit cell centered at delta (8-point Gauss
    per axis; the integrand is smooth there) and the midpoint value
    |delta|^{alpha - n}.  Everything is scale-invariant: multiply by
    h^alpha and apply as a stencil.

    Not used at alpha = 2: Laplace(rho^{alpha-n}) = (alpha-n)(alpha-2)
    rho^{alpha-n-2} vanishes there, so the midpoint weights are already
    fourth-order per cell, and they are the ones that act as a discrete
    Green function against the grid Laplacian in the order-2
    reconstruction identity.  Swapping them for exact cell integrals
    measurably degrades that reconstruction.
    """
    q, w = np.polynomial.legendre.leggauss(8)
    q, w = q / 2.0, w / 2.0  # unit cell [-1/2, 1/2] per axis
    grids = np.meshgrid(*([q] * n), indexing="ij")
    wts = np.ones_like(grids[0])
    for g in np.meshgrid(*([w] * n), indexing="ij"):
        wts = wts * g
    table = np.zeros((5,) * n)
    for delta in np.ndindex(*(5,) * n):
        d = np.array(delta) - 2
        if not d.any():
            continue
        r2 = sum((g + dd) ** 2 for g, dd in zip(grids, d))
        exact = float((wts * r2 ** ((alpha - n) / 2.0)).sum())
        table[delta] = exact - float((d**2).sum()) ** ((alpha - n) / 2.0)
    table.setflags(write=False)
    return table


def riesz_potential(f, alpha, chunk=512):
    """I_alpha f(x) = sum_y |x-y|^{alpha-n} f(y) h^n by direct quadrature.

    The y = x term is replaced by the exact integral of the kernel over
    the equal-volume ball: f(x) * omega_{n-1} rho^alpha / alpha with
    |B_rho| = h^n.  The two surrounding cell shells swap their midpoint
    weights for exact cell integrals (see _near_cell_correction), which
    removes the dominant near-singularity quadrature error.  Cost is
    O(N^2); keep grids modest.
    """
    spec = f.spec
    n = spec.n
    if not 0.0 < alpha < n:
        raise ParameterError(f"need 0 < alpha < n, got alpha = {alpha}")
    vals = np.where(f.mask, f.magnitude() if isinstance(f, VectorField) else f.values, 0.0)
    src = vals.reshape(-1)
    pts = spec.coords().reshape(-1, n)
    pts_sq = (pts * pts).sum(axis=1)
    hn = spec.h**n
    expo = (alpha - n) / 2.0
    out = np.empty(len(src))
    for lo in range(0, len(src), chunk):
        hi = min(lo + chunk, len(src))
        d2 = _pairwise_d2(pts[lo:hi], pts, pts_sq)
        idx = np.arange(lo, hi)
        d2[idx - lo, idx] = 1.0  # silenced; replaced by the self-cell term
        K = _kernel_of_r2(d2, expo)
        K[idx - lo, idx] = 0.0
        out[lo:hi] = K @ src
    if alpha == 2.0:
        near = np.zeros_like(vals)  # harmonic kernel: keep midpoint weights
    else:
        near = ndimage.correlate(vals, _near_cell_correction(n, float(alpha)), mode="constant", cval=0.0)
    rho = _equal_volume_radius(n, spec.h)
    self_w = sphere_surface(n) * rho**alpha / alpha
    out = out * hn + (near * spec.h**alpha + self_w * vals).reshape(-1)
    return ScalarField(spec, out.reshape(spec.shape), f.mask.copy())


def riesz_potential_at(f, alpha, points, exclude_factor=2.5, chunk=64):
    """I_alpha f at arbitrary probe points (shape (P, n)).

    Probes need not be nodes, so a node-sum near the kernel singularity
    carries an O(h) placement error.  Nodes within rho_ex =
    exclude_factor * h of a probe are dropped and replaced by the exact
    kernel integral over B_rho_ex times the average of f over the dropped
    nodes; the leftover quadrature error is O(h^2).  The substitution is
    scale-invariant, so log-divergent potentials keep their per-halving
    increment.  exclude_factor must exceed sqrt(n)/2 so the excluded ball
    always contains a node.
    """
    spec = f.spec
    n = spec.n
    if not 0.0 < alpha < n:
        raise ParameterError(f"need 0 < alpha < n, got alpha = {alpha}")
    if not exclude_factor > math.sqrt(n) / 2.0:
        raise ParameterError(f"exclude_factor must exceed sqrt(n)/2 = {math.sqrt(n) / 2:.3f}")
    vals = np.where(f.mask, f.magnitude() if isinstance(f, VectorField) else f.values, 0.0)
    src = vals.reshape(-1)
    pts = spec.coords().reshape(-1, n)
    probes = np.atleast_2d(np.asarray(points, dtype=float))
    if probes.shape[1] != n:
        raise ParameterError(f"probe points must have {n} coordinates")
    hn = spec.h**n
    expo = (alpha - n) / 2.0
    rho = max(_equal_volume_radius(n, spec.h), exclude_factor * spec.h)
    ball_w = sphere_surface(n) * rho**alpha / alpha  # exact integral of the kernel on B_rho
    pts_sq = (pts * pts).sum(axis=1)
    out = np.empty(len(probes))
    for lo in range(0, len(probes), chunk):
        hi = min(lo + chunk, len(probes))
        d2 = _pairwise_d2(probes[lo:hi], pts, pts_sq)
        near = d2 < rho * rho
        d2s = np.where(near, 1.0, d2)
        K = _kernel_of_r2(d2s, expo)
        K[near] = 0.0
        counts = near.sum(axis=1)
        near_mean = np.where(near, src[None, :], 0.0).sum(axis=1) / np.maximum(counts, 1)
        out[lo:hi] = (K @ src) * hn + near_mean * ball_w
    return out


# -- maximal function --------------------------------------------------------


def _ball_footprint(spec, r):
    """Boolean cube of lattice offsets within distance r (strict, node rule)."""
    k = int(math.ceil(r / spec.h))
    rng = np.arange(-k, k + 1) * spec.h
    mesh = np.meshgrid(*([rng] * spec.n), indexing="ij")
    d2 = sum(m * m for m in mesh)
    return d2 < r * r


def _ball_sum(arr, spec, r, fft=None):
    """Sum of arr over nodes within distance r of each node (zero-padded)."""
    foot = _ball_footprint(spec, r)
    if fft is None:
        fft = foot.sum() > 1500
    if fft:
        return signal.fftconvolve(arr, foot.astype(float), mode="same")
    return ndimage.correlate(arr, foot.astype(float), mode="constant", cval=0.0)


def maximal_function(f, family):
    """Centered maximal field: max over family radii of the ball 1-mean.

    Only balls contained in the domain enter; the r -> 0 limit |f| is
    always included, so M f >= |f| pointwise.
    """
    spec = f.spec
    if family.spec != spec:
        raise ParameterError("family was built for a different grid")
    mag = np.where(f.mask, f.magnitude(), 0.0)
    out = mag.copy()
    hn = spec.h**spec.n
    allowed = spec.allowed_radius()
    for r in family.radii:
        means = _ball_sum(mag, spec, r) * hn / ball_volume(spec.n, r)
        ok = allowed >= r - 1e-12
        np.maximum(out, np.where(ok, means, -np.inf), out=out)
    return ScalarField(spec, np.where(f.mask, out, 0.0), f.mask.copy())


# -- mollification -----------------------------------------------------------


def _bump_profile(t):
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def mollify(f, eps):
    """Convolve with the compact bump exp(-1/(1-|x/eps|^2)).

    The kernel is renormalized on the grid so its discrete mass is exactly
    one; constants are reproduced and the max norm never grows.  The field
    is extended by zero outside the domain.  Requires eps >= 2h.
    """
    spec = f.spec
    if eps < 2.0 * spec.h - 1e-12:
        raise ResolutionError(f"eps = {eps} below resolution floor 2h = {2 * spec.h}")
    k = int(math.ceil(eps / spec.h))
    rng = np.arange(-k, k + 1) * spec.h
    mesh = np.meshgrid(*([rng] * spec.n), indexing="ij")
    rr = np.sqrt(sum(m * m for m in mesh)) / eps
    w = _bump_profile(rr)
    w /= w.sum()

    def run(vals):
        vals = np.where(f.mask, vals, 0.0)
        if w.size > 1500:
            out = signal.fftconvolve(vals, w, mode="same")
        else:
            out = ndimage.correlate(vals, w, mode="constant", cval=0.0)
        return np.where(f.mask, out, 0.0)

    if isinstance(f, VectorField):
        comps = np.stack([run(f.values[..., j]) for j in range(f.m)], axis=-1)
        return VectorField(spec, comps, f.mask.copy())
    return ScalarField(spec, run(f.values), f.mask.copy())


def zorko_distance(f, eps, params, family):
    """Morrey (p, mu) norm of f - f_eps; mu defaults to params.lam."""
    mu = params.mu if params.mu is not None else params.lam
    smooth = mollify(f, eps)
    diff = f.with_values(f.values - smooth.values)
    return morrey_norm(diff, params.with_(lam=mu, mu=None), family).value


# -- representation formula --------------------------------------------------


@dataclass
class ReconstructionResult:
    field: ScalarField
    raw: ScalarField
    constant: float  # empirical ratio; None when the input is ~ 0
    support_warning: bool

    @property
    def absent(self):
        return self.constant is None


def _directional_sum(hf, chunk=512):
    """sum_y (x - y) . grad h(y) |x - y|^{-n} h^n, skipping the x = y term.

    The dot product is expanded as x . grad h(y) - y . grad h(y) so no
    (chunk, N, n) intermediate is ever built.
    """
    spec = hf.spec
    n = spec.n
    grads = []
    for a in range(n):
        gma = tuple(1 if i == a else 0 for i in range(n))
        grads.append(derivative(hf, gma).values.reshape(-1))
    G = np.stack(grads, axis=-1)  # (N, n)
    pts = spec.coords().reshape(-1, n)
    pts_sq = (pts * pts).sum(axis=1)
    yg = (pts * G).sum(axis=1)  # y . grad h(y)
    out = np.empty(len(pts))
    for lo in range(0, len(pts), chunk):
        hi = min(lo + chunk, len(pts))
        d2 = _pairwise_d2(pts[lo:hi], pts, pts_sq)
        idx = np.arange(lo, hi)
        d2[idx - lo, idx] = 1.0
        K = _kernel_of_r2(d2, -n / 2.0)
        K[idx - lo, idx] = 0.0
        dot = pts[lo:hi] @ G.T - yg[None, :]
        out[lo:hi] = (dot * K).sum(axis=1)
    return out * spec.h**n


def representation_reconstruct(hf, k=2):
    """Rebuild a smooth compactly supported h from its derivative data.

    k = 2 applies the order-alpha = 2 potential to -Laplace(h); k = 1 uses
    the directional kernel (x - y) . grad h(y) / |x - y|^n.  The empirical
    constant is the mean of h / raw over nodes with |h| >= 10% of max |h|;
    the classical value is 1/((n-2) omega_{n-1}) for k = 2 and
    1/omega_{n-1} for k = 1.  A support warning fires when |h| on the
    boundary exceeds 1e-3 of its max (truncation bites).
    """
    spec = hf.spec
    n = spec.n
    if k not in (1, 2):
        raise ParameterError(f"derivative order k must be 1 or 2, got {k}")
    if k == 2 and n <= 2:
        raise ParameterError("k = 2 reconstruction needs n >= 3")
    vmax = float(np.abs(hf.values[hf.mask]).max()) if hf.mask.any() else 0.0
    boundary = np.zeros(spec.shape, dtype=bool)
    for a in range(n):
        sl = [slice(None)] * n
        sl[a] = 0
        boundary[tuple(sl)] = True
        sl[a] = -1
        boundary[tuple(sl)] = True
    support_warning = bool(vmax > 0 and np.abs(hf.values[boundary]).max() > 1e-3 * vmax)
    if k == 2:
        lap = np.zeros(spec.shape)
        for a in range(n):
            gma = tuple(2 if i == a else 0 for i in range(n))
            lap += derivative(hf, gma).values
        raw = riesz_potential(ScalarField(spec, -lap, hf.mask.copy()), alpha=2.0)
    else:
        raw = ScalarField(spec, _directional_sum(hf).reshape(spec.shape), hf.mask.copy())
    if vmax == 0.0:
        return ReconstructionResult(hf.with_values(np.zeros(spec.shape)), raw, None, support_warning)
    sel = hf.mask & (np.abs(hf.values) >= 0.1 * vmax) & (np.abs(raw.values) > 0)
    if not sel.any():
        return ReconstructionResult(hf.with_values(np.zeros(spec.shape)), raw, None, support_warning)
    constant = float(np.mean(hf.values[sel] / raw.values[sel]))
    rebuilt = raw.values * constant
    return ReconstructionResult(hf.with_values(rebuilt), raw, constant, support_warning)
