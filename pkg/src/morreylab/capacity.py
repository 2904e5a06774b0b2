"""Capacities and covering measures on grid node sets.

Morrey capacity is solved as a convex minimax: minimize the largest scaled
ball p-mean of f subject to f >= 0 and a pointwise lower bound on the
Riesz potential over the target set.  A projected subgradient loop with
feasibility rescaling yields certified upper bounds; Hausdorff content is
a weighted set cover solved greedily (exactly for tiny pools).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import MorreyParams, BallFamily, ParameterError, _pairwise_d2, _kernel_of_r2, _equal_volume_radius
from .grid import Ball, GridError, ScalarField, ball_volume, sphere_surface

__all__ = [
    "CapacityConfigError",
    "FitError",
    "SolverOptions",
    "CapacityProblem",
    "CapacityResult",
    "morrey_capacity",
    "ball_capacity_scaling",
    "CoverSolution",
    "default_ball_pool",
    "hausdorff_content",
    "box_dimension",
    "IsocapReport",
    "isocapacitary_check",
]


class CapacityConfigError(ValueError):
    pass


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 600
    tolerance: float = 1e-3
    probe_limit: int = 160
    first_step_fraction: float = 0.25  # first step changes the objective by <= this
    stall_window: int = 60  # stop once best value improves < tolerance over this many steps


@dataclass(frozen=True)
class CapacityProblem:
    """Target node set E (boolean mask over the grid), exponents, domain.

    ``regime_flag`` is set when alpha*p > lam: shrinking sets then lose
    their power-law capacity scaling and results are outside the scaling
    regime this solver is tested in.
    """

    spec: object
    E: object  # boolean array of spec.shape
    params: MorreyParams
    family: BallFamily
    solver: SolverOptions = SolverOptions()

    def __post_init__(self):
        E = np.asarray(self.E, dtype=bool)
        if E.shape != self.spec.shape:
            raise CapacityConfigError("target mask shape does not match the grid")
        object.__setattr__(self, "E", E)
        if self.params.alpha is None:
            raise CapacityConfigError("capacity needs params.alpha")
        if self.family.spec != self.spec:
            raise CapacityConfigError("ball family belongs to a different grid")

    @property
    def regime_flag(self):
        return self.params.alpha * self.params.p > self.params.lam


@dataclass
class CapacityResult:
    value: float
    certificate: ScalarField
    feasibility_margin: float
    history: list
    start_label: str = ""

    def __float__(self):
        return self.value


def _family_ball_indices(spec, family):
    """Flat node-index arrays per admissible family ball, plus weights."""
    coords = spec.coords().reshape(-1, spec.n)
    out = []
    for ctr in family.centers:
        d2 = ((coords - np.asarray(ctr)) ** 2).sum(axis=-1)
        for r in family.radii:
            if not spec.contains_ball(Ball(ctr, r)):
                continue
            idx = np.nonzero(d2 < r * r)[0]
            if len(idx):
                out.append((r, idx))
    if not out:
        raise CapacityConfigError("ball family has no admissible balls")
    return out


def _objective(fvals, balls, p, lam, hn, n):
    best = -1.0
    best_k = 0
    for k, (r, idx) in enumerate(balls):
        q = r**lam * float((fvals[idx] ** p).sum()) * hn / ball_volume(n, r)
        if q > best:
            best, best_k = q, k
    return best, best_k


def _kernel_rows(spec, row_pts, alpha, col_pts=None, chunk=256):
    """Quadrature weights of I_alpha at row_pts against the column nodes.

    Row points are nodes of the same grid; a column holding the row's own
    node gets the equal-volume self-cell weight.  Columns default to every
    node of the grid.
    """
    n = spec.n
    pts = spec.coords().reshape(-1, n) if col_pts is None else col_pts
    pts_sq = (pts * pts).sum(axis=1)
    hn = spec.h**n
    expo = (alpha - n) / 2.0
    rho = _equal_volume_radius(n, spec.h)
    self_w = sphere_surface(n) * rho**alpha / alpha
    rows = np.empty((len(row_pts), len(pts)))
    for lo in range(0, len(row_pts), chunk):
        hi = min(lo + chunk, len(row_pts))
        d2 = _pairwise_d2(row_pts[lo:hi], pts, pts_sq)
        own = d2 < (0.5 * spec.h) ** 2  # the row's own node
        d2s = np.where(own, 1.0, d2)
        K = _kernel_of_r2(d2s, expo) * hn
        K[own] = self_w
        rows[lo:hi] = K
    return rows


def _initial_fields(coords, E_pts, centroid, radius, alpha, h):
    """Three starts: wide indicator, power decay, tight indicator."""
    d = np.sqrt(((coords - centroid) ** 2).sum(axis=-1))
    wide = (d < 2.0 * radius + 2.0 * h).astype(float)
    power = (d + h) ** -alpha
    dE = np.full(len(coords), np.inf)
    # distance to E via chunked minimum (E is usually small)
    for lo in range(0, len(E_pts), 512):
        blk = E_pts[lo : lo + 512]
        d2 = _pairwise_d2(coords, blk, (blk * blk).sum(axis=1))
        np.minimum(dE, d2.min(axis=1), out=dE)
    tight = (dE < (2.0 * h) ** 2).astype(float)
    return [("wide_indicator", wide), ("power_decay", power), ("tight_indicator", tight)]


def morrey_capacity(problem):
    """Certified upper bound on the discrete Morrey capacity of E.

    Projected subgradient on f >= 0 with the diminishing schedule
    s_k = s0/sqrt(k); feasibility (I_alpha f >= 1 on E) is restored after
    every step by rescaling against a deterministic probe subset of E, and
    the final iterate is re-certified against all of E exactly.  The
    objective is p-homogeneous, so rescaling maps values by m**(-p).
    """
    spec, params, opts = problem.spec, problem.params, problem.solver
    n, p, lam, alpha = spec.n, params.p, params.lam, params.alpha
    hn = spec.h**n
    E_flat = np.nonzero(problem.E.reshape(-1))[0]
    zero = ScalarField(spec, np.zeros(spec.shape), np.ones(spec.shape, dtype=bool))
    if len(E_flat) == 0:
        return CapacityResult(0.0, zero, float("inf"), [0.0], "empty")
    coords = spec.coords().reshape(-1, n)
    E_pts = coords[E_flat]
    centroid = E_pts.mean(axis=0)
    radius = float(np.sqrt(((E_pts - centroid) ** 2).sum(axis=1).max()))
    balls = _family_ball_indices(spec, problem.family)

    # mass outside every family ball is invisible to the objective, so the
    # minimax degenerates unless f lives on the union of the family balls
    support = np.unique(np.concatenate([idx for _, idx in balls]))
    balls = [(r, np.searchsorted(support, idx)) for r, idx in balls]
    sup_pts = coords[support]

    # deterministic probe subset of E for in-loop feasibility
    if len(E_flat) > opts.probe_limit:
        sel = np.unique(np.linspace(0, len(E_flat) - 1, opts.probe_limit).astype(int))
    else:
        sel = np.arange(len(E_flat))
    K_probe = _kernel_rows(spec, E_pts[sel], alpha, col_pts=sup_pts)

    best = None
    for label, f0 in _initial_fields(sup_pts, E_pts, centroid, radius, alpha, spec.h):
        f = f0.copy()
        m = float((K_probe @ f).min())
        if m <= 0.0:
            continue
        f /= m
        J, _ = _objective(f, balls, p, lam, hn, n)
        history = [J]
        best_J, best_f = J, f.copy()
        s0 = None
        last_mark = J
        for k in range(1, opts.max_iterations + 1):
            J, bk = _objective(f, balls, p, lam, hn, n)
            r, idx = balls[bk]
            g = np.zeros_like(f)
            g[idx] = r**lam * p * f[idx] ** (p - 1.0) * hn / ball_volume(n, r)
            gnorm2 = float((g * g).sum())
            if gnorm2 == 0.0:
                break
            if s0 is None:
                s0 = opts.first_step_fraction * J / gnorm2
            f = np.maximum(f - (s0 / math.sqrt(k)) * g, 0.0)
            m = float((K_probe @ f).min())
            if m <= 0.0:
                break
            f /= m
            J, _ = _objective(f, balls, p, lam, hn, n)
            if J < best_J:
                best_J, best_f = J, f.copy()
            history.append(best_J)
            if k % opts.stall_window == 0:
                if last_mark - best_J < opts.tolerance * best_J:
                    break
                last_mark = best_J
        if best is None or best_J < best[1]:
            best = (label, best_J, best_f, history)

    if best is None:
        raise CapacityConfigError("no feasible iterate: potential vanishes on E")
    label, _, f, history = best
    # exact certification over all of E
    m_full = np.inf
    for lo in range(0, len(E_flat), 256):
        rows = _kernel_rows(spec, E_pts[lo : lo + 256], alpha, col_pts=sup_pts)
        m_full = min(m_full, float((rows @ f).min()))
    f = f / m_full
    J, _ = _objective(f, balls, p, lam, hn, n)
    history.append(J)
    full = np.zeros(spec.node_count)
    full[support] = f
    cert = ScalarField(spec, full.reshape(spec.shape), np.ones(spec.shape, dtype=bool))
    return CapacityResult(J, cert, 1.0, history, label)


def ball_capacity_scaling(spec, params, radii, family=None, solver=SolverOptions(), center=None):
    """Capacity of concentric balls across a radius ladder, with the fit.

    Returns (values, slope): slope of log C vs log r when p < lam/alpha,
    and of log C vs log(-ln r) at the borderline p = lam/alpha (expected
    -p there).
    """
    if len(radii) < 3:
        raise FitError("need at least 3 radii to fit a scaling exponent")
    if not 1.0 < params.p <= params.lam / params.alpha:
        raise ParameterError("scaling fit needs 1 < p <= lam/alpha")
    if center is None:
        center = spec.domain_center
    if family is None:
        family = BallFamily.dyadic(spec, r0=spec.inradius)
    from .grid import ball_node_mask

    values = []
    for r in sorted(radii, reverse=True):
        E = ball_node_mask(spec, Ball(center, r))
        res = morrey_capacity(CapacityProblem(spec, E, params, family, solver))
        values.append((float(r), res.value))
    logC = np.log([v for _, v in values])
    if abs(params.p - params.lam / params.alpha) < 1e-12:
        x = np.log([-math.log(r) for r, _ in values])
    else:
        x = np.log([r for r, _ in values])
    slope = float(np.polyfit(x, logC, 1)[0])
    return values, slope


# -- Hausdorff content --------------------------------------------------------


@dataclass
class CoverSolution:
    balls: list
    content_value: float
    method: str


def default_ball_pool(spec, target_mask, max_radius=None, stride=2):
    """Dyadic balls centered at a strided subset of target nodes."""
    h = spec.h
    if max_radius is None:
        max_radius = spec.inradius
    radii = []
    r = 2.0 * h
    while r <= max_radius + 1e-12:
        radii.append(r)
        r *= 2.0
    coords = spec.coords()[np.asarray(target_mask, dtype=bool)]
    centers = coords[::stride] if len(coords) > stride else coords
    return [Ball(tuple(c), r) for c in centers for r in radii]


def _cover_matrix(spec, target_idx, pool):
    coords = spec.coords().reshape(-1, spec.n)[target_idx]
    cover = np.zeros((len(pool), len(target_idx)), dtype=bool)
    for j, b in enumerate(pool):
        d2 = ((coords - np.asarray(b.center)) ** 2).sum(axis=-1)
        cover[j] = d2 < b.radius**2
    return cover


def _greedy_cover(pool, cover, d):
    need = np.ones(cover.shape[1], dtype=bool)
    costs = np.array([b.radius**d for b in pool])
    picked = []
    while need.any():
        news = (cover & need).sum(axis=1)
        gains = news / costs
        top = gains.max()
        if top <= 0.0:
            raise CapacityConfigError("candidate pool does not cover the target")
        # among equal gain-per-cost, prefer the ball retiring more nodes
        tied = np.nonzero(gains >= top * (1.0 - 1e-12))[0]
        j = int(tied[np.argmax(news[tied])])
        picked.append(j)
        need &= ~cover[j]
    # prune picks made redundant by later ones (reverse order)
    for j in sorted(picked, key=lambda j: -costs[j]):
        rest = [i for i in picked if i != j]
        if rest and not (cover[j] & ~np.logical_or.reduce(cover[rest])).any():
            picked = rest
    total = float(costs[picked].sum())
    # a single covering ball beats a wasteful patchwork surprisingly often
    singles = np.nonzero(cover.all(axis=1))[0]
    if len(singles):
        s = singles[np.argmin(costs[singles])]
        if costs[s] < total:
            picked, total = [int(s)], float(costs[s])
    return CoverSolution([pool[j] for j in picked], total, "greedy")


def _exact_cover(pool, cover, d):
    """Cheapest subcover by exhaustive enumeration (pool <= 12)."""
    m = len(pool)
    costs = np.array([b.radius**d for b in pool])
    full = (1 << cover.shape[1]) - 1
    masks = []
    for j in range(m):
        bits = 0
        for i in np.nonzero(cover[j])[0]:
            bits |= 1 << int(i)
        masks.append(bits)
    best_cost, best_set = math.inf, None
    for sub in range(1, 1 << m):
        cost = 0.0
        bits = 0
        js = []
        for j in range(m):
            if sub >> j & 1:
                cost += costs[j]
                bits |= masks[j]
                js.append(j)
        if bits == full and cost < best_cost:
            best_cost, best_set = cost, js
    if best_set is None:
        raise CapacityConfigError("candidate pool does not cover the target")
    return CoverSolution([pool[j] for j in best_set], best_cost, "exact")


def hausdorff_content(spec, target_mask, d, pool=None):
    """Greedy weighted set cover of the target nodes; exact for <= 12 balls.

    Content is the sum of r^d over chosen balls; the greedy answer is
    replaced by the exact optimum whenever enumeration is affordable.
    """
    if not 0.0 < d <= spec.n:
        raise ParameterError(f"need 0 < d <= n, got d = {d}")
    target_idx = np.nonzero(np.asarray(target_mask, dtype=bool).reshape(-1))[0]
    if len(target_idx) == 0:
        return CoverSolution([], 0.0, "empty")
    if pool is None:
        pool = default_ball_pool(spec, target_mask)
    cover = _cover_matrix(spec, target_idx, pool)
    greedy = _greedy_cover(pool, cover, d)
    if len(pool) <= 12:
        exact = _exact_cover(pool, cover, d)
        if exact.content_value <= greedy.content_value:
            return exact
    return greedy


def box_dimension(spec, target_mask, scales=None):
    """Box-counting slope over anchored dyadic boxes.

    N(delta) counts boxes of the lattice-aligned delta-grid meeting the
    target; the dimension estimate is the least-squares slope of log N
    against log(1/delta) over >= 3 scales, each >= 2h.
    """
    target_idx = np.nonzero(np.asarray(target_mask, dtype=bool).reshape(-1))[0]
    if len(target_idx) == 0:
        raise FitError("box dimension of an empty set is undefined")
    coords = spec.coords().reshape(-1, spec.n)[target_idx]
    lo = np.array([b[0] for b in spec.bounds])
    if scales is None:
        scales = [2.0 * spec.h * 2.0**k for k in range(3)]
    scales = [float(s) for s in scales]
    usable = [s for s in scales if s >= 2.0 * spec.h - 1e-12]
    if len(usable) < 3:
        raise FitError("need >= 3 scales, each >= 2h")
    counts = []
    for s in usable:
        idx = np.floor((coords - lo) / s).astype(np.int64)
        counts.append(len(np.unique(idx, axis=0)))
    slope = float(np.polyfit(np.log([1.0 / s for s in usable]), np.log(counts), 1)[0])
    return slope


# -- isocapacitary inequality -------------------------------------------------


@dataclass
class IsocapReport:
    case: str
    rows: list  # (label, content, capacity, ratio or transformed pair)
    bound_ratio: float = None
    decreasing: bool = None
    convex: bool = None
    bound_witness: float = None  # largest c with content <= exp(-c * capacity^{q/p})
    vacuous: bool = False


def _validate_regime(params, d):
    gap = params.lam - params.alpha * params.p
    if not (0.0 <= gap < d <= params.n):
        raise CapacityConfigError(
            f"isocapacitary regime violated: need 0 <= lam - alpha*p < d <= n, "
            f"got lam - alpha*p = {gap}, d = {d}, n = {params.n}"
        )
    return gap


def isocapacitary_check(spec, targets, params, d, q, family=None, pool=None, solver=SolverOptions()):
    """Content-vs-capacity comparison over a family of target sets.

    Case (i), p < lam/alpha and 0 < q < d p/(lam - alpha p): the ratio
    content / capacity^{q/p} must stay within one multiplicative constant
    across the family (reported as max/min).  Case (ii), p = lam/alpha and
    q <= 1: the bound is existential (content <= exp(-c*capacity^{q/p})
    for some c > 0), so the report carries the largest admissible witness
    c together with the decay shape of log content along the shrinking
    family; the convexity flag is observational data only (exact ball-
    family laws come out concave in capacity^{q/p}).
    """
    gap = _validate_regime(params, d)
    borderline = abs(params.p - params.lam / params.alpha) < 1e-12
    if borderline:
        if not 0.0 < q <= 1.0:
            raise CapacityConfigError("case (ii) needs 0 < q <= 1")
        case = "ii"
    else:
        if gap <= 0.0 or not 0.0 < q < d * params.p / gap:
            raise CapacityConfigError("case (i) needs 0 < q < d*p/(lam - alpha*p)")
        case = "i"
    if family is None:
        family = BallFamily.dyadic(spec, r0=spec.inradius)
    rows = []
    for label, mask in targets:
        if not np.asarray(mask, dtype=bool).any():
            continue
        cov = hausdorff_content(spec, mask, d, pool=pool)
        cap = morrey_capacity(CapacityProblem(spec, mask, params, family, solver))
        rows.append((label, cov.content_value, cap.value))
    if not rows:
        return IsocapReport(case, [], vacuous=True)
    if case == "i":
        ratios = [c / cap ** (q / params.p) for _, c, cap in rows]
        return IsocapReport(case, [r + (ratio,) for r, ratio in zip(rows, ratios)],
                            bound_ratio=max(ratios) / min(ratios))
    # case (ii): order by shrinking capacity, inspect log-content shape
    rows = sorted(rows, key=lambda r: -r[2])
    xs = [cap ** (q / params.p) for _, _, cap in rows]
    ys = [math.log(c) for _, c, _ in rows]
    decreasing = all(ys[i + 1] < ys[i] for i in range(len(ys) - 1))
    order = np.argsort(xs)
    xs_s = np.array(xs)[order]
    ys_s = np.array(ys)[order]
    sl = np.diff(ys_s) / np.diff(xs_s)
    convex = bool((np.diff(sl) >= -1e-9).all())
    # witness c with content <= exp(-c * capacity^{q/p}) on sub-unit-content rows
    below = [(-y / x) for x, y in zip(xs, ys) if y < 0.0]
    witness = min(below) if below else None
    return IsocapReport(case, [r + ((x, y),) for r, x, y in zip(rows, xs, ys)],
                        decreasing=decreasing, convex=convex, bound_witness=witness)
