"""Detection and measurement of singular sets of sampled vector fields.

Three detectors, one per characterization of a singular point:

* :func:`oscillation_scan` -- mean oscillation of ``u`` over shrinking
  balls stays bounded away from zero (the ``S`` sets);
* :func:`unbounded_average_scan` -- ball averages of ``u`` blow up as the
  radius shrinks (the ``T`` set);
* :func:`riesz_divergence_scan` -- the first-order Riesz potential of
  ``|Du|`` at a probe point keeps growing as the grid is refined (the
  ``R`` set).

The underlying conditions are asymptotic (limsup / sup over all radii,
divergence of an integral).  On a finite grid each becomes a trend fit
over a dyadic radius ladder, or growth across a resolution ladder, with
fixed thresholds collected in :class:`ScanThresholds`.  The thresholds
are calibrated so that the smooth fixtures produce no flags at all and
the canonical point singularity x/|x| is flagged at exactly the nodes
whose cells touch the singular locus; they are configuration, not
theory, and are documented field by field.

A point locus never sits on a node: nodes are cell centers, so a
singular point at a cell corner is represented by the up-to-2^n nodes
whose closed cells share that corner (8 nodes in three dimensions).
Detected sets are node sets and are compared against loci in that sense.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .analysis import ParameterError, _ball_sum, riesz_potential_at
from .capacity import FitError, box_dimension
from .grid import ScalarField, gradient

__all__ = [
    "ScanError",
    "ScanThresholds",
    "OscillationProfile",
    "AverageProfile",
    "RieszProbePlan",
    "RieszScan",
    "SingularReport",
    "oscillation_scan",
    "unbounded_average_scan",
    "singular_clusters",
    "riesz_probe_plan",
    "riesz_divergence_scan",
    "classify_and_report",
]


class ScanError(ValueError):
    pass


@dataclass(frozen=True)
class ScanThresholds:
    """Finite-resolution surrogates for the asymptotic definitions.

    osc_slope
        Fitted slope of log osc vs log(1/r); a node is oscillation-
        singular when the slope is >= osc_slope (no decay).  Smooth
        points show -2; the x/|x| singular cell shows -0.10 on the
        half-integer lattice at every resolution (the field is
        0-homogeneous, so the profile is scale-invariant), while its
        nearest smooth neighbors show -0.39 and steeper.  -0.25 is the
        log-midpoint of that gap.
    osc_floor
        The last (smallest-radius) oscillation must also reach this
        absolute floor, so round-off plateaus are never flagged.
    avg_slope
        Fitted slope of log |ball average| vs log r; averages growing
        like r^(-s) show slope -s, and s >= 0.1 is flagged.
    avg_ceiling
        The ladder maximum of |average| must exceed avg_ceiling times
        the median of |u| before a node can be flagged: averages of a
        field that never leaves its typical range are not unbounded,
        whatever their trend.
    riesz_increment
        Minimum growth of the probe potential per halving of h.  The
        genuinely divergent probes measured here grow by 12.3 (point
        singularity, n=3) and 24.6 (line singularity, n=4) per halving;
        stable probes drift by well under 1%.
    stable_tolerance
        Relative drift across the resolution ladder below which a probe
        counts as stabilized.
    """

    osc_slope: float = -0.25
    osc_floor: float = 1e-3
    avg_slope: float = -0.1
    avg_ceiling: float = 1.2
    riesz_increment: float = 3.0
    stable_tolerance: float = 0.01


def _validate_ladder(spec, radii):
    radii = [float(r) for r in radii]
    if len(radii) < 2:
        raise ScanError("ladder needs at least 2 radii for a trend fit")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ScanError("ladder radii must be strictly decreasing")
    if radii[-1] < 2.0 * spec.h:
        raise ScanError(f"smallest ladder radius {radii[-1]} is below the resolution floor 2h = {2 * spec.h}")
    return tuple(radii)


def _ball_stats(u, radii):
    """Per-node ball means of u and of |u|^2, with validity masks.

    Means use exact node counts; a node is valid at radius r only when
    the continuum ball B_r(node) lies inside the domain, so the counts
    near the boundary never matter.
    """
    spec = u.spec
    vals = u.components()
    m = vals.shape[-1]
    ones = np.ones(spec.shape)
    allowed = spec.allowed_radius()
    means, mean_sq, valid = [], [], []
    for r in radii:
        cnt = _ball_sum(ones, spec, r)
        mu = np.stack([_ball_sum(vals[..., j], spec, r) / cnt for j in range(m)], axis=-1)
        means.append(mu)
        mean_sq.append(_ball_sum((vals**2).sum(axis=-1), spec, r) / cnt)
        valid.append(allowed >= r)
    return means, mean_sq, np.stack(valid, axis=-1)


def _ladder_slopes(radii, table):
    """Least-squares slope of log table vs log r along the last axis."""
    logr = np.log(np.asarray(radii))
    y = np.log(np.maximum(table, 1e-300))
    cols = y.reshape(-1, len(radii)).T
    return np.polyfit(logr, cols, 1)[0].reshape(table.shape[:-1])


@dataclass
class OscillationProfile:
    """osc(x0, r) = mean over B_r(x0) of |u - (ball mean)|^p_hat."""

    spec: object
    p_hat: float
    radii: tuple
    osc: np.ndarray  # (*shape, len(radii))
    valid: np.ndarray  # (*shape, len(radii)) bool

    def slopes(self):
        return _ladder_slopes(self.radii, self.osc)

    def singular_mask(self, thresholds=ScanThresholds()):
        """Nodes whose oscillation does not decay down the ladder.

        The fit is vs log(1/r): decay toward small radii is a negative
        slope, and a node is singular when slope >= osc_slope while the
        smallest-radius oscillation still clears osc_floor.
        """
        ok = self.valid.all(axis=-1)
        slope_inv_r = -self.slopes()
        return ok & (slope_inv_r >= thresholds.osc_slope) & (self.osc[..., -1] >= thresholds.osc_floor)


def oscillation_scan(u, p_hat, radii):
    """Mean oscillation of u over every admissible ball of the ladder.

    For p_hat = 2 the scan is three convolutions per radius via the
    variance identity mean|u - m|^2 = mean|u|^2 - |m|^2.  Other
    exponents accumulate |u(x + d) - m(x)|^p_hat over the ball stencil
    one shift at a time, which costs a full-grid pass per stencil node;
    keep those ladders short.  Shifts wrap around the array edges, but
    wrapped values only ever reach nodes whose ball leaves the domain,
    and those are already masked invalid.
    """
    spec = u.spec
    radii = _validate_ladder(spec, radii)
    if p_hat < 1.0:
        raise ParameterError(f"oscillation exponent must be >= 1, got {p_hat}")
    means, mean_sq, valid = _ball_stats(u, radii)
    layers = []
    if p_hat == 2.0:
        for mu, msq in zip(means, mean_sq):
            layers.append(np.maximum(msq - (mu**2).sum(axis=-1), 0.0))
    else:
        vals = u.components()
        ones = np.ones(spec.shape)
        for r, mu in zip(radii, means):
            k = int(np.ceil(r / spec.h)) - 1
            offsets = np.argwhere(np.ones((2 * k + 1,) * spec.n)) - k
            offsets = offsets[(offsets**2).sum(axis=1) < (r / spec.h) ** 2]
            acc = np.zeros(spec.shape)
            for d in offsets:
                shifted = np.roll(vals, shift=tuple(-d), axis=tuple(range(spec.n)))
                acc += ((shifted - mu) ** 2).sum(axis=-1) ** (p_hat / 2.0)
            layers.append(acc / _ball_sum(ones, spec, r))
    return OscillationProfile(spec, float(p_hat), radii, np.stack(layers, axis=-1), valid)


@dataclass
class AverageProfile:
    """|ball average of u| per node across the ladder."""

    spec: object
    radii: tuple
    magnitude: np.ndarray  # (*shape, len(radii))
    valid: np.ndarray
    scale: float  # median |u| over the grid, the 'typical value' yardstick

    def slopes(self):
        return _ladder_slopes(self.radii, self.magnitude)

    def divergent_mask(self, thresholds=ScanThresholds()):
        """Nodes whose averages grow as r shrinks and leave the typical range."""
        ok = self.valid.all(axis=-1)
        peak = self.magnitude.max(axis=-1)
        return ok & (self.slopes() <= thresholds.avg_slope) & (peak >= thresholds.avg_ceiling * self.scale)


def unbounded_average_scan(u, radii):
    """Record max |ball average| growth per node; feeds the T set.

    Detection is not invariant under adding a constant to u (the
    averages shift with it) -- that matches the definition, which is a
    statement about u itself, unlike the oscillation scan, which
    subtracts the local mean and is shift-invariant.
    """
    spec = u.spec
    radii = _validate_ladder(spec, radii)
    means, _, valid = _ball_stats(u, radii)
    mags = np.stack([np.sqrt((mu**2).sum(axis=-1)) for mu in means], axis=-1)
    scale = float(np.median(u.magnitude()[u.mask])) if u.mask.any() else 0.0
    return AverageProfile(spec, radii, mags, valid, scale)


def singular_clusters(spec, mask):
    """Connected components of a flagged-node mask (full 3^n adjacency).

    Returns (flat node indices, centroid) per cluster, in raster order
    of each cluster's first node, so downstream artifacts are stable.
    """
    if mask.shape != spec.shape:
        raise ScanError(f"mask shape {mask.shape} does not match grid {spec.shape}")
    labels, count = ndimage.label(mask, structure=np.ones((3,) * spec.n, dtype=bool))
    coords = spec.coords().reshape(-1, spec.n)
    flat = labels.reshape(-1)
    out = []
    for lab in range(1, count + 1):
        idx = np.nonzero(flat == lab)[0]
        out.append((idx, coords[idx].mean(axis=0)))
    return out


@dataclass
class RieszProbePlan:
    """Probe points for the Riesz detector: cluster centroids + controls.

    Controls sit at fixed multiples of h away from each centroid along a
    coordinate axis chosen to keep them clear of every flagged node, so
    'off-locus' is a measured distance, not an assumption.
    """

    points: np.ndarray  # (P, n)
    roles: tuple  # "cluster" | "control"
    cluster_ids: tuple  # index into clusters, controls carry their anchor's id
    clusters: list  # (flat indices, centroid) pairs


def riesz_probe_plan(spec, mask, control_distances=(8.0, 16.0)):
    """Build the probe set for a detected mask.

    control_distances are in units of h.  Every control must keep at
    least 3/4 of its nominal distance from every flagged node and stay
    2h inside the domain; axes and signs are tried in a fixed order and
    the first admissible slot is taken, which keeps the plan
    deterministic.  A distance that fits nowhere is dropped, but a
    cluster that ends up with no control at all is an error -- the
    detector's no-false-positive evidence lives in the controls.
    """
    clusters = singular_clusters(spec, mask)
    if not clusters:
        raise ScanError("no clusters to probe; the detected set is empty")
    coords = spec.coords().reshape(-1, spec.n)
    flagged = coords[mask.reshape(-1)]
    pts, roles, ids = [], [], []
    for ci, (_, centroid) in enumerate(clusters):
        pts.append(centroid)
        roles.append("cluster")
        ids.append(ci)
        placed_any = False
        for dist in control_distances:
            placed = False
            for axis in range(spec.n):
                for sign in (1.0, -1.0):
                    probe = centroid.copy()
                    probe[axis] += sign * dist * spec.h
                    lo, hi = spec.bounds[axis]
                    if not (lo + 2 * spec.h <= probe[axis] <= hi - 2 * spec.h):
                        continue
                    gap = np.sqrt(((flagged - probe) ** 2).sum(axis=1)).min()
                    if gap >= 0.75 * dist * spec.h:
                        pts.append(probe)
                        roles.append("control")
                        ids.append(ci)
                        placed = True
                        break
                if placed:
                    break
            placed_any = placed_any or placed
        if not placed_any:
            raise ScanError(f"no admissible control for cluster {ci}")
    return RieszProbePlan(np.array(pts), tuple(roles), tuple(ids), clusters)


@dataclass
class RieszScan:
    """I_alpha(|Du|) at shared probes across a resolution ladder."""

    probes: np.ndarray  # (P, n)
    resolutions: tuple  # cells per axis, coarse to fine
    cell_sizes: tuple
    values: np.ndarray  # (P, K)
    alpha: float

    def increments(self):
        """Growth per halving of h between consecutive resolutions."""
        steps = np.log2(np.asarray(self.cell_sizes[:-1]) / np.asarray(self.cell_sizes[1:]))
        return np.diff(self.values, axis=1) / steps

    def divergent_mask(self, thresholds=ScanThresholds()):
        return (self.increments() >= thresholds.riesz_increment).all(axis=1)

    def stable_mask(self, thresholds=ScanThresholds()):
        drift = np.abs(np.diff(self.values, axis=1)) / np.maximum(np.abs(self.values[:, 1:]), 1e-300)
        return (drift <= thresholds.stable_tolerance).all(axis=1)


def riesz_divergence_scan(fields, probes, alpha=1.0):
    """Evaluate I_alpha(|Du|) at probes on every grid of a resolution ladder.

    A probe is divergent when the value keeps growing by at least the
    configured increment per halving of h: multi-resolution growth, not
    a large single value, is the divergence signal, so a large but
    convergent potential never flags.
    """
    if len(fields) < 2:
        raise ScanError("riesz divergence needs at least 2 resolutions")
    base = fields[0].spec
    for f in fields[1:]:
        if f.spec.n != base.n or f.spec.bounds != base.bounds:
            raise ScanError("resolution ladder must share one continuum domain")
    hs = [f.spec.h for f in fields]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ScanError("fields must be ordered coarse to fine")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    cols = []
    for f in fields:
        g, _ = gradient(f)
        mag = np.sqrt((g**2).sum(axis=(-2, -1)))
        cols.append(riesz_potential_at(ScalarField(f.spec, mag), alpha, probes))
    return RieszScan(
        probes,
        tuple(f.spec.cells_per_axis for f in fields),
        tuple(f.spec.h for f in fields),
        np.stack(cols, axis=1),
        float(alpha),
    )


def _dimension_entry(spec, mask):
    if not mask.any():
        return "empty set"
    try:
        return float(box_dimension(spec, mask))
    except FitError:
        return "unresolved"


@dataclass
class SingularReport:
    """Classified node sets with dimension estimates and the S/R cross-check."""

    spec: object
    thresholds: ScanThresholds
    S: np.ndarray  # sorted flat indices
    T: np.ndarray
    R: np.ndarray  # flat indices of clusters confirmed by the Riesz detector
    dimensions: dict
    probe_table: list = field(default_factory=list)
    cross_check: object = None  # True/False when both detectors ran, else None

    def as_dict(self):
        coords = self.spec.coords().reshape(-1, self.spec.n)
        def node_block(idx):
            return {
                "count": int(len(idx)),
                "nodes": [int(i) for i in idx],
                "coordinates": [[float(c) for c in coords[i]] for i in idx],
            }
        return {
            "grid": {"n": self.spec.n, "cells_per_axis": self.spec.cells_per_axis, "h": self.spec.h},
            "thresholds": {
                "osc_slope": self.thresholds.osc_slope,
                "osc_floor": self.thresholds.osc_floor,
                "avg_slope": self.thresholds.avg_slope,
                "avg_ceiling": self.thresholds.avg_ceiling,
                "riesz_increment": self.thresholds.riesz_increment,
                "stable_tolerance": self.thresholds.stable_tolerance,
            },
            "S": node_block(self.S),
            "T": node_block(self.T),
            "R": node_block(self.R),
            "dimensions": self.dimensions,
            "probes": self.probe_table,
            "cross_check": self.cross_check,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


def classify_and_report(osc_profile, avg_profile, riesz=None, probe_plan=None, thresholds=ScanThresholds()):
    """Threshold the scans into S, T, R sets and measure their dimensions.

    When a Riesz scan over the probe plan built from S is supplied, R is
    the union of the S clusters whose centroid probe diverges, and the
    report records whether R reproduces S node for node (the two
    characterizations agree on the fixtures with known loci).
    """
    if len(osc_profile.radii) == 0 or not osc_profile.valid.any():
        raise ScanError("empty oscillation profile")
    if len(avg_profile.radii) == 0 or not avg_profile.valid.any():
        raise ScanError("empty average profile")
    spec = osc_profile.spec
    s_mask = osc_profile.singular_mask(thresholds)
    t_mask = avg_profile.divergent_mask(thresholds)
    S = np.nonzero(s_mask.reshape(-1))[0]
    T = np.nonzero(t_mask.reshape(-1))[0]
    R = np.array([], dtype=int)
    probe_table = []
    cross = None
    if (riesz is None) != (probe_plan is None):
        raise ScanError("riesz scan and probe plan must be supplied together")
    if riesz is not None:
        if riesz.probes.shape != probe_plan.points.shape or not np.allclose(riesz.probes, probe_plan.points):
            raise ScanError("riesz scan probes do not match the probe plan")
        divergent = riesz.divergent_mask(thresholds)
        stable = riesz.stable_mask(thresholds)
        confirmed = []
        for k in range(len(probe_plan.roles)):
            probe_table.append(
                {
                    "point": [float(c) for c in probe_plan.points[k]],
                    "role": probe_plan.roles[k],
                    "cluster": int(probe_plan.cluster_ids[k]),
                    "values": [float(v) for v in riesz.values[k]],
                    "increments": [float(v) for v in riesz.increments()[k]],
                    "divergent": bool(divergent[k]),
                    "stabilized": bool(stable[k]),
                }
            )
            if probe_plan.roles[k] == "cluster" and divergent[k]:
                confirmed.append(probe_plan.clusters[probe_plan.cluster_ids[k]][0])
        if confirmed:
            R = np.unique(np.concatenate(confirmed))
        cross = bool(np.array_equal(np.sort(S), np.sort(R)))
    dims = {
        "S": _dimension_entry(spec, s_mask),
        "T": _dimension_entry(spec, t_mask),
        "R": _dimension_entry(spec, np.isin(np.arange(s_mask.size), R).reshape(spec.shape)),
    }
    return SingularReport(spec, thresholds, S, T, R, dims, probe_table, cross)
