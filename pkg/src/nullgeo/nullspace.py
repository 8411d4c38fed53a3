"""The space of null geodesics: class representatives, class equality,
limits of class sequences, and non-Hausdorff witnesses.

A class is a future-pointing null phase state normalized in an auxiliary
Riemannian metric; two classes agree when the flow carries one
representative onto the other's base point with matching normalized
covector.  Limits of class sequences are detected inside declared compact
probe windows: each geodesic is reparametrized to its state nearest the
window center, the resulting state sequence is clustered, and each cluster
is extrapolated to its limit along the declared schedule.  Limits visible
only outside every probe window are not found; the search under-reports
limits, never over-reports them.

Class-equality tolerances widen with the extrapolation uncertainty so that
smooth families in complete flat space always collapse to a single limit,
while genuinely severed limits (deleted points, band ends) stay distinct and
carry a truncation annotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .flow import FlowParams, Termination, trace
from .geometry import (WICK, PhaseState, is_future_null, null_normalize,
                       project_null)


@dataclass(frozen=True)
class NullGeodesicClass:
    """Normalized representative of a null geodesic modulo orientation
    preserving affine reparametrization."""

    representative: PhaseState
    metric: object
    aux: object = WICK

    @property
    def spacetime_key(self):
        return self.metric.key


def class_of(metric, state, aux=WICK, reproject=False):
    """Canonical class representative of a future-pointing null state."""
    if reproject:
        state = project_null(metric, state)
    rep = null_normalize(metric, state, aux)
    if not is_future_null(metric, rep, tol=1e-8):
        raise ValueError("class_of expects a future-pointing null state")
    return NullGeodesicClass(rep, metric, aux)


@dataclass(frozen=True)
class SameClassResult:
    equal: bool
    min_base_gap: float
    parameter: float | None
    truncated: bool
    direction_gap: float | None


def same_class_result(c1, c2, params=None, base_tol=1e-6, dir_tol=1e-6):
    """Flow c1's representative and look for c2's normalized state on it.

    ``truncated`` marks comparisons where the trace left the domain before
    approaching the target base point; such classes are reported distinct.
    """
    if c1.spacetime_key != c2.spacetime_key:
        raise ValueError("classes live in different spacetimes")
    if c1.aux != c2.aux:
        raise ValueError("classes normalized in different auxiliary metrics")
    metric = c1.metric
    params = params or FlowParams()
    seg = trace(metric, c1.representative,
                (-params.max_param, params.max_param), params)
    target = c2.representative.base
    ts = np.linspace(seg.interval[0], seg.interval[1], 4001)
    gaps = np.linalg.norm(metric.wrap_delta(seg.bases(ts), target[None, :]),
                          axis=1)

    def gap_at(t):
        return float(np.linalg.norm(metric.wrap_delta(seg.base(t), target)))

    order = np.argsort(gaps)
    candidates = []
    threshold = max(50.0 * base_tol, 1e-3)
    seen = set()
    for i in order[:32]:
        if gaps[i] > threshold:
            break
        bucket = int(i) // 4
        if bucket in seen:
            continue
        seen.add(bucket)
        lo = ts[max(int(i) - 1, 0)]
        hi = ts[min(int(i) + 1, len(ts) - 1)]
        res = minimize_scalar(gap_at, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        candidates.append((float(res.fun), float(res.x)))
    if not candidates:
        candidates.append((float(gaps.min()), float(ts[int(np.argmin(gaps))])))
    candidates.sort()
    min_gap = candidates[0][0]
    for gap, t_star in candidates:
        if gap > base_tol:
            break
        state = null_normalize(metric, seg.state(t_star), c1.aux)
        dgap = float(np.linalg.norm(state.covector - c2.representative.covector))
        if dgap <= dir_tol:
            return SameClassResult(True, gap, t_star, False, dgap)
    truncated = (seg.termination is not Termination.REACHED_PARAM
                 and min_gap > 10.0 * base_tol)
    return SameClassResult(False, min_gap, None, truncated, None)


def same_class(c1, c2, params=None, base_tol=1e-6, dir_tol=1e-6):
    return same_class_result(c1, c2, params, base_tol, dir_tol).equal


# -- probe windows and limit detection -----------------------------------------


@dataclass(frozen=True)
class ProbeWindow:
    center: np.ndarray
    radius: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=float))


@dataclass(frozen=True)
class WindowLimit:
    window: ProbeWindow
    indices: tuple
    state: PhaseState
    uncertainty: float
    cls: NullGeodesicClass


@dataclass(frozen=True)
class LimitReport:
    limits: tuple                 # distinct classes
    window_limits: tuple          # every per-window cluster limit
    separations: np.ndarray       # pairwise state distance of distinct limits
    hausdorff_violation: bool
    delta_distinct: float
    annotations: tuple

    @property
    def n_limits(self):
        return len(self.limits)

    def format_text(self):
        lines = [f"limit classes: {self.n_limits}",
                 f"hausdorff violation: {self.hausdorff_violation} "
                 f"(distinct threshold {self.delta_distinct:g})"]
        for wl in self.window_limits:
            lines.append(f"[window {wl.window.label or wl.window.center}] "
                         f"elements {len(wl.indices)} "
                         f"uncertainty {wl.uncertainty:.3e}")
            lines.append(f"  base     {np.array2string(wl.state.base, precision=8)}")
            lines.append(f"  covector {np.array2string(wl.state.covector, precision=8)}")
        if self.n_limits > 1:
            lines.append("pairwise separations:")
            for row in self.separations:
                lines.append("  " + " ".join(f"{v:10.4e}" for v in row))
        for note in self.annotations:
            lines.append(f"note: {note}")
        return "\n".join(lines)


def _cluster(vectors, tol):
    """Single-linkage clusters of row vectors at the given cutoff."""
    n = len(vectors)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(vectors[i] - vectors[j]) <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _extrapolate(values, deltas):
    """Componentwise polynomial extrapolation to delta -> 0 with an
    uncertainty estimate from the fit residual."""
    deltas = np.asarray(deltas, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(deltas) == 1:
        return values[0], 1e-2
    deg = min(3, len(deltas) - 1)
    coeffs, residuals, *_ = np.polynomial.polynomial.polyfit(
        deltas, values, deg, full=True)
    limit = coeffs[0]
    fitted = np.polynomial.polynomial.polyval(deltas, coeffs).T
    rms = float(np.sqrt(np.mean((fitted - values) ** 2)))
    tail_gap = float(np.linalg.norm(values[-1] - limit))
    unc = max(3.0 * rms, 1e-3 * tail_gap, 1e-14)
    return limit, unc


def limit_classes(metric, classes, probes, params=None, schedule=None,
                  aux=WICK, cluster_tol=0.1, delta_distinct=1e-3,
                  base_tol=1e-6, dir_tol=1e-6):
    """Limit classes of a sequence of null geodesic classes.

    The i-th class is assumed to sit at schedule value ``schedule[i]`` of a
    family converging as the schedule tends to zero (default ``1/(i+1)``).
    Returns a report listing every distinct limit class seen through the
    probe windows, with pairwise separations and the Hausdorff verdict.
    """
    classes = list(classes)
    if len(classes) < 8:
        raise ValueError("limit detection needs at least 8 classes")
    params = params or FlowParams()
    if schedule is None:
        schedule = [1.0 / (i + 1.0) for i in range(len(classes))]
    schedule = np.asarray(schedule, dtype=float)
    n = metric.dim
    span = params.max_param
    traces = [trace(metric, c.representative, (-span, span), params)
              for c in classes]
    annotations = []
    window_limits = []
    for w in probes:
        states, idxs = [], []
        for i, seg in enumerate(traces):
            ts = np.linspace(seg.interval[0], seg.interval[1], 2001)
            gaps = np.linalg.norm(
                metric.wrap_delta(seg.bases(ts), w.center[None, :]), axis=1)
            k = int(np.argmin(gaps))
            lo = ts[max(k - 1, 0)]
            hi = ts[min(k + 1, len(ts) - 1)]
            res = minimize_scalar(
                lambda t: float(np.linalg.norm(
                    metric.wrap_delta(seg.base(t), w.center))),
                bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
            if res.fun > w.radius:
                continue
            states.append(null_normalize(metric, seg.state(res.x), aux))
            idxs.append(i)
        if len(states) < max(4, len(classes) // 3):
            annotations.append(
                f"window {w.label or w.center}: only {len(states)} of "
                f"{len(classes)} traces entered; contributes nothing")
            continue
        vecs = np.array([np.concatenate([
            metric.wrap_delta(w.center, s.base), s.covector])
            for s in states])
        tail = set(idxs[-min(6, len(idxs)):])
        for members in _cluster(vecs, cluster_tol):
            cluster_idx = [idxs[m] for m in members]
            if len(set(cluster_idx) & tail) < 2:
                annotations.append(
                    f"window {w.label or w.center}: dropped transient "
                    f"cluster of {len(members)} elements")
                continue
            limit_vec, unc = _extrapolate(vecs[members], schedule[cluster_idx])
            base = w.center + limit_vec[:n]
            state = PhaseState(base, limit_vec[n:])
            cls = class_of(metric, state, aux=aux, reproject=True)
            window_limits.append(WindowLimit(
                w, tuple(cluster_idx), cls.representative, unc, cls))
    distinct = []
    for wl in window_limits:
        matched = False
        for kept in distinct:
            tol_b = max(base_tol, 10.0 * (wl.uncertainty + kept.uncertainty))
            tol_d = max(dir_tol, 10.0 * (wl.uncertainty + kept.uncertainty))
            res = same_class_result(kept.cls, wl.cls, params, tol_b, tol_d)
            if res.equal:
                matched = True
                break
            if res.truncated:
                annotations.append(
                    "class comparison truncated before approach; "
                    "reported distinct")
        if not matched:
            distinct.append(wl)
    m = len(distinct)
    seps = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            a, b = distinct[i].cls.representative, distinct[j].cls.representative
            seps[i, j] = seps[j, i] = math.hypot(
                float(np.linalg.norm(metric.wrap_delta(a.base, b.base))),
                float(np.linalg.norm(a.covector - b.covector)))
    violation = m >= 2 and bool(np.any(seps > delta_distinct))
    return LimitReport(tuple(wl.cls for wl in distinct), tuple(window_limits),
                       seps, violation, delta_distinct, tuple(annotations))


def hausdorff_witness(metric, family, schedule, probes, params=None,
                      aux=WICK, **kwargs):
    """Run limit detection on ``family(delta)`` over the schedule; returns
    the report iff it certifies a Hausdorff violation."""
    classes = [class_of(metric, family(d), aux=aux) for d in schedule]
    report = limit_classes(metric, classes, probes, params=params,
                           schedule=schedule, aux=aux, **kwargs)
    return report if report.hausdorff_violation else None


# -- chart regions and intersection counting --------------------------------------


@dataclass(frozen=True)
class ConvexPolygonRegion:
    """Open convex polygon given by counterclockwise vertices in covering
    coordinates; on quotient charts every lift that can meet the fundamental
    box contributes a separate sheet."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        area2 = 0.0
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            area2 += a[0] * b[1] - b[0] * a[1]
        if area2 < 0.0:
            v = v[::-1].copy()
        object.__setattr__(self, "vertices", v)

    def _margin_raw(self, pts):
        pts = np.atleast_2d(pts)
        vals = np.full(pts.shape[0], np.inf)
        v = self.vertices
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            edge = b - a
            normal = np.array([-edge[1], edge[0]])
            normal /= np.linalg.norm(normal)
            vals = np.minimum(vals, (pts - a) @ normal)
        return vals

    def margin_functions(self, domain):
        axis = next((k for k in range(domain.dim) if domain.is_periodic(k)),
                    None)
        if axis is None:
            return [lambda pts: self._margin_raw(pts)]
        period = domain.periods[axis]
        vmin = self.vertices[:, axis].min()
        vmax = self.vertices[:, axis].max()
        k_lo = math.floor((vmin - domain.hi[axis]) / period)
        k_hi = math.ceil((vmax - domain.lo[axis]) / period)
        funcs = []
        for k in range(k_lo, k_hi + 1):
            shift = np.zeros(domain.dim)
            shift[axis] = k * period

            def margin(pts, shift=shift):
                return self._margin_raw(np.atleast_2d(pts) + shift)

            funcs.append(margin)
        return funcs


@dataclass(frozen=True)
class BallRegion:
    center: np.ndarray
    radius: float

    def margin_functions(self, domain):
        center = np.asarray(self.center, dtype=float)

        def margin(pts):
            pts = np.atleast_2d(pts)
            return self.radius - np.linalg.norm(
                domain.wrap_delta(center[None, :], pts), axis=1)

        return [margin]


def intersection_components(segment, region, refine_tol=1e-8, samples=4097):
    """Number of connected components of the parameter set where the
    trajectory's base point lies inside the region.

    Per-sheet membership intervals are refined by root finding on the sheet
    margin; open intervals that merely touch at a point stay separate, which
    resolves geodesics leaving a quotient region through one boundary edge
    while re-entering through its identified partner.
    """
    domain = segment.metric.domain
    a, b = segment.interval
    ts = np.linspace(a, b, samples)
    bases = segment.bases(ts)
    intervals = []
    for margin in region.margin_functions(domain):
        vals = np.asarray(margin(bases), dtype=float)
        inside = vals > 0.0

        def margin_at(t, margin=margin):
            return float(margin(segment.base(t)[None, :])[0])

        i = 0
        while i < samples:
            if not inside[i]:
                i += 1
                continue
            j = i
            while j + 1 < samples and inside[j + 1]:
                j += 1
            lo = ts[i] if i == 0 else brentq(
                margin_at, ts[i - 1], ts[i], xtol=refine_tol)
            hi = ts[j] if j == samples - 1 else brentq(
                margin_at, ts[j], ts[j + 1], xtol=refine_tol)
            intervals.append((float(lo), float(hi)))
            i = j + 1
    if not intervals:
        return 0
    intervals.sort()
    merge_gap = 10.0 * refine_tol
    count = 1
    _, cur_hi = intervals[0]
    for lo, hi in intervals[1:]:
        if lo < cur_hi - merge_gap:      # genuine overlap, same component
            cur_hi = max(cur_hi, hi)
        else:                            # disjoint or touching at a point
            count += 1
            cur_hi = hi
    return count
