"""Surfaces of revolution over a band profile: metric, Clairaut integral,
geodesic classification, and the intrinsic distance function.

The surface is the revolution of a profile ``r`` over ``x in (0, 1)`` with
``r(0) = r(1) = 0`` and small end slopes, carrying the induced metric

    k = (1 + r'(x)^2) dx^2 + r(x)^2 dphi^2.

Geodesics conserve the Clairaut integral ``c = r^2 dphi/ds``.  The distance
search reduces candidate geodesics to one-dimensional quadratures in ``x``
over three path families (monotone in x, one turn below, one turn above),
solves the winding equation for the Clairaut constant, and returns the
shortest solution.  Quadratures substitute ``x = x_t + D s^2`` toward
singular endpoints, which makes the integrands analytic.

Everything is confined to ``x in [END_MARGIN, 1 - END_MARGIN]``; the metric
degenerates at the ends, and approaching the margin is reported as evidence
of end-asymptotics rather than integrated through.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import (ClassificationUncertainError, DistanceUncertainError,
                     DomainError)
from .flow import FlowParams, Termination, trace
from .geometry import ChartDomain, MetricField, PhaseState, energy

END_MARGIN = 1e-3
_SLOPE_LIMIT = 1.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class ProfileFunction:
    """Revolution profile with analytic first (and optionally second)
    derivative."""

    r: object
    r_prime: object
    r_second: object = None
    name: str = "profile"
    validity_samples: int = 2048

    def validate(self):
        if abs(self.r(0.0)) > 1e-12 or abs(self.r(1.0)) > 1e-12:
            raise ValueError("profile must vanish at x = 0 and x = 1")
        if (abs(self.r_prime(0.0)) >= _SLOPE_LIMIT
                or abs(self.r_prime(1.0)) >= _SLOPE_LIMIT):
            raise ValueError("profile end slopes must stay below 1/(2 pi)")
        xs = np.linspace(END_MARGIN, 1.0 - END_MARGIN, self.validity_samples)
        if np.any(np.asarray(self.r(xs)) <= 0.0):
            raise ValueError("profile must be positive inside the band")
        return self


def sine_profile():
    """Default profile sin(pi x) / (8 pi); end slopes 1/8."""
    pi = np.pi
    return ProfileFunction(
        r=lambda x: np.sin(pi * x) / (8.0 * pi),
        r_prime=lambda x: np.cos(pi * x) / 8.0,
        r_second=lambda x: -pi * np.sin(pi * x) / 8.0,
        name="sine8pi").validate()


def polynomial_profile(coeffs, name=None):
    """Profile given by polynomial coefficients (ascending order)."""
    c = np.asarray(coeffs, dtype=float)
    d1 = np.polynomial.polynomial.polyder(c)
    d2 = np.polynomial.polynomial.polyder(c, 2)
    poly = np.polynomial.polynomial.polyval
    return ProfileFunction(
        r=lambda x: poly(x, c),
        r_prime=lambda x: poly(x, d1),
        r_second=lambda x: poly(x, d2),
        name=name or f"poly{len(c)}").validate()


def profile_by_name(name, coeffs=None):
    if coeffs is not None:
        return polynomial_profile(coeffs)
    if name == "sine8pi":
        return sine_profile()
    raise ValueError(f"unknown profile {name!r}")


def surface_metric(profile):
    """The induced Riemannian metric as a chart metric field on
    (x, phi) with phi periodic."""

    def components(x):
        rp = profile.r_prime(x[0])
        rr = profile.r(x[0])
        return np.diag([1.0 + rp * rp, rr * rr])

    def inverse(x):
        rp = profile.r_prime(x[0])
        rr = profile.r(x[0])
        return np.diag([1.0 / (1.0 + rp * rp), 1.0 / (rr * rr)])

    def derivatives(x):
        rp = profile.r_prime(x[0])
        rr = profile.r(x[0])
        rpp = (profile.r_second(x[0]) if profile.r_second is not None
               else _fd_second(profile, x[0]))
        dg = np.zeros((2, 2, 2))
        dg[0, 0, 0] = 2.0 * rp * rpp
        dg[0, 1, 1] = 2.0 * rr * rp
        return dg

    def fast_rhs(t, y):
        rp = profile.r_prime(y[0])
        rr = profile.r(y[0])
        rpp = (profile.r_second(y[0]) if profile.r_second is not None
               else _fd_second(profile, y[0]))
        ee = 1.0 + rp * rp
        ax, aph = y[2], y[3]
        return np.array([
            ax / ee,
            aph / (rr * rr),
            rp * rpp * ax * ax / (ee * ee) + rp * aph * aph / (rr * rr * rr),
            0.0,
        ])

    domain = ChartDomain(lo=[0.0, -math.pi], hi=[1.0, math.pi],
                         periods=(None, 2.0 * math.pi))
    metric = MetricField(
        2, components, inverse=inverse, derivatives=derivatives,
        domain=domain, signature="riemannian",
        name=f"revolution({profile.name})", fast_rhs=fast_rhs,
        sampling_box=([0.1, -math.pi], [0.9, math.pi]))
    metric.profile = profile
    return metric


def _fd_second(profile, x, h=1e-6):
    return (profile.r_prime(x + h) - profile.r_prime(x - h)) / (2.0 * h)


def surface_unit_state(surface, x, phi, angle):
    """Unit-speed phase state at (x, phi); ``angle`` is measured from the
    decreasing-x meridian direction toward increasing phi."""
    profile = surface.profile
    ee = math.sqrt(1.0 + profile.r_prime(x) ** 2)
    return PhaseState([x, phi],
                      [-ee * math.cos(angle), profile.r(x) * math.sin(angle)])


# -- Clairaut integral and classification --------------------------------------


def clairaut_constant(surface, state):
    """r^2 dphi/ds for the Legendre-dual velocity; conserved along
    geodesics."""
    surface.require_inside(state.base)
    rr = surface.profile.r(state.base[0])
    phi_dot = state.covector[1] / (rr * rr)
    return float(rr * rr * phi_dot)


class GeodesicKind(enum.Enum):
    COMPLETE = "complete"
    ASYMPTOTIC_TO_ENDS = "asymptotic-to-ends"


@dataclass(frozen=True)
class GeodesicClassification:
    kind: GeodesicKind
    turning_points: tuple | None
    clairaut: float


def _first_root(f, a, b, samples=1024):
    """Root of f between a and b nearest to a, found at the first sampled
    sign change from positive to non-positive; scans from a toward b in
    either direction."""
    xs = np.linspace(a, b, samples)
    vals = np.asarray(f(xs), dtype=float)
    for i in range(1, samples):
        if vals[i - 1] > 0.0 >= vals[i]:
            lo, hi = sorted((xs[i - 1], xs[i]))
            return float(brentq(f, lo, hi, xtol=1e-15))
    return None


def turning_points(profile, rc, x0):
    """Nearest solutions of r(x) = rc on both sides of x0 (r >= rc between)."""
    def f(x):
        return profile.r(x) - rc

    f0 = f(x0)
    if f0 < -1e-10:
        raise ClassificationUncertainError(
            f"r(x0) = {profile.r(x0)} below the Clairaut radius {rc}")
    lo_end, hi_end = 1e-9, 1.0 - 1e-9
    if f0 <= 1e-13:
        rp0 = profile.r_prime(x0)
        if abs(rp0) <= 1e-9:
            return (x0, x0)
        if rp0 > 0.0:
            right = _first_root(f, x0 + 1e-12, hi_end)
            left = x0
        else:
            left = _first_root(f, x0 - 1e-12, lo_end)
            right = x0
    else:
        left = _first_root(f, x0, lo_end)
        right = _first_root(f, x0, hi_end)
    if left is None or right is None:
        raise ClassificationUncertainError(
            f"turning-point search failed for rc = {rc} at x0 = {x0}")
    return (float(left), float(right))


def classify_geodesic(surface, state, params=None, evidence=True):
    """Clairaut classification of a unit-speed surface geodesic, checked
    against a long numerical trace when ``evidence`` is set."""
    e = energy(surface, state)
    if abs(e - 1.0) > 1e-8:
        raise ValueError("classification expects a unit-speed state")
    c = clairaut_constant(surface, state)
    x0 = float(state.base[0])
    if abs(c) < 1e-13:
        cls = GeodesicClassification(GeodesicKind.ASYMPTOTIC_TO_ENDS, None, c)
    else:
        pts = turning_points(surface.profile, abs(c), x0)
        cls = GeodesicClassification(GeodesicKind.COMPLETE, pts, c)
    if evidence:
        params = params or FlowParams(max_param=20.0)
        _check_classification(surface, state, cls, params)
    return cls


def _check_classification(surface, state, cls, params):
    span = min(params.max_param, 20.0)
    seg = trace(surface, state, (-span, span), params)
    xs = seg.bases(np.linspace(*seg.interval, 1024))[:, 0]
    if cls.kind is GeodesicKind.COMPLETE:
        lo, hi = cls.turning_points
        if lo > params.boundary_margin + 1e-6 and hi < 1.0 - params.boundary_margin - 1e-6:
            if xs.min() < lo - 1e-6 or xs.max() > hi + 1e-6:
                raise ClassificationUncertainError(
                    "trace left the predicted oscillation band")
    else:
        both_hit = (seg.termination_forward is Termination.HIT_BOUNDARY
                    and seg.termination_backward is Termination.HIT_BOUNDARY)
        if not both_hit:
            raise ClassificationUncertainError(
                "meridian trace did not reach both band ends")


# -- lengths and distances -------------------------------------------------------


def _require_band(x0):
    if not (0.0 < x0 < 1.0):
        raise DomainError(f"x = {x0} outside the open band (0, 1)")


def circle_length(surface, x0):
    """Length of the parallel circle at x0."""
    _require_band(x0)
    return 2.0 * math.pi * surface.profile.r(x0)


def band_distance(surface, x0, x1):
    """Distance between the parallel circles at x0 and x1 (meridian
    arclength), always at least |x1 - x0|."""
    _require_band(x0)
    _require_band(x1)
    if x0 == x1:
        return 0.0
    profile = surface.profile
    val, _ = quad(lambda x: math.sqrt(1.0 + profile.r_prime(x) ** 2),
                  x0, x1, epsabs=1e-13, epsrel=1e-13, limit=200)
    return abs(val)


@lru_cache(maxsize=32)
def _gauss(n):
    from scipy.special import roots_legendre
    nodes, weights = roots_legendre(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _leg_quad(profile, c, x_sing, x_far, n):
    """(winding, length) of a monotone leg between x_sing and x_far where
    r = c may hold at x_sing.  Uses x = x_sing + D s^2."""
    s, w = _gauss(n)
    d = x_far - x_sing
    x = x_sing + d * s * s
    rr = np.asarray(profile.r(x), dtype=float)
    rp = np.asarray(profile.r_prime(x), dtype=float)
    q = np.maximum(rr * rr - c * c, 1e-300)
    common = np.sqrt(1.0 + rp * rp) / np.sqrt(q)
    jac = 2.0 * np.abs(d) * s
    phi = float(np.sum(w * jac * c * common / rr))
    length = float(np.sum(w * jac * rr * common))
    return phi, length


def _leg(profile, c, x_sing, x_far, n=48, checked=False):
    phi, length = _leg_quad(profile, c, x_sing, x_far, n)
    if not checked:
        return phi, length, 0.0
    phi2, length2 = _leg_quad(profile, c, x_sing, x_far, 2 * n)
    return phi2, length2, abs(length2 - length) + abs(phi2 - phi)


def _min_r_between(profile, a, b, samples=65):
    xs = np.linspace(min(a, b), max(a, b), samples)
    return float(np.min(profile.r(xs)))


def _family_direct(profile, xa, xb):
    if abs(xa - xb) < 1e-14:
        return None
    c_hi = _min_r_between(profile, xa, xb)
    mid = 0.5 * (xa + xb)

    def evaluate(c, checked=False):
        p1, l1, e1 = _leg(profile, c, xa, mid, checked=checked)
        p2, l2, e2 = _leg(profile, c, xb, mid, checked=checked)
        return p1 + p2, l1 + l2, e1 + e2, (min(xa, xb), max(xa, xb))

    return evaluate, c_hi


def _family_turn(profile, xa, xb, side):
    near = min(xa, xb) if side == "low" else max(xa, xb)
    c_hi = min(profile.r(xa), profile.r(xb))

    def evaluate(c, checked=False):
        def f(x):
            return profile.r(x) - c
        if side == "low":
            x_t = _first_root(f, near, 1e-9, samples=256)
        else:
            x_t = _first_root(f, near, 1.0 - 1e-9, samples=256)
        if x_t is None:
            return None
        p1, l1, e1 = _leg(profile, c, x_t, xa, checked=checked)
        p2, l2, e2 = _leg(profile, c, x_t, xb, checked=checked)
        lo = x_t if side == "low" else min(xa, xb)
        hi = max(xa, xb) if side == "low" else x_t
        return p1 + p2, l1 + l2, e1 + e2, (lo, hi)

    return evaluate, c_hi


@dataclass(frozen=True)
class DistanceResult:
    """Distance value with an error estimate and minimizer diagnostics."""

    value: float
    uncertainty: float
    clairaut: float | None
    kind: str
    winding: float
    x_range: tuple
    near_end: bool = False

    def __float__(self):
        return self.value


def _solve_family(evaluate, c_hi, theta, seeds):
    """Clairaut constants in (0, c_hi) where the family winding equals
    theta; returns list of (c, length, quad_err, phi_resid, x_range)."""
    if c_hi <= 0.0:
        return []
    base = np.linspace(1e-6 * c_hi, c_hi * (1.0 - 1e-9), seeds)
    tail = c_hi * (1.0 - np.geomspace(1e-9, 1e-2, seeds // 4))
    cs = np.unique(np.concatenate([base, tail]))
    phis = np.full(cs.shape, np.nan)
    for i, c in enumerate(cs):
        out = evaluate(float(c))
        if out is not None:
            phis[i] = out[0]
    hits = []
    for i in range(len(cs) - 1):
        if np.isnan(phis[i]) or np.isnan(phis[i + 1]):
            continue
        g0, g1 = phis[i] - theta, phis[i + 1] - theta
        if g0 == 0.0:
            hits.append(float(cs[i]))
        elif g0 * g1 < 0.0:
            def gap(c):
                out = evaluate(c)
                return np.nan if out is None else out[0] - theta
            try:
                hits.append(float(brentq(gap, cs[i], cs[i + 1],
                                         xtol=1e-15, rtol=8.9e-16)))
            except ValueError:
                continue
    out = []
    for c in hits:
        res = evaluate(c, checked=True)
        if res is None:
            continue
        phi, length, err, x_range = res
        out.append((c, length, err, abs(phi - theta), x_range))
    return out


def distance_result(surface, p, q, params=None, seeds=48):
    """Intrinsic distance between two band points with diagnostics.

    Candidates are assembled per winding target (the wrapped angle and its
    complement around the circle) from the three quadrature families, plus
    the meridian path for zero winding and the parallel circle through a
    critical profile point.  Falls back to direct two-point shooting when no
    family brackets the target.
    """
    profile = surface.profile
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for point in (p, q):
        if not (END_MARGIN <= point[0] <= 1.0 - END_MARGIN):
            raise DomainError(f"x = {point[0]} outside the working band")
    xa, xb = float(p[0]), float(q[0])
    dphi = float(surface.wrap_delta(p, q)[1])
    near_end = min(xa, xb, 1.0 - xa, 1.0 - xb) < 5.0 * END_MARGIN

    if abs(dphi) < 1e-12 and abs(xa - xb) < 1e-12:
        return DistanceResult(0.0, 0.0, None, "point", 0.0, (xa, xa), near_end)

    candidates = []
    if abs(dphi) < 1e-12:
        length = band_distance(surface, xa, xb)
        candidates.append((length, 1e-12, 0.0, "meridian", 0.0,
                           (min(xa, xb), max(xa, xb))))

    targets = []
    if abs(dphi) > 1e-12:
        targets.append(abs(dphi))
    complement = 2.0 * math.pi - abs(dphi)
    if 1e-12 < complement < 2.0 * math.pi - 1e-12:
        targets.append(complement)

    if abs(xa - xb) < 1e-12 and abs(profile.r_prime(xa)) < 1e-9:
        for theta in targets:
            candidates.append((profile.r(xa) * theta, 1e-12, theta,
                               "circle", profile.r(xa), (xa, xa)))

    families = []
    direct = _family_direct(profile, xa, xb)
    if direct is not None:
        families.append(("direct",) + direct)
    families.append(("turn-low",) + _family_turn(profile, xa, xb, "low"))
    families.append(("turn-high",) + _family_turn(profile, xa, xb, "high"))

    for theta in targets:
        for kind, evaluate, c_hi in families:
            for c, length, err, resid, x_range in _solve_family(
                    evaluate, c_hi, theta, seeds):
                candidates.append((length, err + c * resid, theta, kind,
                                   c, x_range))

    if not candidates:
        return _shooting_fallback(surface, p, q, params, near_end)

    length, err, theta, kind, c, x_range = min(candidates, key=lambda t: t[0])
    winding = math.copysign(theta, dphi) if theta == abs(dphi) else \
        -math.copysign(theta, dphi) if dphi != 0.0 else theta
    clairaut = None if kind in ("meridian", "point") else \
        math.copysign(c, winding if winding != 0.0 else 1.0)
    uncertainty = max(err, 1e-12) + (1e-6 if near_end else 0.0)
    return DistanceResult(length, uncertainty, clairaut, kind, winding,
                          x_range, near_end)


def distance(surface, p, q, params=None):
    """Riemannian distance between two points of the band."""
    return distance_result(surface, p, q, params).value


def _shooting_fallback(surface, p, q, params, near_end, n_angles=128):
    """Direct two-point shooting used when no quadrature family brackets
    the winding target."""
    params = (params or FlowParams()).with_(
        rel_tol=1e-10, abs_tol=1e-12, max_param=5.0)
    profile = surface.profile
    budget = min(band_distance(surface, p[0], q[0])
                 + abs(surface.wrap_delta(p, q)[1]) * profile.r(0.5) + 0.5,
                 params.max_param)

    def closest(angle):
        state = surface_unit_state(surface, p[0], p[1], angle)
        seg = trace(surface, state, (0.0, budget), params)
        ts = np.linspace(seg.interval[0], seg.interval[1], 1200)
        bases = seg.bases(ts)
        deltas = surface.wrap_delta(bases, q[None, :])
        ee = np.sqrt(1.0 + np.asarray(profile.r_prime(bases[:, 0])) ** 2)
        rr = np.asarray(profile.r(bases[:, 0]))
        dist2 = (deltas[:, 0] * ee) ** 2 + (deltas[:, 1] * rr) ** 2
        i = int(np.argmin(dist2))
        return math.sqrt(dist2[i]), ts[i]

    best = None
    for angle in np.linspace(0.0, 2.0 * math.pi, n_angles, endpoint=False):
        gap, length = closest(angle)
        if best is None or gap < best[0]:
            best = (gap, length, angle)
    gap, length, angle = best
    for step in (2.0 * math.pi / n_angles) * 0.5 ** np.arange(1, 22):
        for cand in (angle - step, angle + step):
            g2, l2 = closest(cand)
            if g2 < gap:
                gap, length, angle = g2, l2, cand
    if gap > 1e-4:
        raise DistanceUncertainError(
            "two-point shooting failed to reach the target",
            lower=band_distance(surface, p[0], q[0]), upper=length + gap)
    return DistanceResult(length, max(gap, 1e-6), None, "shooting",
                          float("nan"), (min(p[0], q[0]), max(p[0], q[0])),
                          near_end)
