"""Causal relations: exact verdicts for static products over a revolution
surface, leaf-function tests for 2D charts, and closedness probing.

For the product metric ``-dt^2 + k`` the causal relation reduces to a
distance threshold: (sigma, p) precedes (tau, q) iff ``tau - sigma`` is at
least the surface distance from p to q.  The verdict carries a signed margin
and widens the horismos band by the distance routine's reported uncertainty,
since exact null relatedness is a measure-zero equality case.

Two-dimensional charts get two complementary oracles: monotone leaf
functions (first integrals of the null foliations) and direct shooting of
the two null directions, which respects deleted points and therefore sees
the topology of the chart.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolError
from .flow import FlowParams, Termination, trace
from .geometry import ChartDomain, MetricField, PhaseState
from .revolution import (band_distance, distance_result, sine_profile,
                         surface_metric)


class CausalRelation(enum.Enum):
    CHRONOLOGICAL = "chronological"
    HORISMOS = "horismos"
    UNRELATED = "unrelated"


@dataclass(frozen=True)
class CausalVerdict:
    relation: CausalRelation
    margin: float                 # (tau - sigma) - dist, signed
    tolerance: float              # effective horismos half-width
    distance_uncertainty: float
    annotation: str = ""

    @property
    def related(self):
        return self.relation is not CausalRelation.UNRELATED


class ProductSpacetime:
    """Static product of a time line with a revolution surface."""

    def __init__(self, profile=None, tbox=math.inf):
        self.profile = profile or sine_profile()
        self.surface = surface_metric(self.profile)
        prof = self.profile

        def components(x):
            rp = prof.r_prime(x[1])
            rr = prof.r(x[1])
            return np.diag([-1.0, 1.0 + rp * rp, rr * rr])

        def inverse(x):
            rp = prof.r_prime(x[1])
            rr = prof.r(x[1])
            return np.diag([-1.0, 1.0 / (1.0 + rp * rp), 1.0 / (rr * rr)])

        def derivatives(x):
            rp = prof.r_prime(x[1])
            rr = prof.r(x[1])
            rpp = prof.r_second(x[1])
            dg = np.zeros((3, 3, 3))
            dg[1, 1, 1] = 2.0 * rp * rpp
            dg[1, 2, 2] = 2.0 * rr * rp
            return dg

        def fast_rhs(t, y):
            rp = prof.r_prime(y[1])
            rr = prof.r(y[1])
            rpp = prof.r_second(y[1])
            ee = 1.0 + rp * rp
            at, ax, aph = y[3], y[4], y[5]
            return np.array([
                -at,
                ax / ee,
                aph / (rr * rr),
                0.0,
                rp * rpp * ax * ax / (ee * ee) + rp * aph * aph / (rr ** 3),
                0.0,
            ])

        domain = ChartDomain(
            lo=[-tbox, 0.0, -math.pi], hi=[tbox, 1.0, math.pi],
            periods=(None, None, 2.0 * math.pi))
        self.metric = MetricField(
            3, components, inverse=inverse, derivatives=derivatives,
            domain=domain, orientation=lambda x: np.array([1.0, 0.0, 0.0]),
            time_axis=0, name=f"product-revolution({self.profile.name})",
            fast_rhs=fast_rhs,
            sampling_box=([-1.0, 0.15, -math.pi], [1.0, 0.85, math.pi]))
        self.metric.product = self
        self._distance_cache = {}

    def split(self, a):
        a = np.asarray(a, dtype=float)
        return float(a[0]), a[1:]

    def lift(self, t, p):
        return np.concatenate([[float(t)], np.asarray(p, dtype=float)])

    def distance(self, p, q):
        """Cached surface distance with diagnostics."""
        key = (round(float(p[0]), 12), round(float(p[1]), 12),
               round(float(q[0]), 12), round(float(q[1]), 12))
        hit = self._distance_cache.get(key)
        if hit is None:
            hit = distance_result(self.surface, p, q)
            if len(self._distance_cache) > 20000:
                self._distance_cache.clear()
            self._distance_cache[key] = hit
        return hit


def causal_relation(spacetime, a, b, tol=1e-6):
    """Causal verdict for two events of a product spacetime.

    The margin is ``(tau - sigma) - dist(p, q)``; verdicts inside the
    distance routine's uncertainty band are reported as horismos with an
    annotation rather than a hard verdict.
    """
    sigma, p = spacetime.split(a)
    tau, q = spacetime.split(b)
    res = spacetime.distance(p, q)
    margin = (tau - sigma) - res.value
    tol_eff = tol + res.uncertainty
    if margin > tol_eff:
        relation = CausalRelation.CHRONOLOGICAL
    elif margin < -tol_eff:
        relation = CausalRelation.UNRELATED
    else:
        relation = CausalRelation.HORISMOS
    note = "within-distance-uncertainty" if abs(margin) <= res.uncertainty else ""
    return CausalVerdict(relation, margin, tol_eff, res.uncertainty, note)


# -- leaf functions on 2D charts -------------------------------------------------


@dataclass(frozen=True)
class LeafFunctions:
    """First integrals of the two null foliations of a 2D chart, both
    nondecreasing along future causal curves."""

    f1: object
    f2: object


def minkowski_leaves():
    return LeafFunctions(f1=lambda p: p[1] - p[0], f2=lambda p: p[1] + p[0])


def leaf_causal(leaves, p, q):
    """True iff both leaf functions are non-decreasing from p to q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return bool(leaves.f1(q) >= leaves.f1(p) and leaves.f2(q) >= leaves.f2(p))


def validate_leaves(metric, leaves, rng, samples=64, h=1e-6, tol=1e-7):
    """Check df_i(v) >= 0 on random future causal vectors and that the
    differentials do not vanish."""
    from .metrics import sample_chart_points
    pts = sample_chart_points(metric, samples, rng)
    for x in pts:
        t_vec = metric.orientation(x)
        g = metric.g(x)
        for f in (leaves.f1, leaves.f2):
            grad = np.array([(f(x + h * e) - f(x - h * e)) / (2.0 * h)
                             for e in np.eye(metric.dim)])
            if np.linalg.norm(grad) < 1e-10:
                raise ValueError(f"leaf differential vanishes at {x}")
            # future timelike sample: orientation plus a small spacelike tilt
            v = t_vec / math.sqrt(abs(float(t_vec @ g @ t_vec)))
            tilt = rng.standard_normal(metric.dim)
            tilt -= (float(tilt @ g @ v) / float(v @ g @ v)) * v
            norm = math.sqrt(max(float(tilt @ g @ tilt), 1e-300))
            v = v + 0.5 * rng.uniform() * tilt / norm
            if float(grad @ v) < -tol:
                raise ValueError(f"leaf decreases along a future vector at {x}")
    return True


def null_directions_2d(metric, x):
    """The two future-pointing null covectors at a 2D chart point,
    Euclid-normalized, ordered by the sign of their first velocity
    component."""
    x = metric.require_inside(x)
    g = metric.g(x)
    w, vecs = np.linalg.eigh(g)
    e_t = vecs[:, 0] / math.sqrt(-w[0])
    e_s = vecs[:, 1] / math.sqrt(w[1])
    t_vec = metric.orientation(x)
    states = []
    for sign in (1.0, -1.0):
        v = e_t + sign * e_s
        if float(v @ g @ t_vec) > 0.0:
            v = -v
        alpha = g @ v
        states.append(PhaseState(x, alpha / np.linalg.norm(alpha)))
    states.sort(key=lambda s: float((metric.inverse(x) @ s.covector)[0]))
    return states


def build_leaf_functions(metric, origin, direction, params=None):
    """Construct leaf functions for a 2D chart by tracing null geodesics to
    a transversal line through ``origin`` with future timelike ``direction``
    and recording the (Euclidean) arclength of the crossing point.

    The construction follows each foliation by ODE traces, so it is exact up
    to integrator error but costs two traces per evaluation.
    """
    params = params or FlowParams()
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    normal = np.array([-direction[1], direction[0]])
    d_sq = float(direction @ direction)

    def crossing(state):
        seg = trace(metric, state, (-params.max_param, params.max_param), params)
        ts = np.linspace(seg.interval[0], seg.interval[1], 2048)
        level = (seg.bases(ts) - origin) @ normal
        idx = np.nonzero(level[:-1] * level[1:] <= 0.0)[0]
        if idx.size == 0:
            raise ValueError("null trace never crossed the transversal")
        i = int(idx[np.argmin(np.abs(ts[idx]))])
        from scipy.optimize import brentq
        if level[i] == 0.0:
            t_star = ts[i]
        else:
            t_star = brentq(lambda t: float((seg.base(t) - origin) @ normal),
                            ts[i], ts[i + 1], xtol=1e-14)
        x_star = seg.base(t_star)
        return float((x_star - origin) @ direction / d_sq) * math.sqrt(d_sq)

    def make(index):
        def f(p):
            state = null_directions_2d(metric, p)[index]
            return crossing(state)
        return f

    return LeafFunctions(f1=make(0), f2=make(1))


# -- shooting-based horismos for 2D charts ----------------------------------------


def horismos_related_2d(metric, p, q, params=None, reach_tol=1e-6):
    """True iff a future null geodesic inside the chart runs from p to q.

    Traces both null directions from p; deleted points and chart boundaries
    truncate the traces, so the verdict reflects the chart topology.
    """
    params = params or FlowParams()
    p = metric.require_inside(p)
    q = metric.require_inside(q)
    if metric.domain.wrap_distance(p, q) <= reach_tol:
        return True
    for state in null_directions_2d(metric, p):
        seg = trace(metric, state, (0.0, params.max_param), params)
        ts = np.linspace(seg.interval[0], seg.interval[1], 2001)
        gaps = np.linalg.norm(metric.wrap_delta(seg.bases(ts), q[None, :]),
                              axis=1)
        i = int(np.argmin(gaps))
        if gaps[i] <= reach_tol:
            return True
        lo = ts[max(i - 1, 0)]
        hi = ts[min(i + 1, len(ts) - 1)]
        from scipy.optimize import minimize_scalar
        res = minimize_scalar(
            lambda t: float(np.linalg.norm(metric.wrap_delta(seg.base(t), q))),
            bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-13})
        if res.fun <= reach_tol:
            return True
    return False


# -- closedness probing ------------------------------------------------------------


@dataclass(frozen=True)
class ConvergentSequence:
    """A declared convergent sequence of related pairs with its limit."""

    pairs: tuple
    limit: tuple
    label: str = ""


@dataclass(frozen=True)
class ProbeWitness:
    index: int
    sequence: ConvergentSequence
    detail: str = ""


@dataclass(frozen=True)
class ProbeReport:
    passed: bool
    n_sequences: int
    witnesses: tuple

    def __bool__(self):
        return self.passed


def closedness_probe(relation, sequences, spot_check=True):
    """Evaluate a relation at the declared limits of convergent sequences.

    ``relation(a, b) -> bool`` must hold for every pair by the generator's
    contract (spot-checked on three pairs per sequence); a sequence whose
    pairs do not converge to the declared limit raises ProtocolError.
    Returns a passing report, or one carrying a witness per failing limit.
    """
    witnesses = []
    sequences = list(sequences)
    for i, seq in enumerate(sequences):
        dists = [np.linalg.norm(np.asarray(a) - np.asarray(seq.limit[0]))
                 + np.linalg.norm(np.asarray(b) - np.asarray(seq.limit[1]))
                 for a, b in seq.pairs]
        if len(dists) < 3 or not (dists[-1] < dists[0]
                                  and dists[-1] <= 0.5 * max(dists)):
            raise ProtocolError(
                f"sequence {i} ({seq.label!r}) does not converge to its limit")
        if spot_check:
            for j in (0, len(seq.pairs) // 2, len(seq.pairs) - 1):
                if not relation(*seq.pairs[j]):
                    raise ProtocolError(
                        f"sequence {i} ({seq.label!r}): pair {j} violates "
                        "the declared relation")
        if not relation(*seq.limit):
            witnesses.append(ProbeWitness(i, seq, "limit leaves the relation"))
    return ProbeReport(not witnesses, len(sequences), tuple(witnesses))


# -- seeded sequence generators ------------------------------------------------------


def product_jplus_sequences(spacetime, n, rng, length=8):
    """Convergent sequences of causally related pairs in the product
    spacetime: cone-grazing, interior, and meridian-approach flavors."""
    out = []
    kinds = ("cone", "interior", "meridian")
    for i in range(n):
        kind = kinds[i % len(kinds)]
        x1, x2 = rng.uniform(0.2, 0.8, size=2)
        ph1, ph2 = rng.uniform(-math.pi, math.pi, size=2)
        sigma = rng.uniform(-0.5, 0.5)
        deltas = 0.5 ** np.arange(1, length + 1)
        if kind == "meridian":
            p = np.array([x1, ph1])
            q = np.array([x2, ph1])
            d_lim = band_distance(spacetime.surface, x1, x2)
            a = spacetime.lift(sigma, p)
            limit = (a, spacetime.lift(sigma + d_lim, q))
            pairs = []
            for d in deltas:
                qn = np.array([x2 + 0.2 * d * (1.0 if x2 < 0.8 else -1.0), ph1])
                dn = band_distance(spacetime.surface, x1, qn[0])
                pairs.append((a, spacetime.lift(sigma + dn, qn)))
        else:
            p = np.array([x1, ph1])
            q = np.array([x2, ph2])
            d_lim = spacetime.distance(p, q).value
            extra = 0.0 if kind == "cone" else rng.uniform(0.05, 0.4)
            a = spacetime.lift(sigma, p)
            limit = (a, spacetime.lift(sigma + d_lim + extra, q))
            pairs = [(a, spacetime.lift(sigma + d_lim + extra + d, q))
                     for d in deltas]
        out.append(ConvergentSequence(tuple(pairs), limit, label=f"{kind}-{i}"))
    return out


def straddle_eplus_sequences(n, rng, length=8):
    """Null-related pairs in the flat 2D chart straddling the origin: the
    connecting segments shift sideways by a shrinking offset, so each pair
    misses the origin while the limit segment passes through it."""
    out = []
    for i in range(n):
        a_len = rng.uniform(0.6, 1.4)
        b_len = rng.uniform(0.6, 1.4)
        p_lim = -a_len * np.array([1.0, 1.0]) / math.sqrt(2.0)
        q_lim = b_len * np.array([1.0, 1.0]) / math.sqrt(2.0)
        side = np.array([1.0, -1.0]) / math.sqrt(2.0)
        deltas = 0.2 * 0.6 ** np.arange(1, length + 1)
        pairs = tuple((p_lim + d * side, q_lim + d * side) for d in deltas)
        out.append(ConvergentSequence(pairs, (p_lim, q_lim),
                                      label=f"straddle-{i}"))
    return out


# -- geodesic evidence for product verdicts ---------------------------------------


def minimizer_initial_state(surface, p, q, res):
    """Unit-speed surface covector launching the distance minimizer."""
    profile = surface.profile
    xa = float(p[0])
    rr = profile.r(xa)
    ee = 1.0 + profile.r_prime(xa) ** 2
    c = res.clairaut if res.clairaut is not None else 0.0
    if res.kind in ("meridian", "point"):
        sx = 1.0 if q[0] >= p[0] else -1.0
        return PhaseState(p, [sx * math.sqrt(ee), 0.0])
    if res.kind == "circle":
        return PhaseState(p, [0.0, math.copysign(rr, res.winding)])
    if res.kind == "direct":
        sx = 1.0 if q[0] >= p[0] else -1.0
    elif res.kind == "turn-low":
        sx = -1.0
    elif res.kind == "turn-high":
        sx = 1.0
    else:
        raise ValueError(f"no launch direction for minimizer kind {res.kind!r}")
    ax = sx * math.sqrt(max(ee * (1.0 - (c / rr) ** 2), 0.0))
    return PhaseState(p, [ax, c])


def null_connection_error(spacetime, a, b, params=None):
    """Endpoint error of the null geodesic shot along the distance
    minimizer from event ``a`` toward event ``b``."""
    params = params or FlowParams()
    sigma, p = spacetime.split(a)
    tau, q = spacetime.split(b)
    res = spacetime.distance(p, q)
    surf_state = minimizer_initial_state(spacetime.surface, p, q, res)
    alpha = np.array([-1.0, surf_state.covector[0], surf_state.covector[1]])
    state = PhaseState(spacetime.lift(sigma, p), alpha)
    length = res.value
    if length > params.max_param:
        params = params.with_(max_param=length * 1.01)
    end = trace(spacetime.metric, state, (0.0, length), params)
    if end.termination_forward is not Termination.REACHED_PARAM:
        return float("inf")
    gap = spacetime.metric.wrap_delta(end.base(length), b)
    return float(np.linalg.norm(gap))


def timelike_chain_margin(spacetime, a, b, n_steps=64, params=None):
    """Largest chord value of g along a lifted minimizer chain; negative
    values certify a timelike chain from a to b."""
    params = params or FlowParams()
    sigma, p = spacetime.split(a)
    tau, q = spacetime.split(b)
    res = spacetime.distance(p, q)
    if res.value < 1e-12:
        return -abs(tau - sigma)
    surf_state = minimizer_initial_state(spacetime.surface, p, q, res)
    if res.value > params.max_param:
        params = params.with_(max_param=res.value * 1.01)
    seg = trace(spacetime.surface, surf_state, (0.0, res.value), params)
    ss = np.linspace(0.0, res.value, n_steps + 1)
    path = seg.bases(ss)
    times = sigma + ss * (tau - sigma) / res.value
    worst = -math.inf
    for i in range(n_steps):
        mid = 0.5 * (path[i] + path[i + 1])
        delta = np.concatenate([[times[i + 1] - times[i]],
                                spacetime.surface.wrap_delta(path[i], path[i + 1])])
        g3 = spacetime.metric.g(np.concatenate([[times[i]], mid]))
        worst = max(worst, float(delta @ g3 @ delta))
    return worst
