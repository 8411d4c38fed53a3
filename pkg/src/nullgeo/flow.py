"""Cogeodesic flow integration with dense output and domain events.

The flow is parametrized so that the base curve is the geodesic whose initial
velocity is the Legendre dual of the covector: ``flow(s, t).base`` equals
``gamma(t)`` with ``gamma'(0) = g^{-1} alpha``.  The dual quadratic form
``energy`` is conserved along the flow; for long runs the covector can be
re-projected onto the null cone after each integration chunk.

Trajectories stop when they come within ``boundary_margin`` of a non-periodic
chart face, when they enter an excluded region, or when they pass through a
deleted point (detected at closest approach, so exact hits are found even
though nearby trajectories sail past).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import null_space

from .errors import DegenerateInputError, NullGeoError, TruncationError
from .geometry import (PhaseState, PointExclusion, RegionExclusion,
                       TangentVector, energy, legendre, project_null)


@dataclass(frozen=True)
class FlowParams:
    """Integration controls shared across the package."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_param: float = 10.0
    boundary_margin: float = 1e-3
    null_project: bool | None = None   # None: auto for null runs longer than 10
    samples: int = 257
    method: str = "DOP853"
    chunk: float = 5.0

    def __post_init__(self):
        if min(self.rel_tol, self.abs_tol, self.chunk) <= 0.0:
            raise ValueError("tolerances and chunk must be positive")
        if self.max_param <= 0.0 or self.boundary_margin < 0.0:
            raise ValueError("max_param must be positive, margin non-negative")
        if self.samples < 2:
            raise ValueError("need at least two sample nodes")

    def with_(self, **kw):
        return replace(self, **kw)


class Termination(enum.Enum):
    REACHED_PARAM = "reached-param"
    HIT_BOUNDARY = "hit-boundary"
    HIT_EXCLUSION = "hit-exclusion"


_SEVERITY = {Termination.REACHED_PARAM: 0,
             Termination.HIT_BOUNDARY: 1,
             Termination.HIT_EXCLUSION: 2}


def cogeodesic_rhs(metric):
    """Right-hand side of the flow in (x, alpha) coordinates."""
    if metric.fast_rhs is not None:
        return metric.fast_rhs
    n = metric.dim

    def rhs(t, y):
        x = y[:n]
        v = metric.inverse(x) @ y[n:]
        dal = 0.5 * np.einsum("kij,i,j->k", metric.derivatives(x), v, v)
        return np.concatenate([v, dal])

    return rhs


def _build_events(metric, params):
    """Terminal boundary/region events plus non-terminal closest-approach
    events for deleted points."""
    n = metric.dim
    dom = metric.domain
    events, kinds = [], []
    margin = params.boundary_margin
    for k in range(n):
        if dom.is_periodic(k):
            continue
        if np.isfinite(dom.lo[k]):
            def ev_lo(t, y, k=k, c=dom.lo[k] + margin):
                return y[k] - c
            ev_lo.terminal = True
            ev_lo.direction = -1.0
            events.append(ev_lo)
            kinds.append(("boundary", k))
        if np.isfinite(dom.hi[k]):
            def ev_hi(t, y, k=k, c=dom.hi[k] - margin):
                return c - y[k]
            ev_hi.terminal = True
            ev_hi.direction = -1.0
            events.append(ev_hi)
            kinds.append(("boundary", k))
    rhs = cogeodesic_rhs(metric)
    for excl in dom.exclusions:
        if isinstance(excl, PointExclusion):
            def ev_pt(t, y, p=excl.point, n=n):
                return float((y[:n] - p) @ rhs(t, y)[:n])
            ev_pt.terminal = False
            ev_pt.direction = 1.0
            events.append(ev_pt)
            kinds.append(("approach", excl))
        elif isinstance(excl, RegionExclusion):
            def ev_rg(t, y, sdf=excl.signed_distance, n=n):
                return float(sdf(y[:n]))
            ev_rg.terminal = True
            ev_rg.direction = -1.0
            events.append(ev_rg)
            kinds.append(("region", excl))
    return events, kinds


@dataclass
class _Piece:
    sol: object
    t0: float
    t1: float

    def covers(self, t):
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        return lo - 1e-12 <= t <= hi + 1e-12


def _should_project(metric, state, span, params):
    if params.null_project is not None:
        return params.null_project
    if metric.signature != "lorentzian":
        return False
    if abs(span) <= 10.0:
        return False
    scale = 1.0 + float(state.covector @ state.covector)
    return abs(energy(metric, state)) <= 1e-8 * scale


def _march(metric, y0, t_target, params, project):
    """Integrate from parameter 0 toward ``t_target``.

    Returns (pieces, reached parameter, termination, final y).
    """
    n = metric.dim
    rhs = cogeodesic_rhs(metric)
    events, kinds = _build_events(metric, params)
    direction = 1.0 if t_target > 0 else -1.0
    chunk = params.chunk if project else abs(t_target)
    t_cur, y_cur = 0.0, np.asarray(y0, dtype=float)
    pieces = []
    while True:
        t_next = t_cur + direction * min(chunk, abs(t_target - t_cur))
        res = solve_ivp(rhs, (t_cur, t_next), y_cur, method=params.method,
                        dense_output=True, events=events,
                        rtol=params.rel_tol, atol=params.abs_tol,
                        max_step=params.max_step)
        if not res.success and res.status != 1:
            raise NullGeoError(f"integration failed: {res.message}")
        stops = []
        for idx, kind in enumerate(kinds):
            if kind[0] == "approach":
                excl = kind[1]
                for te in res.t_events[idx]:
                    if excl.distance(res.sol(te)[:n]) <= excl.hit_radius:
                        stops.append((te, Termination.HIT_EXCLUSION))
            elif len(res.t_events[idx]):
                reason = (Termination.HIT_BOUNDARY if kind[0] == "boundary"
                          else Termination.HIT_EXCLUSION)
                for te in res.t_events[idx]:
                    stops.append((te, reason))
        if stops:
            te, reason = min(stops, key=lambda item: direction * item[0])
            pieces.append(_Piece(res.sol, t_cur, te))
            return pieces, te, reason, res.sol(te)
        t_end = res.t[-1]
        pieces.append(_Piece(res.sol, t_cur, t_end))
        y_cur = res.y[:, -1]
        if abs(t_end - t_target) <= 1e-14 * max(1.0, abs(t_target)):
            return pieces, t_end, Termination.REACHED_PARAM, y_cur
        t_cur = t_end
        if project:
            s = project_null(metric, PhaseState(y_cur[:n], y_cur[n:]))
            y_cur = s.flat()


def flow(metric, state, t, params=None):
    """State of the cogeodesic flow at parameter ``t``.

    Raises :class:`TruncationError` if the trajectory leaves the chart
    domain or enters an excluded set before reaching ``t``.
    """
    params = params or FlowParams()
    if abs(t) > params.max_param * (1.0 + 1e-12):
        raise ValueError(f"|t|={abs(t)} exceeds max_param={params.max_param}")
    metric.require_inside(state.base)
    if t == 0.0:
        return state
    project = _should_project(metric, state, t, params)
    _, t_end, reason, y_end = _march(metric, state.flat(), t, params, project)
    if reason is not Termination.REACHED_PARAM:
        raise TruncationError(
            f"flow stopped at parameter {t_end} ({reason.value})", t_end, reason)
    n = metric.dim
    return PhaseState(y_end[:n], y_end[n:])


class GeodesicSegment:
    """Dense-output trajectory over an affine-parameter interval.

    ``samples`` is an ordered list of (parameter, PhaseState) nodes;
    arbitrary parameters inside the achieved interval are served by the
    underlying dense interpolants.
    """

    def __init__(self, metric, initial, requested, pieces, interval,
                 termination_backward, termination_forward, n_samples):
        self.metric = metric
        self.initial = initial
        self.requested = (float(requested[0]), float(requested[1]))
        self.interval = (float(interval[0]), float(interval[1]))
        self._pieces = pieces
        self.termination_backward = termination_backward
        self.termination_forward = termination_forward
        self.termination = max(termination_backward, termination_forward,
                               key=lambda r: _SEVERITY[r])
        ts = np.linspace(self.interval[0], self.interval[1], n_samples)
        flat = self.states_flat(ts)
        n = metric.dim
        self.samples = [(float(t), PhaseState(row[:n], row[n:]))
                        for t, row in zip(ts, flat)]

    @property
    def parameters(self):
        return np.array([t for t, _ in self.samples])

    def _piece_for(self, t):
        for piece in self._pieces:
            if piece.covers(t):
                return piece
        raise ValueError(f"parameter {t} outside achieved interval {self.interval}")

    def states_flat(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty((ts.shape[0], 2 * self.metric.dim))
        filled = np.zeros(ts.shape[0], dtype=bool)
        for piece in self._pieces:
            lo, hi = min(piece.t0, piece.t1), max(piece.t0, piece.t1)
            mask = ~filled & (ts >= lo - 1e-12) & (ts <= hi + 1e-12)
            if np.any(mask):
                out[mask] = piece.sol(np.clip(ts[mask], lo, hi)).T
                filled[mask] = True
        if not np.all(filled):
            raise ValueError("parameters outside achieved interval")
        return out

    def state(self, t):
        row = self.states_flat([t])[0]
        n = self.metric.dim
        return PhaseState(row[:n], row[n:])

    def base(self, t):
        return self.state(t).base

    def bases(self, ts):
        return self.states_flat(ts)[:, :self.metric.dim]

    def energies(self, ts=None):
        if ts is None:
            ts = self.parameters
        flat = self.states_flat(ts)
        n = self.metric.dim
        vals = np.empty(len(flat))
        for i, row in enumerate(flat):
            vals[i] = row[n:] @ self.metric.inverse(row[:n]) @ row[n:]
        return vals

    def energy_drift(self):
        e = self.energies()
        return float(np.max(np.abs(e - e[0])))


def trace(metric, state, interval, params=None):
    """Dense trajectory over ``interval = [a, b]`` with ``a <= 0 <= b``.

    Truncation is recorded in the termination fields, never raised.
    """
    params = params or FlowParams()
    a, b = float(interval[0]), float(interval[1])
    if not (a <= 0.0 <= b) or a == b:
        raise ValueError("trace interval must contain parameter 0")
    if max(abs(a), abs(b)) > params.max_param * (1.0 + 1e-12):
        raise ValueError("trace interval exceeds max_param")
    metric.require_inside(state.base)
    y0 = state.flat()
    project = _should_project(metric, state, b - a, params)
    pieces = []
    t_lo, term_lo = 0.0, Termination.REACHED_PARAM
    t_hi, term_hi = 0.0, Termination.REACHED_PARAM
    if a < 0.0:
        back, t_lo, term_lo, _ = _march(metric, y0, a, params, project)
        pieces.extend(back)
    if b > 0.0:
        fwd, t_hi, term_hi, _ = _march(metric, y0, b, params, project)
        pieces.extend(fwd)
    return GeodesicSegment(metric, state, (a, b), pieces, (t_lo, t_hi),
                           term_lo, term_hi, params.samples)


def exp_map(metric, vec, params=None):
    """(base, endpoint) of the unit-parameter geodesic with initial
    velocity ``vec``."""
    params = params or FlowParams()
    base = metric.require_inside(vec.base)
    if float(np.linalg.norm(vec.vector)) == 0.0:
        return base.copy(), base.copy()
    if params.max_param < 1.0:
        params = params.with_(max_param=1.0)
    end = flow(metric, legendre(metric, vec), 1.0, params)
    return base.copy(), np.array(end.base)


# -- contact-form residuals ----------------------------------------------------


def _pfaffian(a):
    m = a.shape[0]
    if m == 0:
        return 1.0
    if m % 2:
        return 0.0
    if m == 2:
        return float(a[0, 1])
    total, sign = 0.0, 1.0
    for j in range(1, m):
        keep = [i for i in range(m) if i not in (0, j)]
        total += sign * a[0, j] * _pfaffian(a[np.ix_(keep, keep)])
        sign = -sign
    return float(total)


def contact_residuals(metric, state, rng=None, retries=5, degeneracy_tol=1e-10):
    """Pointwise residuals of the canonical one-form at a phase state.

    Returns ``(theta(X), theta(xi), nu)`` where ``X`` is the Hamiltonian
    vector field of the dual quadratic form, ``xi`` the fiber scaling field,
    and ``nu`` the top wedge power of ``d theta`` evaluated on a completed
    basis of the cone tangent space.  The first two vanish on the null cone;
    ``nu`` must stay away from zero.  The basis completion is drawn from
    ``rng`` and re-drawn on near-degeneracy.
    """
    rng = rng or np.random.default_rng(0)
    n = metric.dim
    x = metric.require_inside(state.base)
    al = np.asarray(state.covector, dtype=float)
    half = cogeodesic_rhs(metric)(0.0, state.flat())
    x_g = 2.0 * half                       # Hamiltonian field of g*(a, a)
    xi = np.concatenate([np.zeros(n), al])
    theta_xg = float(al @ x_g[:n])
    theta_xi = float(al @ xi[:n])
    de = np.concatenate([-2.0 * half[n:], 2.0 * half[:n]])   # dE in (x, a)

    def two_form(u, v):
        return float(u[n:] @ v[:n] - v[n:] @ u[:n])

    xg_hat = x_g / np.linalg.norm(x_g)
    xi_hat = xi / np.linalg.norm(xi)
    # the wedge scalar lives on the null cone; off it only the one-form
    # pairings are meaningful
    on_cone = abs(theta_xg) <= 1e-8 * (1.0 + float(al @ al))
    if not on_cone:
        return theta_xg, theta_xi, float("nan")
    de_sq = float(de @ de)

    def wedge(vectors):
        gram = np.zeros((2 * n, 2 * n))
        for i, u in enumerate(vectors):
            for j in range(i + 1, 2 * n):
                gram[i, j] = two_form(u, vectors[j])
                gram[j, i] = -gram[i, j]
        return math.factorial(n) * _pfaffian(gram)

    best_nu = 0.0
    for _ in range(retries):
        basis = [xg_hat, xi_hat]
        tries = 0
        while len(basis) < 2 * n - 1:
            u = rng.standard_normal(2 * n)
            if on_cone and de_sq > 0.0:
                u -= (float(de @ u) / de_sq) * de
            for b in basis:
                u -= float(u @ b) * b
            norm = np.linalg.norm(u)
            if norm < 1e-8:
                tries += 1
                if tries > 50:
                    raise DegenerateInputError("basis completion degenerated")
                continue
            basis.append(u / norm)
        completion = basis[2:]
        rows = [np.concatenate([-v[n:], v[:n]]) for v in [xi_hat] + completion]
        ns = null_space(np.array(rows))
        for j in range(ns.shape[1]):
            nu = wedge([ns[:, j], xg_hat, xi_hat] + completion)
            if abs(nu) > abs(best_nu):
                best_nu = nu
        if abs(best_nu) >= 1e-6:
            break
    if abs(best_nu) < degeneracy_tol:
        raise DegenerateInputError("wedge evaluation degenerate after retries")
    return theta_xg, theta_xi, best_nu


def contact_residual_batch(metric, states, rng=None):
    """Residual maxima over a batch of null states: returns
    (max |theta(X)|, max |theta(xi)|, min |nu|)."""
    rng = rng or np.random.default_rng(0)
    worst = (0.0, 0.0, math.inf)
    for s in states:
        t1, t2, nu = contact_residuals(metric, s, rng=rng)
        worst = (max(worst[0], abs(t1)), max(worst[1], abs(t2)),
                 min(worst[2], abs(nu)))
    return worst
