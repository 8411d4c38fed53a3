"""Transverse variation analysis along null geodesics: parallel screen
frames, Jacobi classes, conjugate points, and the index form.

Variations of a null geodesic modulo its own tangent direction live in an
(n-2)-dimensional fiber.  The fiber is realized concretely by a screen
frame: a second null vector N with g(N, gamma') = -1 fixes a spacelike
complement of span{gamma', N}, which is parallel-transported along the
geodesic.  The frame stays g-orthonormal, so fiber inner products are plain
dot products and the transverse curvature becomes a symmetric
(n-2) x (n-2) matrix function of the affine parameter.

Jacobi classes solve V'' + M(t) V = 0 in frame components.  Conjugate
points are the zeros of det Y for the matrix solution with Y(a) = 0,
Y'(a) = 1; the index form is the classical second-variation bilinear form,
discretized with piecewise-linear hat sections so that definiteness reduces
to a finite symmetric eigenproblem.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import FrameError
from .flow import cogeodesic_rhs
from .geometry import energy


def christoffel(metric, x):
    """Connection coefficients Gamma[i, j, k] = Gamma^i_{jk}."""
    gi = metric.inverse(x)
    dg = metric.derivatives(x)          # dg[k, i, j] = d_k g_ij
    t1 = np.einsum("il,jlk->ijk", gi, dg)
    t2 = np.einsum("il,klj->ijk", gi, dg)
    t3 = np.einsum("il,ljk->ijk", gi, dg)
    return 0.5 * (t1 + t2 - t3)


def riemann(metric, x, step=None):
    """Curvature tensor R[i, j, k, l] with R(X, Y)Z^i = R^i_jkl Z^j X^k Y^l.

    Uses the metric's analytic override when present, otherwise central
    finite differences of the connection."""
    if metric.riemann_override is not None:
        return metric.riemann_override(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    n = metric.dim
    step = step or 1e-5
    gam = christoffel(metric, x)
    dgam = np.empty((n, n, n, n))       # dgam[k, i, l, j] = d_k Gamma^i_lj
    for k in range(n):
        h = step * (1.0 + abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        dgam[k] = (christoffel(metric, xp) - christoffel(metric, xm)) / (2.0 * h)
    r = (np.einsum("kilj->ijkl", dgam) - np.einsum("likj->ijkl", dgam)
         + np.einsum("ikm,mlj->ijkl", gam, gam)
         - np.einsum("ilm,mkj->ijkl", gam, gam))
    return r


def curvature_endomorphism(metric, x, velocity, vec):
    """R(vec, velocity)velocity as a chart vector."""
    r = riemann(metric, x)
    return np.einsum("ijkl,j,k,l->i", r, velocity, vec, velocity)


class QuotientFrame:
    """Parallel screen frame along a null geodesic segment."""

    def __init__(self, metric, segment, nodes=161, rtol=1e-10, atol=1e-12):
        self.metric = metric
        self.segment = segment
        a, b = segment.interval
        if not b > a:
            raise FrameError("degenerate parameter interval")
        self.interval = (a, b)
        n = metric.dim
        self.n_fiber = n - 2
        state0 = segment.state(a)
        if abs(energy(metric, state0)) > 1e-7:
            raise FrameError("screen frames require a null geodesic")
        x0 = state0.base
        v0 = metric.inverse(x0) @ state0.covector
        screen0 = _initial_screen(metric, x0, v0)
        rhs_flow = cogeodesic_rhs(metric)

        def rhs(t, y):
            x = y[:n]
            flow_part = rhs_flow(t, y[:2 * n])
            v = flow_part[:n]
            gam = christoffel(metric, x)
            frame = y[2 * n:].reshape(self.n_fiber, n)
            dframe = -np.einsum("ijk,j,ek->ei", gam, v, frame)
            return np.concatenate([flow_part, dframe.ravel()])

        y0 = np.concatenate([state0.flat(), screen0.ravel()])
        sol = solve_ivp(rhs, (a, b), y0, method="DOP853", dense_output=True,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise FrameError(f"frame transport failed: {sol.message}")
        self._sol = sol.sol
        self.nodes = np.linspace(a, b, nodes)
        mats = np.array([self.curvature_matrix(t, direct=True)
                         for t in self.nodes])
        self._curv_spline = (CubicSpline(self.nodes, mats, axis=0)
                             if self.n_fiber else None)

    # -- evaluation ---------------------------------------------------------

    def _unpack(self, t):
        n = self.metric.dim
        y = self._sol(t)
        return y[:n], y[n:2 * n], y[2 * n:].reshape(self.n_fiber, n)

    def base(self, t):
        return self._unpack(t)[0]

    def velocity(self, t):
        x, alpha, _ = self._unpack(t)
        return self.metric.inverse(x) @ alpha

    def screen(self, t):
        return self._unpack(t)[2]

    def gram(self, t):
        x, _, frame = self._unpack(t)
        return frame @ self.metric.g(x) @ frame.T

    def tangency(self, t):
        """Max |g(frame vector, velocity)| at parameter t."""
        x, alpha, frame = self._unpack(t)
        return float(np.max(np.abs(frame @ alpha))) if self.n_fiber else 0.0

    def curvature_matrix(self, t, direct=False):
        """Symmetric fiber matrix of the transverse curvature at t."""
        if self.n_fiber == 0:
            return np.zeros((0, 0))
        if not direct and self._curv_spline is not None:
            m = self._curv_spline(t)
            return 0.5 * (m + m.T)
        x, alpha, frame = self._unpack(t)
        v = self.metric.inverse(x) @ alpha
        g = self.metric.g(x)
        r = riemann(self.metric, x)
        cols = [np.einsum("ijkl,j,k,l->i", r, v, frame[e], v)
                for e in range(self.n_fiber)]
        m = np.array([[float(frame[k] @ g @ col) for col in cols]
                      for k in range(self.n_fiber)])
        return 0.5 * (m + m.T)


def _initial_screen(metric, x, v):
    """g-orthonormal spacelike frame spanning the screen at the start."""
    n = metric.dim
    n_fiber = n - 2
    if n_fiber == 0:
        return np.zeros((0, n))
    g = metric.g(x)
    t_vec = metric.orientation(x)
    lam = float(v @ g @ t_vec) / float(t_vec @ g @ t_vec)
    w = v - 2.0 * lam * t_vec
    denom = float(v @ g @ w)
    if abs(denom) < 1e-14:
        raise FrameError("degenerate null pair at the segment start")
    n_vec = -w / denom                  # g(N, v) = -1, N null
    frame = []
    for seed in np.eye(n):
        u = seed + float(seed @ g @ v) * n_vec + float(seed @ g @ n_vec) * v
        for e in frame:
            u = u - float(u @ g @ e) * e
        norm_sq = float(u @ g @ u)
        if norm_sq < 1e-10:
            continue
        frame.append(u / math.sqrt(norm_sq))
        if len(frame) == n_fiber:
            break
    if len(frame) != n_fiber:
        raise FrameError("screen construction found too few directions")
    return np.array(frame)


def build_quotient_frame(metric, segment, nodes=161):
    return QuotientFrame(metric, segment, nodes=nodes)


@dataclass(frozen=True)
class QuotientSection:
    """Fiber components of a transverse section at the frame nodes."""

    frame: QuotientFrame
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.frame.nodes), self.frame.n_fiber):
            raise ValueError("section values must match the frame grid")
        object.__setattr__(self, "values", vals)


def curvature_action(frame, t, vec):
    """Fiber components of the transverse curvature acting on ``vec``."""
    vec = np.asarray(vec, dtype=float)
    return frame.curvature_matrix(t, direct=True) @ vec


def jacobi_solve(frame, v0, v0_prime, rtol=1e-11, atol=1e-13):
    """Solve V'' + M(t) V = 0 in frame components from the left endpoint."""
    nf = frame.n_fiber
    a, b = frame.interval
    if nf == 0:
        return QuotientSection(frame, np.zeros((len(frame.nodes), 0)))

    def rhs(t, y):
        return np.concatenate([y[nf:], -frame.curvature_matrix(t) @ y[:nf]])

    y0 = np.concatenate([np.atleast_1d(np.asarray(v0, dtype=float)),
                         np.atleast_1d(np.asarray(v0_prime, dtype=float))])
    sol = solve_ivp(rhs, (a, b), y0, method="DOP853", dense_output=True,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise FrameError(f"Jacobi integration failed: {sol.message}")
    return QuotientSection(frame, sol.sol(frame.nodes)[:nf].T)


def _matrix_solution(frame, rtol=1e-11, atol=1e-13):
    nf = frame.n_fiber
    a, b = frame.interval

    def rhs(t, y):
        yy = y.reshape(2, nf, nf)
        return np.concatenate([yy[1].ravel(),
                               (-frame.curvature_matrix(t) @ yy[0]).ravel()])

    y0 = np.concatenate([np.zeros(nf * nf), np.eye(nf).ravel()])
    sol = solve_ivp(rhs, (a, b), y0, method="DOP853", dense_output=True,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise FrameError(f"matrix Jacobi integration failed: {sol.message}")
    return sol.sol


def conjugate_scan(frame, grid=1025, sigma_tol=1e-9):
    """Zeros of det Y on (a, b] plus parameters where the smallest singular
    value dips without a sign change (possible even-order zeros)."""
    nf = frame.n_fiber
    a, b = frame.interval
    if nf == 0:
        return [], []
    sol = _matrix_solution(frame)
    ts = np.linspace(a, b, grid)
    dets = np.empty(grid)
    sigmas = np.empty(grid)
    for i, t in enumerate(ts):
        y = sol(t).reshape(2, nf, nf)[0]
        dets[i] = np.linalg.det(y)
        sigmas[i] = (np.linalg.svd(y, compute_uv=False)[-1]
                     if nf > 1 else abs(y[0, 0]))
    scale = np.max(np.abs(dets))
    if scale == 0.0:
        raise FrameError("matrix solution determinant vanished identically")

    def det_at(t):
        return float(np.linalg.det(sol(t).reshape(2, nf, nf)[0]))

    roots = []
    start = 2  # skip the forced zero at the left endpoint
    for i in range(start, grid - 1):
        if dets[i] == 0.0:
            roots.append(float(ts[i]))
        elif dets[i] * dets[i + 1] < 0.0:
            roots.append(float(brentq(det_at, ts[i], ts[i + 1], xtol=1e-10)))
    sigma_scale = np.max(sigmas)
    marginal = []
    for i in range(start, grid - 1):
        if (sigmas[i] < sigma_tol * max(sigma_scale, 1.0)
                and sigmas[i] <= sigmas[i - 1] and sigmas[i] <= sigmas[i + 1]
                and not any(abs(ts[i] - r) < 2.0 * (b - a) / grid
                            for r in roots)):
            marginal.append(float(ts[i]))
    return roots, marginal


def conjugate_points(frame, grid=1025):
    """Parameters conjugate to the left endpoint, by determinant sign
    changes refined with bisection."""
    roots, _ = conjugate_scan(frame, grid=grid)
    return roots


def index_form(frame, v_section, w_section):
    """Second-variation bilinear form of two piecewise-linear sections."""
    if v_section.frame is not w_section.frame:
        raise ValueError("sections live on different frames")
    nf = frame.n_fiber
    if nf == 0:
        return 0.0
    ts = frame.nodes
    vv = v_section.values
    ww = w_section.values
    total = 0.0
    gauss = (0.5 * (1.0 - 1.0 / math.sqrt(3.0)),
             0.5 * (1.0 + 1.0 / math.sqrt(3.0)))
    for i in range(len(ts) - 1):
        h = ts[i + 1] - ts[i]
        dv = (vv[i + 1] - vv[i]) / h
        dw = (ww[i + 1] - ww[i]) / h
        total += h * float(dv @ dw)
        for s in gauss:
            t = ts[i] + s * h
            vmid = (1.0 - s) * vv[i] + s * vv[i + 1]
            wmid = (1.0 - s) * ww[i] + s * ww[i + 1]
            total -= 0.5 * h * float(
                vmid @ frame.curvature_matrix(t) @ wmid)
    return -total


class Definiteness(enum.Enum):
    NEGATIVE_DEFINITE = "negative-definite"
    INDEFINITE = "indefinite"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class IndexMatrixResult:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    verdict: Definiteness


def index_matrix(frame, basis_size, eps_def=1e-7):
    """Gram matrix of the index form on hat sections vanishing at both
    endpoints, with its definiteness verdict."""
    nf = frame.n_fiber
    if nf == 0:
        return IndexMatrixResult(np.zeros((0, 0)), np.zeros(0),
                                 Definiteness.NEGATIVE_DEFINITE)
    a, b = frame.interval
    m = int(basis_size)
    h = (b - a) / (m + 1)
    knots = a + h * np.arange(m + 2)
    dim = m * nf
    stiff = np.zeros((dim, dim))
    mass = np.zeros((dim, dim))
    eye = np.eye(nf)
    gauss_nodes = np.array([0.5 - 0.5 / math.sqrt(3.0),
                            0.5 + 0.5 / math.sqrt(3.0)])
    for i in range(m):
        sl = slice(i * nf, (i + 1) * nf)
        stiff[sl, sl] += (2.0 / h) * eye
        if i + 1 < m:
            sr = slice((i + 1) * nf, (i + 2) * nf)
            stiff[sl, sr] += (-1.0 / h) * eye
            stiff[sr, sl] += (-1.0 / h) * eye
    for e in range(m + 1):
        t0, t1 = knots[e], knots[e + 1]
        for s in gauss_nodes:
            t = t0 + s * (t1 - t0)
            mt = frame.curvature_matrix(t)
            w = 0.5 * h
            # hat values on this element: hat e-1 falls, hat e rises
            for (bi, vi) in ((e - 1, 1.0 - s), (e, s)):
                if not (0 <= bi < m):
                    continue
                for (bj, vj) in ((e - 1, 1.0 - s), (e, s)):
                    if not (0 <= bj < m):
                        continue
                    mass[bi * nf:(bi + 1) * nf, bj * nf:(bj + 1) * nf] += (
                        w * vi * vj * mt)
    gram = -(stiff - mass)
    gram = 0.5 * (gram + gram.T)
    eigs = np.linalg.eigvalsh(gram)
    if eigs.max() < -eps_def:
        verdict = Definiteness.NEGATIVE_DEFINITE
    elif eigs.max() > eps_def:
        verdict = Definiteness.INDEFINITE
    else:
        verdict = Definiteness.MARGINAL
    return IndexMatrixResult(gram, eigs, verdict)
