"""Chart-based metric geometry: domains, metric fields, phase-space states.

A spacetime (or Riemannian surface) lives in a single coordinate chart: an
axis-aligned box, optionally periodic along some axes, minus a collection of
excluded sets (deleted points or regions).  Metric components, their inverse
and first derivatives, and a future time orientation are functions of the
chart coordinates.  Everything downstream (flow integration, causal oracles,
Jacobi machinery) consumes the ``MetricField`` interface defined here.

All values are immutable after construction and every operation is a pure
function of its inputs, so concurrent evaluation needs no coordination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DomainError


def as_coords(x, dim=None):
    """Validate and return chart coordinates as a float vector."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"chart point must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"chart point has length {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("chart point has non-finite coordinates")
    return arr


@dataclass(frozen=True)
class PointExclusion:
    """A single deleted point.  A trajectory hits it when it passes within
    ``hit_radius`` of the point, which keeps the excluded set effectively
    measure zero for nearby trajectories."""

    point: np.ndarray
    hit_radius: float = 1e-9
    label: str = "deleted-point"

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))

    def distance(self, x):
        return float(np.linalg.norm(np.asarray(x, dtype=float) - self.point))

    def contains(self, x):
        return self.distance(x) <= self.hit_radius


@dataclass(frozen=True)
class RegionExclusion:
    """An excluded open region given by a signed distance function
    (negative inside the excluded set)."""

    signed_distance: object
    label: str = "excluded-region"

    def contains(self, x):
        return float(self.signed_distance(np.asarray(x, dtype=float))) <= 0.0


@dataclass(frozen=True)
class ChartDomain:
    """Axis-aligned chart box with optional periodic axes and exclusions.

    ``periods[k]`` is the identification period of axis ``k`` or ``None``.
    Periodic axes have no boundary; their ``lo``/``hi`` entries only fix the
    fundamental interval used by grids and sampling.
    """

    lo: np.ndarray
    hi: np.ndarray
    periods: tuple = None
    exclusions: tuple = ()

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("domain bounds must be equal-length vectors")
        if np.any(lo >= hi):
            raise ValueError("domain must satisfy lo < hi on every axis")
        periods = self.periods
        if periods is None:
            periods = (None,) * lo.shape[0]
        periods = tuple(None if p is None else float(p) for p in periods)
        if len(periods) != lo.shape[0]:
            raise ValueError("periods length must match dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "exclusions", tuple(self.exclusions))

    @property
    def dim(self):
        return self.lo.shape[0]

    def is_periodic(self, k):
        return self.periods[k] is not None

    def contains(self, x, margin=0.0):
        """True if ``x`` lies in the open box (shrunk by ``margin``) and
        outside every exclusion."""
        x = np.asarray(x, dtype=float)
        for k in range(self.dim):
            if self.is_periodic(k):
                continue
            if not (self.lo[k] + margin < x[k] < self.hi[k] - margin):
                return False
        return not any(excl.contains(x) for excl in self.exclusions)

    def boundary_gap(self, x):
        """Smallest coordinate distance from ``x`` to a non-periodic box face."""
        x = np.asarray(x, dtype=float)
        gap = np.inf
        for k in range(self.dim):
            if self.is_periodic(k):
                continue
            if np.isfinite(self.lo[k]):
                gap = min(gap, x[k] - self.lo[k])
            if np.isfinite(self.hi[k]):
                gap = min(gap, self.hi[k] - x[k])
        return gap

    def wrap_delta(self, a, b):
        """Displacement ``b - a`` with periodic axes reduced to the nearest
        image.  Accepts arrays broadcastable to coordinate vectors."""
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        for k, p in enumerate(self.periods):
            if p is not None:
                d[..., k] = (d[..., k] + 0.5 * p) % p - 0.5 * p
        return d

    def wrap_distance(self, a, b):
        return float(np.linalg.norm(self.wrap_delta(a, b)))


class MetricField:
    """A metric tensor field on a chart.

    Parameters
    ----------
    dim : chart dimension n >= 2.
    components : callable x -> symmetric (n, n) array g_ij.
    domain : ChartDomain.
    inverse : optional callable; defaults to numerical inversion.
    derivatives : optional callable x -> (n, n, n) array with
        ``dg[k, i, j] = d g_ij / d x_k``; defaults to central finite
        differences with step ``fd_step * (1 + |x_k|)``.
    orientation : callable x -> future-pointing timelike vector (Lorentzian
        metrics only).
    signature : "lorentzian" (one negative eigenvalue) or "riemannian".
    time_axis : index of the coordinate used when re-projecting covectors
        onto the null cone (Lorentzian only).
    fast_rhs : optional specialized cogeodesic right-hand side
        ``f(t, y) -> dy`` with ``y = (x, alpha)``; used by the flow
        integrator when present.
    riemann : optional analytic curvature override
        ``x -> R[i, j, k, l]`` with ``R(X, Y)Z^i = R^i_jkl Z^j X^k Y^l``.
    sampling_box : (lo, hi) finite box used when drawing random points.
    """

    def __init__(self, dim, components, *, domain, inverse=None,
                 derivatives=None, orientation=None, signature="lorentzian",
                 time_axis=None, name="metric", fast_rhs=None, riemann=None,
                 sampling_box=None, fd_step=1e-5):
        if dim < 2:
            raise ValueError("metric dimension must be at least 2")
        if signature not in ("lorentzian", "riemannian"):
            raise ValueError(f"unknown signature {signature!r}")
        if domain.dim != dim:
            raise ValueError("domain dimension mismatch")
        if signature == "lorentzian":
            if orientation is None:
                raise ValueError("Lorentzian metrics need an orientation field")
            if time_axis is None:
                raise ValueError("Lorentzian metrics need a time_axis")
        self.dim = dim
        self._components = components
        self._inverse = inverse
        self._derivatives = derivatives
        self._orientation = orientation
        self.domain = domain
        self.signature = signature
        self.time_axis = time_axis
        self.name = name
        self.key = name
        self.fast_rhs = fast_rhs
        self.riemann_override = riemann
        self.fd_step = float(fd_step)
        if sampling_box is None:
            lo = np.where(np.isfinite(domain.lo), domain.lo, -1.0)
            hi = np.where(np.isfinite(domain.hi), domain.hi, 1.0)
            sampling_box = (lo, hi)
        self.sampling_box = (np.asarray(sampling_box[0], dtype=float),
                             np.asarray(sampling_box[1], dtype=float))

    # -- field evaluation -------------------------------------------------

    def g(self, x):
        return self._components(as_coords(x, self.dim))

    def inverse(self, x):
        if self._inverse is not None:
            return self._inverse(as_coords(x, self.dim))
        return np.linalg.inv(self.g(x))

    def derivatives(self, x):
        if self._derivatives is not None:
            return self._derivatives(as_coords(x, self.dim))
        return self._fd_derivatives(as_coords(x, self.dim))

    def _fd_derivatives(self, x):
        n = self.dim
        dg = np.empty((n, n, n))
        for k in range(n):
            h = self.fd_step * (1.0 + abs(x[k]))
            xp = x.copy()
            xm = x.copy()
            xp[k] += h
            xm[k] -= h
            dg[k] = (self._components(xp) - self._components(xm)) / (2.0 * h)
        return dg

    def orientation(self, x):
        if self._orientation is None:
            raise ValueError(f"{self.name} has no time orientation")
        return np.asarray(self._orientation(as_coords(x, self.dim)), dtype=float)

    # -- domain helpers ----------------------------------------------------

    def require_inside(self, x, margin=0.0):
        x = as_coords(x, self.dim)
        if not self.domain.contains(x, margin=margin):
            raise DomainError(f"point {x} outside domain of {self.name}")
        return x

    def wrap_delta(self, a, b):
        return self.domain.wrap_delta(a, b)

    # -- invariant checks ---------------------------------------------------

    def validate_at(self, x, tol=1e-10):
        """Check symmetry, inverse consistency, signature, and orientation
        at one point.  Raises ``ValueError`` on violation."""
        x = self.require_inside(x)
        g = self.g(x)
        if not np.allclose(g, g.T, atol=tol, rtol=0.0):
            raise ValueError(f"metric not symmetric at {x}")
        gi = self.inverse(x)
        if not np.allclose(g @ gi, np.eye(self.dim), atol=tol, rtol=0.0):
            raise ValueError(f"inverse inconsistent at {x}")
        negative = int(np.sum(np.linalg.eigvalsh(g) < 0.0))
        expected = 1 if self.signature == "lorentzian" else 0
        if negative != expected:
            raise ValueError(
                f"signature check failed at {x}: {negative} negative eigenvalues")
        if self.signature == "lorentzian":
            t = self.orientation(x)
            if not float(t @ g @ t) < 0.0:
                raise ValueError(f"orientation not timelike at {x}")


# -- phase-space states ------------------------------------------------------


def _frozen_vector(v, dim=None):
    arr = np.array(v, dtype=float)
    if arr.ndim != 1 or (dim is not None and arr.shape[0] != dim):
        raise ValueError("state component has wrong shape")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state component has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhaseState:
    """A base point together with a covector, i.e. an element of T*M."""

    base: np.ndarray
    covector: np.ndarray

    def __post_init__(self):
        base = _frozen_vector(self.base)
        cov = _frozen_vector(self.covector, base.shape[0])
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "covector", cov)

    @property
    def dim(self):
        return self.base.shape[0]

    def flat(self):
        return np.concatenate([self.base, self.covector])


@dataclass(frozen=True)
class TangentVector:
    """A base point together with a tangent vector."""

    base: np.ndarray
    vector: np.ndarray

    def __post_init__(self):
        base = _frozen_vector(self.base)
        vec = _frozen_vector(self.vector, base.shape[0])
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self):
        return self.base.shape[0]


# -- core operations ---------------------------------------------------------


def energy(metric, state):
    """Dual quadratic form g^ij a_i a_j; zero (up to tolerance) marks a null
    covector."""
    x = metric.require_inside(state.base)
    a = state.covector
    return float(a @ metric.inverse(x) @ a)


def legendre(metric, vec):
    """Lower the index: v -> g(v, .)."""
    x = metric.require_inside(vec.base)
    return PhaseState(x, metric.g(x) @ vec.vector)


def legendre_inverse(metric, state):
    """Raise the index: a -> g^{-1}(a, .)."""
    x = metric.require_inside(state.base)
    return TangentVector(x, metric.inverse(x) @ state.covector)


def is_future_null(metric, state, tol=1e-10):
    """True iff the covector is null within ``tol`` and future-pointing."""
    if metric.signature != "lorentzian":
        raise ValueError("future/null classification needs a Lorentzian metric")
    e = energy(metric, state)
    if abs(e) > tol:
        return False
    t = metric.orientation(state.base)
    return float(state.covector @ t) < 0.0


# -- auxiliary Riemannian metrics ---------------------------------------------


@dataclass(frozen=True)
class AuxMetric:
    """Auxiliary Riemannian metric used to normalize covectors.

    ``wick`` flips the sign of the negative eigenspace of g at each point,
    which is always available on a Lorentzian chart.  ``euclid`` is the flat
    chart metric, kept as an independent alternative for robustness checks.
    """

    kind: str = "wick"

    def dual_matrix(self, metric, x):
        """Inverse auxiliary metric (acts on covectors)."""
        if self.kind == "euclid":
            return np.eye(metric.dim)
        if self.kind == "wick":
            gi = metric.inverse(metric.require_inside(x))
            w, v = np.linalg.eigh(gi)
            return (v * np.abs(w)) @ v.T
        raise ValueError(f"unknown auxiliary metric {self.kind!r}")

    def covector_norm(self, metric, x, alpha):
        m = self.dual_matrix(metric, x)
        val = float(np.asarray(alpha) @ m @ np.asarray(alpha))
        return float(np.sqrt(max(val, 0.0)))


WICK = AuxMetric("wick")
EUCLID = AuxMetric("euclid")


def null_normalize(metric, state, aux=WICK):
    """Scale a covector by t > 0 so its auxiliary Riemannian norm is one.

    The canonical representative of a scaling class; idempotent and invariant
    under positive rescaling of the input.
    """
    norm = aux.covector_norm(metric, state.base, state.covector)
    if norm < 1e-300:
        raise DegenerateInputError("cannot normalize a zero covector")
    return PhaseState(state.base, state.covector / norm)


# -- null cone helpers --------------------------------------------------------


def _null_time_roots(metric, x, alpha):
    """Roots of g^ij a_i a_j = 0 in the time-axis component of ``alpha``."""
    ti = metric.time_axis
    gi = metric.inverse(x)
    a = gi[ti, ti]
    rest = np.delete(np.arange(metric.dim), ti)
    b = 2.0 * float(gi[ti, rest] @ alpha[rest])
    c = float(alpha[rest] @ gi[np.ix_(rest, rest)] @ alpha[rest])
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        if disc > -1e-14 * max(1.0, abs(b * b)):
            disc = 0.0
        else:
            raise DegenerateInputError("no real null root for this covector")
    sq = np.sqrt(disc)
    return (-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)


def project_null(metric, state):
    """Re-project a near-null covector onto the null cone by adjusting its
    time-axis component to the nearest root."""
    x = metric.require_inside(state.base)
    r1, r2 = _null_time_roots(metric, x, state.covector)
    cur = state.covector[metric.time_axis]
    new = np.array(state.covector)
    new[metric.time_axis] = r1 if abs(r1 - cur) <= abs(r2 - cur) else r2
    return PhaseState(x, new)


def future_null_covector(metric, x, spatial):
    """Build the future-pointing null covector with the given components on
    the non-time axes."""
    x = metric.require_inside(x)
    alpha = np.zeros(metric.dim)
    rest = np.delete(np.arange(metric.dim), metric.time_axis)
    spatial = np.asarray(spatial, dtype=float)
    if spatial.shape != (metric.dim - 1,):
        raise ValueError("spatial part must have length dim - 1")
    if np.linalg.norm(spatial) < 1e-300:
        raise DegenerateInputError("spatial part of a null covector cannot vanish")
    alpha[rest] = spatial
    t = metric.orientation(x)
    for root in _null_time_roots(metric, x, alpha):
        cand = np.array(alpha)
        cand[metric.time_axis] = root
        if float(cand @ t) < 0.0:
            return PhaseState(x, cand)
    raise DegenerateInputError("no future-pointing null root found")
