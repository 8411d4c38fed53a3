"""Built-in spacetime catalog, random sampling helpers, and config loading.

Builtin names accepted by :func:`by_name` and the config loader:

* ``minkowski2``       flat 2D, coordinates (x, y), time axis y
* ``minkowski3``       flat 3D, coordinates (t, x, y)
* ``minkowski4``       flat 4D, coordinates (t, x, y, z)
* ``cylinder-quotient`` flat 2D metric on the quotient by x -> x + 1
* ``product-revolution`` static product of a line with a surface of revolution
* ``product-sphere``   static product of a line with the round unit sphere

``minkowski2`` takes an optional deleted point, which is how the
point-removed flat examples are built.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .geometry import (ChartDomain, MetricField, PhaseState, PointExclusion,
                       TangentVector, future_null_covector)


def _constant_metric(gmat):
    g = np.asarray(gmat, dtype=float)
    gi = np.linalg.inv(g)
    n = g.shape[0]
    zero = np.zeros((n, n, n))

    def components(x):
        return g

    def inverse(x):
        return gi

    def derivatives(x):
        return zero

    def fast_rhs(t, y):
        dy = np.empty_like(y)
        dy[:n] = gi @ y[n:]
        dy[n:] = 0.0
        return dy

    def riemann(x):
        return np.zeros((n, n, n, n))

    return components, inverse, derivatives, fast_rhs, riemann


def minkowski2(deleted_point=None, box=4.0):
    """Flat 2D metric dx^2 - dy^2 with time coordinate y."""
    comp, inv, der, rhs, riem = _constant_metric(np.diag([1.0, -1.0]))
    exclusions = ()
    name = "minkowski2"
    if deleted_point is not None:
        exclusions = (PointExclusion(np.asarray(deleted_point, dtype=float)),)
        name = "minkowski2-minus-point"
    domain = ChartDomain(lo=[-box, -box], hi=[box, box], exclusions=exclusions)
    return MetricField(
        2, comp, inverse=inv, derivatives=der, domain=domain,
        orientation=lambda x: np.array([0.0, 1.0]), time_axis=1,
        name=name, fast_rhs=rhs, riemann=riem,
        sampling_box=([-2.0, -2.0], [2.0, 2.0]))


def _minkowski_nd(n, name, box=4.0):
    gdiag = np.ones(n)
    gdiag[0] = -1.0
    comp, inv, der, rhs, riem = _constant_metric(np.diag(gdiag))
    t_vec = np.zeros(n)
    t_vec[0] = 1.0
    domain = ChartDomain(lo=[-box] * n, hi=[box] * n)
    return MetricField(
        n, comp, inverse=inv, derivatives=der, domain=domain,
        orientation=lambda x: t_vec, time_axis=0, name=name,
        fast_rhs=rhs, riemann=riem,
        sampling_box=([-2.0] * n, [2.0] * n))


def minkowski3(box=4.0):
    """Flat 3D metric -dt^2 + dx^2 + dy^2."""
    return _minkowski_nd(3, "minkowski3", box)


def minkowski4(box=4.0):
    """Flat 4D metric -dt^2 + dx^2 + dy^2 + dz^2."""
    return _minkowski_nd(4, "minkowski4", box)


def cylinder_quotient(ybox=4.0):
    """Flat metric dx^2 - dy^2 on the cylinder obtained by identifying
    x with x + 1.  Flows run in covering coordinates; comparisons and
    region membership wrap."""
    comp, inv, der, rhs, riem = _constant_metric(np.diag([1.0, -1.0]))
    domain = ChartDomain(lo=[0.0, -ybox], hi=[1.0, ybox], periods=(1.0, None))
    return MetricField(
        2, comp, inverse=inv, derivatives=der, domain=domain,
        orientation=lambda x: np.array([0.0, 1.0]), time_axis=1,
        name="cylinder-quotient", fast_rhs=rhs, riemann=riem,
        sampling_box=([0.0, -2.0], [1.0, 2.0]))


def sphere_product(theta_margin=0.05, tbox=6.0):
    """Static product of a time line with the round unit sphere, in
    coordinates (t, theta, phi).  Metric components, derivatives, and the
    curvature tensor are analytic."""

    def components(x):
        s = math.sin(x[1])
        return np.diag([-1.0, 1.0, s * s])

    def inverse(x):
        s = math.sin(x[1])
        return np.diag([-1.0, 1.0, 1.0 / (s * s)])

    def derivatives(x):
        dg = np.zeros((3, 3, 3))
        dg[1, 2, 2] = 2.0 * math.sin(x[1]) * math.cos(x[1])
        return dg

    def fast_rhs(t, y):
        th, at, ath, aph = y[1], y[3], y[4], y[5]
        s = math.sin(th)
        return np.array([
            -at,
            ath,
            aph / (s * s),
            0.0,
            math.cos(th) * aph * aph / (s * s * s),
            0.0,
        ])

    def riemann(x):
        # unit sphere block has constant curvature one
        s2 = math.sin(x[1]) ** 2
        k = np.diag([0.0, 1.0, s2])
        r = np.zeros((3, 3, 3, 3))
        for i in (1, 2):
            for j in (1, 2):
                for kk in (1, 2):
                    for ll in (1, 2):
                        r[i, j, kk, ll] = (
                            (1.0 if i == kk else 0.0) * k[ll, j]
                            - (1.0 if i == ll else 0.0) * k[kk, j])
        return r

    domain = ChartDomain(
        lo=[-tbox, theta_margin, -math.pi],
        hi=[tbox, math.pi - theta_margin, math.pi],
        periods=(None, None, 2.0 * math.pi))
    return MetricField(
        3, components, inverse=inverse, derivatives=derivatives,
        domain=domain, orientation=lambda x: np.array([1.0, 0.0, 0.0]),
        time_axis=0, name="product-sphere", fast_rhs=fast_rhs,
        riemann=riemann,
        sampling_box=([-1.0, 1.0, -math.pi], [1.0, math.pi - 1.0, math.pi]))


def by_name(name, **params):
    """Resolve a builtin spacetime by name.

    Returns a ``MetricField`` except for ``product-revolution``, which
    returns a :class:`~nullgeo.causality.ProductSpacetime` (its ``.metric``
    attribute is the 3D metric field).
    """
    if name == "minkowski2":
        return minkowski2(**params)
    if name == "minkowski2-minus-point":
        params.setdefault("deleted_point", (0.0, 0.0))
        return minkowski2(**params)
    if name == "minkowski3":
        return minkowski3(**params)
    if name == "minkowski4":
        return minkowski4(**params)
    if name == "cylinder-quotient":
        return cylinder_quotient(**params)
    if name == "product-sphere":
        return sphere_product(**params)
    if name == "product-revolution":
        from .causality import ProductSpacetime
        from .revolution import profile_by_name
        profile = profile_by_name(params.pop("profile", "sine8pi"),
                                  coeffs=params.pop("profile_coeffs", None))
        return ProductSpacetime(profile, **params)
    raise ConfigError(f"unknown spacetime {name!r}")


# -- random sampling -----------------------------------------------------------


def sample_chart_points(metric, n, rng):
    """Uniform points in the metric's sampling box, avoiding exclusions."""
    lo, hi = metric.sampling_box
    out = np.empty((n, metric.dim))
    count = 0
    while count < n:
        x = rng.uniform(lo, hi)
        if metric.domain.contains(x):
            out[count] = x
            count += 1
    return out

def random_null_states(metric, n, rng):
    """Future-pointing null phase states at random chart points."""
    pts = sample_chart_points(metric, n, rng)
    states = []
    for x in pts:
        spatial = rng.standard_normal(metric.dim - 1)
        while np.linalg.norm(spatial) < 1e-3:
            spatial = rng.standard_normal(metric.dim - 1)
        states.append(future_null_covector(metric, x, spatial))
    return states


def random_tangent_vectors(metric, n, rng, scale=1.0):
    pts = sample_chart_points(metric, n, rng)
    return [TangentVector(x, scale * rng.standard_normal(metric.dim))
            for x in pts]


# -- config files ---------------------------------------------------------------


def parse_config(text):
    """Parse a flat ``key = value`` config file.  ``#`` starts a comment.
    Values are coerced to bool, int, or float when they look like one."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = _coerce(value)
    return out


def _coerce(value):
    low = value.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def load_spacetime(config):
    """Build a spacetime from a config mapping (or a config file path).

    Recognized keys: ``spacetime`` (builtin name), ``exclude_point``
    (comma-separated coordinates), ``profile`` / ``profile_coeffs`` for the
    revolution surface, ``dimension`` for the flat families.
    """
    if isinstance(config, str):
        config = load_config(config)
    cfg = dict(config)
    name = cfg.pop("spacetime", None)
    if name is None:
        raise ConfigError("config needs a 'spacetime' key")
    params = {}
    if "exclude_point" in cfg:
        raw = cfg.pop("exclude_point")
        point = tuple(float(part) for part in str(raw).split(","))
        params["deleted_point"] = point
    if "dimension" in cfg:
        dim = int(cfg.pop("dimension"))
        name = {2: "minkowski2", 3: "minkowski3", 4: "minkowski4"}.get(dim, name)
    if "profile" in cfg:
        params["profile"] = cfg.pop("profile")
    if "profile_coeffs" in cfg:
        raw = cfg.pop("profile_coeffs")
        params["profile_coeffs"] = tuple(float(p) for p in str(raw).split(","))
    return by_name(name, **params)
