"""Registered experiment scenarios wiring the library into reproducible,
seeded runs with machine-readable reports.

Each scenario validates its config against a declared schema, draws all
randomness from one seed, and returns a report whose result tree is
byte-identical across runs with equal seeds (timestamps and runtimes
excluded).  Plot data goes to CSV side files when a plot directory is set.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .causality import (CausalRelation, ProductSpacetime, causal_relation,
                        closedness_probe, horismos_related_2d, leaf_causal,
                        minkowski_leaves, product_jplus_sequences,
                        straddle_eplus_sequences)
from .errors import ConfigError
from .flow import FlowParams, contact_residuals, trace
from .geometry import EUCLID, WICK, PhaseState, future_null_covector
from .jacobi import (Definiteness, build_quotient_frame, conjugate_points,
                     index_matrix, jacobi_solve)
from .metrics import (cylinder_quotient, minkowski2, minkowski3, minkowski4,
                      random_null_states, sphere_product)
from .nullspace import (ConvexPolygonRegion, ProbeWindow, hausdorff_witness,
                        intersection_components, limit_classes, class_of)
from .reachability import GridReachability
from .revolution import (END_MARGIN, band_distance, circle_length,
                         distance_result)

SCENARIOS = {}

_COMMON_KEYS = {"seed": 42, "rel_tol": 1e-10, "abs_tol": 1e-12,
                "max_param": 10.0, "boundary_margin": 1e-3,
                "grid_cache": ""}


def scenario(name, **schema):
    def wrap(func):
        SCENARIOS[name] = (func, schema)
        return func
    return wrap


@dataclass
class AssertionRecord:
    name: str
    expected: object
    actual: object
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "expected": _plain(self.expected),
                "actual": _plain(self.actual), "passed": self.passed,
                "detail": self.detail}


def _plain(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class Report:
    scenario: str
    timestamp: str
    config: dict
    results: dict
    assertions: list
    passed: bool
    runtime_seconds: float

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "timestamp": self.timestamp,
            "config": _plain(self.config),
            "results": _plain(self.results),
            "assertions": [a.to_dict() for a in self.assertions],
            "passed": self.passed,
            "runtime_seconds": self.runtime_seconds,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


class Context:
    def __init__(self, config, plot_dir=None):
        self.config = config
        self.rng = np.random.default_rng(int(config["seed"]))
        self.results = {}
        self.assertions = []
        self.plot_dir = plot_dir

    def flow_params(self, **overrides):
        kw = dict(rel_tol=self.config["rel_tol"],
                  abs_tol=self.config["abs_tol"],
                  max_param=self.config["max_param"],
                  boundary_margin=self.config["boundary_margin"])
        kw.update(overrides)
        return FlowParams(**kw)

    def record(self, name, value):
        self.results[name] = _plain(value)

    def check(self, name, actual, expected=True, tol=None, detail=""):
        if tol is None:
            passed = bool(actual == expected)
        else:
            passed = bool(abs(actual - expected) <= tol)
        self.assertions.append(AssertionRecord(
            name, _plain(expected), _plain(actual), passed, detail))
        return passed

    def check_less(self, name, actual, bound, detail=""):
        passed = bool(actual < bound)
        self.assertions.append(AssertionRecord(
            name, f"< {_plain(bound)}", _plain(actual), passed, detail))
        return passed

    def check_greater(self, name, actual, bound, detail=""):
        passed = bool(actual > bound)
        self.assertions.append(AssertionRecord(
            name, f"> {_plain(bound)}", _plain(actual), passed, detail))
        return passed

    def write_csv(self, name, header, rows):
        if not self.plot_dir:
            return
        os.makedirs(self.plot_dir, exist_ok=True)
        with open(os.path.join(self.plot_dir, name), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    def write_text(self, name, text):
        if not self.plot_dir:
            return
        os.makedirs(self.plot_dir, exist_ok=True)
        with open(os.path.join(self.plot_dir, name), "w",
                  encoding="utf-8") as fh:
            fh.write(text)


def run(name, overrides=None, plot_dir=None):
    """Run a registered scenario and assemble its report."""
    if name not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}")
    func, schema = SCENARIOS[name]
    config = dict(_COMMON_KEYS)
    config.update(schema)
    for key, value in (overrides or {}).items():
        if key not in config:
            raise ConfigError(
                f"scenario {name!r} does not accept config key {key!r}")
        config[key] = type(config[key])(value) if config[key] is not None \
            else value
    ctx = Context(config, plot_dir)
    t0 = time.perf_counter()
    func(ctx)
    runtime = time.perf_counter() - t0
    passed = all(a.passed for a in ctx.assertions)
    return Report(name, datetime.now(timezone.utc).isoformat(), config,
                  ctx.results, ctx.assertions, passed, runtime)


# -- scenario: minkowski-minus-point ---------------------------------------------


@scenario("minkowski-minus-point", family_size=24, window_radius=0.35,
          n_straddle=8)
def _minkowski_minus_point(ctx):
    """Flat plane with one deleted point: a family of parallel null lines
    converging onto the severed line has two distinct limit classes, and
    the horismos relation fails to be closed."""
    holed = minkowski2(deleted_point=(0.0, 0.0))
    full = minkowski2()
    params = ctx.flow_params(max_param=6.0)

    def family(delta):
        return PhaseState([0.0, delta], [1.0, -1.0])

    schedule = [1.0 / n for n in range(1, ctx.config["family_size"] + 1)]
    probes = (ProbeWindow([-1.0, -1.0], ctx.config["window_radius"], "past"),
              ProbeWindow([1.0, 1.0], ctx.config["window_radius"], "future"))
    report = limit_classes(
        holed, [class_of(holed, family(d)) for d in schedule], probes,
        params=params, schedule=schedule)
    ctx.record("n_limit_classes", report.n_limits)
    ctx.record("separations", report.separations)
    ctx.record("limit_report", report.format_text())
    ctx.check("hausdorff_violation", report.hausdorff_violation, True)
    ctx.check("limit_class_count", report.n_limits, 2)
    if report.n_limits >= 2:
        ctx.check_greater("limit_separation",
                          float(report.separations.max()), 1e-3)
    baseline = limit_classes(
        full, [class_of(full, family(d)) for d in schedule], probes,
        params=params, schedule=schedule)
    ctx.record("full_minkowski_limits", baseline.n_limits)
    ctx.check("full_minkowski_single_limit", baseline.n_limits, 1)

    def relation_holed(a, b):
        return horismos_related_2d(holed, a, b, params)

    def relation_full(a, b):
        return horismos_related_2d(full, a, b, params)

    sequences = straddle_eplus_sequences(ctx.config["n_straddle"], ctx.rng)
    probe_holed = closedness_probe(relation_holed, sequences)
    probe_full = closedness_probe(relation_full, sequences)
    ctx.record("eplus_witnesses", len(probe_holed.witnesses))
    ctx.check("eplus_witness_found", not probe_holed.passed, True,
              detail="horismos limit fails through the deleted point")
    ctx.check("eplus_full_minkowski_closed", probe_full.passed, True)

    rows = []
    for i, d in enumerate(schedule):
        seg = trace(holed, family(d), (-3.0, 3.0), params)
        for t, state in seg.samples[::8]:
            rows.append((i, t, state.base[0], state.base[1]))
    ctx.write_csv("family_traces.csv", ("element", "parameter", "x", "y"), rows)
    ctx.write_text("limit_report.txt", report.format_text())


# -- scenario: cylinder-embedding --------------------------------------------------


@scenario("cylinder-embedding")
def _cylinder_embedding(ctx):
    """A null geodesic of the flat cylinder meets the embedded diamond
    region in two parameter components, although the region is connected."""
    metric = cylinder_quotient()
    params = ctx.flow_params(max_param=4.0)
    state = PhaseState([0.25, 0.25], [-1.0, -1.0])   # velocity (-1, 1)
    seg = trace(metric, state, (-2.0, 2.0), params)
    region = ConvexPolygonRegion(
        [(0.0, 0.0), (0.5, -0.5), (1.5, 0.5), (1.0, 1.0)])
    count = intersection_components(seg, region)
    ctx.record("intersection_components", count)
    ctx.check("intersection_components", count, 2)

    inside = intersection_components(
        trace(metric, PhaseState([0.6, 0.1], [-1.0, -1.0]), (-0.05, 0.05),
              params),
        region)
    ctx.record("short_inside_segment", inside)
    ctx.check("segment_inside_region", inside, 1)
    far = intersection_components(
        trace(metric, PhaseState([0.25, 3.0], [-1.0, -1.0]), (-0.2, 0.2),
              params),
        region)
    ctx.check("segment_disjoint_region", far, 0)

    ts = np.linspace(seg.interval[0], seg.interval[1], 601)
    bases = seg.bases(ts)
    ctx.write_csv("trajectory.csv", ("parameter", "x_wrapped", "y"),
                  [(t, x % 1.0, y) for t, (x, y) in zip(ts, bases)])


# -- scenario: flat-2d-leaves -------------------------------------------------------


@scenario("flat-2d-leaves", n_pairs=10000, n_constructed=40)
def _flat_2d_leaves(ctx):
    """Leaf-function causality versus the analytic light cone on the flat
    plane, for the closed-form leaves and for leaves reconstructed from
    null-foliation traces."""
    metric = minkowski2()
    leaves = minkowski_leaves()
    rng = ctx.rng
    n = ctx.config["n_pairs"]
    ps = rng.uniform(-2.0, 2.0, size=(n, 2))
    qs = rng.uniform(-2.0, 2.0, size=(n, 2))
    dx = qs[:, 0] - ps[:, 0]
    dy = qs[:, 1] - ps[:, 1]
    cone = (np.abs(dx) <= dy)
    leaf = ((dy - dx) >= 0.0) & ((dy + dx) >= 0.0)
    mismatches = int(np.sum(cone != leaf))
    for i in rng.integers(0, n, size=24):
        assert leaf_causal(leaves, ps[i], qs[i]) == bool(leaf[i])
    ctx.record("n_pairs", n)
    ctx.record("mismatches", mismatches)
    ctx.check("leaf_vs_cone_mismatches", mismatches, 0)

    from .causality import build_leaf_functions
    constructed = build_leaf_functions(
        metric, origin=[0.0, 0.0], direction=[0.0, 1.0],
        params=ctx.flow_params(max_param=8.0))
    n_c = ctx.config["n_constructed"]
    ps_c = rng.uniform(-1.5, 1.5, size=(n_c, 2))
    qs_c = rng.uniform(-1.5, 1.5, size=(n_c, 2))
    bad = 0
    for p, q in zip(ps_c, qs_c):
        analytic = leaf_causal(leaves, p, q)
        rebuilt = leaf_causal(constructed, p, q)
        bad += int(analytic != rebuilt)
    ctx.record("constructed_mismatches", bad)
    ctx.check("constructed_leaves_match", bad, 0)


# -- scenario: revolution-hausdorff -------------------------------------------------


def meridian_family(spacetime, eps0):
    """Null states at the band equator whose surface directions close a
    shrinking angle with the downward meridian."""
    r_eq = float(spacetime.profile.r(0.5))

    def family(eps):
        return PhaseState([0.0, 0.5, 0.0],
                          [-1.0, -math.cos(eps), r_eq * math.sin(eps)])

    return family


def meridian_probes(spacetime, family, schedule, params, window_x,
                    window_radius):
    """Probe windows on the down-going and up-going meridian legs of the
    family's most extreme element."""
    seg = trace(spacetime.metric, family(schedule[-1]),
                (-0.3, params.max_param), params)
    ts = np.linspace(0.0, seg.interval[1], 4096)
    xs = seg.bases(ts)[:, 1]

    def x_at(t):
        return float(seg.base(t)[1]) - window_x

    down = np.nonzero((xs[:-1] > window_x) & (xs[1:] <= window_x))[0]
    up = np.nonzero((xs[:-1] < window_x) & (xs[1:] >= window_x))[0]
    if down.size == 0 or up.size == 0:
        raise RuntimeError("family trace has no turn inside the window band")
    t_a = brentq(x_at, ts[down[0]], ts[down[0] + 1], xtol=1e-12)
    up = up[up > down[0]]
    t_b = brentq(x_at, ts[up[0]], ts[up[0] + 1], xtol=1e-12)
    return (ProbeWindow(seg.base(t_a), window_radius, "down-leg"),
            ProbeWindow(seg.base(t_b), window_radius, "up-leg"))


@scenario("revolution-hausdorff", family_size=20, eps0=0.12, window_x=0.3,
          window_radius=0.2, n_sequences=200)
def _revolution_hausdorff(ctx):
    """Null geodesics over the revolution band: a family approaching the
    meridian direction has at least two distinct limit classes (stable
    under swapping the auxiliary normalization metric), while the causal
    relation itself passes every closedness probe."""
    spacetime = ProductSpacetime()
    params = ctx.flow_params(max_param=2.4)
    family = meridian_family(spacetime, ctx.config["eps0"])
    schedule = [ctx.config["eps0"] / n
                for n in range(1, ctx.config["family_size"] + 1)]
    probes = meridian_probes(spacetime, family, schedule, params,
                             ctx.config["window_x"],
                             ctx.config["window_radius"])
    report = hausdorff_witness(spacetime.metric, family, schedule, probes,
                               params=params, aux=WICK)
    ctx.check("hausdorff_witness_found", report is not None, True)
    if report is not None:
        ctx.record("n_limit_classes", report.n_limits)
        ctx.record("separations", report.separations)
        ctx.record("limit_report", report.format_text())
        ctx.check_greater("limit_class_count", report.n_limits, 1)
        ctx.check_greater("limit_separation",
                          float(report.separations.max()), 1e-3)
        ctx.write_text("limit_report.txt", report.format_text())
    report_euclid = hausdorff_witness(spacetime.metric, family, schedule,
                                      probes, params=params, aux=EUCLID)
    ctx.record("euclid_aux_limits",
               report_euclid.n_limits if report_euclid else 0)
    ctx.check("aux_swap_stable", report_euclid is not None, True,
              detail="violation verdict under the Euclidean chart metric")

    def relation(a, b):
        return causal_relation(spacetime, a, b, tol=1e-6).related

    sequences = product_jplus_sequences(spacetime, ctx.config["n_sequences"],
                                        ctx.rng)
    probe = closedness_probe(relation, sequences)
    ctx.record("closedness_sequences", probe.n_sequences)
    ctx.record("closedness_witnesses", len(probe.witnesses))
    ctx.check("causal_relation_closed", probe.passed, True)

    rows = []
    for i, d in enumerate(schedule):
        seg = trace(spacetime.metric, family(d), (-0.3, 2.4), params)
        ts = np.linspace(seg.interval[0], seg.interval[1], 400)
        for t, (tt, x, ph) in zip(ts, seg.bases(ts)):
            rows.append((i, t, tt, x, ph))
    ctx.write_csv("family_traces.csv",
                  ("element", "parameter", "t", "x", "phi"), rows)


# -- scenario: revolution-distances ------------------------------------------------


@scenario("revolution-distances", n_band_pairs=100, n_symmetry=20,
          near_end_x=0.05, grid_pairs=32, grid_resolution=24)
def _revolution_distances(ctx):
    """Length and distance formulas on the revolution band: parallel
    circle lengths, meridian band distances, confinement of minimizers to
    the open band, and spot agreement between threshold verdicts and the
    grid reachability oracle."""
    spacetime = ProductSpacetime()
    surface = spacetime.surface
    profile = spacetime.profile
    rng = ctx.rng

    def circle_oracle(x0):
        val, _ = quad(lambda ph: math.sqrt(surface.g([x0, ph])[1, 1]),
                      0.0, 2.0 * math.pi, epsabs=1e-13, epsrel=1e-13)
        return val

    mid = circle_length(surface, 0.5)
    ctx.record("circle_length_mid", mid)
    ctx.check("circle_length_mid", mid, 0.25, tol=1e-12)
    ctx.check("circle_length_mid_vs_quadrature", mid, circle_oracle(0.5),
              tol=1e-10)
    quarter = circle_length(surface, 0.25)
    ctx.check("circle_length_quarter", quarter, math.sqrt(2.0) / 8.0,
              tol=1e-12)
    ctx.check("circle_length_quarter_vs_quadrature", quarter,
              circle_oracle(0.25), tol=1e-10)

    worst_slack = math.inf
    for _ in range(ctx.config["n_band_pairs"]):
        x0, x1 = rng.uniform(END_MARGIN, 1.0 - END_MARGIN, size=2)
        worst_slack = min(worst_slack,
                          band_distance(surface, x0, x1) - abs(x1 - x0))
    ctx.record("band_minus_dx_min", worst_slack)
    ctx.check("band_distance_dominates_dx", worst_slack >= 0.0, True)

    x_end = ctx.config["near_end_x"]
    ctx.record("near_end_circle_length", circle_length(surface, x_end))
    ctx.record("near_end_gap_to_end", band_distance(surface, END_MARGIN, x_end))
    res = distance_result(surface, [x_end, 0.0], [x_end, 0.3])
    ctx.record("near_end_distance", res.value)
    ctx.record("near_end_x_range", res.x_range)
    confined = (res.x_range[0] >= END_MARGIN - 1e-12
                and res.x_range[1] <= 1.0 - END_MARGIN + 1e-12)
    ctx.check("minimizer_avoids_ends", confined, True,
              detail=f"x range {res.x_range}")

    worst_sym = 0.0
    for _ in range(ctx.config["n_symmetry"]):
        p = np.array([rng.uniform(0.15, 0.85), rng.uniform(-math.pi, math.pi)])
        q = np.array([rng.uniform(0.15, 0.85), rng.uniform(-math.pi, math.pi)])
        worst_sym = max(worst_sym, abs(distance_result(surface, p, q).value
                                       - distance_result(surface, q, p).value))
    ctx.record("symmetry_worst_gap", worst_sym)
    ctx.check_less("distance_symmetry", worst_sym, 1e-7)

    res_t = int(ctx.config["grid_resolution"])
    oracle = GridReachability(
        spacetime.metric, (res_t, 2 * res_t, 2 * res_t),
        box=([0.0, 0.3, -math.pi], [1.0, 0.7, math.pi]), slack=0.05)
    cache = ctx.config.get("grid_cache") or ""
    if cache and os.path.exists(cache):
        oracle.load(cache)
    margin_floor = 2.0 * oracle.cell_diameter()
    source_xs = oracle.lo[1] + (np.array([2, 4, 6]) + 0.5) * oracle.cell[1]
    agree = 0
    total = 0
    while total < ctx.config["grid_pairs"]:
        p = np.array([float(rng.choice(source_xs)), rng.uniform(-2.4, 2.4)])
        q = np.array([rng.uniform(0.56, 0.68), rng.uniform(-2.4, 2.4)])
        d = spacetime.distance(p, q)
        if d.x_range[0] < 0.31 or d.x_range[1] > 0.69:
            continue
        if d.value < margin_floor + 0.08:
            continue
        for sign in (1.0, -1.0):
            tau = d.value + sign * (margin_floor + 0.04)
            if tau <= 0.03 or tau >= 0.95:
                continue
            a = spacetime.lift(0.02, p)
            b = spacetime.lift(0.02 + tau, q)
            total += 1
            verdict = causal_relation(spacetime, a, b)
            reachable = oracle.related(a, b)
            expect = verdict.relation is CausalRelation.CHRONOLOGICAL
            agree += int(reachable == expect)
    ctx.record("grid_agreements", agree)
    ctx.record("grid_pairs", total)
    ctx.record("grid_cell_diameter", oracle.cell_diameter())
    ctx.check("grid_matches_threshold_verdicts", agree, total)
    if cache:
        oracle.save(cache)


# -- scenario: jacobi-sphere ---------------------------------------------------------


@scenario("jacobi-sphere", basis_size=50)
def _jacobi_sphere(ctx):
    """Transverse variations along a null geodesic over a great circle:
    conjugate point at parameter pi, definiteness of the index form
    flipping across it, and flat-segment baselines."""
    sp = sphere_product()
    params = ctx.flow_params(max_param=6.0)
    state = PhaseState([0.0, math.pi / 2.0, 0.0], [-1.0, 0.0, 1.0])
    m = ctx.config["basis_size"]

    seg_long = trace(sp, state, (0.0, 3.5), params)
    frame_long = build_quotient_frame(sp, seg_long)
    roots = conjugate_points(frame_long)
    ctx.record("conjugate_points", roots)
    ctx.check("one_conjugate_point", len(roots), 1)
    if roots:
        ctx.check("conjugate_at_pi", roots[0], math.pi, tol=1e-6)
    sec = jacobi_solve(frame_long, [0.0], [1.0])
    sine_err = float(np.max(np.abs(sec.values[:, 0]
                                   - np.sin(frame_long.nodes))))
    ctx.record("jacobi_vs_sine_error", sine_err)
    ctx.check_less("jacobi_solution_matches_sine", sine_err, 1e-7)
    ctx.check("index_long_indefinite",
              index_matrix(frame_long, m).verdict.value,
              Definiteness.INDEFINITE.value)

    seg_short = trace(sp, state, (0.0, math.pi - 0.1), params)
    frame_short = build_quotient_frame(sp, seg_short)
    ctx.check("no_conjugate_below_pi", len(conjugate_points(frame_short)), 0)
    ctx.check("index_short_negative_definite",
              index_matrix(frame_short, m).verdict.value,
              Definiteness.NEGATIVE_DEFINITE.value)

    flat = minkowski4()
    flat_state = future_null_covector(flat, [0.0] * 4, [1.0, 0.3, -0.2])
    frame_flat = build_quotient_frame(
        flat, trace(flat, flat_state, (0.0, 2.0), params))
    ctx.check("flat_no_conjugate", len(conjugate_points(frame_flat)), 0)
    ctx.check("flat_negative_definite",
              index_matrix(frame_flat, m).verdict.value,
              Definiteness.NEGATIVE_DEFINITE.value)

    sol_dets = []
    for t in frame_long.nodes:
        sol_dets.append((t, float(np.sin(t))))
    ctx.write_csv("sphere_jacobi.csv", ("parameter", "sin"), sol_dets)


# -- scenario: contact-residuals ------------------------------------------------------


@scenario("contact-residuals", n_states=1000)
def _contact_residuals(ctx):
    """Canonical one-form identities at random null states across the
    bundled metrics: both pairings vanish and the top wedge power stays
    bounded away from zero."""
    spacetime = ProductSpacetime()
    pool = [minkowski2(), minkowski3(), spacetime.metric, sphere_product()]
    n_each = ctx.config["n_states"] // len(pool)
    worst_x = worst_xi = 0.0
    min_nu = math.inf
    for metric in pool:
        for s in random_null_states(metric, n_each, ctx.rng):
            t1, t2, nu = contact_residuals(metric, s, rng=ctx.rng)
            worst_x = max(worst_x, abs(t1))
            worst_xi = max(worst_xi, abs(t2))
            min_nu = min(min_nu, abs(nu))
    ctx.record("n_states", n_each * len(pool))
    ctx.record("max_theta_hamiltonian", worst_x)
    ctx.record("max_theta_euler", worst_xi)
    ctx.record("min_wedge", min_nu)
    ctx.check_less("theta_hamiltonian_vanishes", worst_x, 1e-10)
    ctx.check_less("theta_euler_vanishes", worst_xi, 1e-10)
    ctx.check_greater("wedge_nondegenerate", min_nu, 1e-6)
