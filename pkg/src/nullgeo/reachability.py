"""Brute-force causal reachability on a chart grid.

The oracle discretizes a finite box of a static chart into cells and links
cell u to cell v when the displacement is future-pointing and its spatial
metric length fits within the elapsed time stretched by a slack factor.
Hops span up to ``hop_levels`` time cells so that cell-snapping noise is
amortized; spatial hop ranges are derived from the metric light cone, which
on anisotropic charts (a thin revolution surface, say) covers many cells
per time step.  Reachability is the transitive closure of these hops,
computed by a level-by-level wavefront sweep per source.

Guarantee (one-sided): a genuinely causal pair of grid events is reachable,
and verdicts are trustworthy only at margins of a couple of cell diameters;
the slack dilates the cone by that order.  Paths are confined to the grid
box, so compare only pairs whose connecting curves stay inside it.

Axes along which the metric is translation invariant are canonicalized
(sources are collapsed to a single representative), which reduces the sweep
count to the number of distinct cells along the remaining axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import ResolutionError

_MAX_RES = 128


class GridReachability:
    """Directed reachability oracle over a cell grid of a static chart."""

    def __init__(self, metric, resolution, box=None, slack=0.05,
                 hop_levels=3, memory_budget=512 * 1024 * 1024):
        if metric.signature != "lorentzian":
            raise ValueError("reachability needs a Lorentzian metric")
        self.metric = metric
        dim = metric.dim
        if dim not in (2, 3):
            raise ResolutionError("grid oracle supports 2D or 3D charts")
        if isinstance(resolution, (int, np.integer)):
            resolution = (int(resolution),) * dim
        self.resolution = tuple(int(r) for r in resolution)
        if any(r < 1 for r in self.resolution):
            raise ResolutionError("resolution must be positive")
        if any(r > _MAX_RES for r in self.resolution):
            raise ResolutionError(f"resolution capped at {_MAX_RES} per axis")
        if box is None:
            box = metric.sampling_box
        self.lo = np.asarray(box[0], dtype=float)
        self.hi = np.asarray(box[1], dtype=float)
        if not np.all(np.isfinite(self.lo)) or not np.all(np.isfinite(self.hi)):
            raise ResolutionError("grid oracle needs a finite box")
        self.cell = (self.hi - self.lo) / np.asarray(self.resolution)
        self.slack = float(slack)
        self.hop_levels = int(hop_levels)
        self.t_axis = metric.time_axis
        self.s_axes = [k for k in range(dim) if k != self.t_axis]
        self._check_block_structure()
        self._invariant = {k: self._axis_invariant(k) for k in range(dim)}
        if not self._invariant[self.t_axis]:
            raise ResolutionError("grid oracle needs a static (t-invariant) chart")
        if dim == 3 and not self._invariant[self.s_axes[1]]:
            raise ResolutionError(
                "3D grid oracle needs invariance along the last spatial axis")
        self._spatial_spec = []
        for k in self.s_axes:
            n = self.resolution[self._axis_pos(k)]
            periodic = (metric.domain.is_periodic(k)
                        and abs((self.hi[k] - self.lo[k])
                                - metric.domain.periods[k]) < 1e-9)
            if self._invariant[k] and not periodic:
                self._spatial_spec.append(("extended", k, 2 * n - 1, n - 1))
            elif self._invariant[k] and periodic:
                self._spatial_spec.append(("periodic", k, n, 0))
            else:
                self._spatial_spec.append(("plain", k, n, None))
        n_keys = 1
        for kind, k, size, _ in self._spatial_spec:
            if kind == "plain":
                n_keys *= self.resolution[self._axis_pos(k)]
        nt = self.resolution[self._axis_pos(self.t_axis)]
        table_bits = nt * int(np.prod([s[2] for s in self._spatial_spec]))
        if n_keys * table_bits / 8 > memory_budget:
            raise ResolutionError(
                f"estimated {n_keys * table_bits / 8 / 1e6:.0f} MB exceeds "
                "the memory budget")
        self._tables = {}
        self._hops = self._build_hops()

    # -- structure checks ---------------------------------------------------

    def _axis_pos(self, k):
        return k

    def _probe_points(self, count=5):
        rng = np.random.default_rng(7)
        return rng.uniform(self.lo + 0.01 * (self.hi - self.lo),
                           self.hi - 0.01 * (self.hi - self.lo),
                           size=(count, self.metric.dim))

    def _check_block_structure(self):
        for x in self._probe_points():
            g = self.metric.g(x)
            for k in self.s_axes:
                if abs(g[self.t_axis, k]) > 1e-12:
                    raise ResolutionError(
                        "grid oracle needs a block time/space metric")

    def _axis_invariant(self, k):
        pts = self._probe_points()
        shift = np.zeros(self.metric.dim)
        shift[k] = 0.37 * (self.hi[k] - self.lo[k])
        for x in pts:
            y = x + shift
            y[k] = self.lo[k] + (y[k] - self.lo[k]) % (self.hi[k] - self.lo[k])
            if not np.allclose(self.metric.g(x), self.metric.g(y),
                               atol=1e-12, rtol=0.0):
                return False
        return True

    # -- hop tables -----------------------------------------------------------

    def _mid_metric(self, x_mid_list):
        """g components at spatial midpoints; time coordinate at box center."""
        out = []
        for sp in x_mid_list:
            x = np.empty(self.metric.dim)
            x[self.t_axis] = 0.5 * (self.lo[self.t_axis] + self.hi[self.t_axis])
            for k, val in zip(self.s_axes, np.atleast_1d(sp)):
                x[k] = val
            out.append(self.metric.g(x))
        return out

    def _build_hops(self):
        """Per (dt, spatial offset) validity data.

        2D: hops[(dt, dx)] = bool mask over source cells of the first
        spatial axis.  3D: hops[(dt, dx)] = integer half-width (cells along
        the second, invariant axis), -1 where invalid.
        """
        dt_cell = self.cell[self.t_axis]
        k1 = self.s_axes[0]
        n1 = self.resolution[k1]
        kind1 = self._spatial_spec[0][0]
        size1 = self._spatial_spec[0][2]
        if kind1 == "extended":
            centers1 = (self.lo[k1] + 0.5 * self.cell[k1]
                        + self.cell[k1] * (np.arange(size1) - (n1 - 1)))
        else:
            centers1 = self.lo[k1] + (np.arange(size1) + 0.5) * self.cell[k1]
        if self._invariant[k1]:
            centers1 = np.full(size1,
                               self.lo[k1] + 0.5 * (self.hi[k1] - self.lo[k1]))
        probe_g = self._mid_metric([centers1[i] for i in
                                    range(0, size1, max(size1 // 8, 1))])
        min_k11 = min(g[k1, k1] for g in probe_g)
        max_gtt = max(abs(g[self.t_axis, self.t_axis]) for g in probe_g)
        hops = {}
        for dt in range(1, self.hop_levels + 1):
            budget = ((1.0 + self.slack) * dt * dt_cell) ** 2
            max_dx = min(size1, 1 + int(math.ceil(
                (1.0 + self.slack) * dt * dt_cell * math.sqrt(max_gtt)
                / (math.sqrt(min_k11) * self.cell[k1]))))
            for dx in range(-max_dx, max_dx + 1):
                mids = centers1 + 0.5 * dx * self.cell[k1]
                gs = self._mid_metric(mids)
                gtt = np.array([abs(g[self.t_axis, self.t_axis]) for g in gs])
                k11 = np.array([g[k1, k1] for g in gs])
                spent = k11 * (dx * self.cell[k1]) ** 2
                room = budget * gtt - spent
                if self.metric.dim == 2:
                    mask = room >= 0.0
                    if mask.any():
                        hops[(dt, dx)] = mask
                else:
                    k2 = self.s_axes[1]
                    k22 = np.array([g[k2, k2] for g in gs])
                    with np.errstate(invalid="ignore"):
                        width = np.floor(
                            np.sqrt(np.maximum(room, 0.0) / k22)
                            / self.cell[k2]).astype(int)
                    width[room < 0.0] = -1
                    if np.any(width >= 0):
                        hops[(dt, dx)] = width
        return hops

    # -- wavefront sweeps -------------------------------------------------------

    def _dilate(self, prev, dt):
        """One hop layer applied to a spatial boolean array."""
        spec = self._spatial_spec
        out = np.zeros_like(prev)
        size1 = spec[0][2]
        periodic1 = spec[0][0] == "periodic"
        for (hop_dt, dx), data in self._hops.items():
            if hop_dt != dt:
                continue
            if self.metric.dim == 2:
                src = prev & data
                if periodic1:
                    out |= np.roll(src, dx)
                else:
                    if dx >= 0:
                        out[dx:] |= src[:size1 - dx] if dx else src
                    else:
                        out[:dx] |= src[-dx:]
            else:
                n2 = spec[1][2]
                periodic2 = spec[1][0] == "periodic"
                mode = "wrap" if periodic2 else "constant"
                for w in np.unique(data):
                    if w < 0:
                        continue
                    rows = np.nonzero(data == w)[0]
                    sel = prev[rows]
                    if 2 * w + 1 >= n2:
                        dil = np.repeat(sel.any(axis=1)[:, None], n2, axis=1)
                    elif w == 0:
                        dil = sel
                    else:
                        dil = maximum_filter1d(
                            sel.astype(np.uint8), size=2 * int(w) + 1,
                            axis=1, mode=mode).astype(bool)
                    tgt = rows + dx
                    ok = (tgt >= 0) & (tgt < size1)
                    out[tgt[ok]] |= dil[ok]
        return out

    def _table(self, key):
        table = self._tables.get(key)
        if table is not None:
            return table
        nt = self.resolution[self.t_axis]
        shape = tuple(s[2] for s in self._spatial_spec)
        table = np.zeros((nt,) + shape, dtype=bool)
        src = []
        ki = 0
        for kind, k, size, center in self._spatial_spec:
            if kind == "plain":
                src.append(key[ki])
                ki += 1
            elif kind == "extended":
                src.append(center)
            else:
                src.append(0)
        table[(0,) + tuple(src)] = True
        for level in range(1, nt):
            acc = np.zeros(shape, dtype=bool)
            for dt in range(1, min(self.hop_levels, level) + 1):
                acc |= self._dilate(table[level - dt], dt)
            table[level] = acc
        self._tables[key] = table
        return table

    # -- queries --------------------------------------------------------------

    def cell_of(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.lo) / self.cell).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.resolution)):
            raise ValueError(f"point {x} outside the grid box")
        return tuple(int(i) for i in idx)

    def cell_diameter(self):
        """Metric diameter of one cell at the least favorable sampled x."""
        worst = 0.0
        for g in self._mid_metric([np.array(
                [self.lo[k] + f * (self.hi[k] - self.lo[k])
                 for k in self.s_axes])
                for f in (0.1, 0.3, 0.5, 0.7, 0.9)]):
            val = abs(g[self.t_axis, self.t_axis]) * self.cell[self.t_axis] ** 2
            for k in self.s_axes:
                val += g[k, k] * self.cell[k] ** 2
            worst = max(worst, math.sqrt(val))
        return worst

    def related(self, u, v):
        """True iff the cell of v is reachable from the cell of u."""
        cu = self.cell_of(u)
        cv = self.cell_of(v)
        if cu == cv:
            return True
        dt = cv[self.t_axis] - cu[self.t_axis]
        if dt <= 0:
            return False
        key = []
        target = []
        for (kind, k, size, center) in self._spatial_spec:
            if kind == "plain":
                key.append(cu[k])
                target.append(cv[k])
            elif kind == "extended":
                target.append(center + (cv[k] - cu[k]))
            else:
                target.append((cv[k] - cu[k]) % size)
        table = self._table(tuple(key))
        return bool(table[(dt,) + tuple(target)])

    # -- persistence -------------------------------------------------------------

    def save(self, path):
        arrays = {f"table_{i}": tab for i, (key, tab)
                  in enumerate(self._tables.items())}
        keys = np.array([list(k) for k in self._tables.keys()],
                        dtype=int).reshape(len(self._tables), -1)
        np.savez_compressed(
            path, metric_key=self.metric.key,
            resolution=np.array(self.resolution), lo=self.lo, hi=self.hi,
            slack=self.slack, hop_levels=self.hop_levels, keys=keys, **arrays)

    def load(self, path):
        data = np.load(path, allow_pickle=False)
        if (str(data["metric_key"]) != self.metric.key
                or tuple(data["resolution"]) != self.resolution
                or not np.allclose(data["lo"], self.lo)
                or not np.allclose(data["hi"], self.hi)
                or float(data["slack"]) != self.slack
                or int(data["hop_levels"]) != self.hop_levels):
            raise ValueError("cached grid file does not match this oracle")
        for i, key in enumerate(data["keys"]):
            self._tables[tuple(int(k) for k in key)] = data[f"table_{i}"]
        return self


def grid_reachability(metric, resolution, box=None, **kwargs):
    """Build the grid reachability oracle for a chart."""
    return GridReachability(metric, resolution, box=box, **kwargs)
