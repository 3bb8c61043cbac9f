"""Piecewise-affine cadlag paths and the operations on them.

Paths carry three parallel arrays (t, v, jump); see _kernels for the
segment conventions.  Spectrally positive simulation folds the Gaussian
part to piecewise-linear on a mesh of width h (Brownian increments of
variance 2*beta*h per cell), keeps compound-Poisson jumps exact, and
encodes killing as termination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    HorizonOverflow,
    InfiniteInterior,
    MinNotSettled,
    OutOfDomain,
)

__all__ = ["CadlagPath", "StopRule", "simulate_levy", "post_minimum",
           "time_change_below", "concatenate", "path_to_csv"]


@dataclass
class CadlagPath:
    t: np.ndarray
    v: np.ndarray
    jump: np.ndarray
    terminal_kind: str = "horizon"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.jump = np.asarray(self.jump, dtype=float)

    # ---- basic accessors ----------------------------------------------

    @property
    def lifetime(self):
        return float(self.t[-1])

    @property
    def terminal_value(self):
        return float(self.v[-1])

    @property
    def n_breakpoints(self):
        return self.t.shape[0]

    def left_values(self):
        """f(t[k]-) at every breakpoint."""
        return self.v - self.jump

    def validate(self):
        if self.t[0] != 0.0 or np.any(np.diff(self.t) < 0):
            raise ValueError("breakpoint times must start at 0 and be nondecreasing")
        if np.any(self.jump < 0):
            raise ValueError("jumps must be upward")
        return self

    def evaluate(self, u):
        """f(u) for u in [0, lifetime]; the lifetime maps to the terminal value."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        tol = 1e-9 * max(1.0, self.lifetime)
        if np.any(u < -tol) or np.any(u > self.lifetime + tol):
            raise OutOfDomain("evaluation time outside [0, lifetime]")
        u = np.clip(u, 0.0, self.lifetime)
        t, v = self.t, self.v
        lv = self.left_values()
        k = np.clip(np.searchsorted(t, u, side="right") - 1, 0, len(t) - 2)
        dt = t[k + 1] - t[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(dt > 0, (u - t[k]) / np.where(dt > 0, dt, 1.0), 0.0)
        out = v[k] + (lv[k + 1] - v[k]) * frac
        out = np.where(u >= self.lifetime, self.v[-1], out)
        return float(out[0]) if scalar else out

    def segment_minima(self):
        """Min of f over segment k (between breakpoints k and k+1)."""
        lv = self.left_values()
        return np.minimum(self.v[:-1], lv[1:])

    def running_min(self):
        return _kernels.running_min(self.t, self.v, self.jump)

    def global_min(self):
        """(min value, index of the last breakpoint attaining it as a left limit)."""
        lv = self.left_values()
        cand = np.minimum(self.v, lv)
        mval = float(cand.min())
        k = int(np.nonzero(cand == mval)[0][-1])
        return mval, k

    def occupation(self, lo, h, nbins):
        """Exact time spent in the level bins [lo + i*h, lo + (i+1)*h)."""
        return _kernels.occupation_bins(self.t, self.v, self.jump, float(lo), float(h), int(nbins))

    def last_passage(self, levels):
        """Last times the path takes the given ascending level values."""
        levels = np.asarray(levels, dtype=float)
        times, found = _kernels.last_passage(self.t, self.v, self.jump, levels)
        return times, found.astype(bool)

    def upcrossings(self, level):
        return int(_kernels.upcrossings(self.t, self.v, self.jump, float(level)))

    def shifted(self, dv):
        """Vertically shifted copy (values + dv)."""
        return CadlagPath(self.t.copy(), self.v + dv, self.jump.copy(),
                          self.terminal_kind, dict(self.info))


class ExcursionPath(CadlagPath):
    """A cadlag path constrained to be nonnegative on (0, lifetime)."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.v < -1e-12) or np.any(self.left_values()[1:] < -1e-12):
            raise ValueError("excursion paths must stay nonnegative")

    @staticmethod
    def wrap(path: CadlagPath) -> "ExcursionPath":
        return ExcursionPath(path.t, path.v, path.jump, path.terminal_kind,
                             dict(path.info))


def trivial_path(value=0.0):
    return CadlagPath(np.zeros(1), np.full(1, float(value)), np.zeros(1), "horizon")


# ---- stopping rules -----------------------------------------------------


@dataclass
class StopRule:
    """First-of stopping: horizon, continuous downcross of `hit_level`,
    value - running min >= margin, value >= escape, exponential killing."""

    horizon: float = math.inf
    hit_level: float = -math.inf
    margin: float = math.inf
    escape: float = math.inf

    @staticmethod
    def fixed(T):
        return StopRule(horizon=T)

    @staticmethod
    def hit(level, escape=math.inf):
        return StopRule(hit_level=level, escape=escape)

    @staticmethod
    def min_settled(margin):
        return StopRule(margin=margin)


# ---- simulation ---------------------------------------------------------

_MAX_BREAKPOINTS = 50_000_000


def simulate_levy(exponent, x0, stop: StopRule, h=1e-3, rng=None, chunk=4.0):
    """Sample a spectrally positive Levy path from its quartet.

    Jumps are an exact Poisson point process (rate = total jump mass,
    sizes from the normalised measure), drift is -alpha, the Gaussian
    part is folded to piecewise-linear on mesh h (Brownian increments of
    variance 2*beta*h per cell), and killing draws one exponential(kappa)
    clock.  Simulation proceeds in chunks until a stop rule fires.
    """
    if rng is None:
        rng = np.random.default_rng()
    q = exponent.quartet
    lam = q.jump_mass
    beta = q.beta
    if beta > 0 and not (h > 0):
        raise ValueError("mesh h must be > 0 when beta > 0")
    if x0 <= stop.hit_level:
        return CadlagPath(np.zeros(1), np.full(1, float(x0)), np.zeros(1),
                          "hit_zero", {"stop": "hit", "hit_level": stop.hit_level})

    kill_time = rng.exponential(1.0 / q.kappa) if q.kappa > 0 else math.inf
    horizon = min(stop.horizon, kill_time)

    n_atoms = len(q.atoms)
    atom_sizes = np.array([x for _, x in q.atoms]) if n_atoms else np.empty(0)
    if lam > 0:
        weights = np.array([c for c, _ in q.atoms] + [q.exp_mass])
        weights = weights / weights.sum()
    ts = [np.zeros(1)]
    vs = [np.full(1, float(x0))]
    js = [np.zeros(1)]
    t0 = 0.0
    x = float(x0)
    runmin = x
    total_bp = 1
    kind = None

    while kind is None:
        dtc = min(chunk, horizon - t0)
        if dtc <= 0:
            kind = "killed" if horizon < stop.horizon else "horizon"
            break
        if beta > 0:
            full = int(dtc / h)
            ticks = np.arange(1, full + 1) * h
            if dtc - full * h > 1e-15 * max(1.0, dtc):
                ticks = np.concatenate((ticks, [dtc]))
            else:
                dtc = full * h if full else dtc
            widths = np.diff(np.concatenate(([0.0], ticks)))
            gauss = rng.normal(0.0, 1.0, size=ticks.size) * np.sqrt(2.0 * beta * widths)
        else:
            ticks = np.empty(0)
            gauss = np.empty(0)
        if lam > 0:
            njump = rng.poisson(lam * dtc)
            jt = np.sort(rng.uniform(0.0, dtc, size=njump))
            which = rng.choice(weights.size, size=njump, p=weights)
            sizes = np.empty(njump)
            is_atom = which < n_atoms
            if n_atoms:
                sizes[is_atom] = atom_sizes[which[is_atom]]
            n_exp = int((~is_atom).sum())
            if n_exp:
                sizes[~is_atom] = rng.exponential(1.0 / q.exp_rate, size=n_exp)
        else:
            jt = np.empty(0)
            sizes = np.empty(0)

        # merge mesh ticks and jump times into one breakpoint list
        bt = np.concatenate((ticks, jt))
        bj = np.concatenate((np.zeros(ticks.size), sizes))
        order = np.argsort(bt, kind="stable")
        bt, bj = bt[order], bj[order]
        if bt.size == 0 or abs(bt[-1] - dtc) > 1e-15 * max(1.0, dtc):
            bt = np.concatenate((bt, [dtc]))
            bj = np.concatenate((bj, [0.0]))

        # Gaussian value at breakpoints: linear between mesh ticks
        if beta > 0:
            grid = np.concatenate(([0.0], ticks))
            w = np.concatenate(([0.0], np.cumsum(gauss)))
            idx = np.clip(np.searchsorted(grid, bt, side="right") - 1, 0, grid.size - 2)
            span = grid[idx + 1] - grid[idx]
            frac = np.clip((bt - grid[idx]) / span, 0.0, 1.0)
            gval = w[idx] + (w[idx + 1] - w[idx]) * frac
        else:
            gval = np.zeros(bt.size)

        bv = x - q.drift_delta * bt + gval + np.cumsum(bj)
        blv = bv - bj
        prev_v = np.concatenate(([x], bv[:-1]))
        rm = np.minimum(np.minimum.accumulate(blv), runmin)

        # stop detection: earliest breakpoint index wins; an in-segment hit
        # happens before events at its right breakpoint, so ties favour it
        cand = []
        if stop.hit_level > -math.inf:
            idx = np.nonzero((prev_v > stop.hit_level) & (blv <= stop.hit_level))[0]
            if idx.size:
                cand.append((int(idx[0]), 0, "hit"))
        if stop.margin < math.inf:
            idx = np.nonzero(bv - rm >= stop.margin)[0]
            if idx.size:
                cand.append((int(idx[0]), 1, "margin"))
        if stop.escape < math.inf:
            idx = np.nonzero(bv >= stop.escape)[0]
            if idx.size:
                cand.append((int(idx[0]), 1, "escaped"))
        if cand:
            cut, _, kind = min(cand)
        else:
            cut = bt.size - 1
            if t0 + dtc >= horizon - 1e-15 * max(1.0, horizon):
                kind = "killed" if horizon < stop.horizon else "horizon"

        if kind == "hit":
            a = prev_v[cut]
            bl = blv[cut]
            tprev = bt[cut - 1] if cut > 0 else 0.0
            frac = (a - stop.hit_level) / (a - bl) if a > bl else 1.0
            tcut = tprev + frac * (bt[cut] - tprev)
            bt = np.concatenate((bt[:cut], [tcut]))
            bv = np.concatenate((bv[:cut], [stop.hit_level]))
            bj = np.concatenate((bj[:cut], [0.0]))
        elif kind is not None:
            bt, bv, bj = bt[: cut + 1], bv[: cut + 1], bj[: cut + 1]

        ts.append(bt + t0)
        vs.append(bv)
        js.append(bj)
        total_bp += bt.size
        if total_bp > _MAX_BREAKPOINTS:
            raise HorizonOverflow("stopping rule not met within the breakpoint budget")
        t0 += float(bt[-1])
        x = float(bv[-1])
        runmin = min(runmin, float(rm[min(cut, rm.size - 1)]))

    t = np.concatenate(ts)
    v = np.concatenate(vs)
    j = np.concatenate(js)
    kind_map = {"hit": "hit_zero", "horizon": "horizon", "killed": "killed",
                "margin": "infinite-proxy", "escaped": "infinite-proxy"}
    return CadlagPath(t, v, j, kind_map[kind], {"stop": kind, "hit_level": stop.hit_level})


def post_minimum(path: CadlagPath) -> CadlagPath:
    """Shift of the path after the last approach of its overall minimum.

    The path must have been stopped by the margin rule so that the global
    minimum is settled; the jump at the minimum time, if any, is kept.
    """
    if path.info.get("stop") not in ("margin", "escaped"):
        raise MinNotSettled("post_minimum requires a margin-stopped path")
    mval, k = path.global_min()
    t = path.t[k:] - path.t[k]
    v = path.v[k:] - mval
    j = path.jump[k:].copy()
    j[0] = v[0]  # jump at the minimum time, if present
    return CadlagPath(t, v, j, path.terminal_kind, {"stop": path.info.get("stop")})


def time_change_below(path: CadlagPath, r) -> CadlagPath:
    """Excise {f > r} and close the gaps (identity when sup f <= r)."""
    if r <= 0:
        raise ValueError("level r must be > 0")
    t2, v2, j2, m = _kernels.tc_below(path.t, path.v, path.jump, float(r))
    kind = path.terminal_kind
    return CadlagPath(t2, v2, j2, kind, dict(path.info))


def concatenate(paths) -> CadlagPath:
    """Lay paths end to end with no level shift; lifetimes add."""
    paths = list(paths)
    if not paths:
        return trivial_path()
    ts, vs, js = [], [], []
    offset = 0.0
    for i, p in enumerate(paths):
        last = i == len(paths) - 1
        if not last and not math.isfinite(p.lifetime):
            raise InfiniteInterior("only the final path may have infinite lifetime")
        t = p.t + offset
        v = p.v.copy()
        j = p.jump.copy()
        if i > 0:
            prev_end = vs[-1][-1]
            gap = v[0] - prev_end
            if gap < -1e-9:
                raise ValueError("concatenation would create a downward jump")
            j[0] = max(gap, 0.0)
        ts.append(t)
        vs.append(v)
        js.append(j)
        offset += p.lifetime
    t = np.concatenate(ts)
    v = np.concatenate(vs)
    j = np.concatenate(js)
    return CadlagPath(t, v, j, paths[-1].terminal_kind)


def path_to_csv(path: CadlagPath, fileobj):
    """Write the breakpoint rows t,value,is_jump; jump breakpoints emit the
    pre-jump limit first so the dashed vertical segment is reconstructible."""
    fileobj.write("t,value,is_jump\n")
    lv = path.left_values()
    for k in range(path.n_breakpoints):
        if path.jump[k] > 0:
            fileobj.write(f"{path.t[k]:.12g},{lv[k]:.12g},0\n")
            fileobj.write(f"{path.t[k]:.12g},{path.v[k]:.12g},1\n")
        else:
            fileobj.write(f"{path.t[k]:.12g},{path.v[k]:.12g},0\n")
