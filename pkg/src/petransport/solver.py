"""Semi-analytic evaluation of boundary traces, fields and norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre, polynomial

from .coeff import HorizonError, full_signals, get_lattice, theta_batch, time_chunks
from .net import Network

GAUSS_ORDER = 6
_RULES = {n: legendre.leggauss(n) for n in (3, GAUSS_ORDER)}


def gauss_nodes(pts: np.ndarray, hmax: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on the pieces between ``pts``, each cut to length <= hmax.

    Pieces shorter than ``hmax / 8`` get a 3-point rule, which is already
    exact to rounding at that size.
    """
    pts = np.asarray(pts, dtype=float)
    lens = np.diff(pts)
    ok = lens >= 1e-14
    lo, lens = pts[:-1][ok], lens[ok]
    k = np.maximum(1, np.ceil(lens / hmax - 1e-9).astype(np.int64))
    width = np.repeat(lens / k, k)
    j = np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)
    mid = np.repeat(lo, k) + (j + 0.5) * width
    half = 0.5 * width
    short = width < hmax / 8.0
    xs, ws = [], []
    for order, sel in ((3, short), (GAUSS_ORDER, ~short)):
        gx, gw = _RULES[order]
        xs.append((mid[sel, None] + half[sel, None] * gx[None, :]).ravel())
        ws.append((half[sel, None] * gw[None, :]).ravel())
    x, w = np.concatenate(xs), np.concatenate(ws)
    order = np.argsort(x, kind="stable")
    return x[order], w[order]


# ------------------------------------------------------------- initial data


@dataclass(frozen=True)
class Segment:
    """One piece of initial data on ``[lo, hi]``.

    ``kind`` is ``"poly"`` (ascending coefficients in ``x - lo``), ``"bump"``
    (``height * exp(-1/(1-u^2))`` with ``u`` mapping the piece onto (-1, 1))
    or ``"callable"`` (vectorized ``fn(x)``, not serializable).
    """

    lo: float
    hi: float
    kind: str = "poly"
    coeffs: tuple[float, ...] = (0.0,)
    height: float = 1.0
    fn: Callable | None = field(default=None, compare=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "poly":
            return polynomial.polyval(x - self.lo, np.asarray(self.coeffs))
        if self.kind == "bump":
            u = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
            inside = np.abs(u) < 1.0
            out = np.zeros_like(x, dtype=float)
            out[inside] = self.height * np.exp(-1.0 / (1.0 - u[inside] ** 2))
            return out
        if self.kind == "callable":
            return np.asarray(self.fn(x), dtype=float)
        raise ValueError(f"unknown segment kind {self.kind!r}")

    def to_json(self) -> dict:
        if self.kind == "poly":
            return {"kind": "poly", "lo": self.lo, "hi": self.hi, "coeffs": list(self.coeffs)}
        if self.kind == "bump":
            return {"kind": "bump", "lo": self.lo, "hi": self.hi, "height": self.height}
        raise ValueError("callable segments cannot be serialized")

    @classmethod
    def from_json(cls, d: dict) -> "Segment":
        if d["kind"] == "poly":
            return cls(float(d["lo"]), float(d["hi"]), "poly", tuple(map(float, d["coeffs"])))
        if d["kind"] == "bump":
            return cls(float(d["lo"]), float(d["hi"]), "bump", height=float(d["height"]))
        raise ValueError(f"unknown segment kind {d['kind']!r}")


def poly(lo: float, hi: float, *coeffs: float) -> Segment:
    return Segment(float(lo), float(hi), "poly", tuple(float(c) for c in coeffs) or (0.0,))


def bump(lo: float, hi: float, height: float = 1.0) -> Segment:
    return Segment(float(lo), float(hi), "bump", height=float(height))


@dataclass(frozen=True)
class InitialData:
    circles: tuple[tuple[Segment, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "circles", tuple(tuple(c) for c in self.circles))

    @property
    def N(self) -> int:
        return len(self.circles)

    def validate(self, net: Network) -> list[str]:
        problems = []
        if self.N != net.N:
            problems.append(f"initial data has {self.N} circles, network has {net.N}")
            return problems
        for i, segs in enumerate(self.circles):
            Li = net.L[i]
            if not segs:
                problems.append(f"circle {i}: no segments")
                continue
            if abs(segs[0].lo) > 1e-12 or abs(segs[-1].hi - Li) > 1e-12 * max(1.0, Li):
                problems.append(f"circle {i}: segments do not cover [0, {Li}]")
            for s1, s2 in zip(segs, segs[1:]):
                if abs(s1.hi - s2.lo) > 1e-12 * max(1.0, Li):
                    problems.append(f"circle {i}: gap or overlap at {s1.hi}")
            for s in segs:
                if not s.hi > s.lo:
                    problems.append(f"circle {i}: empty segment [{s.lo}, {s.hi}]")
                if s.kind == "poly" and len(s.coeffs) > 9:
                    problems.append(f"circle {i}: polynomial degree above 8")
        return problems

    def ends(self, i: int) -> np.ndarray:
        segs = self.circles[i]
        return np.array([s.lo for s in segs] + [segs[-1].hi])

    def evaluate(self, i: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        segs = self.circles[i]
        flat = x.ravel()
        los = np.array([s.lo for s in segs])
        idx = np.clip(np.searchsorted(los, flat, side="right") - 1, 0, len(segs) - 1)
        out = np.empty_like(flat)
        for k, s in enumerate(segs):
            sel = idx == k
            if sel.any():
                out[sel] = s(flat[sel])
        return out.reshape(x.shape)

    def to_json(self) -> list:
        return [[s.to_json() for s in segs] for segs in self.circles]

    @classmethod
    def from_json(cls, d: list) -> "InitialData":
        return cls(tuple(tuple(Segment.from_json(s) for s in segs) for segs in d))


def zero_data(net: Network) -> InitialData:
    return InitialData(tuple((poly(0.0, Li),) for Li in net.L))


def bump_comb(L: float, ell: float, lo: float, hi: float, height: float = 1.0) -> tuple[Segment, ...]:
    """Copies of one bump on ``[k ell + lo, k ell + hi]`` for each cell of a circle of length ``L``."""
    cells = int(round(L / ell))
    if abs(cells * ell - L) > 1e-12 * L:
        raise ValueError("circle length must be a multiple of ell")
    if not 0.0 <= lo < hi <= ell:
        raise ValueError("bump must sit inside one cell")
    segs = []
    for k in range(cells):
        base = k * ell
        if lo > 0:
            segs.append(poly(base, base + lo))
        segs.append(bump(base + lo, base + hi, height))
        if hi < ell:
            segs.append(poly(base + hi, base + ell))
    return tuple(segs)


def check_compatibility(z0: InitialData, net: Network) -> float:
    left = np.array([z0.evaluate(i, 0.0) for i in range(net.N)], dtype=float)
    right = np.array([z0.evaluate(j, net.L[j]) for j in range(net.N)], dtype=float)
    return float(np.max(np.abs(left - net.M @ right)))


# -------------------------------------------------------------- trace field


class TraceField:
    """Solution of the damped network problem on ``[0, t_max]``."""

    def __init__(self, net: Network, signals, z0: InitialData, t_max: float):
        problems = z0.validate(net)
        if problems:
            raise ValueError("; ".join(problems))
        self.net = net
        self.signals = full_signals(net, signals)
        self.z0 = z0
        self.t_max = float(t_max)
        self.lattice = get_lattice(net, self.t_max)
        self.constant = all(s.is_constant for s in self.signals[: net.n_d])
        self._theta_const = None

    # -- traces --------------------------------------------------------

    def _theta_for(self, chunk: np.ndarray, P: int) -> tuple[np.ndarray, np.ndarray]:
        if self.constant:
            if self._theta_const is None:
                self._theta_const = theta_batch(self.lattice, self.net, self.signals, [self.t_max])
            return self._theta_const, np.zeros(len(chunk), dtype=np.int64)
        return theta_batch(self.lattice, self.net, self.signals, chunk, P), np.arange(len(chunk))

    def traces(self, ts) -> np.ndarray:
        """Boundary values ``u_i(t, 0)`` for every circle; shape (N, len(ts))."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if ts.size and (ts.min() < 0 or ts.max() > self.t_max * (1 + 1e-12)):
            raise HorizonError(f"trace time outside [0, {self.t_max}]")
        N = self.net.N
        out = np.zeros((N, len(ts)))
        order = np.argsort(ts, kind="stable")
        lat = self.lattice
        step = time_chunks(len(lat), N, len(ts))
        for c0 in range(0, len(ts), step):
            sel = order[c0 : c0 + step]
            chunk = ts[sel]
            P = lat.prefix(chunk.max())
            theta, tidx = self._theta_for(chunk, P)
            out[:, sel] = self._gather(chunk, P, theta, tidx).T
        return out

    def _gather(self, ts: np.ndarray, P: int, theta: np.ndarray, tidx: np.ndarray) -> np.ndarray:
        net = self.net
        lat = self.lattice
        acc = np.zeros((len(ts), net.N))
        for j in range(net.N):
            bases, ray = lat.rays[j]
            keep = bases < P
            bases, ray = bases[keep], ray[keep]
            Lj, aj, bj = net.L[j], net.a[j], net.b[j]
            tau = ts[None, :] - lat.Lval[bases][:, None]
            valid = tau >= -1e-12 * max(1.0, self.t_max)
            tau = np.maximum(tau, 0.0)
            m = np.floor(tau / Lj).astype(np.int64)
            r = tau - m * Lj
            wrap = r >= Lj
            m[wrap] += 1
            r[wrap] -= Lj
            m = np.minimum(m, ray.shape[1] - 1)
            node = ray[np.arange(len(bases))[:, None], m]
            valid &= node >= 0
            node = np.where(valid, node, 0)
            x = Lj - r
            # damping collected on the first pass through circle j
            lo = r - Lj + np.maximum(x, aj)
            hi = r - Lj + bj
            eps = np.exp(-self.signals[j].integral(lo, hi))
            coef = np.where(valid, eps * self.z0.evaluate(j, x), 0.0)
            th = theta[node, tidx[None, :], :, j]
            acc += np.einsum("bt,bti->ti", coef, th)
        return acc

    def boundary_trace(self, i: int, t: float) -> float:
        return float(self.traces([t])[i, 0])

    # -- fields --------------------------------------------------------

    def _damp_factor(self, i: int, t: float, x: np.ndarray) -> np.ndarray:
        a, b = self.net.a[i], self.net.b[i]
        if not b > a:
            return np.ones_like(x)
        lo = np.maximum(0.0, t - x + a)
        hi = np.minimum(t, t - x + b)
        return np.exp(-self.signals[i].integral(lo, hi))

    def fields(self, t: float, xs: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Field values ``u_i(t, x)`` on one point set per circle, with one shared trace call."""
        need = []
        for i, x in enumerate(xs):
            x = np.asarray(x, dtype=float)
            need.append(t - x[x < t])
        all_t = np.concatenate(need) if need else np.zeros(0)
        tr = self.traces(all_t) if all_t.size else np.zeros((self.net.N, 0))
        out, pos = [], 0
        for i, x in enumerate(xs):
            x = np.asarray(x, dtype=float)
            if np.any((x < -1e-12) | (x > self.net.L[i] * (1 + 1e-12))):
                raise ValueError(f"x outside [0, L_{i}]")
            vals = np.empty_like(x)
            past = x < t
            k = int(past.sum())
            vals[past] = tr[i, pos : pos + k]
            pos += k
            vals[~past] = self.z0.evaluate(i, x[~past] - t)
            out.append(vals * self._damp_factor(i, t, x))
        return out

    def field(self, i: int, t: float, x) -> np.ndarray | float:
        xs = [np.zeros(0)] * self.net.N
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        xs[i] = arr
        val = self.fields(t, xs)[i]
        return float(val[0]) if np.ndim(x) == 0 else val

    # -- quadrature ----------------------------------------------------

    def breakpoints(self, i: int, t: float) -> np.ndarray:
        """Points of ``[0, L_i]`` where ``u_i(t, .)`` may lose smoothness."""
        net = self.net
        Li, a, b = net.L[i], net.a[i], net.b[i]
        pts = [0.0, Li, t, a, b, t + a, t + b]
        pts += list(t + self.z0.ends(i))
        if i < net.n_d:
            sig = self.signals[i]
            for off in (a, b):
                pts += list(t + off - sig.kinks(t + off - Li, t + off))
        lat = self.lattice
        P = lat.prefix(t)
        Lval = lat.Lval[:P]
        for j in range(net.N):
            offs = net.L[j] - np.concatenate([self.z0.ends(j), [net.a[j], net.b[j]]])
            lo = np.searchsorted(Lval, t - Li - net.L[j] - 1e-9, side="left")
            s = (Lval[lo:, None] + offs[None, :]).ravel()
            pts += list(t - s)
        # the trace itself bends wherever a damping window along a path crosses a signal kink
        for k in range(net.n_d):
            shifts = np.array([-net.a[k], -net.b[k], net.L[k] - net.a[k], net.L[k] - net.b[k]])
            kap = self.signals[k].kinks(t - Li - Lval[-1] - shifts.max(), t - shifts.min())
            for c in shifts:
                # kinks kap with t - Li < kap + L(n) + c < t, one window per node
                base = Lval + c
                lo = np.searchsorted(kap, t - Li - base, side="right")
                hi = np.searchsorted(kap, t - base, side="left")
                cnt = hi - lo
                if cnt.sum() == 0:
                    continue
                node = np.repeat(np.arange(len(base)), cnt)
                offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
                pts += list(t - kap[lo[node] + offs] - base[node])
        pts = np.asarray(pts)
        pts = pts[(pts > 0.0) & (pts < Li)]
        pts = np.unique(np.concatenate([[0.0, Li], pts]))
        keep = np.concatenate([[True], np.diff(pts) > 1e-13 * max(1.0, Li)])
        pts = pts[keep]
        pts[-1] = Li
        return pts

    def quadrature(self, i: int, t: float, resolution: int = 64) -> tuple[np.ndarray, np.ndarray]:
        if resolution < 1:
            raise ValueError("resolution must be positive")
        return gauss_nodes(self.breakpoints(i, t), self.net.L[i] / resolution)

    def norms(self, t: float, p: float = 2.0, resolution: int = 64) -> np.ndarray:
        """Per-circle L^p norms at time ``t``; ``p = inf`` takes the max over quadrature nodes."""
        return self.multi_norms(t, (p,), resolution)[0]

    def multi_norms(self, t: float, ps: Sequence[float], resolution: int = 64) -> np.ndarray:
        """Per-circle norms for several exponents from one field evaluation; shape (len(ps), N)."""
        quad = [self.quadrature(i, t, resolution) for i in range(self.net.N)]
        vals = self.fields(t, [q[0] for q in quad])
        out = np.empty((len(ps), self.net.N))
        for i, ((x, w), v) in enumerate(zip(quad, vals)):
            for k, p in enumerate(ps):
                if math.isinf(p):
                    out[k, i] = np.max(np.abs(v))
                else:
                    out[k, i] = float(np.sum(w * np.abs(v) ** p)) ** (1.0 / p)
        return out

    def lp_norm(self, i: int, t: float, p: float = 2.0, resolution: int = 64) -> float:
        x, w = self.quadrature(i, t, resolution)
        v = self.field(i, t, x)
        if math.isinf(p):
            return float(np.max(np.abs(v)))
        return float(np.sum(w * np.abs(v) ** p)) ** (1.0 / p)

    def total_norm(self, t: float, p: float = 2.0, resolution: int = 64) -> float:
        return float(self.norms(t, p, resolution).sum())

    def integrals(self, t: float, resolution: int = 64) -> np.ndarray:
        quad = [self.quadrature(i, t, resolution) for i in range(self.net.N)]
        vals = self.fields(t, [q[0] for q in quad])
        return np.array([float(np.sum(w * v)) for (x, w), v in zip(quad, vals)])

    def mass(self, t: float, resolution: int = 64) -> float:
        return float(self.integrals(t, resolution).sum())

    def restart(self, s: float) -> "TraceField":
        """Problem restarted at time ``s``: state at ``s`` as data, signals shifted by ``s``."""
        circles = []
        for i in range(self.net.N):
            fn = (lambda ii: lambda x: self.field(ii, s, np.asarray(x, dtype=float)))(i)
            circles.append((Segment(0.0, float(self.net.L[i]), "callable", fn=fn),))
        sig = [sg.shifted(s) for sg in self.signals]
        return TraceField(self.net, sig, InitialData(tuple(circles)), self.t_max - s)


def distance(f: TraceField, t1: float, g: TraceField, t2: float, resolution: int = 64) -> float:
    """Total L^2 distance between two states, on the union of both quadrature grids."""
    total = 0.0
    for i in range(f.net.N):
        pts = np.unique(np.concatenate([f.breakpoints(i, t1), g.breakpoints(i, t2)]))
        x, w = gauss_nodes(pts, f.net.L[i] / resolution)
        d = f.field(i, t1, x) - g.field(i, t2, x)
        total += float(np.sum(w * d**2))
    return math.sqrt(total)
