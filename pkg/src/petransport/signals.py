"""Periodic piecewise-constant signals with values in [0, 1].

Integration goes through the exact piecewise-linear primitive, so window
integrals, PE margins and damping factors carry only rounding error.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class StepSignal:
    """Signal equal to ``values[k]`` on ``[breakpoints[k], breakpoints[k+1])``.

    The last value runs to ``period`` and wraps around to ``breakpoints[0]``.
    The signal extends periodically to the whole real line.
    """

    period: float
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        if not self.period > 0:
            raise ValueError("period must be positive")
        if len(bps) != len(vals) or not bps:
            raise ValueError("need one value per breakpoint interval")
        if any(b < 0 or b >= self.period for b in bps):
            raise ValueError("breakpoints must lie in [0, period)")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError("values must lie in [0, 1]")

    @classmethod
    def constant(cls, value: float, period: float = 1.0) -> "StepSignal":
        return cls(period, (0.0,), (value,))

    @classmethod
    def from_pieces(cls, period: float, pieces: Sequence[tuple[float, float, float]], base: float = 0.0):
        """Build from ``(lo, hi, value)`` pieces inside ``[0, period]``; gaps take ``base``."""
        edges = sorted({0.0, period, *[p[0] for p in pieces], *[p[1] for p in pieces]})
        edges = [e for e in edges if 0.0 <= e <= period]
        bps, vals = [], []
        for lo, hi in zip(edges, edges[1:]):
            if hi <= lo:
                continue
            mid = 0.5 * (lo + hi)
            v = base
            for plo, phi, pv in pieces:
                if plo <= mid < phi:
                    v = pv
            bps.append(lo)
            vals.append(v)
        return cls(period, *_merge(bps, vals))

    # -- structure ---------------------------------------------------------

    @cached_property
    def _knots(self) -> np.ndarray:
        # [0, bp..., period] with the value on each cell
        bps = list(self.breakpoints)
        vals = list(self.values)
        if bps[0] > 0.0:
            bps = [0.0] + bps
            vals = [vals[-1]] + vals
        return np.array(bps + [self.period])

    @cached_property
    def _cell_values(self) -> np.ndarray:
        vals = list(self.values)
        if self.breakpoints[0] > 0.0:
            vals = [vals[-1]] + vals
        return np.array(vals)

    @cached_property
    def _cumulative(self) -> np.ndarray:
        widths = np.diff(self._knots)
        return np.concatenate([[0.0], np.cumsum(widths * self._cell_values)])

    @property
    def total(self) -> float:
        """Integral over one period."""
        return float(self._cumulative[-1])

    @property
    def is_constant(self) -> bool:
        return len(set(self.values)) == 1

    def __call__(self, t):
        r = np.mod(np.asarray(t, dtype=float), self.period)
        idx = np.searchsorted(self._knots, r, side="right") - 1
        idx = np.clip(idx, 0, len(self._cell_values) - 1)
        return self._cell_values[idx]

    def shifted(self, s: float) -> "StepSignal":
        """Signal ``t -> alpha(t + s)``."""
        P = self.period
        off = s % P
        pieces = []
        for lo, hi, v in zip(self._knots[:-1], self._knots[1:], self._cell_values):
            a, b = lo - off, hi - off
            if b <= 0:
                a, b = a + P, b + P
            elif a < 0:
                pieces.append((a + P, P, v))
                a = 0.0
            pieces.append((a, b, v))
        out = StepSignal.from_pieces(P, pieces)
        return StepSignal(P, out.breakpoints, out.values, dict(self.meta))

    def kinks(self, lo: float, hi: float) -> np.ndarray:
        """All breakpoint copies inside ``[lo, hi]``."""
        P = self.period
        k0 = math.floor(lo / P)
        k1 = math.floor(hi / P)
        pts = (np.arange(k0, k1 + 1)[:, None] * P + self._knots[None, :-1]).ravel()
        return np.unique(pts[(pts >= lo) & (pts <= hi)])

    # -- integration -------------------------------------------------------

    def _prim_in_period(self, r):
        return np.interp(r, self._knots, self._cumulative)

    def integral(self, lo, hi):
        """Vectorized integral over ``[lo, hi]``; zero where ``lo >= hi``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        P = self.period
        k = np.floor(lo / P)
        lo_r = lo - k * P
        hi_r = hi - k * P
        kh = np.floor(hi_r / P)
        hi_rr = hi_r - kh * P
        val = kh * self.total + self._prim_in_period(hi_rr) - self._prim_in_period(lo_r)
        return np.where(hi > lo, val, 0.0)

    def to_json(self) -> dict:
        d = {"period": self.period, "breakpoints": list(self.breakpoints), "values": list(self.values)}
        if self.meta:
            d["meta"] = dict(self.meta)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "StepSignal":
        return cls(float(d["period"]), tuple(d["breakpoints"]), tuple(d["values"]), dict(d.get("meta", {})))


def _merge(bps, vals):
    out_b, out_v = [], []
    for b, v in zip(bps, vals):
        if out_v and out_v[-1] == v:
            continue
        out_b.append(b)
        out_v.append(v)
    if len(out_v) > 1 and out_v[0] == out_v[-1] and out_b[0] == 0.0:
        # wrap-around cell already covered by the last value
        out_b.pop(0)
        out_v.pop(0)
    return tuple(out_b), tuple(out_v)


def integrate(alpha: StepSignal, lo: float, hi: float) -> float:
    """Scalar integral of ``alpha`` over ``[lo, hi]`` (zero when ``lo >= hi``)."""
    if lo >= hi:
        return 0.0
    P = alpha.period
    knots = alpha._knots
    cum = alpha._cumulative
    vals = alpha._cell_values

    def prim(x):
        # primitive from the start of x's period
        k = bisect.bisect_right(knots, x) - 1
        k = min(max(k, 0), len(vals) - 1)
        return cum[k] + vals[k] * (x - knots[k])

    k = math.floor(lo / P)
    lo_r = lo - k * P
    hi_r = hi - k * P
    kh = math.floor(hi_r / P)
    hi_rr = hi_r - kh * P
    return float(kh * cum[-1] + prim(hi_rr) - prim(lo_r))


# ----------------------------------------------------------- PE verification


@dataclass
class PEWitness:
    is_pe: bool
    worst_t: float
    worst_integral: float

    def to_json(self) -> dict:
        return {"is_pe": self.is_pe, "worst_t": self.worst_t, "worst_integral": self.worst_integral}


def window_integral(alpha: StepSignal, t, T: float):
    t = np.asarray(t, dtype=float)
    return alpha.integral(t, t + T)


def verify_pe(alpha: StepSignal, T: float, mu: float) -> PEWitness:
    """Exact minimum of ``t -> int_t^{t+T} alpha`` over one period."""
    if mu <= 0 or T < mu:
        raise ValueError(f"need T >= mu > 0, got T={T}, mu={mu}")
    P = alpha.period
    knots = alpha._knots[:-1]
    cand = np.unique(np.mod(np.concatenate([knots, knots - T]), P))
    W = window_integral(alpha, cand, T)
    k = int(np.argmin(W))
    worst = float(W[k])
    return PEWitness(worst >= mu - 1e-12, float(cand[k]), worst)


# -------------------------------------------------------------- constructions


def make_single_circle_escape(L: float, b: float) -> StepSignal:
    """Equal to 1 on ``[0, (L - b)/2]`` and 0 for the rest of each period ``L``."""
    if not 0 < b < L:
        raise ValueError("need 0 < b < L")
    on = (L - b) / 2.0
    return StepSignal(L, (0.0, on), (1.0, 0.0))


def make_two_circle_pe_escape(ell: float, a: float, b: float) -> StepSignal:
    """Period-``ell`` 0/1 signal vanishing on ``[a - ell/2, b] + ell Z``.

    Requires ``b - a <= ell/4`` so the signal lies in G(ell, ell/4).
    """
    if b - a > ell / 4.0 + 1e-15:
        raise ValueError("construction needs b - a <= ell/4")
    if b < a:
        raise ValueError("need a <= b")
    lo = (a - ell / 2.0) % ell
    off_len = b - a + ell / 2.0
    hi = lo + off_len
    if hi <= ell:
        pieces = [(lo, hi, 0.0)]
    else:
        pieces = [(lo, ell, 0.0), (0.0, hi - ell, 0.0)]
    return StepSignal.from_pieces(ell, pieces, base=1.0)


def make_random_pe(T: float, mu: float, seed: int, max_tries: int = 100) -> StepSignal:
    """Seeded random period-``T`` signal in G(T, mu).

    Each period holds one full-strength block of length ``mu`` that does not
    straddle the period boundary, plus up to two extra blocks with random
    strength. Any window of length ``T`` then integrates at least ``mu``;
    candidates are still re-verified and resampled on failure.
    """
    if mu <= 0 or T < mu:
        raise ValueError(f"need T >= mu > 0, got T={T}, mu={mu}")
    rng = np.random.default_rng(seed)
    for attempt in range(max_tries):
        if mu >= T:
            sig = StepSignal.constant(1.0, T)
        else:
            o = float(rng.uniform(0.0, T - mu))
            pieces = []
            for _ in range(int(rng.integers(0, 3))):
                lo = float(rng.uniform(0.0, T))
                hi = min(T, lo + float(rng.uniform(0.0, 0.5 * T)))
                pieces.append((lo, hi, float(rng.uniform(0.1, 1.0))))
            pieces.append((o, o + mu, 1.0))
            sig = StepSignal.from_pieces(T, pieces, base=0.0)
        sig = StepSignal(sig.period, sig.breakpoints, sig.values, {"seed": int(seed), "T": T, "mu": mu})
        if verify_pe(sig, T, mu).is_pe:
            return sig
    raise RuntimeError(f"make_random_pe failed after {max_tries} attempts (generator bug)")
