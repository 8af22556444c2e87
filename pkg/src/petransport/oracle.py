"""Independent reference solutions.

``recursive_trace`` unrolls the junction relation directly, one circle
traversal at a time, and never touches the coefficient tables.
The upwind scheme is a plain first-order finite-volume discretization.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from .coeff import full_signals
from .net import Network
from .signals import integrate
from .solver import InitialData


class RecursionGuard(RuntimeError):
    pass


def _damp(alpha, lo: float, hi: float) -> float:
    return math.exp(-integrate(alpha, lo, hi)) if hi > lo else 1.0


def recursive_traces(net: Network, signals, z0: InitialData, t: float) -> np.ndarray:
    """Vector of ``u_i(t, 0)`` for all circles, by top-down memoized recursion.

    Every intermediate time has the form ``t - L(n)``, so the memo is keyed by
    the multi-index ``n`` rather than by a float.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    sig = full_signals(net, signals)
    N = net.N
    L, M, a, b = net.L, net.M, net.a, net.b
    guard = math.ceil(t / net.L_min) + N
    memo: dict[tuple[int, ...], np.ndarray] = {}

    def trace(n: tuple[int, ...], depth: int) -> np.ndarray:
        hit = memo.get(n)
        if hit is not None:
            return hit
        if depth > guard:
            raise RecursionGuard(f"recursion deeper than {guard} at {n}")
        s = t - sum(k * Lk for k, Lk in zip(n, L))
        ends = np.empty(N)
        for j in range(N):
            # value arriving at the junction from the end of circle j
            if s < L[j]:
                v = float(z0.evaluate(j, L[j] - s))
            else:
                child = n[:j] + (n[j] + 1,) + n[j + 1 :]
                v = trace(child, depth + 1)[j]
            if b[j] > a[j]:
                v *= _damp(sig[j], max(0.0, s - L[j] + a[j]), min(s, s - L[j] + b[j]))
            ends[j] = v
        out = M @ ends
        memo[n] = out
        return out

    limit = sys.getrecursionlimit()
    if limit < 4 * guard + 100:
        sys.setrecursionlimit(4 * guard + 100)
    return trace((0,) * N, 0)


def recursive_trace(net: Network, signals, z0: InitialData, i: int, t: float) -> float:
    return float(recursive_traces(net, signals, z0, t)[i])


def recursive_field(net: Network, signals, z0: InitialData, i: int, t: float, x: float) -> float:
    sig = full_signals(net, signals)
    if t <= x:
        v = float(z0.evaluate(i, x - t))
    else:
        v = recursive_trace(net, sig, z0, i, t - x)
    a, b = net.a[i], net.b[i]
    if b > a:
        v *= _damp(sig[i], max(0.0, t - x + a), min(t, t - x + b))
    return v


# --------------------------------------------------------------------- upwind


@dataclass
class UpwindState:
    t: float
    cells: list[np.ndarray]
    h: np.ndarray

    def mass(self) -> float:
        return float(sum(hi * c.sum() for hi, c in zip(self.h, self.cells)))

    def centers(self, i: int) -> np.ndarray:
        return (np.arange(len(self.cells[i])) + 0.5) * self.h[i]


def upwind_init(net: Network, z0: InitialData, cells: int | list[int]) -> UpwindState:
    """Cell averages of ``z0`` (5-point Gauss per cell) on a uniform grid per circle."""
    counts = [cells] * net.N if isinstance(cells, int) else list(cells)
    gx, gw = np.polynomial.legendre.leggauss(5)
    out, hs = [], []
    for i, n in enumerate(counts):
        h = net.L[i] / n
        left = np.arange(n) * h
        pts = left[:, None] + 0.5 * h * (gx[None, :] + 1.0)
        vals = z0.evaluate(i, pts)
        out.append((vals * gw[None, :]).sum(axis=1) * 0.5)
        hs.append(h)
    return UpwindState(0.0, out, np.array(hs))


def _overlap(net: Network, i: int, h: float, n: int) -> np.ndarray:
    left = np.arange(n) * h
    right = left + h
    a, b = net.a[i], net.b[i]
    return np.clip(np.minimum(right, b) - np.maximum(left, a), 0.0, None) / h


def upwind_step(state: UpwindState, net: Network, signals, dt: float) -> UpwindState:
    if dt > state.h.min() * (1 + 1e-12):
        raise ValueError(f"CFL violated: dt={dt} > h_min={state.h.min()}")
    sig = full_signals(net, signals)
    last = np.array([c[-1] for c in state.cells])
    inflow = net.M @ last
    new = []
    for i, c in enumerate(state.cells):
        lam = dt / state.h[i]
        prev = np.concatenate([[inflow[i]], c[:-1]])
        u = c - lam * (c - prev)
        if net.b[i] > net.a[i]:
            w = _overlap(net, i, state.h[i], len(c))
            u = u * np.exp(-w * integrate(sig[i], state.t, state.t + dt))
        new.append(u)
    return UpwindState(state.t + dt, new, state.h)


def upwind_solve(net: Network, signals, z0: InitialData, t_end: float, cells: int | list[int], cfl: float = 1.0) -> UpwindState:
    state = upwind_init(net, z0, cells)
    dt = cfl * state.h.min()
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    dt = t_end / steps
    for _ in range(steps):
        state = upwind_step(state, net, signals, dt)
    return state


def upwind_traces(net: Network, signals, z0: InitialData, ts, cells: int) -> np.ndarray:
    """Junction inflow ``M u(L)`` from the upwind grid at each requested time (sorted ascending)."""
    ts = np.asarray(ts, dtype=float)
    state = upwind_init(net, z0, cells)
    dt = state.h.min()
    out = np.empty((net.N, len(ts)))
    for k, t in enumerate(ts):
        while state.t < t - 1e-12:
            state = upwind_step(state, net, signals, min(dt, t - state.t))
        out[:, k] = net.M @ np.array([c[-1] for c in state.cells])
    return out
