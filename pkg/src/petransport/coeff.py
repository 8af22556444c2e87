"""Lattice coefficient engine.

``Theta(n)[i, j]`` is the damped path-sum weight attached to the lattice
point ``n`` at a fixed evaluation time; ``B(n)`` is its undamped analogue.
The batch DP below evaluates Theta for many times at once, anti-diagonal by
anti-diagonal, and the scalar helpers at the end (``epsilon``,
``theta_kstep``) form an independent path used by the tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .net import MultiIndex, Network, enumerate_lattice, lattice_value
from .signals import StepSignal, integrate

MEMORY_BUDGET = 2_000_000  # lattice points
_CHUNK_ELEMENTS = 8_000_000


class HorizonError(ValueError):
    """Requested lattice point or time lies outside the populated horizon."""


def full_signals(net: Network, signals: Sequence[StepSignal]) -> list[StepSignal]:
    """Pad a list of damped-circle signals with ``alpha = 1`` up to ``N`` entries."""
    sig = list(signals)
    if len(sig) < net.n_d:
        raise ValueError(f"need at least {net.n_d} signals, got {len(sig)}")
    if len(sig) > net.N:
        raise ValueError(f"got {len(sig)} signals for {net.N} circles")
    sig += [StepSignal.constant(1.0) for _ in range(net.N - len(sig))]
    return sig


# ------------------------------------------------------------------- lattice


class Lattice:
    """All ``n`` with ``L(n) <= t_max``, stored in nondecreasing L order.

    Parents, anti-diagonal groups and per-circle rays are precomputed so the
    DP and the trace gather are pure array operations. Any prefix of the
    node list is itself a valid lattice for a smaller horizon.
    """

    def __init__(self, net: Network, t_max: float, budget: int = MEMORY_BUDGET):
        self.net = net
        self.t_max = float(t_max)
        N = net.N
        nodes = []
        for n in enumerate_lattice(None, self.t_max, net):
            nodes.append(n)
            if len(nodes) > budget:
                raise HorizonError(f"lattice up to t={t_max} exceeds the budget of {budget} points")
        self.nodes = np.array(nodes, dtype=np.int64).reshape(-1, N)
        self.Lval = self.nodes @ net.L
        self.index = {n: k for k, n in enumerate(nodes)}
        self.parents = np.full((len(nodes), N), -1, dtype=np.int64)
        for k, n in enumerate(nodes):
            for c in range(N):
                if n[c] > 0:
                    self.parents[k, c] = self.index[n[:c] + (n[c] - 1,) + n[c + 1 :]]
        l1 = self.nodes.sum(axis=1)
        self.l1 = l1
        self.diagonals = [np.flatnonzero(l1 == m) for m in range(int(l1.max()) + 1)]
        self.rays = []
        for j in range(N):
            bases = np.flatnonzero(self.nodes[:, j] == 0)
            steps = int(math.floor(self.t_max / net.L[j] + 1e-9)) + 1
            ray = np.full((len(bases), steps), -1, dtype=np.int64)
            for r, b in enumerate(bases):
                n = nodes[b]
                m = 0
                while True:
                    key = n[:j] + (m,) + n[j + 1 :]
                    k = self.index.get(key)
                    if k is None:
                        break
                    ray[r, m] = k
                    m += 1
            self.rays.append((bases, ray))

    def __len__(self) -> int:
        return len(self.nodes)

    def prefix(self, t: float) -> int:
        """Number of nodes with ``L(n) <= t`` (same tolerance as enumeration)."""
        return int(np.searchsorted(self.Lval, t + 1e-12 * max(1.0, abs(t)), side="right"))


_LATTICE_CACHE: dict[Network, Lattice] = {}


def get_lattice(net: Network, t_max: float) -> Lattice:
    lat = _LATTICE_CACHE.get(net)
    if lat is None or lat.t_max < t_max:
        lat = Lattice(net, t_max)
        _LATTICE_CACHE[net] = lat
    return lat


# -------------------------------------------------------------- batch theta


def _node_eps(lat: Lattice, net: Network, signals, idx: np.ndarray, ts: np.ndarray, k: int) -> np.ndarray:
    """Damping factor for leaving ``n - 1_k`` across circle ``k``; shape (len(idx), len(ts))."""
    a, b = net.a[k], net.b[k]
    if not b > a:
        return np.ones((len(idx), len(ts)))
    start = ts[None, :] - lat.Lval[idx][:, None]
    return np.exp(-signals[k].integral(start + a, start + b))


def theta_batch(lat: Lattice, net: Network, signals, ts, n_nodes: int | None = None) -> np.ndarray:
    """Theta for the first ``n_nodes`` lattice points at every time in ``ts``.

    Returns an array of shape (n_nodes, len(ts), N, N). Entries for points
    with ``L(n) > t`` are computed but meaningless.
    """
    sig = full_signals(net, signals)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    P = len(lat) if n_nodes is None else n_nodes
    N = net.N
    M = net.M
    out = np.empty((P, len(ts), N, N))
    out[0] = M
    for diag in lat.diagonals[1:]:
        g = diag[diag < P]
        if len(g) == 0:
            break
        acc = np.zeros((len(g), len(ts), N, N))
        for k in range(N):
            par = lat.parents[g, k]
            ok = par >= 0
            if not ok.any():
                continue
            gk = g[ok]
            eps = _node_eps(lat, net, sig, gk, ts, k)
            # new[i, j] += eps * prev[i, k] * M[k, j]
            col = out[par[ok], :, :, k] * eps[:, :, None]
            acc[ok] += col[:, :, :, None] * M[k][None, None, None, :]
        out[g] = acc
    return out


def time_chunks(n_nodes: int, N: int, n_times: int) -> int:
    return max(1, _CHUNK_ELEMENTS // max(1, n_nodes * N * N))


@dataclass
class ThetaTable:
    """Theta(n) for every populated ``n`` at one evaluation time."""

    t: float
    nodes: list[MultiIndex]
    index: dict
    values: np.ndarray
    net: Network
    signals: list

    def __getitem__(self, n: MultiIndex) -> np.ndarray:
        try:
            return self.values[self.index[tuple(n)]]
        except KeyError:
            raise HorizonError(f"{tuple(n)} is outside the populated horizon (t={self.t})") from None

    def __contains__(self, n) -> bool:
        return tuple(n) in self.index

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def horizon(self) -> float:
        return self.t

    def complete_diagonals(self) -> int:
        """Largest ``m`` such that every ``|n| <= m`` is populated."""
        return int(math.floor(self.t / self.net.L_max + 1e-12))


def build_theta(net: Network, signals: Sequence[StepSignal], t: float) -> ThetaTable:
    if t < 0:
        raise ValueError("t must be nonnegative")
    lat = get_lattice(net, t)
    P = lat.prefix(t)
    vals = theta_batch(lat, net, signals, [t], P)[:, 0]
    nodes = [tuple(int(v) for v in n) for n in lat.nodes[:P]]
    return ThetaTable(float(t), nodes, {n: k for k, n in enumerate(nodes)}, vals, net, full_signals(net, signals))


# --------------------------------------------------------------------- beta


@dataclass
class BetaTable:
    nodes: list[MultiIndex]
    index: dict
    values: np.ndarray
    horizon_l1: int

    def __getitem__(self, n: MultiIndex) -> np.ndarray:
        try:
            return self.values[self.index[tuple(n)]]
        except KeyError:
            raise HorizonError(f"{tuple(n)} is outside |n| <= {self.horizon_l1}") from None

    def __contains__(self, n) -> bool:
        return tuple(n) in self.index


def compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """All multi-indices of length ``parts`` summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def build_beta(net: Network, horizon_l1: int, budget: int = MEMORY_BUDGET) -> BetaTable:
    if horizon_l1 < 0:
        raise ValueError("horizon must be nonnegative")
    N = net.N
    if math.comb(horizon_l1 + N, N) > budget:
        raise HorizonError(f"|n| <= {horizon_l1} exceeds the budget of {budget} points")
    nodes: list[MultiIndex] = []
    for m in range(horizon_l1 + 1):
        nodes.extend(compositions(m, N))
    index = {n: k for k, n in enumerate(nodes)}
    M = net.M
    vals = np.empty((len(nodes), N, N))
    vals[0] = M
    for k, n in enumerate(nodes[1:], start=1):
        acc = np.zeros((N, N))
        for c in range(N):
            if n[c] >= 1:
                prev = vals[index[n[:c] + (n[c] - 1,) + n[c + 1 :]]]
                acc += np.outer(prev[:, c], M[c])
        vals[k] = acc
    return BetaTable(nodes, index, vals, horizon_l1)


# -------------------------------------------------- scalar reference helpers


def epsilon(j: int, n: Sequence[int], x: float, t: float, alpha: StepSignal, net: Network) -> float:
    """Damping factor for data starting at ``x`` on circle ``j`` after the path ``n``."""
    Lj = net.L[j]
    if not -1e-12 <= x <= Lj + 1e-12:
        raise ValueError(f"x={x} outside [0, {Lj}]")
    a, b = net.a[j], net.b[j]
    lo = max(x, a)
    if lo >= b:
        return 1.0
    shift = t - lattice_value(n, net) - Lj
    return math.exp(-integrate(alpha, shift + lo, shift + b))


def theta_at(table: ThetaTable, i: int, j: int, n: MultiIndex, x: float) -> float:
    theta = table[n][i, j]
    return epsilon(j, n, x, table.t, table.signals[j], table.net) * theta


def phi_k_set(n: Sequence[int], K: int) -> Iterator[tuple[int, ...]]:
    """Paths ``v`` of length ``K`` visiting circle ``c`` at most ``n[c]`` times."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > sum(n):
        raise ValueError(f"K={K} exceeds |n|={sum(n)}")
    N = len(n)
    for v in itertools.product(range(N), repeat=K):
        if all(v.count(c) <= n[c] for c in range(N)):
            yield v


def path_weight(net: Network, j: int, v: Sequence[int]) -> float:
    M = net.M
    w = M[v[0], j]
    for s in range(1, len(v)):
        w *= M[v[s], v[s - 1]]
    return float(w)


def path_weight_sum(net: Network, j: int, n: Sequence[int], K: int) -> float:
    return sum(abs(path_weight(net, j, v)) for v in phi_k_set(n, K))


def theta_kstep(net: Network, signals, i: int, j: int, n: MultiIndex, t: float, K: int, table) -> float:
    """K-step path sum for ``Theta(n)[i, j]`` built on ``table`` entries K levels below."""
    sig = full_signals(net, signals)
    total = 0.0
    for v in phi_k_set(n, K):
        cur = list(n)
        damp = 1.0
        for c in v:
            cur[c] -= 1
            damp *= epsilon(c, cur, 0.0, t, sig[c], net)
        total += path_weight(net, j, v) * damp * table[tuple(cur)][i, v[-1]]
    return total


def theta_kstep_all(table: ThetaTable, K: int) -> np.ndarray:
    """K-step path sum for every populated entry at once; NaN where ``|n| < K``.

    Each path is handled as one vectorized pass over the nodes, so this is
    independent of the anti-diagonal DP apart from reading its lower levels.
    """
    net, t = table.net, table.t
    N = net.N
    nodes = np.array(table.nodes, dtype=np.int64)
    Lval = nodes @ net.L
    out = np.zeros_like(table.values)
    ok_any = nodes.sum(axis=1) >= K
    for v in itertools.product(range(N), repeat=K):
        counts = np.bincount(v, minlength=N)
        ok = ok_any & np.all(nodes >= counts[None, :], axis=1)
        if not ok.any():
            continue
        idx = np.flatnonzero(ok)
        damp = np.ones(len(idx))
        start = t - Lval[idx]
        for c in v:
            # leaving the current node across circle c
            if net.b[c] > net.a[c]:
                damp *= np.exp(-table.signals[c].integral(start + net.a[c], start + net.b[c]))
            start = start + net.L[c]
        target = nodes[idx] - counts[None, :]
        tgt = np.array([table.index[tuple(int(x) for x in row)] for row in target])
        w = net.M[v[0], :].copy()
        scal = 1.0
        for s in range(1, K):
            scal *= net.M[v[s], v[s - 1]]
        # out[n][i, j] += M[v0, j] * prod * damp * Theta(target)[i, vK]
        contrib = (scal * damp)[:, None] * table.values[tgt][:, :, v[-1]]
        out[idx] += contrib[:, :, None] * w[None, None, :]
    out[~ok_any] = np.nan
    return out
