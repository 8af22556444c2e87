"""Network description: circle lengths, damping windows, transmission matrix.

Lengths are stored as an exact rational times one of a few fixed irrational
"tags", so whether two lengths have a rational ratio is decided exactly.
Circles are indexed from 0 throughout the package.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


class Tag(str, Enum):
    ONE = "ONE"
    SQRT2 = "SQRT2"
    GOLDEN = "GOLDEN"

    @property
    def value_f(self) -> float:
        return _TAG_VALUES[self]


_TAG_VALUES = {
    Tag.ONE: 1.0,
    Tag.SQRT2: math.sqrt(2.0),
    Tag.GOLDEN: (1.0 + math.sqrt(5.0)) / 2.0,
}


@dataclass(frozen=True)
class Length:
    rational: Fraction
    tag: Tag = Tag.ONE

    def __post_init__(self):
        object.__setattr__(self, "rational", Fraction(self.rational))
        object.__setattr__(self, "tag", Tag(self.tag))
        if self.rational <= 0:
            raise ValueError(f"length must be positive, got {self.rational}")

    @property
    def value(self) -> float:
        return float(self.rational) * self.tag.value_f

    def ratio(self, other: "Length") -> Fraction | None:
        """Exact ratio self/other, or None when it is irrational."""
        if self.tag != other.tag:
            return None
        return self.rational / other.rational

    def to_json(self) -> dict:
        return {"num": self.rational.numerator, "den": self.rational.denominator, "tag": self.tag.value}

    @classmethod
    def from_json(cls, d: dict) -> "Length":
        return cls(Fraction(int(d["num"]), int(d["den"])), Tag(d.get("tag", "ONE")))


def length(x, tag: str | Tag = Tag.ONE) -> Length:
    return Length(Fraction(x), Tag(tag))


@dataclass(frozen=True)
class Network:
    """Star of ``N`` circles joined at one point.

    Circles ``0 .. n_d-1`` carry a damping window ``[a_i, b_i]``; the others
    follow the convention ``a_i = b_i = L_i`` (no damping).
    """

    lengths: tuple[Length, ...]
    damping: tuple[tuple[float, float], ...]
    matrix: tuple[tuple[float, ...], ...]
    n_d: int

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(self.lengths))
        object.__setattr__(self, "damping", tuple((float(a), float(b)) for a, b in self.damping))
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in self.matrix))

    @classmethod
    def build(cls, lengths: Sequence[Length], matrix, damping: Sequence[tuple[float, float]] = ()) -> "Network":
        """Fill in the undamped convention for circles beyond ``len(damping)``."""
        lengths = tuple(lengths)
        n_d = len(damping)
        full = list(damping) + [(ln.value, ln.value) for ln in lengths[n_d:]]
        return cls(lengths, tuple(full), tuple(map(tuple, np.asarray(matrix, dtype=float))), n_d)

    @property
    def N(self) -> int:
        return len(self.lengths)

    @cached_property
    def L(self) -> np.ndarray:
        return np.array([ln.value for ln in self.lengths])

    @cached_property
    def M(self) -> np.ndarray:
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        return m

    @cached_property
    def a(self) -> np.ndarray:
        return np.array([d[0] for d in self.damping])

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([d[1] for d in self.damping])

    @property
    def L_min(self) -> float:
        return float(self.L.min())

    @property
    def L_max(self) -> float:
        return float(self.L.max())

    def to_json(self) -> dict:
        return {
            "n": self.N,
            "n_d": self.n_d,
            "lengths": [ln.to_json() for ln in self.lengths],
            "damping": [list(d) for d in self.damping],
            "matrix": [list(row) for row in self.matrix],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Network":
        lengths = tuple(Length.from_json(x) for x in d["lengths"])
        n_d = int(d["n_d"])
        damping = [tuple(x) for x in d["damping"]]
        if len(damping) == n_d:
            damping += [(ln.value, ln.value) for ln in lengths[n_d:]]
        net = cls(lengths, tuple(damping), tuple(map(tuple, d["matrix"])), n_d)
        if "n" in d and int(d["n"]) != net.N:
            raise ValueError(f"n={d['n']} does not match {net.N} lengths")
        return net

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, s: str) -> "Network":
        return cls.from_json(json.loads(s))


def validate_network(net: Network) -> list[str]:
    """List violated invariants; an empty list means the network is valid."""
    problems = []
    N = net.N
    if N < 1:
        problems.append("N >= 1")
    if not 0 <= net.n_d <= N:
        problems.append(f"0 <= N_d <= N (N_d={net.n_d})")
    if len(net.damping) != N:
        problems.append(f"damping list has {len(net.damping)} entries, expected {N}")
    shape = np.shape(net.matrix)
    if shape != (N, N):
        problems.append(f"M must be {N}x{N}, got {shape}")
    elif not np.all(np.isfinite(net.M)):
        problems.append("M entries must be finite")
    for i, (a, b) in enumerate(net.damping[:N]):
        Li = net.lengths[i].value
        if i < net.n_d:
            if not a < b:
                problems.append(f"circle {i}: a_i < b_i violated ({a} >= {b})")
            if a < 0 or b > Li:
                problems.append(f"circle {i}: damping [{a}, {b}] not inside [0, {Li}]")
        elif a != Li or b != Li:
            problems.append(f"circle {i}: undamped convention a_i = b_i = L_i violated")
    return problems


def l1_norm(M) -> float:
    """Induced l1 norm: largest absolute column sum."""
    M = np.asarray(M, dtype=float)
    return float(np.abs(M).sum(axis=0).max())


def lattice_value(n: Sequence[int], net: Network) -> float:
    return float(sum(k * Lk for k, Lk in zip(n, net.L)))


def _le(x: float, t: float) -> bool:
    return x <= t + 1e-12 * max(1.0, abs(t))


def _best_first(net: Network, t: float, frozen: int | None) -> Iterator[MultiIndex]:
    N = net.N
    start = (0,) * N
    heap = [(0.0, start)]
    seen = {start}
    while heap:
        val, n = heapq.heappop(heap)
        yield n
        for k in range(N):
            if k == frozen:
                continue
            m = n[:k] + (n[k] + 1,) + n[k + 1 :]
            if m in seen:
                continue
            lv = lattice_value(m, net)
            if _le(lv, t):
                seen.add(m)
                heapq.heappush(heap, (lv, m))


def enumerate_lattice(j: int | None, t: float, net: Network) -> Iterator[MultiIndex]:
    """Multi-indices with ``n_j = 0`` and ``L(n) <= t`` in nondecreasing L order.

    ``j=None`` drops the ``n_j = 0`` constraint and walks the whole lattice.
    Ties in L are broken lexicographically.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    return _best_first(net, t, j)


def lattice_count_bound(t: float, net: Network) -> float:
    return (t / net.L_min + 1.0) ** (net.N - 1)


# ---------------------------------------------------------------- hypotheses


@dataclass
class HypothesisReport:
    l1_norm: float
    mixing_ok: bool
    irrational_pair: tuple[int, int] | None
    rational_alternative: tuple[int, int, int, int, bool] | None = None
    contractive: bool = field(init=False)

    def __post_init__(self):
        self.contractive = self.l1_norm <= 1.0 + 1e-12

    @property
    def all_ok(self) -> bool:
        rational_ok = self.rational_alternative is not None and self.rational_alternative[4]
        return self.contractive and self.mixing_ok and (self.irrational_pair is not None or rational_ok)

    def to_json(self) -> dict:
        ra = self.rational_alternative
        return {
            "l1_norm": self.l1_norm,
            "contractive": self.contractive,
            "mixing_ok": self.mixing_ok,
            "irrational_pair": list(self.irrational_pair) if self.irrational_pair else None,
            "rational_alternative": None
            if ra is None
            else dict(zip(("i", "j", "p", "q", "satisfied"), ra)),
            "all_ok": self.all_ok,
        }


def denominator_threshold(L_j: float, T: float, mu: float, width: float) -> float:
    return 3.0 * L_j * (max(2.0 * T / (mu * width), 1.0 / T) + 1.0 / T)


def check_hypotheses(net: Network, T: float, mu: float) -> HypothesisReport:
    if mu <= 0 or T < mu:
        raise ValueError(f"need T >= mu > 0, got T={T}, mu={mu}")
    norm = l1_norm(net.M)
    mixing = bool(np.all(net.M != 0.0))
    irr = None
    for i in range(net.N):
        for j in range(i + 1, net.N):
            if net.lengths[i].ratio(net.lengths[j]) is None:
                irr = (i, j)
                break
        if irr:
            break
    alt = None
    if irr is None:
        # every ratio is rational: look for a pair with a large enough denominator
        for j in range(net.n_d):
            width = net.b[j] - net.a[j]
            thr = denominator_threshold(net.L[j], T, mu, width)
            for i in range(net.N):
                if i == j:
                    continue
                r = net.lengths[i].ratio(net.lengths[j])
                cand = (i, j, r.numerator, r.denominator, r.denominator >= thr)
                if alt is None or (cand[4] and not alt[4]):
                    alt = cand
    return HypothesisReport(norm, mixing, irr, alt)


# ------------------------------------------------- ratio rationality oracle


def continued_fraction(x: float, max_terms: int = 64, tol: float = 1e-9) -> list[int]:
    """Partial quotients of ``x``; stops when the remainder is within ``tol`` of an integer."""
    terms = []
    for _ in range(max_terms):
        a = math.floor(x)
        terms.append(a)
        frac = x - a
        if frac < tol:
            break
        if 1 - frac < tol:
            terms[-1] += 1
            break
        x = 1.0 / frac
    return terms


def convergent(terms: Sequence[int]) -> Fraction:
    value = Fraction(terms[-1])
    for a in reversed(terms[:-1]):
        value = a + 1 / value
    return value


def reconstruct_rational(x: float, max_den: int = 10**6, rtol: float = 1e-15) -> Fraction | None:
    """Exact rational p/q with q <= max_den matching ``x`` to a few ulps, else None."""
    cand = Fraction(x).limit_denominator(max_den)
    if abs(float(cand) - x) <= rtol * abs(x):
        return cand
    return None
