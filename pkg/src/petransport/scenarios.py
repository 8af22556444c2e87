"""Named experiments, each bundled with the property it should exhibit."""

from __future__ import annotations

import inspect
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .analysis import distance_to_constant, fit_decay_after_transient, norm_samples
from .net import Length, Network, Tag, length
from .signals import (
    StepSignal,
    make_random_pe,
    make_single_circle_escape,
    make_two_circle_pe_escape,
    verify_pe,
)
from .solver import InitialData, TraceField, bump, bump_comb, distance, poly

SCHEMA_VERSION = 1


class Kind(str, Enum):
    PERIODIC = "PERIODIC"
    EXP_DECAY = "EXP_DECAY"
    CONVERGES_TO_MEAN = "CONVERGES_TO_MEAN"
    NORM_CONSTANT = "NORM_CONSTANT"


@dataclass
class Expectation:
    kind: Kind
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, **self.params}

    @classmethod
    def from_json(cls, d: dict) -> "Expectation":
        d = dict(d)
        return cls(Kind(d.pop("kind")), d)


@dataclass
class ScenarioSpec:
    name: str
    network: Network
    signals: list[StepSignal]
    initial: InitialData
    T: float | None
    mu: float | None
    expectation: Expectation
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "network": self.network.to_json(),
            "signals": [s.to_json() for s in self.signals],
            "initial": self.initial.to_json(),
            "T": self.T,
            "mu": self.mu,
            "expectation": self.expectation.to_json(),
            "metadata": self.metadata,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, d: dict) -> "ScenarioSpec":
        return cls(
            d.get("name", "custom"),
            Network.from_json(d["network"]),
            [StepSignal.from_json(s) for s in d["signals"]],
            InitialData.from_json(d["initial"]),
            d.get("T"),
            d.get("mu"),
            Expectation.from_json(d.get("expectation", {"kind": "NORM_CONSTANT"})),
            dict(d.get("metadata", {})),
        )

    @classmethod
    def loads(cls, s: str) -> "ScenarioSpec":
        return cls.from_json(json.loads(s))

    def field(self, t_max: float) -> TraceField:
        return TraceField(self.network, self.signals, self.initial, t_max)


def _as_length(x) -> Length:
    if isinstance(x, Length):
        return x
    return length(Fraction(x).limit_denominator(10**9))


def _zero_padded(L: float, lo: float, hi: float, seg) -> tuple:
    segs = []
    if lo > 0:
        segs.append(poly(0.0, lo))
    segs.append(seg)
    if hi < L:
        segs.append(poly(hi, L))
    return tuple(segs)


# ----------------------------------------------------------- constructions


def single_circle_escape(L=1.0, b=0.5, a=0.0, mode: str = "escape") -> ScenarioSpec:
    """One circle with the identity junction and damping on ``[a, b]``.

    ``mode`` selects the signal: ``"escape"`` (periodic solution despite
    persistent damping), ``"always"`` (alpha = 1, exact exponential decay)
    or ``"off"`` (alpha = 0, pure rotation).
    """
    Lf = float(L)
    if not 0 < b < Lf:
        raise ValueError("need 0 < b < L")
    if a != 0:
        raise ValueError("the escape construction uses a = 0")
    net = Network.build([_as_length(L)], [[1.0]], [(a, b)])
    w = (Lf - b) / 2.0
    lo, hi = b + 0.01 * w, (b + Lf) / 2.0 - 0.01 * w
    z0 = InitialData([_zero_padded(Lf, lo, hi, bump(lo, hi))])
    if mode == "escape":
        sig, T, mu, exp = make_single_circle_escape(Lf, b), Lf, w, Expectation(Kind.PERIODIC, {"period": Lf})
    elif mode == "always":
        sig, T, mu = StepSignal.constant(1.0, Lf), 1.0, 1.0
        exp = Expectation(Kind.EXP_DECAY, {"min_gamma": (b - a) / Lf, "rtol": 0.01, "sample_step": Lf})
    elif mode == "off":
        sig, T, mu, exp = StepSignal.constant(0.0, Lf), None, None, Expectation(Kind.NORM_CONSTANT, {})
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ScenarioSpec(f"single_circle_escape[{mode}]", net, [sig], z0, T, mu, exp, {"L": Lf, "a": a, "b": b})


def _rational_two_circle(p: int, q: int, ell, damping=()) -> Network:
    if p < 1 or q < 1 or math.gcd(p, q) != 1:
        raise ValueError("need coprime p, q >= 1")
    ell_len = _as_length(ell)
    lengths = [Length(ell_len.rational * p, ell_len.tag), Length(ell_len.rational * q, ell_len.tag)]
    return Network.build(lengths, [[0.5, 0.5], [0.5, 0.5]], damping)


def two_circle_rational_periodic(p: int = 2, q: int = 3, ell=1.0, lo: float = 0.1, hi: float = 0.4) -> ScenarioSpec:
    """Two circles of lengths ``p ell`` and ``q ell``; the same bump comb on both gives an ``ell``-periodic solution."""
    net = _rational_two_circle(p, q, ell)
    e = float(ell)
    z0 = InitialData([bump_comb(net.L[i], e, lo * e, hi * e) for i in range(2)])
    exp = Expectation(Kind.PERIODIC, {"period": e})
    return ScenarioSpec("two_circle_rational_periodic", net, [], z0, None, None, exp, {"p": p, "q": q, "ell": e})


def two_circle_pe_periodic(p: int = 2, q: int = 3, ell=1.0, a: float = 0.0, b: float = 0.25, lo: float = 0.1, hi: float = 0.4) -> ScenarioSpec:
    """Rational two-circle network with persistent damping on circle 0 that never meets the solution."""
    e = float(ell)
    if b - a > e / 4.0 + 1e-15:
        raise ValueError("need b - a <= ell/4")
    if not 0 < lo < hi <= 0.5:
        raise ValueError("bump must sit inside (0, ell/2)")
    net = _rational_two_circle(p, q, ell, [(a, b)])
    if b > net.L[0]:
        raise ValueError("damping window must lie on circle 0")
    sig = make_two_circle_pe_escape(e, a, b)
    z0 = InitialData([bump_comb(net.L[i], e, lo * e, hi * e) for i in range(2)])
    exp = Expectation(Kind.PERIODIC, {"period": e})
    return ScenarioSpec("two_circle_pe_periodic", net, [sig], z0, e, e / 4.0, exp, {"p": p, "q": q, "ell": e, "a": a, "b": b})


def two_circle_irrational_mean(tags=("ONE", "SQRT2"), t_factor: float = 200.0, tol: float = 1e-2) -> ScenarioSpec:
    """Undamped two-circle network with irrational length ratio; solutions tend to their mean."""
    t0, t1 = Tag(tags[0]), Tag(tags[1])
    if t0 == t1:
        raise ValueError("tags must differ")
    net = Network.build([length(1, t0), length(1, t1)], [[0.5, 0.5], [0.5, 0.5]])
    L0, L1 = net.L
    z0 = InitialData([(poly(0.0, L0, 0.0, L0, -1.0),), _zero_padded(L1, 0.2 * L1, 0.7 * L1, bump(0.2 * L1, 0.7 * L1, 2.0))])
    exp = Expectation(Kind.CONVERGES_TO_MEAN, {"tolerance": tol, "t_check": t_factor * net.L_max})
    return ScenarioSpec("two_circle_irrational_mean", net, [], z0, None, None, exp, {"tags": [t0.value, t1.value]})


def random_matrix(N: int, rng: np.random.Generator, col_sum=(0.85, 1.0), floor: float = 0.05) -> np.ndarray:
    """Random matrix with entries of magnitude >= floor, random signs, column l1 sums in ``col_sum``."""
    if floor * N >= col_sum[0]:
        raise ValueError("floor too large for the column budget")
    M = np.empty((N, N))
    for j in range(N):
        c = rng.uniform(*col_sum)
        mags = floor + (c - floor * N) * rng.dirichlet(np.ones(N))
        M[:, j] = mags * rng.choice([-1.0, 1.0], size=N)
    return M


def main_theorem_demo(N: int = 2, n_d: int = 1, tags=("ONE", "SQRT2"), seed: int = 0, T: float = 2.0, mu: float = 0.5, mode: str = "pe", horizon: float = 20.0) -> ScenarioSpec:
    """Random contractive network with random PE damping; expected to decay exponentially.

    ``mode="contractive"`` instead uses ``|M| = 0.9`` exactly and no damping.
    """
    tags = list(tags) + ["ONE"] * (N - len(tags))
    rng = np.random.default_rng(seed)
    lengths = [length(1, tg) for tg in tags[:N]]
    Ls = [ln.value for ln in lengths]
    if mode == "pe":
        M = random_matrix(N, rng)
        damping = []
        for i in range(n_d):
            a = rng.uniform(0.0, 0.5) * Ls[i]
            damping.append((a, a + rng.uniform(0.2, 0.5) * Ls[i]))
        sigs = [make_random_pe(T, mu, seed * 1000 + i) for i in range(n_d)]
        exp = Expectation(Kind.EXP_DECAY, {"min_gamma": 0.0, "max_residual": 0.1, "horizon": horizon})
    elif mode == "contractive":
        M = random_matrix(N, rng, col_sum=(0.9, 0.9))
        M *= 0.9 / np.abs(M).sum(axis=0).max()
        damping, sigs = [], []
        exp = Expectation(Kind.EXP_DECAY, {"min_gamma": -math.log(0.9) / max(Ls), "rtol": 0.1, "horizon": horizon})
    else:
        raise ValueError(f"unknown mode {mode!r}")
    net = Network.build(lengths, M, damping)
    circles = []
    for i in range(N):
        mid = float(rng.uniform(0.3, 0.7)) * Ls[i]
        c1 = rng.normal(size=3)
        c2 = rng.normal(size=3)
        circles.append((poly(0.0, mid, *c1), poly(mid, Ls[i], *c2)))
    return ScenarioSpec(f"main_theorem_demo[{mode}]", net, sigs, InitialData(circles), T, mu, exp, {"seed": seed, "N": N, "n_d": n_d})


def two_circle_pe_decay(seed: int = 0, T: float = 2.0, mu: float = 0.5, tags=("ONE", "SQRT2"), horizon: float = 30.0) -> ScenarioSpec:
    """Equal-split junction on two circles with incommensurable lengths, both damped by random PE signals."""
    net = Network.build([length(1, tags[0]), length(1, tags[1])], [[0.5, 0.5], [0.5, 0.5]], [(0.2, 0.6), (0.3, 0.9)])
    L0, L1 = net.L
    z0 = InitialData([(poly(0.0, L0, 1.0, 0.5, -0.3),), (poly(0.0, 0.7, -0.5, 1.0), poly(0.7, L1, 0.2, 0.0, 0.4))])
    sigs = [make_random_pe(T, mu, 2 * seed), make_random_pe(T, mu, 2 * seed + 1)]
    exp = Expectation(Kind.EXP_DECAY, {"min_gamma": 0.0, "max_residual": 0.1, "horizon": horizon, "sample_step": 0.5})
    return ScenarioSpec("two_circle_pe_decay", net, sigs, z0, T, mu, exp, {"seed": seed})


SCENARIOS = {
    "single_circle_escape": single_circle_escape,
    "two_circle_rational_periodic": two_circle_rational_periodic,
    "two_circle_pe_periodic": two_circle_pe_periodic,
    "two_circle_irrational_mean": two_circle_irrational_mean,
    "main_theorem_demo": main_theorem_demo,
    "two_circle_pe_decay": two_circle_pe_decay,
}


def make_scenario(name: str, **params) -> ScenarioSpec:
    try:
        ctor = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    accepted = inspect.signature(ctor).parameters
    return ctor(**{k: v for k, v in params.items() if k in accepted and v is not None})


# ------------------------------------------------------------------ checks


@dataclass
class CheckResult:
    ok: bool
    measured: dict

    def to_json(self) -> dict:
        return {"ok": self.ok, **self.measured}


def decay_series(spec: ScenarioSpec, p: float = 2.0, resolution: int = 64, step: float | None = None, horizon: float | None = None):
    """Total-norm samples used by the decay checks."""
    L_max = spec.network.L_max
    params = spec.expectation.params
    horizon = horizon or params.get("horizon") or 40.0 * L_max
    step = step or params.get("sample_step") or L_max / 4.0
    ts = np.arange(0.0, horizon + 1e-9, step)
    tf = spec.field(float(ts[-1]))
    return norm_samples(tf, ts, p, resolution)


def check_scenario(spec: ScenarioSpec, resolution: int = 64) -> CheckResult:
    exp = spec.expectation
    net = spec.network
    if exp.kind is Kind.PERIODIC:
        P = float(exp.params["period"])
        t0s = [0.0, P / 3.0, 5.0 * P]
        tf = spec.field(6.0 * P)
        gaps = [distance(tf, t0 + P, tf, t0, resolution) for t0 in t0s]
        size = tf.total_norm(0.0, 2.0, resolution)
        mean = float(tf.integrals(0.0, resolution).sum()) / float(net.L.sum())
        spread = distance_to_constant(tf, 0.0, mean, resolution)
        pe_ok = True
        if spec.T is not None and spec.signals:
            pe_ok = all(verify_pe(s, spec.T, spec.mu).is_pe for s in spec.signals)
        ok = max(gaps) <= 1e-9 and spread > 0 and pe_ok
        return CheckResult(ok, {"period": P, "gaps": gaps, "norm0": size, "spread0": spread, "signals_pe": pe_ok})
    if exp.kind is Kind.NORM_CONSTANT:
        ts = np.linspace(0.0, 10.0 * net.L_max, 11) + 0.123 * net.L_min
        tf = spec.field(float(ts[-1]))
        ref = tf.total_norm(0.0, 2.0, resolution)
        vals = [tf.total_norm(float(t), 2.0, resolution) for t in ts]
        dev = max(abs(v - ref) for v in vals)
        return CheckResult(dev <= 1e-10 * max(1.0, ref), {"norm0": ref, "max_deviation": dev})
    if exp.kind is Kind.EXP_DECAY:
        samples = decay_series(spec, 2.0, resolution)
        fit = fit_decay_after_transient(samples, net.L_max)
        min_gamma = float(exp.params.get("min_gamma", 0.0))
        rtol = float(exp.params.get("rtol", 0.0))
        ok = fit.gamma > 0 and fit.gamma >= min_gamma * (1.0 - rtol)
        if "max_residual" in exp.params:
            ok = ok and fit.residual < float(exp.params["max_residual"])
        return CheckResult(ok, {"gamma": fit.gamma, "C": fit.C, "residual": fit.residual, "min_gamma": min_gamma})
    if exp.kind is Kind.CONVERGES_TO_MEAN:
        t_check = float(exp.params["t_check"])
        tf = spec.field(t_check)
        U0 = float(tf.integrals(0.0, resolution).sum()) / float(net.L.sum())
        d = distance_to_constant(tf, t_check, U0, resolution)
        return CheckResult(d <= float(exp.params["tolerance"]), {"mean": U0, "distance": d, "t_check": t_check})
    raise ValueError(f"unhandled expectation {exp.kind}")
