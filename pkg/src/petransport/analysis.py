"""Quantitative checks: decay fits, coefficient bounds, PE window quantities, two-circle functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .coeff import ThetaTable
from .net import Network, denominator_threshold, l1_norm
from .signals import StepSignal, verify_pe
from .solver import TraceField

# ---------------------------------------------------------------- decay fit


@dataclass
class DecayFit:
    C: float
    gamma: float
    residual: float
    samples: list[tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"C": self.C, "gamma": self.gamma, "residual": self.residual, "n_samples": len(self.samples)}


def fit_decay(samples) -> DecayFit:
    """Least-squares line through ``(t, log v)``."""
    samples = [(float(t), float(v)) for t, v in samples]
    if len(samples) < 8:
        raise ValueError("need at least 8 samples")
    t = np.array([s[0] for s in samples])
    v = np.array([s[1] for s in samples])
    if np.any(v <= 0):
        raise ValueError("decay fit needs positive values")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    return DecayFit(math.exp(intercept), -float(slope), float(np.sqrt(np.mean(resid**2))), samples)


def norm_samples(tf: TraceField, ts, p: float = 2.0, resolution: int = 64) -> list[tuple[float, float]]:
    return [(float(t), tf.total_norm(float(t), p, resolution)) for t in ts]


def fit_decay_after_transient(samples, L_max: float) -> DecayFit:
    """Fit only the samples with ``t >= 2 L_max``."""
    kept = [s for s in samples if s[0] >= 2.0 * L_max - 1e-12]
    return fit_decay(kept)


# ------------------------------------------------------------ mixing and nu


def mixing_nu(M) -> float:
    """Contraction constant for the binomial coefficient bound."""
    M = np.abs(np.asarray(M, dtype=float))
    if l1_norm(M) > 1.0 + 1e-12 or np.any(M == 0.0):
        raise ValueError("matrix must have l1 norm <= 1 and no zero entry")
    N = M.shape[0]
    cands = []
    for k in range(N):
        others = np.delete(M, k, axis=0)
        cands.append(float(others.sum(axis=0).max()))
        cands.append(float(M[k].max()))
    nu = max(cands)
    if not nu < 1.0:
        raise ValueError(f"mixing constant {nu} is not below 1")
    return nu


# ------------------------------------------------ PE window quantities


@dataclass
class PEQuantities:
    rho_j: float
    ell_j: float


def pe_quantities(T: float, mu: float, a_j: float, b_j: float) -> PEQuantities:
    if mu <= 0 or T < mu:
        raise ValueError(f"need T >= mu > 0, got T={T}, mu={mu}")
    if not b_j > a_j:
        raise ValueError("need b_j > a_j")
    rho = mu * (b_j - a_j) / (2.0 * T)
    return PEQuantities(rho, min(rho, T))


@dataclass
class IntervalResult:
    ok: bool
    interval: tuple[float, float] | None
    witness_tau: float
    witness_value: float
    rho: float
    ell: float


def window_average_profile(alpha: StepSignal, a: float, b: float, lo: float, hi: float):
    """Knots and values of ``A(tau) = int_{tau+a}^{tau+b} alpha`` on ``[lo, hi]`` (exactly piecewise linear)."""
    kinks = np.concatenate([alpha.kinks(lo + a, hi + a) - a, alpha.kinks(lo + b, hi + b) - b])
    taus = np.unique(np.concatenate([[lo, hi], kinks[(kinks > lo) & (kinks < hi)]]))
    return taus, alpha.integral(taus + a, taus + b)


def check_interval_lemma(alpha: StepSignal, T: float, mu: float, a_j: float, b_j: float, t: float) -> IntervalResult:
    """Longest subinterval of ``[t, t+T]`` on which ``A >= rho_j``, compared against ``ell_j``."""
    if not verify_pe(alpha, T, mu).is_pe:
        raise ValueError("signal is not persistently exciting for (T, mu)")
    q = pe_quantities(T, mu, a_j, b_j)
    taus, A = window_average_profile(alpha, a_j, b_j, t, t + T)
    best, cur_start = None, None
    pieces = []
    for k in range(len(taus) - 1):
        t0, t1, A0, A1 = taus[k], taus[k + 1], A[k], A[k + 1]
        # portion of [t0, t1] where the linear interpolant is >= rho
        if A0 >= q.rho_j and A1 >= q.rho_j:
            seg = (t0, t1)
        elif A0 < q.rho_j and A1 < q.rho_j:
            seg = None
        else:
            c = t0 + (q.rho_j - A0) * (t1 - t0) / (A1 - A0)
            seg = (c, t1) if A1 >= q.rho_j else (t0, c)
        pieces.append(seg)
    for seg in pieces:
        if seg is None:
            cur_start = None
            continue
        if cur_start is None or seg[0] > cur_end + 1e-15:
            cur_start = seg[0]
        cur_end = seg[1]
        if best is None or cur_end - cur_start > best[1] - best[0]:
            best = (cur_start, cur_end)
    k = int(np.argmin(A))
    ok = best is not None and best[1] - best[0] >= q.ell_j - 1e-12
    return IntervalResult(ok, best, float(taus[k]), float(A[k]), q.rho_j, q.ell_j)


def denominator_condition(p: int, q: int, L_j: float, T: float, mu: float, a_j: float, b_j: float) -> bool:
    if math.gcd(int(p), int(q)) != 1:
        raise ValueError(f"{p} and {q} are not coprime")
    return q >= denominator_threshold(L_j, T, mu, b_j - a_j)


# ------------------------------------------------------- entropy estimate


@dataclass
class RhoEstimate:
    rho: float
    gamma: float
    C: float


def _entropy(r: float) -> float:
    return -r * math.log(r) - (1.0 - r) * math.log1p(-r)


def log_binom(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def find_rho(nu: float, n_max: int = 10_000) -> RhoEstimate:
    """Fraction ``rho`` and constants with ``binom(n, k) nu^n <= C exp(-gamma n)`` for ``k <= rho n``.

    ``rho`` solves ``H(rho) = -log(nu)/2`` on (0, 1/2) by bisection. When
    ``nu <= 1/4`` every ``rho < 1/2`` qualifies and 0.49 is returned.
    """
    if not 0.0 < nu < 1.0:
        raise ValueError("nu must lie in (0, 1)")
    target = -0.5 * math.log(nu)
    if target >= math.log(2.0):
        rho = 0.49
    else:
        lo, hi = 0.0, 0.5
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _entropy(mid) < target:
                lo = mid
            else:
                hi = mid
        rho = lo
    gamma = -0.25 * math.log(nu)
    n = np.arange(n_max + 1)
    k = np.floor(rho * n)
    worst = log_binom(n, k) + n * math.log(nu) + gamma * n
    C = math.exp(float(worst.max())) * (1.0 + 1e-9)
    return RhoEstimate(rho, gamma, C)


def entropy_scan(est: RhoEstimate, nu: float, n_max: int = 10_000) -> float:
    """Largest ``binom(n, k) nu^n e^{gamma n} / C`` over ``n <= n_max``, ``k <= rho n`` (must be <= 1)."""
    worst = -np.inf
    log_nu = math.log(nu)
    for n0 in range(0, n_max + 1, 500):
        n = np.arange(n0, min(n_max, n0 + 499) + 1)
        kmax = np.floor(est.rho * n).astype(np.int64)
        width = int(kmax.max()) + 1
        k = np.arange(width)[None, :]
        mask = k <= kmax[:, None]
        vals = log_binom(n[:, None], np.minimum(k, kmax[:, None])) + (log_nu + est.gamma) * n[:, None]
        worst = max(worst, float(np.where(mask, vals, -np.inf).max()))
    return math.exp(worst - math.log(est.C))


# ---------------------------------------------------------- bound audit


@dataclass
class BoundReport:
    violations: list[dict]
    n_entries: int
    envelope: list[tuple[int, float]]
    envelope_rate: float | None
    max_ratio: dict

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "violations": self.violations,
            "n_entries": self.n_entries,
            "envelope": [list(e) for e in self.envelope],
            "envelope_rate": self.envelope_rate,
            "max_ratio": self.max_ratio,
        }


def envelope(table: ThetaTable, max_l1: int | None = None) -> list[tuple[int, float]]:
    """Max ``|Theta|`` on each complete anti-diagonal."""
    m_full = table.complete_diagonals()
    if max_l1 is not None:
        m_full = min(m_full, max_l1)
    l1 = np.array([sum(n) for n in table.nodes])
    mags = np.abs(table.values).reshape(len(table.nodes), -1).max(axis=1)
    return [(m, float(mags[l1 == m].max())) for m in range(m_full + 1)]


def envelope_rate(env: list[tuple[int, float]], skip: int = 0) -> float | None:
    pts = [(m, v) for m, v in env if m >= skip and v > 0]
    if len(pts) < 3:
        return None
    m = np.array([p[0] for p in pts], dtype=float)
    y = np.log([p[1] for p in pts])
    return -float(np.polyfit(m, y, 1)[0])


def bound_audit(table: ThetaTable, net: Network, nu: float | None = None, max_l1: int | None = None) -> BoundReport:
    vals = np.abs(table.values)
    nodes = np.array(table.nodes)
    l1 = nodes.sum(axis=1)
    norm = l1_norm(net.M)
    rtol = 1e-12
    violations = []
    ratios = {}

    def check(name, bound):
        # bound has one entry per node
        mags = vals.reshape(len(nodes), -1).max(axis=1)
        excess = mags - bound * (1 + rtol)
        ratio = mags / np.maximum(bound, 1e-300)
        ratios[name] = float(ratio.max())
        for k in np.flatnonzero(excess > 0)[:20]:
            violations.append({"bound": name, "n": [int(v) for v in nodes[k]], "value": float(vals[k].max()), "limit": float(bound[k])})

    check("rough", norm ** (l1 + 1.0))
    if norm <= 1.0 + 1e-12:
        check("unit", np.ones(len(nodes)))
    if nu is not None:
        for k in range(net.N):
            logb = log_binom(l1, nodes[:, k]) + l1 * math.log(nu)
            check(f"binomial_{k}", np.exp(logb))
    env = envelope(table, max_l1)
    return BoundReport(violations, int(vals.size), env, envelope_rate(env), ratios)


# -------------------------------------------------- two-circle functionals


@dataclass
class TwoCircleState:
    V: float
    Vdot: float
    U: float


def _require_two_circle(net: Network):
    if net.N != 2 or net.n_d != 0 or not np.allclose(net.M, 0.5, rtol=0, atol=1e-15):
        raise ValueError("functionals are defined for two undamped circles with all transmission weights 1/2")


def two_circle_functionals(tf: TraceField, t: float, resolution: int = 64) -> TwoCircleState:
    net = tf.net
    _require_two_circle(net)
    V = float((tf.norms(t, 2.0, resolution) ** 2).sum())
    ends = [tf.field(i, t, net.L[i]) for i in range(2)]
    Vdot = -0.5 * (ends[0] - ends[1]) ** 2
    U = float(tf.integrals(t, resolution).sum()) / float(net.L.sum())
    return TwoCircleState(V, Vdot, U)


def distance_to_constant(tf: TraceField, t: float, c: float, resolution: int = 64) -> float:
    """Total L^2 distance from the state at ``t`` to the constant ``c`` on every circle."""
    total = 0.0
    for i in range(tf.net.N):
        x, w = tf.quadrature(i, t, resolution)
        total += float(np.sum(w * (tf.field(i, t, x) - c) ** 2))
    return math.sqrt(total)
