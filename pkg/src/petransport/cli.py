"""Command-line entry point.

Exit codes: 0 success, 1 a verification failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .analysis import bound_audit, fit_decay, mixing_nu
from .coeff import build_beta, build_theta
from .net import Network, check_hypotheses, l1_norm
from .oracle import recursive_field, recursive_traces, upwind_solve, upwind_traces
from .scenarios import SCENARIOS, ScenarioSpec, check_scenario, make_scenario
from .signals import StepSignal, verify_pe
from .solver import TraceField

HEADER = f"# petransport {__version__}"


class InputError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def load_scenario(path: str) -> ScenarioSpec:
    doc = _load_json(path)
    try:
        if "network" in doc:
            return ScenarioSpec.from_json(doc)
        raise InputError(f"{path} is not a scenario document (no 'network' field)")
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid scenario document {path}: {exc}") from exc


def load_network(path: str) -> tuple[Network, list[StepSignal]]:
    """Network plus signals from either a scenario document or a bare network document."""
    doc = _load_json(path)
    try:
        if "network" in doc:
            spec = ScenarioSpec.from_json(doc)
            return spec.network, spec.signals
        return Network.from_json(doc), []
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid network document {path}: {exc}") from exc


def _open_out(path: str | None):
    return open(path, "w", newline="") if path else io.TextIOWrapper(sys.stdout.buffer, newline="", write_through=True)


def write_csv(path: str | None, header: list[str], rows) -> None:
    fh = _open_out(path)
    try:
        fh.write(HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if path:
            fh.close()
        else:
            fh.detach()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def emit_json(obj, path: str | None = None) -> None:
    text = json.dumps({"schema_version": 1, **obj}, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _time_grid(t_max: float, dt: float) -> np.ndarray:
    if t_max < 0 or dt <= 0:
        raise InputError("need t-max >= 0 and dt > 0")
    return np.arange(0.0, t_max + 1e-9 * max(1.0, t_max), dt)


def _threads(args) -> int:
    return max(1, args.threads or os.cpu_count() or 1)


# ------------------------------------------------------------ subcommands


def cmd_simulate(args) -> int:
    spec = load_scenario(args.config)
    ts = _time_grid(args.t_max, args.dt)
    tf = TraceField(spec.network, spec.signals, spec.initial, float(ts[-1]))
    traces = tf.traces(ts)

    def row(k):
        return tf.norms(float(ts[k]), args.p, args.resolution)

    with ThreadPoolExecutor(_threads(args)) as ex:
        norms = list(ex.map(row, range(len(ts))))
    rows = [(float(t), i, args.p, float(norms[k][i]), float(traces[i, k])) for k, t in enumerate(ts) for i in range(spec.network.N)]
    write_csv(args.out, ["t", "circle", "p", "norm", "trace"], rows)
    return 0


def cmd_trace(args) -> int:
    spec = load_scenario(args.config)
    ts = _time_grid(args.t_max, args.dt)
    tf = TraceField(spec.network, spec.signals, spec.initial, float(ts[-1]))
    tr = tf.traces(ts)
    rows = [(float(t), i, float(tr[i, k])) for k, t in enumerate(ts) for i in range(spec.network.N)]
    write_csv(args.out, ["t", "circle", "value"], rows)
    return 0


def cmd_oracle(args) -> int:
    spec = load_scenario(args.config)
    net, sig, z0 = spec.network, spec.signals, spec.initial
    ts = _time_grid(args.t_max, args.dt)
    # quadrature nodes shared with the solver so both outputs line up
    quad_source = TraceField(net, sig, z0, float(ts[-1]))
    rows = []
    if args.method == "recursive":
        for t in ts:
            t = float(t)
            tr = recursive_traces(net, sig, z0, t)
            for i in range(net.N):
                x, w = quad_source.quadrature(i, t, args.resolution)
                v = np.array([recursive_field(net, sig, z0, i, t, float(xx)) for xx in x])
                rows.append((t, i, args.p, _norm(v, w, args.p), float(tr[i])))
    else:
        tr = upwind_traces(net, sig, z0, ts, args.cells)
        for k, t in enumerate(ts):
            state = upwind_solve(net, sig, z0, float(t), args.cells) if t > 0 else None
            for i in range(net.N):
                if state is None:
                    x, w = quad_source.quadrature(i, 0.0, args.resolution)
                    v = z0.evaluate(i, x)
                else:
                    v = state.cells[i]
                    w = np.full(len(v), state.h[i])
                rows.append((float(t), i, args.p, _norm(v, w, args.p), float(tr[i, k])))
    write_csv(args.out, ["t", "circle", "p", "norm", "trace"], rows)
    return 0


def _norm(v, w, p) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(v)))
    return float(np.sum(w * np.abs(v) ** p)) ** (1.0 / p)


def cmd_coeffs(args) -> int:
    net, sig = load_network(args.config)
    table = build_theta(net, sig, args.t)
    top = max(sum(n) for n in table.nodes)
    beta = build_beta(net, top)
    N = net.N
    rows = []
    for n in table.nodes:
        th, be = table[n], beta[n]
        for i in range(N):
            for j in range(N):
                rows.append((*n, i, j, float(th[i, j]), float(be[i, j]), sum(n)))
    write_csv(args.out, [f"n_{k + 1}" for k in range(N)] + ["i", "j", "theta", "beta", "l1"], rows)
    return 0


def cmd_bounds(args) -> int:
    net, sig = load_network(args.config)
    table = build_theta(net, sig, args.t)
    try:
        nu = mixing_nu(net.M)
    except ValueError:
        nu = None
    report = bound_audit(table, net, nu)
    emit_json({"l1_norm": l1_norm(net.M), "nu": nu, "t": args.t, **report.to_json()}, args.out)
    return 0 if report.ok else 1


def _read_samples(path: str) -> list[tuple[float, float]]:
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(lines)
    cols = reader.fieldnames or []
    totals: dict[float, float] = {}
    try:
        if "norm" in cols:
            for r in reader:
                t = float(r["t"])
                totals[t] = totals.get(t, 0.0) + float(r["norm"])
        elif "value" in cols:
            for r in reader:
                totals[float(r["t"])] = float(r["value"])
        else:
            raise InputError(f"{path}: expected a 'norm' or 'value' column")
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    return sorted(totals.items())


def cmd_fit_decay(args) -> int:
    samples = [s for s in _read_samples(args.input) if s[0] >= args.t_min]
    try:
        fit = fit_decay(samples)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    emit_json({"violations": [] if fit.gamma > 0 else ["no decay"], **fit.to_json()}, args.out)
    return 0 if fit.gamma > 0 else 1


def cmd_verify_pe(args) -> int:
    if args.signal:
        sigs = [StepSignal.from_json(_load_json(args.signal))]
    else:
        sigs = load_scenario(args.config).signals
    try:
        res = [verify_pe(s, args.T, args.mu) for s in sigs]
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    emit_json({"T": args.T, "mu": args.mu, "signals": [r.to_json() for r in res]}, args.out)
    return 0 if all(r.is_pe for r in res) else 1


def cmd_hypotheses(args) -> int:
    net, _ = load_network(args.config)
    try:
        rep = check_hypotheses(net, args.T, args.mu)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    emit_json(rep.to_json(), args.out)
    return 0 if rep.all_ok else 1


def cmd_scenario(args) -> int:
    params = {
        "p": args.p, "q": args.q, "ell": args.ell, "a": args.a, "b": args.b, "L": args.L,
        "seed": args.seed, "N": args.N, "n_d": args.n_d, "mode": args.mode,
        "tags": tuple(args.tags.split(",")) if args.tags else None,
    }
    try:
        spec = make_scenario(args.name, **params)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.emit:
        with open(args.emit, "w") as fh:
            fh.write(spec.dumps() + "\n")
    if args.check:
        res = check_scenario(spec, args.resolution)
        emit_json({"scenario": spec.name, "expectation": spec.expectation.to_json(), "metadata": spec.metadata, **res.to_json()})
        return 0 if res.ok else 1
    if not args.emit:
        print(spec.dumps())
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="petransport", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--threads", type=int, default=None, help="cap on worker threads (default: all cores)")
    sub = ap.add_subparsers(dest="command", required=True)

    def grid(p):
        p.add_argument("--config", required=True)
        p.add_argument("--t-max", type=float, default=10.0)
        p.add_argument("--dt", type=float, default=0.5)
        p.add_argument("--out")

    p = sub.add_parser("simulate", help="norms and traces on a time grid")
    grid(p)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="boundary traces on a time grid")
    grid(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("oracle", help="reference solution in the simulate CSV format")
    grid(p)
    p.add_argument("--method", choices=["recursive", "upwind"], default="recursive")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--cells", type=int, default=400)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("coeffs", help="dump coefficient tables")
    p.add_argument("--config", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("bounds", help="audit coefficient bounds")
    p.add_argument("--config", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("fit-decay", help="log-linear decay fit of a CSV series")
    p.add_argument("--input", required=True)
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_decay)

    p = sub.add_parser("verify-pe", help="check persistent excitation")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--signal")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_pe)

    p = sub.add_parser("hypotheses", help="check the stability hypotheses of a network")
    p.add_argument("--config", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_hypotheses)

    p = sub.add_parser("scenario", help="build, emit or check a named scenario")
    p.add_argument("name", choices=sorted(SCENARIOS))
    for flag, typ in [("--p", int), ("--q", int), ("--ell", float), ("--a", float), ("--b", float), ("--L", float), ("--seed", int), ("--N", int), ("--n-d", int)]:
        p.add_argument(flag, type=typ)
    p.add_argument("--mode")
    p.add_argument("--tags", help="comma-separated length tags, e.g. ONE,SQRT2")
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--check", action="store_true")
    p.add_argument("--emit", metavar="PATH")
    p.set_defaults(func=cmd_scenario)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
