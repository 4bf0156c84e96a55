"""Command-line front end.

Subcommands ``lattice``, ``simulate``, ``stability`` and ``batch`` read a
JSON config, run the corresponding library routine and write CSV/JSON
files to ``--out``.  Exit codes: 0 success or stable, 1 missing or
unreadable file, 2 malformed input, 3 unstable, 4 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .diffeq import InitialCondition, simulate
from .ratlattice import (DelayVector, as_fraction, as_rational_vector, class_members,
                         integer_kernel, membership_V)
from .signals import SwitchingSignal, _decode_scalar, _decode_tuple
from .spectral import (DEFAULT_CAP, CapExceeded, LevelLattice, lyapunov_bounds,
                       stability_verdict_delays)
from .transport import TransportSystem, grid_counts, solve_transport
from .wavenet import (DampingSet, DampingSignal, Network, WaveState, build_M, build_R,
                      check_M_identity, check_RM, decay_rate_fit, energy_identity_residual,
                      periodic_witness, simulate_wave, stability_verdict_wave)

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_UNSTABLE, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

TOLERANCES = {"algebraic": 1e-12, "simulation": 1e-8, "spectral": 0.02}


class InputError(ValueError):
    """Malformed configuration."""


# -- config handling --------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise FileNotFoundError(str(exc)) from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    return cfg


def _positive_fraction(text: str) -> Fraction:
    try:
        x = as_fraction(text)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"expected a rational 'p/q', got {text!r}") from exc
    if x <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return x


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _tolerance(text: str) -> tuple[str, float]:
    name, _, val = text.partition("=")
    if name not in TOLERANCES or not val:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE with NAME in {sorted(TOLERANCES)}")
    v = float(val)
    if v <= 0:
        raise argparse.ArgumentTypeError("tolerances must be positive")
    return name, v


def resolve(args: argparse.Namespace, cfg: dict) -> dict:
    """Merge command-line overrides into the config; flags win."""
    run = dict(cfg)
    if args.seed is not None:
        run["seed"] = args.seed
    if args.horizon is not None:
        run["horizon"] = str(args.horizon)
    if args.grid_step is not None:
        run["step"] = str(args.grid_step)
    if args.cap is not None:
        run["cap"] = args.cap
    run.setdefault("seed", 0)
    tol = dict(TOLERANCES)
    tol.update(run.get("tolerances", {}))
    tol.update(dict(args.tol or []))
    run["tolerances"] = tol
    run["format"] = args.format
    return run


def _get(cfg: dict, key: str, what: str = "config"):
    if key not in cfg:
        raise InputError(f"{what} is missing '{key}'")
    return cfg[key]


def _frac(cfg: dict, key: str, default=None) -> Fraction:
    if key not in cfg:
        if default is None:
            raise InputError(f"config is missing '{key}'")
        return as_fraction(default)
    v = cfg[key]
    if isinstance(v, float):
        raise InputError(f"'{key}' must be an integer or a 'p/q' string")
    return as_fraction(v)


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (set, tuple)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _rows_csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(x)) if not isinstance(x, (int, str)) else str(x) for x in r))
    return "\n".join(lines) + "\n"


def _table(out: Path | None, stem: str, header: list[str], rows: list, fmt: str) -> None:
    if fmt == "json":
        data = [dict(zip(header, r)) for r in rows]
        _write(out, stem + ".json", _dump(data))
    else:
        _write(out, stem + ".csv", _rows_csv(header, rows))


# -- lattice ------------------------------------------------------------------

def cmd_lattice(run: dict, out: Path | None) -> tuple[int, dict]:
    delays = DelayVector.from_json(run.get("delays", run))
    kernel = integer_kernel(delays.B)
    report: dict = {"command": "lattice", "config": run, "h": delays.h, "N": delays.N,
                    "kernel": [list(z) for z in kernel], "trivial": not kernel,
                    "index_classes": [list(c) for c in delays.index_classes()]}
    if not delays.is_symbolic:
        bound = _frac(run, "horizon", 4 * max(delays.values))
        lat = LevelLattice(delays, bound)
        report["classes"] = [{"key": list(k), "level": str(lat.value[k]),
                              "members": [list(m) for m in class_members(k, delays)]}
                             for k in lat.keys]
    _write(out, "lattice.json", _dump(report))
    return EXIT_OK, report


def _print_lattice(report: dict) -> None:
    if report["trivial"]:
        print("trivial lattice")
    else:
        print("kernel basis:")
        for z in report["kernel"]:
            print("  (" + ", ".join(str(x) for x in z) + ")")
    for c in report.get("classes", []):
        mem = " ".join("(" + ",".join(map(str, m)) + ")" for m in c["members"])
        print(f"key {tuple(c['key'])} level {c['level']}: {mem}")


# -- simulate -----------------------------------------------------------------

def _vector(v) -> np.ndarray:
    return np.array([_decode_scalar(z, False) for z in v], dtype=complex)


def _initial_condition(desc: dict, lmax: Fraction) -> InitialCondition:
    if "constant" in desc:
        return InitialCondition.constant(_vector(desc["constant"]), lmax)
    if "indicator" in desc:
        ind = desc["indicator"]
        return InitialCondition.indicator(lmax, _frac(ind, "start"), _frac(ind, "stop"),
                                          _vector(_get(ind, "vector")))
    if "segments" in desc:
        seg = desc["segments"]
        coeffs = [[_vector(c) for c in s] for s in _get(seg, "coefficients")]
        return InitialCondition(lmax, seg.get("breakpoints", []), coeffs)
    raise InputError("initial condition needs 'constant', 'indicator' or 'segments'")


def _simulate_difference(run: dict, out: Path | None) -> tuple[int, dict]:
    delays = DelayVector.from_json(_get(run, "delays"))
    if delays.is_symbolic:
        raise InputError("simulation needs numeric generator values")
    L = delays.values
    A = SwitchingSignal.from_json(_get(run, "signal"))
    if A.N != delays.N:
        raise InputError(f"signal has {A.N} matrices but there are {delays.N} delays")
    u0 = _initial_condition(_get(run, "initial"), max(L))
    if u0.d != A.d:
        raise InputError(f"initial condition has dimension {u0.d}, signal {A.d}")
    horizon = _frac(run, "horizon")
    step = _frac(run, "step", min(L) / 16)
    method = run.get("method", "direct")
    traj = simulate(u0, A, delays, horizon, step, method=method, Lambda=delays)
    vals = np.asarray(traj.values, dtype=complex)
    header = ["time"] + [f"{p}_u{i + 1}" for i in range(vals.shape[1]) for p in ("re", "im")]
    rows = [[float(t)] + [x for z in row for x in (z.real, z.imag)]
            for t, row in zip(traj.times, vals)]
    _table(out, "trajectory", header, rows, run["format"])
    report = {"command": "simulate", "kind": "difference", "config": run,
              "trajectory": traj.metadata(),
              "final_norm": float(traj.norms()[-1]), "samples": len(rows)}
    _write(out, "trajectory.meta.json", _dump(report))
    return EXIT_OK, report


def _signal_of_matrices(desc) -> SwitchingSignal:
    if isinstance(desc, dict):
        return SwitchingSignal(desc.get("breakpoints", []),
                               [_decode_tuple([m], False) for m in _get(desc, "values", "M")])
    return SwitchingSignal.constant(_decode_tuple([desc], False))


def _simulate_transport(run: dict, out: Path | None) -> tuple[int, dict]:
    lengths = [as_fraction(x) for x in _get(run, "lengths")]
    Msig = _signal_of_matrices(_get(run, "M"))
    N = len(lengths)
    if Msig.d != N:
        raise InputError(f"M must be {N}x{N}")
    system = TransportSystem(lengths, lambda t: Msig(t)[0])
    horizon = _frac(run, "horizon")
    step = _frac(run, "step", Fraction(1, 32))
    counts = grid_counts(lengths, step)
    init = _get(run, "initial")
    if init == "zero":
        u0 = [np.zeros(K + 1) for K in counts]
    else:
        if len(init) != N:
            raise InputError(f"need {N} initial profiles")
        u0 = []
        for i, (p, K) in enumerate(zip(init, counts)):
            arr = _vector(p)
            if arr.shape != (K + 1,):
                raise InputError(f"profile {i + 1} needs {K + 1} samples at step {step}")
            u0.append(arr)
    sol = solve_transport(u0, system, horizon, step)
    times = [as_fraction(t) for t in run.get("field_times", ["0", str(horizon)])]
    rows = []
    for t in times:
        for i, vals in enumerate(sol.field(t)):
            for k, z in enumerate(vals):
                rows.append([i + 1, float(t), float(k * step), z.real, z.imag])
    _table(out, "field", ["edge", "t", "x", "re", "im"], rows, run["format"])
    report = {"command": "simulate", "kind": "transport", "config": run,
              "steps": sol.steps, "counts": counts}
    _write(out, "field.meta.json", _dump(report))
    return EXIT_OK, report


def _damping_signal(desc, net: Network, horizon, step, seed: int) -> DampingSignal:
    if isinstance(desc, list):
        return DampingSignal.constant(desc)
    if "random" in desc:
        r = desc["random"]
        return DampingSignal.random(len(net.damped), horizon, step, float(r.get("low", 0.5)),
                                    float(r.get("high", 2.0)), int(r.get("switches", 10)), seed)
    return DampingSignal.from_json(desc)


def _bump(K: int) -> np.ndarray:
    x = np.arange(K + 1) / K
    inside = (x > 0.2) & (x < 0.8)
    return np.where(inside, np.sin(np.pi * (x - 0.2) / 0.6) ** 6, 0.0)


def _wave_initial(desc, net: Network, step: Fraction) -> tuple[WaveState, Network]:
    kind = desc if isinstance(desc, str) else desc.get("type")
    counts = grid_counts(net.lengths, step)
    if kind == "witness":
        w = periodic_witness(net, step=step)
        return w.state, w.network
    if kind == "bump":
        zeros = [np.zeros(K + 1) for K in counts]
        st = WaveState.from_potentials(net, step, {}, [_bump(K) for K in counts], zeros)
        return st, net
    if kind == "samples":
        st = WaveState(net, step, [np.asarray(a, dtype=float) for a in _get(desc, "du")],
                       [np.asarray(a, dtype=float) for a in _get(desc, "v")])
        return st, net
    raise InputError("wave initial state must be 'bump', 'witness' or {'type': 'samples', ...}")


def _simulate_wave(run: dict, out: Path | None) -> tuple[int, dict]:
    net = Network.from_json(_get(run, "network"))
    horizon = _frac(run, "horizon")
    step = _frac(run, "step", Fraction(1, 64))
    state, net = _wave_initial(_get(run, "initial"), net, step)
    eta = _damping_signal(run.get("damping", [0] * len(net.damped)), net, horizon, step,
                          int(run["seed"]))
    every = int(run.get("sample_every", 1))
    traj = simulate_wave(state, net, eta, horizon, sample_every=every)
    rows = [[t, e] for t, e in zip(traj.times, traj.energy)]
    _table(out, "energy", ["t", "energy"], rows, run["format"])
    if "field_times" in run:
        frows = []
        for t in run["field_times"]:
            k = int(as_fraction(t) / step)
            st = traj.state(k)
            for j, (du, v) in enumerate(zip(st.du, st.v)):
                for i in range(len(du)):
                    frows.append([j + 1, float(k * step), float(i * step), du[i], v[i]])
        _table(out, "wave_field", ["edge", "t", "x", "du", "v"], frows, run["format"])
    R = build_R(net)
    M0 = build_M(net, eta(0))
    e = traj.energy
    report = {"command": "simulate", "kind": "wave", "config": run,
              "network": net.to_json(), "damping": eta.to_json(),
              "energy_initial": float(e[0]), "energy_final": float(e[-1]),
              "energy_drift": float(e.max() - e.min()),
              "max_energy_increase": float(max(np.diff(e).max(), 0.0)) if e.size > 1 else 0.0,
              "energy_identity_residual": energy_identity_residual(traj),
              "orthogonality_residual": check_M_identity(M0, net, eta(0)),
              "constraint_residual": check_RM(R, M0)}
    if np.all(e > 0) and e.size >= 4:
        report["decay_fit"] = decay_rate_fit(traj.times, e)
    _write(out, "energy.meta.json", _dump(report))
    return EXIT_OK, report


def cmd_simulate(run: dict, out: Path | None) -> tuple[int, dict]:
    kind = run.get("kind", "difference")
    if kind == "difference":
        return _simulate_difference(run, out)
    if kind == "transport":
        return _simulate_transport(run, out)
    if kind == "wave":
        return _simulate_wave(run, out)
    raise InputError(f"unknown simulation kind {kind!r}")


# -- stability ----------------------------------------------------------------

def _bounds_for(delays: DelayVector, L, v) -> dict:
    """Exponent bracket for actual delays ``L`` taken from the verdict on ``delays``."""
    try:
        Lv = as_rational_vector(L)
        ok, _ = membership_V(Lv, delays)
    except (TypeError, ValueError) as exc:
        raise InputError(f"L: {exc}")
    if not ok:
        raise InputError("L does not respect the integer relations of the delays")
    # with one generator the actual delays have no extra relations
    same = delays.h == 1
    lo, hi = lyapunov_bounds(delays, Lv, v.mu.value, v.lyapunov, same)
    return {"L": [str(x) for x in Lv], "same_relations": same,
            "lower": _finite(lo), "upper": _finite(hi)}


def cmd_stability(run: dict, out: Path | None) -> tuple[int, dict]:
    kind = run.get("kind", "delays")
    if kind == "delays":
        delays = DelayVector.from_json(_get(run, "delays"))
        if delays.is_symbolic:
            raise InputError("stability test needs numeric generator values")
        family = [_decode_tuple(t, False) for t in _get(run, "family")]
        if not family:
            raise InputError("family must be nonempty")
        if any(f.shape[0] != delays.N for f in family):
            raise InputError(f"every family element needs {delays.N} matrices")
        x_max = _frac(run, "x_max", 20 * max(delays.values))
        cap = int(run.get("cap", DEFAULT_CAP))
        try:
            v = stability_verdict_delays(delays, family, x_max, cap=cap,
                                         rel_margin=run["tolerances"]["spectral"])
            report = {"command": "stability", "kind": kind, "config": run, **v.to_json()}
            report["lyapunov"] = _finite(v.lyapunov)
            if "L" in run:
                report["bounds_for_L"] = _bounds_for(delays, run["L"], v)
            status = v.status
        except CapExceeded as exc:
            report = {"command": "stability", "kind": kind, "config": run,
                      "status": "inconclusive", "stable": None, "reason": str(exc)}
            status = "inconclusive"
    elif kind == "wave":
        net = Network.from_json(_get(run, "network"))
        dset = DampingSet.from_json(_get(run, "damping_set"))
        v = stability_verdict_wave(net, dset)
        status = "stable" if v.stable else "unstable"
        report = {"command": "stability", "kind": kind, "config": run,
                  "status": status, **v.to_json()}
    else:
        raise InputError(f"unknown stability kind {kind!r}")
    _write(out, "verdict.json", _dump(report))
    code = {"stable": EXIT_OK, "unstable": EXIT_UNSTABLE}.get(status, EXIT_INCONCLUSIVE)
    return code, report


# -- batch ----------------------------------------------------------------------

COMMANDS = {"lattice": cmd_lattice, "simulate": cmd_simulate, "stability": cmd_stability}


def _threads() -> int:
    raw = os.environ.get("NETWAVE_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise InputError("NETWAVE_THREADS must be a positive integer")
        if n <= 0:
            raise InputError("NETWAVE_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def _run_guarded(fn, run: dict, out: Path | None) -> tuple[int, dict]:
    try:
        return fn(run, out)
    except FileNotFoundError as exc:
        return EXIT_IO, {"error": str(exc)}
    except (InputError, ValueError, TypeError, KeyError, IndexError, ZeroDivisionError) as exc:
        return EXIT_INPUT, {"error": f"{type(exc).__name__}: {exc}"}


def cmd_batch(run: dict, out: Path | None) -> tuple[int, dict]:
    """Run independent jobs in a thread pool; each gets its own subdirectory."""
    jobs = _get(run, "runs")
    if not isinstance(jobs, list) or not jobs:
        raise InputError("'runs' must be a nonempty list")
    prepared = []
    for i, job in enumerate(jobs):
        name = str(job.get("name", f"run{i:03d}"))
        cmd = _get(job, "command", f"run {name}")
        if cmd not in COMMANDS:
            raise InputError(f"run {name}: unknown command {cmd!r}")
        sub = dict(_get(job, "config", f"run {name}"))
        sub.setdefault("seed", run["seed"])
        for key in ("horizon", "step", "cap"):
            if key in run and key not in sub:
                sub[key] = run[key]
        sub["tolerances"] = {**run["tolerances"], **sub.get("tolerances", {})}
        sub["format"] = run["format"]
        prepared.append((name, cmd, sub))
    workers = min(_threads(), len(prepared))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_guarded, COMMANDS[cmd], sub,
                               None if out is None else out / name)
                   for name, cmd, sub in prepared]
        results = [f.result() for f in futures]
    summary = {"command": "batch", "config": run, "threads": workers,
               "runs": [{"name": name, "command": cmd, "exit_code": code,
                         **({"error": rep["error"]} if "error" in rep else
                            {"status": rep.get("status", "ok")})}
                        for (name, cmd, _), (code, rep) in zip(prepared, results)]}
    _write(out, "batch.json", _dump(summary))
    failed = [code for code, _ in results if code in (EXIT_IO, EXIT_INPUT)]
    return (max(failed) if failed else EXIT_OK), summary


COMMANDS["batch"] = cmd_batch


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (no files when omitted)")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--grid-step", type=_positive_fraction, metavar="p/q")
    common.add_argument("--horizon", type=_positive_fraction, metavar="p/q")
    common.add_argument("--cap", type=_positive_int, metavar="N",
                        help="assignment cap for exhaustive searches")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of tabular outputs")
    common.add_argument("--tol", type=_tolerance, action="append", metavar="NAME=VALUE",
                        help="tolerance override (algebraic, simulation, spectral)")
    parser = argparse.ArgumentParser(prog="netwave",
                                     description="Delay equations, transport and wave networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("lattice", parents=[common], help="kernel and class tables of a delay structure")
    sub.add_parser("simulate", parents=[common], help="difference, transport or wave simulation")
    sub.add_parser("stability", parents=[common], help="stability verdict (exit 0/3/4)")
    sub.add_parser("batch", parents=[common], help="independent runs in parallel")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    run = resolve(args, cfg)
    out = Path(args.out) if args.out else None
    try:
        code, report = COMMANDS[args.command](run, out)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InputError, ValueError, TypeError, KeyError, IndexError, ZeroDivisionError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "lattice" and args.format == "csv":
        _print_lattice(report)
    else:
        summary = {k: v for k, v in report.items() if k not in ("config",)}
        if args.command == "simulate":
            summary = {k: v for k, v in summary.items() if not isinstance(v, (list, dict))}
        elif isinstance(summary.get("mu"), dict):
            summary["mu"] = {k: v for k, v in summary["mu"].items() if k != "levels"}
        print(_dump(summary), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
