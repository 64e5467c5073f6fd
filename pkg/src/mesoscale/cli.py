"""Command line entry point: ``mesoscale <subcommand> [flags]``.

Subcommands: ``validate-model``, ``simulate``, ``solve-limit``, ``converge``
and ``probes``.  Exit codes: 0 success, 1 validation failure, 2 runtime
error, 64 usage error.  Every run with ``--out`` leaves exactly one
``manifest.json`` there, also when it fails.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import lattice as L

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2, 64
SEED_ENV = "MESOSCALE_SEED"
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_common(p, out_required=True):
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default: cores)")
    p.add_argument("--out", type=Path, required=out_required, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mesoscale", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate-model", help="check a reaction network")
    p.add_argument("model_path", nargs="?", help="network JSON file or builtin name")
    p.add_argument("--model", help="network JSON file or builtin name")
    _add_common(p, out_required=False)

    p = sub.add_parser("simulate", help="run the jump process")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--samples", type=int, default=11)
    p.add_argument("--u0", default="0.5", help="constant, grid CSV or spectral JSON")
    p.add_argument("--v0", default="0", help="constant or grid CSV (integer counts)")
    p.add_argument("--mode", choices=("exact", "tau-leap"), default="exact")
    p.add_argument("--dt", type=float, default=None, help="tau-leap step")
    p.add_argument("--log-events", action="store_true")
    _add_common(p)

    p = sub.add_parser("solve-limit", help="solve the deterministic limit system")
    p.add_argument("--model", required=True)
    p.add_argument("--u0", required=True, help="spectral JSON or constant")
    p.add_argument("--v0", default="0", help="collocation grid CSV or constant")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--mref", type=int, default=511)
    p.add_argument("--samples", type=int, default=11)
    _add_common(p)

    p = sub.add_parser("converge", help="run a law-of-large-numbers plan")
    p.add_argument("--plan", required=True, type=Path)
    _add_common(p)

    p = sub.add_parser("probes", help="inequality probes and ensemble audits")
    p.add_argument("--study", choices=("inequality", "compensator", "zd-decay", "tail"),
                   default="inequality")
    p.add_argument("--model", default=None)
    p.add_argument("--n", type=int, nargs="+", default=None)
    p.add_argument("--l", type=float, nargs="+", default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--eps", type=float, nargs="+", default=[0.1])
    _add_common(p)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get(SEED_ENV, "0"))


def _jobs(args) -> int:
    return args.jobs or os.cpu_count() or 1


def _grid_input(spec: str, n: int, m_ref: int | None = None) -> np.ndarray:
    """A constant, a CSV grid of ``n`` values or a spectral JSON projected to ``n`` cells."""
    try:
        return np.full(n, float(spec))
    except ValueError:
        pass
    path = Path(spec)
    text = path.read_text()
    if path.suffix == ".json":
        c = L.SpectralCoeffs.from_dict(json.loads(text))
        return L.project_reference(c, n).values
    g = L.GridFunction.from_csv(text)
    if g.n != n:
        raise ValueError(f"{spec} has {g.n} cells, expected {n}")
    return g.values


def _spectral_input(spec: str, m_ref: int) -> L.SpectralCoeffs:
    try:
        return L.SpectralCoeffs.from_modes(m_ref, {0: float(spec)})
    except ValueError:
        return L.SpectralCoeffs.from_dict(json.loads(Path(spec).read_text()))


@contextlib.contextmanager
def _inputs():
    """Turn malformed inputs into validation failures (exit 1)."""
    try:
        yield
    except (ValueError, OSError, KeyError) as exc:
        raise ValidationFailure(str(exc)) from exc


def _write(out: Path, name: str, data, written: list):
    path = out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    path.write_bytes(data)
    written.append(name)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def config_hash(args) -> str:
    skip = {"out", "jobs"}
    cfg = {k: str(v) for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["seed"] = str(_seed(args))
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _manifest(args, argv, start, written, status, error):
    files = {}
    for name in sorted(written):
        files[name] = hashlib.sha256((args.out / name).read_bytes()).hexdigest()
    return {"command": args.command, "argv": list(argv), "config_hash": config_hash(args),
            "master_seed": _seed(args), "code_version": __version__,
            "started": start, "finished": _now(), "outputs": files,
            "status": status, "error": error}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args, out, written):
    from .reactions import load_network, validate

    spec = args.model or args.model_path
    if spec is None:
        raise UsageError("validate-model needs a model path or --model")
    with _inputs():
        net = load_network(spec)
    report = validate(net)
    print(report)
    if out is not None:
        _write(out, "report.json", _dumps({"model": net.name, "valid": report.ok,
                                           "violations": [str(v) for v in report.violations]}),
               written)
    if not report.ok:
        raise ValidationFailure(f"{len(report.violations)} violation(s)")


def cmd_simulate(args, out, written):
    from .reactions import load_network, validate
    from .ssa import SimConfig, sample_grid, simulate

    with _inputs():
        net = load_network(args.model)
    report = validate(net)
    if not report.rate_law_ok():
        print(report)
        raise ValidationFailure("model violates the rate law")
    mode = "tau_leap" if args.mode == "tau-leap" else "exact"
    with _inputs():
        u0 = _grid_input(args.u0, args.n)
        v0 = _grid_input(args.v0, args.n)
        cfg = SimConfig(n=args.n, l=args.l, T=args.T,
                        sample_times=sample_grid(args.T, args.samples), seed=_seed(args),
                        mode=mode, tau_dt=args.dt, log_events=args.log_events)
        if cfg.l < net.gamma_max:
            raise ValueError(f"l must be at least {net.gamma_max}")
    tr = simulate(net, u0, v0, cfg)
    data = tr.to_bytes()
    _write(out, "trajectory.bin", data, written)
    if tr.has_event_log:
        _write(out, "events.bin", tr.event_log_bytes(), written)
    summary = {"model": net.name, "n": tr.n, "l": tr.l, "T": tr.T, "seed": tr.rng_seed,
               "mode": mode, "approximate": tr.approximate, "event_count": tr.event_count,
               "truncated_at": tr.truncated_at, "trunc_window": tr.trunc_window,
               "trajectory_sha256": hashlib.sha256(data).hexdigest()}
    _write(out, "report.json", _dumps(summary), written)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mean_u", "sup_u", "mean_v", "sup_v"])
    for i, t in enumerate(tr.times):
        w.writerow([repr(float(t)), repr(float(tr.u[i].mean())), repr(float(tr.u[i].max())),
                    repr(float(tr.v[i].mean())), repr(float(tr.v[i].max()))])
    _write(out, "report.csv", buf.getvalue(), written)
    print(f"{tr.event_count} events; truncated_at={tr.truncated_at}")


def cmd_solve_limit(args, out, written):
    from .limit import solve_limit
    from .reactions import load_network

    with _inputs():
        net = load_network(args.model)
    with _inputs():
        L.check_odd(args.mref)
        u0 = _spectral_input(args.u0, args.mref)
        v0 = _grid_input(args.v0, args.mref)
        if not (args.T > 0 and args.dt > 0):
            raise ValueError("T and dt must be positive")
    steps = round(args.T / args.dt)
    save_every = max(1, steps // max(1, args.samples - 1))
    sol = solve_limit(net, u0, v0, args.T, args.dt, args.mref, save_every=save_every)
    x = np.arange(args.mref) / args.mref
    uv = sol.u_values()
    rows = []
    for i, t in enumerate(sol.times):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "u", "v"])
        for j in range(args.mref):
            w.writerow([repr(float(x[j])), repr(float(uv[i, j])), repr(float(sol.v[i, j]))])
        name = f"samples/t{i:04d}.csv"
        _write(out, name, buf.getvalue(), written)
        rows.append({"index": i, "t": float(t), "file": name})
    meta = sol.metadata()
    meta["samples"] = rows
    _write(out, "report.json", _dumps(meta), written)


def cmd_converge(args, out, written):
    from .harness import ExperimentPlan, run_lln

    try:
        plan_dict = json.loads(args.plan.read_text())
        if args.seed is not None or "seed" not in plan_dict:
            plan_dict["seed"] = _seed(args)
        plan = ExperimentPlan.from_dict(plan_dict)
    except (ValueError, KeyError, TypeError) as exc:
        raise ValidationFailure(f"invalid plan: {exc}") from exc
    report = run_lln(plan, jobs=_jobs(args))
    _write(out, "report.json", report.to_json() + "\n", written)
    _write(out, "report.csv", report.to_csv(), written)
    for m, text in report.plot_tables().items():
        _write(out, f"plots/{m}.csv", text, written)
    for m, c in report.checks.items():
        print(f"{m}: medians {['%.4g' % x for x in c['medians']]} "
              f"decreasing={c['strictly_decreasing']} halved={c['halved']}")


def cmd_probes(args, out, written):
    from . import harness as H

    seed = _seed(args)
    jobs = _jobs(args)
    if args.study == "inequality":
        rep = H.inequality_probes(tuple(args.n or H.PROBE_NS), args.trials, seed)
        body = rep.to_dict()
        rows = [(n, 0, name, r, r, r) for name, e in rep.entries.items()
                if "max_ratio" in e and isinstance(e["max_ratio"], list)
                for n, r in zip(rep.ns, e["max_ratio"])]
    else:
        if args.model is None:
            raise UsageError(f"--study {args.study} needs --model")
        if args.study == "compensator":
            n = (args.n or [31])[0]
            l = (args.l or [100.0])[0]
            audits = H.compensator_study(args.model, n, l, args.replicas, T=args.T or 0.05,
                                         seed=seed, jobs=jobs)
            body = {k: a.to_dict() for k, a in audits.items()}
            rows = [(n, l, k, a.mean_gap, a.lo, a.hi) for k, a in audits.items()]
        elif args.study == "zd-decay":
            ns = args.n or [31, 63, 127, 255]
            with _inputs():
                if len(ns) < 3:
                    raise ValueError("zd-decay needs at least three values of --n")
            rep = H.zd_decay_study(args.model, ns, args.replicas,
                                   args.alpha, T=args.T or 1.0, seed=seed, jobs=jobs)
            body = rep.to_dict()
            rows = [(n, 0, "mean_sup_sq", m, m, m) for n, m in zip(rep.ns, rep.means)]
        else:
            n = (args.n or [31])[0]
            rep = H.yn_tail_study(args.model, n, args.l or [50.0, 200.0, 800.0], args.eps,
                                  args.replicas, T=args.T or 0.05, seed=seed, jobs=jobs)
            body = rep.to_dict()
            rows = [(n, l, f"sup_eps{e:g}", f, f, f) for e, fs in rep.freq_sup.items()
                    for l, f in zip(rep.ls, fs)]
    _write(out, "report.json", _dumps(body), written)
    _write(out, "report.csv", H.plot_csv(rows), written)
    print(json.dumps(body, sort_keys=True, indent=1)[:2000])


COMMANDS = {"validate-model": cmd_validate, "simulate": cmd_simulate,
            "solve-limit": cmd_solve_limit, "converge": cmd_converge, "probes": cmd_probes}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    out = args.out
    start = _now()
    written: list = []
    status, error, code = "ok", None, EXIT_OK
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    try:
        COMMANDS[args.command](args, out, written)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        status, error, code = "usage", str(exc), EXIT_USAGE
    except ValidationFailure as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        status, error, code = "invalid", str(exc), EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - every failure still gets a manifest
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        status, error, code = "error", f"{type(exc).__name__}: {exc}", EXIT_RUNTIME
    finally:
        if out is not None:
            (out / MANIFEST).write_text(_dumps(_manifest(args, argv, start, written, status, error)))
    return code


if __name__ == "__main__":
    sys.exit(main())
