"""Command-line entry point: ``forge <subcommand> ...``.

Exit codes: 0 success, 1 verification or fit failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import tempfile
import time
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

DEFAULT_SEED = 20240611


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output plumbing

def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(config: Any) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def git_describe() -> str:
    try:
        r = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                           text=True, timeout=5, cwd=Path(__file__).parent)
        return r.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def csv_with_header(body: str, config: Any, seed: int, extra: dict | None = None) -> str:
    lines = [f"# config_hash: {config_hash(config)}", f"# seed: {seed}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    return "\n".join(lines) + "\n" + body


def dump_json(obj: Any, config: Any, seed: int) -> str:
    out = {"_meta": {"config_hash": config_hash(config), "seed": seed}}
    out.update(obj)
    return json.dumps(out, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def sidecar(seed: int, config: Any, wall: float) -> str:
    return json.dumps({"seed": seed, "config_hash": config_hash(config), "git_describe": git_describe(),
                       "wall_time_s": round(wall, 3), "config": config,
                       "failure_rule": "logical failure = primal OR dual winding; both tallied"},
                      indent=2, sort_keys=True, default=_jsonable) + "\n"


def emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# configs

def load_schema(name: str) -> dict:
    return json.loads(resources.files("forge").joinpath("schemas", f"{name}.schema.json").read_text())


def validate(config: Any, schema_name: str) -> None:
    import jsonschema
    v = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(v.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        pointer = "/" + "/".join(str(p) for p in e.absolute_path)
        raise UsageError(f"config error at {pointer}: {e.message}")


def read_config(path: str | None, inline: str | None = None) -> dict:
    if inline is not None:
        try:
            return json.loads(inline)
        except json.JSONDecodeError as e:
            raise UsageError(f"malformed JSON: {e}") from None
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such config file: {path}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"malformed JSON in {path}: {e}") from None


def resolve_seed(config_seed: int | None, cli_seed: int | None = None) -> int:
    env = os.environ.get("FORGE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"FORGE_SEED must be an integer, got {env!r}") from None
    if cli_seed is not None:
        return cli_seed
    return DEFAULT_SEED if config_seed is None else int(config_seed)


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _ints(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


# ---------------------------------------------------------------------------
# subcommands

def cmd_compile(a) -> int:
    from .protocols import compile_protocol, verify_collisions
    params = read_config(a.config, a.params)
    try:
        s = compile_protocol(a.protocol, params)
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None
    d = s.to_json()
    d["collisions_ok"] = verify_collisions(s).ok
    emit(dump_json(d, {"protocol": a.protocol, "params": params}, 0), a.out)
    return 0


def _load_schedule(a):
    from .protocols import ProtocolSchedule, compile_protocol
    if a.schedule:
        text = Path(a.schedule).read_text()
        d = json.loads(text)
        d.pop("_meta", None)
        d.pop("collisions_ok", None)
        return ProtocolSchedule.from_json(d)
    if a.protocol:
        return compile_protocol(a.protocol, read_config(None, a.params or "{}"))
    raise UsageError("verify needs --schedule or --protocol")


def cmd_verify(a) -> int:
    from .protocols import verify_collisions, verify_protocol_seeds
    try:
        s = _load_schedule(a)
    except (OSError, KeyError, TypeError, ValueError) as e:
        raise UsageError(f"cannot load schedule: {e}") from None
    seed = resolve_seed(None, a.seed)
    rep = verify_collisions(s)
    seeds = [seed + k for k in range(a.seeds)]
    try:
        states = verify_protocol_seeds(s, seeds)
    except Exception as e:   # a broken schedule may not even simulate
        states = [False]
        print(f"simulation error: {e}", file=sys.stderr)
    ok = rep.ok and all(states)
    result = {"name": s.name, "collisions_ok": rep.ok, "n_overlaps": len(rep.overlaps),
              "missing": [list(m) for m in rep.missing],
              "unintended": [[o.module, o.left, o.right] for o in rep.unintended],
              "state_checks_passed": int(sum(states)), "state_checks": len(states), "ok": ok}
    emit(dump_json(result, {"schedule": s.to_json()}, seed), a.out)
    return 0 if ok else 1


def cmd_threshold(a) -> int:
    from .montecarlo import SweepSpec, run_sweep, to_csv
    cfg = read_config(a.config)
    if a.uniform is not None:
        cfg["p"] = [a.uniform]
    cfg.setdefault("L", [])
    validate(cfg, "sweep")
    seed = resolve_seed(cfg.get("seed"), a.seed)
    cfg["seed"] = seed
    spec = SweepSpec.from_json(cfg)
    t0 = time.time()
    pts = run_sweep(spec, a.checkpoint, a.workers)
    emit(csv_with_header(to_csv(pts), spec.to_json(), seed), a.out)
    if a.out:
        atomic_write(str(a.out) + ".meta.json", sidecar(seed, spec.to_json(), time.time() - t0))
    return 0


def cmd_breakeven(a) -> int:
    from .montecarlo import SweepSpec, breakeven_crossing, run_sweep, to_csv
    cfg = read_config(a.config)
    validate(cfg, "breakeven")
    seed = resolve_seed(cfg.get("seed"), a.seed)
    spec = SweepSpec(L=tuple(cfg["L"]), p=(cfg["p0"],), eta=tuple(cfg["eta"]),
                     samples=cfg.get("samples", 10_000), seed=seed, early_stop=cfg.get("early_stop"))
    t0 = time.time()
    pts = run_sweep(spec, a.checkpoint, a.workers)
    summary = breakeven_crossing(pts, cfg["p0"])
    emit(csv_with_header(to_csv(pts), spec.to_json(), seed,
                         {"crossing_db_per_qubit": summary["crossing"]}), a.out)
    if a.out:
        atomic_write(str(a.out) + ".meta.json", sidecar(seed, spec.to_json(), time.time() - t0))
    return 0


def cmd_collapse(a) -> int:
    from .analysis import FitError, curves_from_points, fit_threshold
    from .montecarlo import from_csv
    try:
        pts = from_csv(Path(a.inp).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {a.inp}") from None
    data = curves_from_points(pts, a.p_loss)
    if len(data) < 2:
        print("need data for at least two sizes", file=sys.stderr)
        return 1
    try:
        fit = fit_threshold(data)
    except FitError as e:
        emit(dump_json({"ok": False, "error": str(e)}, {"in": a.inp, "p_loss": a.p_loss}, 0), a.out)
        return 1
    emit(dump_json({"ok": True, **fit.to_json()}, {"in": a.inp, "p_loss": a.p_loss}, 0), a.out)
    return 0


def cmd_phase_boundary(a) -> int:
    from .analysis import fit_phase_boundary
    if a.points:
        pts = [(float(x), float(y)) for x, y in (pt.split(":") for pt in a.points.split(","))]
    elif a.inp:
        rows = [ln for ln in Path(a.inp).read_text().splitlines() if ln and not ln.startswith("#")]
        import csv
        pts = [(float(r["p_loss"]), float(r["p_th"])) for r in csv.DictReader(rows)]
    else:
        raise UsageError("phase-boundary needs --points or --in")
    try:
        pb = fit_phase_boundary(pts, a.x_perc)
    except ValueError as e:
        raise UsageError(str(e)) from None
    emit(dump_json(pb.to_json(), {"points": pts, "x_perc": a.x_perc}, 0), a.out)
    return 0


def cmd_percolate(a) -> int:
    from .percolation import PercolationSpec, coordination_estimate, estimate_pc, get_lattice, \
        wrap_indices, wrapping_curve
    cfg = read_config(a.config) if a.config else {}
    if a.lattice:
        cfg["lattice"] = a.lattice
    if a.sizes:
        cfg["L"] = a.sizes
    if a.samples:
        cfg["samples"] = a.samples
    if a.p:
        cfg["p"] = a.p
    cfg.setdefault("lattice", "simple_cubic")
    validate(cfg, "percolate")
    seed = resolve_seed(cfg.get("seed"), a.seed)
    spec = PercolationSpec(cfg["lattice"], tuple(cfg["L"]), tuple(cfg.get("p", ())),
                           cfg.get("samples", 1000), seed)
    t0 = time.time()
    est = estimate_pc(spec)
    z = get_lattice(spec.lattice, min(spec.L)).degree
    res = {**est.to_json(), "coordination": z, "coordination_estimate": coordination_estimate(z),
           "wall_time_s": round(time.time() - t0, 3)}
    if spec.p:
        curves = {}
        for L in spec.L:
            K = wrap_indices(spec.lattice, L, spec.samples, seed)
            curves[str(L)] = wrapping_curve(K, get_lattice(spec.lattice, L).n_bonds, spec.p).tolist()
        res["curves"] = {"p": list(spec.p), "R": curves}
    emit(dump_json(res, spec.to_json(), seed), a.out)
    return 0


def cmd_optimal_l(a) -> int:
    from .analysis import UncorrectableError, eta_from_db, optimal_L
    eta = a.eta if a.eta is not None else eta_from_db(a.eta_db)
    try:
        L, po = optimal_L(eta, a.p, a.alpha, a.beta)
    except UncorrectableError as e:
        emit(dump_json({"ok": False, "error": str(e)}, vars_cfg(a), 0), a.out)
        return 1
    emit(dump_json({"ok": True, "eta": eta, "L_opt": L, "p_opt": po,
                    "x0": a.alpha * eta * L * L}, vars_cfg(a), 0), a.out)
    return 0


def vars_cfg(a) -> dict:
    return {k: v for k, v in vars(a).items() if k not in ("func",) and not callable(v)}


def cmd_reproduce(a) -> int:
    from .reproduce import reproduce
    seed = resolve_seed(None, a.seed)
    ok = reproduce(a.figure, a.scale, Path(a.out), seed, a.workers, log=lambda m: print(m, file=sys.stderr))
    return 0 if ok else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forge", description="emitter graph-state protocols and "
                                 "RHG fault-tolerance simulations")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a protocol to a timed pulse schedule (JSON)")
    p.add_argument("--protocol", required=True,
                   choices=["linear", "star", "plus", "cluster", "rhg", "repeater", "tree"])
    p.add_argument("--params", help="inline JSON parameters")
    p.add_argument("--config", help="JSON file with parameters")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("verify", help="verify a schedule by stabilizer simulation")
    p.add_argument("--schedule", help="schedule JSON written by 'forge compile'")
    p.add_argument("--protocol")
    p.add_argument("--params")
    p.add_argument("--seeds", type=int, default=100, help="number of measurement-outcome seeds")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("threshold", help="logical error rates over an (L, p, p_loss) grid")
    p.add_argument("--config", required=True)
    p.add_argument("--uniform", type=float, help="single uniform physical error rate")
    p.add_argument("--out")
    p.add_argument("--checkpoint")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("breakeven", help="logical error vs fiber loss per qubit")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--checkpoint")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_breakeven)

    p = sub.add_parser("collapse", help="scaling-collapse threshold fit of a sweep CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--p-loss", type=float, default=None, help="restrict to one loss value")
    p.add_argument("--out")
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("phase-boundary", help="quadratic threshold-vs-loss fit through the loss bound")
    p.add_argument("--points", help="comma-separated p_loss:p_th pairs")
    p.add_argument("--in", dest="inp", help="CSV with p_loss,p_th columns")
    p.add_argument("--x-perc", type=float, default=0.249)
    p.add_argument("--out")
    p.set_defaults(func=cmd_phase_boundary)

    p = sub.add_parser("percolate", help="bond percolation threshold by wrapping-curve crossings")
    p.add_argument("--config")
    p.add_argument("--lattice", choices=["simple_cubic", "carve_extended", "square2d"])
    p.add_argument("--sizes", type=_ints)
    p.add_argument("--samples", type=int)
    p.add_argument("--p", type=_floats, help="optional p grid for curve output")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_percolate)

    p = sub.add_parser("optimal-l", help="optimal cluster size from the exponential ansatz")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--eta", type=float, help="loss rate per qubit (natural log units)")
    g.add_argument("--eta-db", type=float, help="loss per qubit in dB")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, default=0.0053)
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimal_l)

    p = sub.add_parser("reproduce", help="regenerate a figure's data bundle")
    p.add_argument("figure", choices=["fig7", "fig8", "fig9", "fig10", "fig13", "loss"])
    p.add_argument("--scale", choices=["small", "medium", "full"], default="small")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    try:
        return a.func(a)
    except UsageError as e:
        print(f"forge: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
