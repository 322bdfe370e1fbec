"""Named data bundles for the threshold, phase-diagram, break-even, ansatz and percolation figures."""
from __future__ import annotations

import csv
import io
import json
import time
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import (
    FitError, ansatz_curves, curves_from_points, fit_phase_boundary, fit_threshold,
    optimal_L, pairwise_crossings,
)
from .cli import atomic_write, config_hash, csv_with_header, dump_json, git_describe
from .montecarlo import SweepSpec, breakeven_crossing, run_sweep, to_csv
from .percolation import PercolationSpec, coordination_estimate, estimate_pc, get_lattice, \
    wrap_indices, wrapping_curve

P_GRID_FIG8 = tuple(round(x, 6) for x in np.linspace(0.003, 0.008, 11))
LOSSES_FIG7 = (0.0, 0.05, 0.10, 0.15, 0.20)
# relative p grid around a rough threshold guess for each loss value
REL_GRID_FIG7 = (0.5, 0.65, 0.8, 0.95, 1.1, 1.25, 1.45, 1.7)
LOSS_GRID = (0.21, 0.22, 0.23, 0.24, 0.25, 0.26, 0.27, 0.28, 0.29)
ETA_FIG9 = (1e-3, 2e-3, 3e-3, 4e-3, 5.7e-3, 8e-3, 1.14e-2, 2e-2)

PRESETS = {
    "fig8": {
        "small": {"L": (6, 8, 10), "samples": 20_000},
        "medium": {"L": (6, 8, 10, 12), "samples": 30_000},
        "full": {"L": (8, 10, 12, 14, 16), "samples": 100_000},
    },
    "fig7": {
        "small": {"L": (6, 8, 10), "samples": 4_000},
        "medium": {"L": (6, 8, 10, 12), "samples": 10_000},
        "full": {"L": (8, 10, 12, 14, 16), "samples": 100_000},
    },
    "fig9": {
        "small": {"L": (8, 10, 12), "samples": 20_000, "early_stop": 200},
        "medium": {"L": (8, 10, 12), "samples": 100_000, "early_stop": 1000},
        "full": {"L": (8, 10, 12, 14, 16), "samples": 500_000, "early_stop": None},
    },
    "loss": {
        "small": {"L": (6, 8, 10), "samples": 1_000},
        "medium": {"L": (6, 8, 10, 12), "samples": 2_000},
        "full": {"L": (8, 10, 12, 14, 16), "samples": 10_000},
    },
    "fig10": {
        "small": {"L": tuple(range(4, 21, 2)), "n_eta": 40},
        "medium": {"L": tuple(range(4, 21)), "n_eta": 120},
        "full": {"L": tuple(range(4, 21)), "n_eta": 400},
    },
    "fig13": {
        "small": {"L": (8, 12, 16), "samples": 2_000},
        "medium": {"L": (8, 12, 16, 24), "samples": 10_000},
        "full": {"L": (16, 24, 32, 48), "samples": 10_000},
    },
}

# zero-loss threshold and loss bound used to centre the fig7 grids and as fig10 defaults
BETA_DEFAULT = 0.0053
X_PERC = 0.249


def threshold_guess(p_loss: float) -> float:
    return BETA_DEFAULT * max(0.05, 1 - p_loss / X_PERC)


def threshold_from_points(points, p_loss: float | None = None) -> dict:
    """Collapse fit when the curves cross; otherwise report the failure."""
    data = curves_from_points(points, p_loss)
    out = {"p_loss": p_loss, "crossings": [list(c) for c in pairwise_crossings(data)]}
    try:
        fit = fit_threshold(data)
        out.update(ok=True, **fit.to_json())
    except FitError as e:
        out.update(ok=False, error=str(e))
    return out


def loss_curves(points) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Failure probability vs p_loss per size."""
    by: dict[int, list[tuple[float, float]]] = {}
    for pt in points:
        by.setdefault(pt.L, []).append((pt.p_loss, pt.p_logic))
    return {L: (np.array([r[0] for r in sorted(v)]), np.array([r[1] for r in sorted(v)]))
            for L, v in sorted(by.items())}


def _write_manifest(out: Path, figure: str, scale: str, seed: int, cfg: dict, wall: float,
                    files: list[str]) -> None:
    man = {"figure": figure, "scale": scale, "seed": seed, "config": cfg,
           "config_hash": config_hash(cfg), "git_describe": git_describe(),
           "wall_time_s": round(wall, 2), "files": files}
    atomic_write(out / "manifest.json", json.dumps(man, indent=2, sort_keys=True, default=list) + "\n")


def reproduce(figure: str, scale: str, out: Path, seed: int, workers: int = 1,
              log: Callable[[str], None] = lambda m: None) -> bool:
    preset = PRESETS[figure][scale]
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    def progress(pt):
        log(f"L={pt.L} p={pt.p:.5g} p_loss={pt.p_loss:.4g} fails={pt.n_fail}/{pt.n_samples}")

    if figure == "fig8":
        spec = SweepSpec(L=preset["L"], p=P_GRID_FIG8, samples=preset["samples"], seed=seed)
        pts = run_sweep(spec, out / "checkpoint.jsonl", workers, progress)
        atomic_write(out / "data.csv", csv_with_header(to_csv(pts), spec.to_json(), seed))
        fit = threshold_from_points(pts)
        atomic_write(out / "fit.json", dump_json(fit, spec.to_json(), seed))
        _write_manifest(out, figure, scale, seed, spec.to_json(), time.time() - t0,
                        ["data.csv", "fit.json"])
        return bool(fit["ok"])

    if figure == "fig7":
        rows = []
        cfgs = []
        all_ok = True
        for j, loss in enumerate(LOSSES_FIG7):
            g = threshold_guess(loss)
            grid = tuple(round(g * r, 7) for r in REL_GRID_FIG7)
            spec = SweepSpec(L=preset["L"], p=grid, p_loss=(loss,), samples=preset["samples"],
                             seed=seed + j)
            cfgs.append(spec.to_json())
            pts = run_sweep(spec, out / f"checkpoint_{j}.jsonl", workers, progress)
            atomic_write(out / f"data_loss{j}.csv", csv_with_header(to_csv(pts), spec.to_json(), seed + j))
            fit = threshold_from_points(pts, loss)
            atomic_write(out / f"fit_loss{j}.json", dump_json(fit, spec.to_json(), seed + j))
            if fit["ok"]:
                rows.append((loss, fit["p_th"], fit.get("sigma_pth")))
            else:
                all_ok = False
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p_loss", "p_th", "sigma_pth"])
        for r in rows:
            w.writerow([repr(r[0]), repr(r[1]), "" if r[2] is None else repr(r[2])])
        cfg = {"runs": cfgs}
        atomic_write(out / "thresholds.csv", csv_with_header(buf.getvalue(), cfg, seed))
        files = [f"data_loss{j}.csv" for j in range(len(LOSSES_FIG7))] + ["thresholds.csv"]
        if len(rows) >= 2:
            pb = fit_phase_boundary([(r[0], r[1]) for r in rows], X_PERC)
            atomic_write(out / "boundary.json", dump_json(pb.to_json(), cfg, seed))
            files.append("boundary.json")
        else:
            all_ok = False
        _write_manifest(out, figure, scale, seed, cfg, time.time() - t0, files)
        return all_ok

    if figure == "fig9":
        spec = SweepSpec(L=preset["L"], p=(1e-3,), eta=ETA_FIG9, samples=preset["samples"],
                         seed=seed, early_stop=preset["early_stop"])
        pts = run_sweep(spec, out / "checkpoint.jsonl", workers, progress)
        summary = breakeven_crossing(pts, 1e-3)
        atomic_write(out / "data.csv", csv_with_header(to_csv(pts), spec.to_json(), seed))
        atomic_write(out / "summary.json", dump_json(summary, spec.to_json(), seed))
        _write_manifest(out, figure, scale, seed, spec.to_json(), time.time() - t0,
                        ["data.csv", "summary.json"])
        return summary["crossing"] is not None

    if figure == "loss":
        # no circuit noise: failures come from erasure alone
        spec = SweepSpec(L=preset["L"], p=(0.0,), p_loss=LOSS_GRID, samples=preset["samples"],
                         seed=seed)
        pts = run_sweep(spec, out / "checkpoint.jsonl", workers, progress)
        atomic_write(out / "data.csv", csv_with_header(to_csv(pts), spec.to_json(), seed))
        data = loss_curves(pts)
        cs = pairwise_crossings(data)
        summary = {"crossings": [{"sizes": [a, b], "p_loss": c} for a, b, c in cs],
                   "mean": float(np.mean([c for *_, c in cs])) if cs else None}
        atomic_write(out / "summary.json", dump_json(summary, spec.to_json(), seed))
        _write_manifest(out, figure, scale, seed, spec.to_json(), time.time() - t0,
                        ["data.csv", "summary.json"])
        return bool(cs)

    if figure == "fig10":
        alpha = -BETA_DEFAULT / X_PERC
        beta = BETA_DEFAULT
        p = 1e-3
        etas = np.logspace(-5, -2, preset["n_eta"])
        cfg = {"alpha": alpha, "beta": beta, "p": p, "L": list(preset["L"]), "eta": etas.tolist()}
        rows = ansatz_curves(etas, preset["L"], p, alpha, beta)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta", "L", "p_logic"])
        for r in rows:
            w.writerow([repr(r["eta"]), r["L"], repr(r["p_logic"])])
        atomic_write(out / "curves.csv", csv_with_header(buf.getvalue(), cfg, seed))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta", "L_opt", "p_opt"])
        for eta in etas:
            L, po = optimal_L(float(eta), p, alpha, beta)
            w.writerow([repr(float(eta)), repr(L), repr(po)])
        atomic_write(out / "optimal.csv", csv_with_header(buf.getvalue(), cfg, seed))
        _write_manifest(out, figure, scale, seed, cfg, time.time() - t0, ["curves.csv", "optimal.csv"])
        return True

    if figure == "fig13":
        res = {}
        files = []
        cfg = {}
        for lat in ("simple_cubic", "carve_extended"):
            spec = PercolationSpec(lat, preset["L"], (), preset["samples"], seed)
            cfg[lat] = spec.to_json()
            est = estimate_pc(spec)
            z = get_lattice(lat, min(spec.L)).degree
            res[lat] = {**est.to_json(), "coordination": z,
                        "coordination_estimate": coordination_estimate(z)}
            pgrid = np.linspace(0.5 * est.p_c, 1.5 * est.p_c, 41)
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["L", "p", "R"])
            for L in spec.L:
                K = wrap_indices(lat, L, spec.samples, seed)
                R = wrapping_curve(K, get_lattice(lat, L).n_bonds, pgrid)
                for pp, rr in zip(pgrid, R):
                    w.writerow([L, repr(float(pp)), repr(float(rr))])
            atomic_write(out / f"curves_{lat}.csv", csv_with_header(buf.getvalue(), spec.to_json(), seed))
            files.append(f"curves_{lat}.csv")
            log(f"{lat}: p_c = {est.p_c:.5f} +- {est.uncertainty}")
        atomic_write(out / "pc.json", dump_json(res, cfg, seed))
        _write_manifest(out, figure, scale, seed, cfg, time.time() - t0, files + ["pc.json"])
        return True

    raise ValueError(f"unknown figure {figure!r}")
