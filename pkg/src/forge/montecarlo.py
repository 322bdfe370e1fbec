"""Logical-error-rate estimation over (L, p, p_loss) grids with counter-based seeding.

Every trial draws from its own generator seeded by splitmix64(master, L, p_index, loss_index,
trial), so a point's tally does not depend on how trials are split across workers or chunks.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .decoder import TrialEngine
from .error_model import ErrorModelParams, loss_from_db_per_qubit

MASK64 = (1 << 64) - 1
CSV_COLUMNS = ("L", "p", "p_loss", "n", "fails", "p_logic", "stderr",
               "fails_primal", "fails_dual", "percolated")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *keys: int) -> int:
    h = splitmix64(master & MASK64)
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK64))
    return h


def trial_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class RatePoint:
    L: int
    p: float
    p_loss: float
    n_samples: int
    n_fail: int
    n_fail_primal: int = 0
    n_fail_dual: int = 0
    n_percolated: int = 0
    eta: float | None = None

    @property
    def p_logic(self) -> float:
        return self.n_fail / self.n_samples

    @property
    def stderr(self) -> float:
        q = self.p_logic
        return math.sqrt(q * (1 - q) / self.n_samples)

    def row(self) -> list:
        return [self.L, repr(self.p), repr(self.p_loss), self.n_samples, self.n_fail,
                repr(self.p_logic), repr(self.stderr), self.n_fail_primal, self.n_fail_dual,
                self.n_percolated]

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "RatePoint":
        return cls(**d)


@dataclass(frozen=True)
class _Job:
    L: int
    params: ErrorModelParams
    master: int
    p_idx: int
    loss_idx: int
    start: int
    stop: int
    engine: str
    correlated: bool


def _run_chunk(job: _Job) -> np.ndarray:
    eng = TrialEngine(job.L, job.params, job.engine, job.correlated)
    rngs = (trial_rng(derive_seed(job.master, job.L, job.p_idx, job.loss_idx, t))
            for t in range(job.start, job.stop))
    res = eng.run_batch(rngs)
    fail = res[:, 0] | res[:, 1]
    return np.array([fail.sum(), res[:, 0].sum(), res[:, 1].sum(), (res[:, 2] | res[:, 3]).sum(),
                     len(res)], dtype=np.int64)


def _executor(workers: int):
    return ProcessPoolExecutor(max_workers=workers) if workers > 1 else None


def estimate_rate(L: int, params: ErrorModelParams, n_samples: int, seed: int = 0, *,
                  p_idx: int = 0, loss_idx: int = 0, workers: int = 1, chunk: int = 2000,
                  engine: str = "pymatching", correlated: bool = True,
                  early_stop: int | None = None, eta: float | None = None,
                  pool=None) -> RatePoint:
    """Failure = non-trivial winding on the primal OR the dual graph (both tallied)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    jobs = [_Job(L, params, seed, p_idx, loss_idx, s, min(s + chunk, n_samples), engine, correlated)
            for s in range(0, n_samples, chunk)]
    tot = np.zeros(5, dtype=np.int64)
    own = None
    if pool is None and workers > 1:
        pool = own = _executor(workers)
    try:
        if pool is None:
            results = map(_run_chunk, jobs)
        else:
            results = pool.map(_run_chunk, jobs)
        for r in results:   # in job order, so early stopping is deterministic
            tot += r
            if early_stop is not None and tot[0] >= early_stop:
                break
    finally:
        if own is not None:
            own.shutdown(cancel_futures=True)
    return RatePoint(L, float(params.p_q), float(params.p_loss), int(tot[4]), int(tot[0]),
                     int(tot[1]), int(tot[2]), int(tot[3]), eta)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    L: tuple[int, ...]
    p: tuple[float, ...]
    p_loss: tuple[float, ...] = (0.0,)
    samples: int = 10_000
    seed: int = 0
    eta: tuple[float, ...] | None = None      # loss per qubit in dB; overrides p_loss
    correlated: bool = True
    engine: str = "pymatching"
    early_stop: int | None = None
    chunk: int = 2000

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not self.L or not self.p or not (self.p_loss or self.eta):
            raise ValueError("grids must be nonempty")
        for L in self.L:
            if L < 2 or L % 2:
                raise ValueError(f"L={L} must be even and >= 2")

    @classmethod
    def from_json(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        for k in ("L", "p", "p_loss", "eta"):
            if k in d and d[k] is not None:
                d[k] = tuple(d[k])
        return cls(**d)

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def points(self) -> list[tuple[int, int, int, float, float, float | None]]:
        """(L, p_idx, loss_idx, p, p_loss, eta) in execution order."""
        out = []
        losses = self.eta if self.eta is not None else self.p_loss
        for L in self.L:
            for j, x in enumerate(losses):
                for i, p in enumerate(self.p):
                    if self.eta is not None:
                        pl = float(loss_from_db_per_qubit(x, L))
                        out.append((L, i, j, p, pl, float(x)))
                    else:
                        out.append((L, i, j, p, float(x), None))
        return out


def _key(L: int, i: int, j: int) -> str:
    return f"{L}:{i}:{j}"


def run_sweep(spec: SweepSpec, checkpoint: str | Path | None = None, workers: int = 1,
              progress=None) -> list[RatePoint]:
    """Execute the grid; with a checkpoint file, finished points are appended as JSON lines and
    skipped on a rerun."""
    done: dict[str, RatePoint] = {}
    if checkpoint is not None and Path(checkpoint).exists():
        for line in Path(checkpoint).read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                done[rec["key"]] = RatePoint.from_json(rec["point"])
    out = []
    pool = _executor(workers)
    try:
        for (L, i, j, p, pl, eta) in spec.points():
            k = _key(L, i, j)
            if k not in done:
                params = ErrorModelParams.uniform(p, pl)
                pt = estimate_rate(L, params, spec.samples, spec.seed, p_idx=i, loss_idx=j,
                                   chunk=spec.chunk, engine=spec.engine,
                                   correlated=spec.correlated, early_stop=spec.early_stop,
                                   eta=eta, pool=pool)
                done[k] = pt
                if checkpoint is not None:
                    with open(checkpoint, "a") as fh:
                        fh.write(json.dumps({"key": k, "point": pt.to_json()}) + "\n")
                        fh.flush()
                        os.fsync(fh.fileno())
                if progress is not None:
                    progress(pt)
            out.append(done[k])
    finally:
        if pool is not None:
            pool.shutdown()
    return out


def breakeven_scan(p0: float, eta_grid: Sequence[float], L_list: Sequence[int],
                   samples: int, seed: int = 0, workers: int = 1,
                   checkpoint: str | Path | None = None, progress=None) -> list[RatePoint]:
    """Logical error vs loss per qubit (dB) at fixed circuit error p0; p_loss grows as L^2."""
    spec = SweepSpec(L=tuple(L_list), p=(p0,), samples=samples, seed=seed, eta=tuple(eta_grid))
    return run_sweep(spec, checkpoint, workers, progress)


def breakeven_crossing(points: Iterable[RatePoint], p0: float) -> dict:
    """Summarize where min over L of p_logic crosses p0 as loss grows.

    Returns the largest eta with some size below p0, the smallest eta above it with no size
    below p0, and their geometric midpoint.
    """
    by_eta: dict[float, list[RatePoint]] = {}
    for pt in points:
        by_eta.setdefault(pt.eta, []).append(pt)
    etas = sorted(by_eta)
    good = [e for e in etas if any(pt.p_logic < p0 for pt in by_eta[e])]
    bad = [e for e in etas if not any(pt.p_logic < p0 for pt in by_eta[e])]
    lo = max(good) if good else None
    hi = min((e for e in bad if lo is None or e > lo), default=None)
    mid = math.sqrt(lo * hi) if lo and hi else None
    return {"last_below": lo, "first_above": hi, "crossing": mid}


def to_csv(points: Iterable[RatePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + ("eta",))
    for pt in points:
        w.writerow(pt.row() + ["" if pt.eta is None else repr(pt.eta)])
    return buf.getvalue()


def from_csv(text: str) -> list[RatePoint]:
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    out = []
    for r in csv.DictReader(rows):
        out.append(RatePoint(int(r["L"]), float(r["p"]), float(r["p_loss"]), int(r["n"]),
                             int(r["fails"]), int(r.get("fails_primal") or 0),
                             int(r.get("fails_dual") or 0), int(r.get("percolated") or 0),
                             float(r["eta"]) if r.get("eta") else None))
    return out
