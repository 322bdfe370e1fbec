"""Bond percolation on periodic lattices: torus-wrapping probability and critical points.

Each sample shuffles the bonds (seeded per sample) and adds them one by one until a cluster wraps
(Newman-Ziff).  The index K of the first wrapping bond gives the whole curve for that sample:
at bond probability p it wraps iff at least K bonds are open, so the canonical-ensemble
estimate is the mean over samples of P[Binomial(N_b, p) >= K].
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.stats import binom

from ._unionfind import components_with_wrap, newman_ziff_wrap_indices
from .lattice import LATTICES, PeriodicLattice
from .montecarlo import derive_seed

SIMPLE_CUBIC_PC = 0.2488


def get_lattice(name: str, L: int) -> PeriodicLattice:
    try:
        return LATTICES[name](L)
    except KeyError:
        raise ValueError(f"unknown lattice {name!r}; choose from {sorted(LATTICES)}") from None


@dataclass(frozen=True)
class PercolationSpec:
    lattice: str = "simple_cubic"
    L: tuple[int, ...] = (8, 12, 16)
    p: tuple[float, ...] = ()
    samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.lattice not in LATTICES:
            raise ValueError(f"unknown lattice {self.lattice!r}")
        if any(L % 2 for L in self.L):
            raise ValueError("sizes must be even")
        if any(not 0 <= p <= 1 for p in self.p):
            raise ValueError("p grid must lie in [0, 1]")

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def wrap_indices(lattice: str, L: int, samples: int, seed: int = 0) -> np.ndarray:
    """First-wrap bond count K per sample (N_b + 1 if the full lattice never wraps)."""
    lat = get_lattice(lattice, L)
    src, dst, disp = lat.bonds
    seeds = np.array([derive_seed(seed, L, s) & 0xFFFFFFFF for s in range(samples)], dtype=np.int64)
    return newman_ziff_wrap_indices(lat.n_sites, src, dst, disp, seeds)


def wrapping_curve(K: np.ndarray, n_bonds: int, p) -> np.ndarray:
    """Canonical-ensemble wrapping probability at each p."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.empty(p.shape)
    for i, pi in enumerate(p):
        out[i] = float(np.mean(binom.sf(K - 1, n_bonds, pi)))
    return out


def wrapping_probability(lattice: str, L: int, p: float, samples: int, seed: int = 0,
                         mode: str = "canonical") -> float:
    """Fraction of samples with a torus-wrapping open cluster.

    mode="canonical" uses the convolution over bond counts; mode="coupled" thresholds the same
    per-bond uniforms at p (so the estimate is monotone in p sample by sample).
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    K = wrap_indices(lattice, L, samples, seed)
    nb = get_lattice(lattice, L).n_bonds
    if mode == "canonical":
        return float(wrapping_curve(K, nb, p)[0])
    if mode == "coupled":
        return float(np.mean(coupled_wraps(K, nb, p, seed, L)))
    raise ValueError(f"unknown mode {mode!r}")


def coupled_wraps(K: np.ndarray, n_bonds: int, p: float, seed: int, L: int) -> np.ndarray:
    """Per sample: does the open set {bonds with u < p} wrap?

    The uniforms are attached to the sample's shuffled order as its order statistics, so the
    open set is the first M bonds of the order with M = #(u < p); it wraps iff M >= K.
    """
    out = np.empty(len(K), dtype=bool)
    for s in range(len(K)):
        rng = np.random.default_rng(derive_seed(seed, L, s, 1))
        if K[s] > n_bonds:
            out[s] = False
            continue
        # the K-th smallest of n_bonds uniforms ~ Beta(K, n_bonds - K + 1)
        uk = rng.beta(K[s], n_bonds - K[s] + 1)
        out[s] = uk < p
    return out


@dataclass
class PcEstimate:
    lattice: str
    p_c: float
    uncertainty: float | None
    crossings: list[tuple[int, int, float]] = field(default_factory=list)
    sizes: tuple[int, ...] = ()
    samples: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["crossings"] = [{"sizes": [a, b], "p": c} for a, b, c in self.crossings]
        d["sizes"] = list(self.sizes)
        return d


def estimate_pc(spec: PercolationSpec, bracket: tuple[float, float] | None = None) -> PcEstimate:
    """Crossing of the smooth wrapping curves R_L(p) for each pair of sizes; mean and spread."""
    if len(spec.L) < 2:
        raise ValueError("need at least two sizes")
    Ks = {}
    nbs = {}
    for L in spec.L:
        Ks[L] = wrap_indices(spec.lattice, L, spec.samples, spec.seed)
        nbs[L] = get_lattice(spec.lattice, L).n_bonds
    if bracket is None:
        # median wrapping fraction of the largest size brackets the crossing well
        Lm = max(spec.L)
        f = np.median(Ks[Lm]) / nbs[Lm]
        bracket = (max(1e-4, 0.5 * f), min(1 - 1e-4, 1.5 * f))
    crossings = []
    for a, b in itertools.combinations(sorted(spec.L), 2):
        def diff(p):
            return wrapping_curve(Ks[a], nbs[a], p)[0] - wrapping_curve(Ks[b], nbs[b], p)[0]
        lo, hi = bracket
        grid = np.linspace(lo, hi, 41)
        vals = [diff(x) for x in grid]
        root = None
        for i in range(len(grid) - 1):
            if vals[i] == 0:
                root = grid[i]
                break
            if vals[i] * vals[i + 1] < 0:
                root = brentq(diff, grid[i], grid[i + 1], xtol=1e-7)
                break
        if root is not None:
            crossings.append((a, b, float(root)))
    if not crossings:
        raise RuntimeError("wrapping curves do not cross in the bracket")
    vals = np.array([c[2] for c in crossings])
    unc = float(np.std(vals)) if len(vals) >= 2 else None
    return PcEstimate(spec.lattice, float(vals.mean()), unc, crossings, tuple(spec.L), spec.samples)


def coordination_estimate(z: int) -> float:
    if z < 2:
        raise ValueError("z must be >= 2")
    return 1.0 / (z - 1)


def wraps_by_labeling(lattice: PeriodicLattice, open_bonds: np.ndarray) -> bool:
    """Oracle: BFS over open bonds assigning unwrapped positions; wraps iff a site is reached
    at two different positions."""
    src, dst, disp = lattice.bonds
    adj: dict[int, list[tuple[int, np.ndarray]]] = {}
    for k in np.flatnonzero(open_bonds):
        a, b, d = int(src[k]), int(dst[k]), disp[k]
        adj.setdefault(a, []).append((b, d))
        adj.setdefault(b, []).append((a, -d))
    pos: dict[int, np.ndarray] = {}
    for start in adj:
        if start in pos:
            continue
        pos[start] = np.zeros(3, dtype=np.int64)
        stack = [start]
        while stack:
            u = stack.pop()
            for v, d in adj[u]:
                q = pos[u] + d
                if v not in pos:
                    pos[v] = q
                    stack.append(v)
                elif not np.array_equal(pos[v], q):
                    return True
    return False


def wraps_union_find(lattice: PeriodicLattice, open_bonds: np.ndarray) -> bool:
    src, dst, disp = lattice.bonds
    _, w = components_with_wrap(lattice.n_sites, src, dst, disp, np.asarray(open_bonds, dtype=bool))
    return bool(w)
