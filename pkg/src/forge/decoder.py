"""Error sampling, defect matching and homology classification on the periodic syndrome graphs.

Two matching engines share the same inputs:

* ``pymatching`` (default): sparse blossom on the full weighted lattice, observables tracked
  through the cut-plane crossing matrix;
* ``reference``: Dijkstra from each defect (deterministic tie-breaking by edge index, i.e. by
  (axis, coordinate)), exact blossom on the defect distance matrix via networkx, recovery paths
  XOR-ed onto the error and winding parities read off the cut planes.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np
import pymatching

from .error_model import ErrorModelParams, effective_rates, edge_weights
from .lattice import (
    MergedGraph, SyndromeGraph, build_rhg, correlated_pairs, dual_syndrome, merge_superchecks,
    pair_rates, primal_syndrome,
)

SUCCESS = "success"
LOGICAL_FAILURE = "logical_failure"
PERCOLATION_FAILURE = "percolation_failure"


class DecoderInvariantError(RuntimeError):
    """Internal inconsistency (odd defect count, broken recovery chain); indicates a bug."""


@dataclass
class ErrorPattern:
    flips: np.ndarray       # (E,) uint8
    lost: np.ndarray        # (E,) bool
    defects: np.ndarray     # vertex indices with odd parity

    @property
    def flipped_edges(self) -> np.ndarray:
        return np.flatnonzero(self.flips)


@dataclass
class Matching:
    pairs: list[tuple[int, int]]                     # defect vertex pairs
    paths: list[list[int]] = field(default_factory=list)
    weight: float = 0.0

    def edge_mask(self, n_edges: int) -> np.ndarray:
        m = np.zeros(n_edges, dtype=np.uint8)
        for p in self.paths:
            for e in p:
                m[e] ^= 1
        return m


# ---------------------------------------------------------------------------
# sampling

def sample_errors(graph: SyndromeGraph | MergedGraph, q_axis: np.ndarray,
                  rng: np.random.Generator, lost: np.ndarray | None = None,
                  pairs: dict[str, float] | None = None) -> ErrorPattern:
    """Independent flips plus correlated pair flips.

    On a SyndromeGraph each non-lost edge flips with its face-type rate.  On a MergedGraph each
    bundle flips with its supercheck rate and the flip is placed on one uniformly chosen
    constituent edge.  Lost edges carry a uniformly random value either way.
    """
    q_axis = np.asarray(q_axis, dtype=float)
    if isinstance(graph, MergedGraph):
        mg = graph
        g = mg.graph
        lost = mg.lost
        if mg.p_l is None:
            mg.with_rates(q_axis)
        flips = np.zeros(g.n_edges, dtype=np.uint8)
        hit = np.flatnonzero(rng.random(mg.n_bundles) < mg.p_l)
        if len(hit):
            members = np.flatnonzero(mg.edge_bundle >= 0)
            order = np.argsort(mg.edge_bundle[members], kind="stable")
            members = members[order]
            starts = np.searchsorted(mg.edge_bundle[members], hit)
            sizes = mg.bundle_n[hit].sum(axis=1)
            pick = starts + (rng.random(len(hit)) * sizes).astype(np.int64)
            flips[members[pick]] = 1
        internal = mg.internal
        flips[internal] = rng.random(len(internal)) < q_axis[g.axis[internal]]
    else:
        g = graph
        if lost is None:
            lost = np.zeros(g.n_edges, dtype=bool)
        u = rng.random(g.n_edges)
        flips = (u < np.where(lost, 0.5, q_axis[g.axis])).astype(np.uint8)
    if pairs:
        table = correlated_pairs(g)
        for kind in sorted(pairs):
            q = pairs[kind]
            pr = table[kind]
            hit = rng.random(len(pr)) < q
            if hit.any():
                np.bitwise_xor.at(flips, pr[hit].ravel(), 1)
    defects = np.flatnonzero(g.syndrome(flips))
    return ErrorPattern(flips, np.asarray(lost, dtype=bool), defects)


# ---------------------------------------------------------------------------
# reference matching

def _incidence(graph: SyndromeGraph) -> tuple[np.ndarray, np.ndarray]:
    """Per vertex, its 6 incident edges sorted by index, and the far endpoint of each."""
    V = graph.n_vertices
    E = graph.n_edges
    ends = np.concatenate([graph.src, graph.dst])
    edges = np.concatenate([np.arange(E), np.arange(E)])
    other = np.concatenate([graph.dst, graph.src])
    order = np.lexsort((edges, ends))
    inc = edges[order].reshape(V, 6)
    far = other[order].reshape(V, 6)
    return inc, far


def dijkstra(graph: SyndromeGraph, weights: np.ndarray, source: int,
             targets: set[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Shortest distances and predecessor edges; equal-distance ties go to the smaller edge index."""
    inc, far = _incidence(graph)
    V = graph.n_vertices
    dist = np.full(V, np.inf)
    pred = np.full(V, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(V, dtype=bool)
    remaining = set(targets) if targets is not None else None
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if remaining is not None:
            remaining.discard(u)
            if not remaining:
                break
        for e, v in zip(inc[u], far[u]):
            if done[v]:
                continue
            nd = d + weights[e]
            if nd < dist[v] or (nd == dist[v] and e < pred[v]):
                dist[v] = nd
                pred[v] = e
                heapq.heappush(heap, (nd, int(v)))
    return dist, pred


def _walk(graph: SyndromeGraph, pred: np.ndarray, source: int, target: int) -> list[int]:
    path = []
    v = target
    while v != source:
        e = int(pred[v])
        if e < 0:
            raise DecoderInvariantError("no recovery path")
        path.append(e)
        v = int(graph.src[e]) if graph.dst[e] == v else int(graph.dst[e])
    return path[::-1]


def defect_distances(graph: SyndromeGraph, defects, weights: np.ndarray
                     ) -> tuple[np.ndarray, list[np.ndarray]]:
    """Distance matrix between defects and one predecessor-edge array per defect."""
    defects = [int(d) for d in defects]
    k = len(defects)
    D = np.zeros((k, k))
    preds = []
    for i, s in enumerate(defects):
        dist, pred = dijkstra(graph, weights, s, set(defects[i + 1:]) or None)
        D[i] = dist[defects]
        preds.append(pred)
    D = np.minimum(D, D.T)   # rows only finalised for later defects
    return D, preds


def mwpm(dist: np.ndarray) -> list[tuple[int, int]]:
    """Exact minimum-weight perfect matching on a complete graph (indices into dist)."""
    k = dist.shape[0]
    if k % 2:
        raise DecoderInvariantError(f"odd number of defects ({k})")
    if k == 0:
        return []
    g = nx.Graph()
    for i, j in itertools.combinations(range(k), 2):
        g.add_edge(i, j, weight=float(dist[i, j]))
    m = nx.min_weight_matching(g)
    pairs = sorted(tuple(sorted(p)) for p in m)
    if len(pairs) != k // 2:
        raise DecoderInvariantError("matching is not perfect")
    return pairs


def matching_weight(dist: np.ndarray, pairs) -> float:
    return math.fsum(float(dist[i, j]) for i, j in pairs)


def brute_force_mwpm(dist: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Enumerate every perfect matching (k <= 10 gives at most 945)."""
    k = dist.shape[0]
    best = (math.inf, [])

    def rec(rest, acc):
        nonlocal best
        if not rest:
            w = matching_weight(dist, acc)
            if w < best[0]:
                best = (w, list(acc))
            return
        a = rest[0]
        for b in rest[1:]:
            rec([r for r in rest[1:] if r != b], acc + [(a, b)])

    rec(list(range(k)), [])
    return best


def homology_class(graph: SyndromeGraph, chain: np.ndarray,
                   planes: tuple[int, int, int] | None = None) -> tuple[int, int, int]:
    """Winding parities of a closed chain (edge mask) through three orthogonal cut planes."""
    chain = np.asarray(chain, dtype=np.uint8)
    if graph.syndrome(chain).any():
        raise DecoderInvariantError("chain has a boundary")
    cross = graph.crossings if planes is None else graph.crossings_at(planes)
    w = (cross.astype(np.int64) @ chain.astype(np.int64)) % 2
    return tuple(int(x) for x in w)


def reference_decode(graph: SyndromeGraph, pattern: ErrorPattern, weights: np.ndarray,
                     oracle: bool = False) -> tuple[Matching, np.ndarray]:
    """Returns the matching and the recovery edge mask."""
    defects = [int(d) for d in pattern.defects]
    D, preds = defect_distances(graph, defects, weights)
    pairs = mwpm(D)
    if oracle and 0 < len(defects) <= 10:
        bw, _ = brute_force_mwpm(D)
        if matching_weight(D, pairs) != bw:
            raise DecoderInvariantError("blossom matching differs from brute force")
    paths = [_walk(graph, preds[i], defects[i], defects[j]) for i, j in pairs]
    m = Matching([(defects[i], defects[j]) for i, j in pairs], paths, matching_weight(D, pairs))
    return m, m.edge_mask(graph.n_edges)


# ---------------------------------------------------------------------------
# full trials

@dataclass(frozen=True)
class TrialOutcome:
    status: str
    primal_failed: bool
    dual_failed: bool
    primal_percolated: bool = False
    dual_percolated: bool = False

    @property
    def failed(self) -> bool:
        return self.status != SUCCESS


class TrialEngine:
    """Holds the per-(L, params) precomputation; each trial only touches its own RNG."""

    def __init__(self, L: int, params: ErrorModelParams, engine: str = "pymatching",
                 correlated: bool = True, oracle_matchings: bool = False):
        if engine not in ("pymatching", "reference"):
            raise ValueError(f"unknown engine {engine!r}")
        lat = build_rhg(L)
        self.L = L
        self.params = params
        self.engine = engine
        self.oracle = oracle_matchings
        self.graphs = (primal_syndrome(lat), dual_syndrome(lat))
        self.rates = effective_rates(params)
        self.q_axis = self.rates.axis
        self.pairs = pair_rates(self.rates) if correlated else None
        if self.pairs is not None and not any(self.pairs.values()):
            self.pairs = None
        self.p_loss = float(params.p_loss)

    @cached_property
    def base_weights(self) -> np.ndarray:
        return edge_weights(self.q_axis[self.graphs[0].axis])

    @cached_property
    def static_matching(self) -> pymatching.Matching:
        g = self.graphs[0]
        return pymatching.Matching.from_check_matrix(
            g.check_matrix, weights=self.base_weights, faults_matrix=g.observables_matrix)

    def sample(self, g: SyndromeGraph, rng: np.random.Generator
               ) -> tuple[ErrorPattern, MergedGraph | None]:
        if self.p_loss > 0:
            lost = rng.random(g.n_edges) < self.p_loss
            mg = merge_superchecks(g, lost, self.q_axis)
        else:
            lost = np.zeros(g.n_edges, dtype=bool)
            mg = None
        return sample_errors(g, self.q_axis, rng, lost, self.pairs), mg

    def weights(self, mg: MergedGraph | None) -> np.ndarray:
        return self.base_weights if mg is None else mg.decoding_weights(self.q_axis)

    def decode(self, g: SyndromeGraph, pat: ErrorPattern, mg: MergedGraph | None) -> bool:
        """True if the recovery leaves a non-trivial winding."""
        if len(pat.defects) == 0:
            recovery_obs = np.zeros(3, dtype=np.uint8)
        elif self.engine == "reference":
            _, rec = reference_decode(g, pat, self.weights(mg), self.oracle)
            recovery_obs = (g.crossings.astype(np.int64) @ rec) % 2
        else:
            m = self.static_matching if mg is None else pymatching.Matching.from_check_matrix(
                g.check_matrix, weights=self.weights(mg), faults_matrix=g.observables_matrix)
            syn = np.zeros(g.n_vertices, dtype=np.uint8)
            syn[pat.defects] = 1
            recovery_obs = m.decode(syn)
            if self.oracle and len(pat.defects) <= 10:
                # blossom vs enumeration on the exact defect distances (raises on mismatch)
                reference_decode(g, pat, self.weights(mg), True)
        err_obs = (g.crossings.astype(np.int64) @ pat.flips.astype(np.int64)) % 2
        return bool(((err_obs + recovery_obs) % 2).any())

    def trial(self, rng: np.random.Generator | int) -> TrialOutcome:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        fails = []
        percs = []
        for g in self.graphs:
            pat, mg = self.sample(g, rng)
            perc = bool(mg is not None and mg.percolated)
            percs.append(perc)
            fails.append(True if perc else self.decode(g, pat, mg))
        if any(percs):
            status = PERCOLATION_FAILURE
        elif any(fails):
            status = LOGICAL_FAILURE
        else:
            status = SUCCESS
        return TrialOutcome(status, fails[0], fails[1], percs[0], percs[1])

    def run_batch(self, rngs) -> np.ndarray:
        """Outcomes as an (n, 4) bool array: primal fail, dual fail, primal perc, dual perc.

        Loss-free batches with the pymatching engine are sampled trial by trial and decoded
        together; results are identical to calling trial() on each generator.
        """
        rngs = list(rngs)
        out = np.zeros((len(rngs), 4), dtype=bool)
        if self.p_loss > 0 or self.engine != "pymatching" or self.oracle:
            for i, r in enumerate(rngs):
                o = self.trial(r)
                out[i] = (o.primal_failed, o.dual_failed, o.primal_percolated, o.dual_percolated)
            return out
        n = len(rngs)
        g = self.graphs[0]
        syn = np.zeros((2, n, g.n_vertices), dtype=np.uint8)
        err = np.zeros((2, n, 3), dtype=np.uint8)
        cross = g.crossings.astype(np.int64)
        for i, r in enumerate(rngs):
            for s, gs in enumerate(self.graphs):
                pat, _ = self.sample(gs, r)
                syn[s, i, pat.defects] = 1
                err[s, i] = (cross @ pat.flips.astype(np.int64)) % 2
        for s in range(2):
            pred = self.static_matching.decode_batch(syn[s])
            out[:, s] = ((pred ^ err[s]) != 0).any(axis=1)
        return out


def decode_trial(L: int, params: ErrorModelParams, seed: int | np.random.Generator,
                 engine: str = "pymatching", oracle_matchings: bool = False,
                 correlated: bool = True) -> TrialOutcome:
    return TrialEngine(L, params, engine, correlated, oracle_matchings).trial(seed)
