"""RHG lattice on a 3-torus, its primal/dual syndrome graphs and loss-merged decoding graphs.

Indices: a syndrome vertex (cell) v = (x*L + y)*L + z; the edge (qubit) along axis a leaving v
has index a*L^3 + v and ends at v + e_a (mod L).  The qubit's face type is its axis.
Cluster coordinates: primal cells sit at (2x+1, 2y+1, 2z+1) and primal-face qubits at cell + e_a;
dual cells sit at (2x, 2y, 2z) with edge qubits at cell + e_a.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._unionfind import components_with_wrap, relabel
from .error_model import EffectiveRates, edge_weights, supercheck_rates

AXES = "xyz"
PAIR_KINDS = ("xy", "xz", "yz", "zy")


# ---------------------------------------------------------------------------
# generic periodic lattices (also used by the percolation module)

@dataclass(frozen=True)
class PeriodicLattice:
    """Translation-invariant bond lattice: bonds v -> v + d for every site and every offset d."""
    L: int
    dim: int
    offsets: tuple[tuple[int, ...], ...]

    @property
    def n_sites(self) -> int:
        return self.L ** self.dim

    @property
    def n_bonds(self) -> int:
        return self.n_sites * len(self.offsets)

    @property
    def degree(self) -> int:
        return 2 * len(self.offsets)

    def site_coords(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(self.L)] * self.dim, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def site_index(self, coords: np.ndarray) -> np.ndarray:
        c = np.mod(coords, self.L)
        idx = np.zeros(c.shape[0], dtype=np.int64)
        for a in range(self.dim):
            idx = idx * self.L + c[:, a]
        return idx

    @cached_property
    def bonds(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(src, dst, displacement padded to 3 components), bond index = offset*n_sites + site."""
        c = self.site_coords()
        src, dst, disp = [], [], []
        for d in self.offsets:
            dv = np.asarray(d, dtype=np.int64)
            src.append(self.site_index(c))
            dst.append(self.site_index(c + dv))
            pad = np.zeros(3, dtype=np.int64)
            pad[:self.dim] = dv
            disp.append(np.broadcast_to(pad, (len(c), 3)))
        return (np.concatenate(src), np.concatenate(dst),
                np.ascontiguousarray(np.concatenate(disp)))


def _perms_with_signs(base: tuple[int, int, int]) -> set[tuple[int, int, int]]:
    out = set()
    for perm in ({(base[i], base[j], base[k]) for i, j, k in
                  ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))}):
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    out.add((perm[0] * sx, perm[1] * sy, perm[2] * sz))
    return out


def _half(offsets: set[tuple[int, ...]]) -> tuple[tuple[int, ...], ...]:
    """One representative of each +-d pair (the lexicographically positive one)."""
    return tuple(sorted(d for d in offsets if tuple(-x for x in d) < d))


def simple_cubic(L: int) -> PeriodicLattice:
    return PeriodicLattice(L, 3, ((1, 0, 0), (0, 1, 0), (0, 0, 1)))


def square2d(L: int) -> PeriodicLattice:
    return PeriodicLattice(L, 2, ((1, 0), (0, 1)))


CARVE_NEIGHBOURS = _perms_with_signs((1, 0, 0)) | _perms_with_signs((1, 1, 0)) | _perms_with_signs((2, 0, 0))


def carve_adjacency(L: int) -> PeriodicLattice:
    """Extended-neighbour graph of the carved lattice: 6 + 12 + 6 neighbours per site.

    Offsets are in syndrome-lattice units (one unit = two cluster spacings), so they sit at
    cluster distances 2, 2*sqrt(2) and 4.
    """
    if L < 4:
        raise ValueError("carve_adjacency needs L >= 4")
    return PeriodicLattice(L, 3, _half(CARVE_NEIGHBOURS))


LATTICES = {"simple_cubic": simple_cubic, "carve_extended": carve_adjacency, "square2d": square2d}


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RHGLattice:
    L: int

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("RHG lattice needs L >= 2")

    @property
    def n_cells(self) -> int:
        return self.L ** 3

    @property
    def n_qubits(self) -> int:
        """Per parity class (primal or dual)."""
        return 3 * self.L ** 3

    def cell_coords(self, sublattice: str = "primal") -> np.ndarray:
        c = simple_cubic(self.L).site_coords()
        return 2 * c + (1 if sublattice == "primal" else 0)

    def qubit_coords(self, sublattice: str = "primal") -> np.ndarray:
        cells = self.cell_coords(sublattice)
        out = np.concatenate([cells + np.eye(3, dtype=np.int64)[a] for a in range(3)])
        return np.mod(out, 2 * self.L)

    def face_types(self) -> np.ndarray:
        return np.repeat(np.arange(3), self.n_cells)


def build_rhg(L: int) -> RHGLattice:
    if L % 2:
        raise ValueError("periodic RHG closure needs even L")
    return RHGLattice(L)


@dataclass(frozen=True)
class SyndromeGraph:
    L: int
    sublattice: str

    @property
    def n_vertices(self) -> int:
        return self.L ** 3

    @property
    def n_edges(self) -> int:
        return 3 * self.L ** 3

    @cached_property
    def _arrays(self):
        return simple_cubic(self.L).bonds

    @property
    def src(self) -> np.ndarray:
        return self._arrays[0]

    @property
    def dst(self) -> np.ndarray:
        return self._arrays[1]

    @property
    def disp(self) -> np.ndarray:
        return self._arrays[2]

    @cached_property
    def axis(self) -> np.ndarray:
        return np.repeat(np.arange(3), self.n_vertices)

    @cached_property
    def coords(self) -> np.ndarray:
        return RHGLattice(self.L).qubit_coords(self.sublattice)

    @cached_property
    def check_matrix(self) -> sp.csc_matrix:
        """Vertex-by-edge incidence over GF(2)."""
        E = self.n_edges
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([np.arange(E), np.arange(E)])
        return sp.csc_matrix((np.ones(2 * E, dtype=np.uint8), (rows, cols)),
                             shape=(self.n_vertices, E))

    @cached_property
    def crossings(self) -> np.ndarray:
        """(3, E) indicator: edge crosses the cut plane between coordinate L-1 and 0 on its axis."""
        c = simple_cubic(self.L).site_coords()
        out = np.zeros((3, self.n_edges), dtype=np.uint8)
        for a in range(3):
            out[a, a * self.n_vertices:(a + 1) * self.n_vertices] = c[:, a] == self.L - 1
        return out

    def crossings_at(self, planes: tuple[int, int, int]) -> np.ndarray:
        """Same with the cut between coordinate planes[a] and planes[a]+1."""
        c = simple_cubic(self.L).site_coords()
        out = np.zeros((3, self.n_edges), dtype=np.uint8)
        for a in range(3):
            out[a, a * self.n_vertices:(a + 1) * self.n_vertices] = c[:, a] == planes[a] % self.L
        return out

    @cached_property
    def observables_matrix(self) -> sp.csc_matrix:
        return sp.csc_matrix(self.crossings)

    def edge_rates(self, rates: EffectiveRates) -> np.ndarray:
        return rates.axis[self.axis]

    def edge_index(self, axis: int, v: int) -> int:
        return axis * self.n_vertices + v

    def vertex(self, x: int, y: int, z: int) -> int:
        L = self.L
        return ((x % L) * L + y % L) * L + z % L

    def syndrome(self, flips: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_vertices, dtype=np.uint8)
        f = flips.astype(bool)
        np.bitwise_xor.at(out, self.src[f], 1)
        np.bitwise_xor.at(out, self.dst[f], 1)
        return out

    def to_csv(self, path: str | Path | None = None, q: np.ndarray | None = None,
               w: np.ndarray | None = None, lost: np.ndarray | None = None) -> str:
        q = np.zeros(self.n_edges) if q is None else q
        w = edge_weights(q) if w is None else w
        lost = np.zeros(self.n_edges, dtype=bool) if lost is None else lost
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["v1", "v2", "type", "q", "w", "lost"])
        for k in range(self.n_edges):
            wr.writerow([int(self.src[k]), int(self.dst[k]), AXES[self.axis[k]],
                         repr(float(q[k])), repr(float(w[k])), int(bool(lost[k]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def primal_syndrome(lattice: RHGLattice) -> SyndromeGraph:
    return SyndromeGraph(lattice.L, "primal")


def dual_syndrome(lattice: RHGLattice) -> SyndromeGraph:
    return SyndromeGraph(lattice.L, "dual")


def correlated_pairs(graph: SyndromeGraph) -> dict[str, np.ndarray]:
    return _pairs_for(graph.L)


@lru_cache(maxsize=16)
def _pairs_for(L: int) -> dict[str, np.ndarray]:
    """Edge pairs flipped together by one photon's scattering error, by kind.

    A chain photon scattered with two x-faces produces x-edge pairs displaced along y ("xy")
    or z ("xz"); an x-face photon produces dual-type pairs: y-edges displaced along z ("yz")
    and z-edges displaced along y ("zy").  Returns kind -> (n_pairs, 2) edge index array.
    """
    c = simple_cubic(L).site_coords()
    v = np.arange(L ** 3)
    N = L ** 3

    def shifted(d):
        return simple_cubic(L).site_index(c + np.asarray(d))

    return {
        "xy": np.stack([0 * N + v, 0 * N + shifted((0, 1, 0))], axis=1),
        "xz": np.stack([0 * N + v, 0 * N + shifted((0, 0, 1))], axis=1),
        "yz": np.stack([1 * N + v, 1 * N + shifted((0, 0, 1))], axis=1),
        "zy": np.stack([2 * N + v, 2 * N + shifted((0, 1, 0))], axis=1),
    }


def pair_rates(rates: EffectiveRates) -> dict[str, float]:
    return {"xy": float(rates.q_xy), "xz": float(rates.q_xz),
            "yz": float(rates.q_yz), "zy": float(rates.q_zy)}


# ---------------------------------------------------------------------------
# loss merging

@dataclass
class MergedGraph:
    graph: SyndromeGraph
    lost: np.ndarray              # (E,) bool
    supervertex: np.ndarray       # (V,) component label 0..n_super-1
    n_super: int
    bundle_u: np.ndarray          # (B,) supervertex endpoints, u < v
    bundle_v: np.ndarray
    bundle_n: np.ndarray          # (B, 3) multiplicities by face type
    edge_bundle: np.ndarray       # (E,) bundle index; -1 for lost or internal edges
    internal: np.ndarray          # non-lost edges with both ends in one supervertex
    percolated: bool
    p_l: np.ndarray = field(default=None)

    @property
    def n_bundles(self) -> int:
        return len(self.bundle_u)

    def with_rates(self, q_axis: np.ndarray) -> "MergedGraph":
        self.p_l = supercheck_rates(self.bundle_n, q_axis)
        return self

    def decoding_weights(self, q_axis: np.ndarray) -> np.ndarray:
        """Weights on the original lattice: lost edges 0, others w(p_l) of their bundle."""
        if self.p_l is None:
            self.with_rates(q_axis)
        g = self.graph
        w = np.zeros(g.n_edges)
        keep = self.edge_bundle >= 0
        w[keep] = edge_weights(self.p_l)[self.edge_bundle[keep]]
        w[self.internal] = edge_weights(np.asarray(q_axis)[g.axis[self.internal]])
        return w

    def super_syndrome(self, syndrome: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_super, dtype=np.uint8)
        np.bitwise_xor.at(out, self.supervertex, syndrome.astype(np.uint8))
        return out


def merge_superchecks(graph: SyndromeGraph, lost: np.ndarray,
                      q_axis: np.ndarray | None = None) -> MergedGraph:
    lost = np.asarray(lost)
    if lost.dtype != bool:
        m = np.zeros(graph.n_edges, dtype=bool)
        m[lost] = True
        lost = m
    labels, wrapped = components_with_wrap(graph.n_vertices, graph.src, graph.dst, graph.disp, lost)
    sv, n_super = relabel(labels)
    a = sv[graph.src]
    b = sv[graph.dst]
    alive = ~lost
    between = alive & (a != b)
    internal = np.flatnonzero(alive & (a == b))
    u = np.minimum(a, b)
    v = np.maximum(a, b)
    key = u.astype(np.int64) * n_super + v
    idx = np.flatnonzero(between)
    uniq, inv = np.unique(key[idx], return_inverse=True)
    nb = len(uniq)
    counts = np.zeros((nb, 3), dtype=np.int64)
    np.add.at(counts, (inv, graph.axis[idx]), 1)
    edge_bundle = np.full(graph.n_edges, -1, dtype=np.int64)
    edge_bundle[idx] = inv
    mg = MergedGraph(graph, lost, sv, n_super, uniq // n_super, uniq % n_super, counts,
                     edge_bundle, internal, bool(wrapped))
    if q_axis is not None:
        mg.with_rates(q_axis)
    return mg
