"""Stabilizer states on n qubits, Clifford gates, Pauli measurements and graph states.

A state keeps only its n stabilizer generators as binary rows (x | z) plus a
sign bit per row. A row encodes (-1)^r * prod_j P_j with P_j = X, Z or Y for
(x_j, z_j) = (1, 0), (0, 1), (1, 1). Global phase is not tracked.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SINGLE_QUBIT_GATES = (
    "I", "H", "X", "Y", "Z", "S", "S_DAG",
    "SQRT_IX", "SQRT_IX_DAG", "SQRT_IZ", "SQRT_IZ_DAG",
)
TWO_QUBIT_GATES = ("CZ", "CNOT")


class PreconditionError(ValueError):
    """An operation was asked to act on a state that violates its precondition."""


class NotGraphReachable(ValueError):
    pass


# ---------------------------------------------------------------------------
# graphs

@dataclass(frozen=True)
class GraphAdjacency:
    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "GraphAdjacency":
        return cls(n, frozenset(tuple(e) for e in edges))

    def neighbors(self, v: int) -> list[int]:
        out = [j for i, j in self.edges if i == v] + [i for i, j in self.edges if j == v]
        return sorted(out)

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.uint8)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1
        return a

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def relabel(self, mapping: dict[int, int], n: int | None = None) -> "GraphAdjacency":
        n = self.n if n is None else n
        return GraphAdjacency(n, frozenset((mapping[i], mapping[j]) for i, j in self.edges))

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_json(cls, obj: dict | str) -> "GraphAdjacency":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls.from_edges(int(obj["n"]), obj["edges"])


def local_complement(graph: GraphAdjacency, v: int) -> GraphAdjacency:
    """Toggle every edge between neighbours of v."""
    nb = graph.neighbors(v)
    edges = set(graph.edges)
    for a in range(len(nb)):
        for b in range(a + 1, len(nb)):
            edges ^= {(nb[a], nb[b])}
    return GraphAdjacency(graph.n, frozenset(edges))


# ---------------------------------------------------------------------------
# tableau

def _g_table() -> np.ndarray:
    t = np.zeros(16, dtype=np.int8)
    for x1, z1, x2, z2 in itertools.product((0, 1), repeat=4):
        if x1 and z1:
            g = z2 - x2
        elif x1:
            g = z2 * (2 * x2 - 1)
        elif z1:
            g = x2 * (1 - 2 * z2)
        else:
            g = 0
        t[8 * x1 + 4 * z1 + 2 * x2 + z2] = g
    return t


_G = _g_table()


def _g_exponent(x1, z1, x2, z2):
    """Power of i picked up when multiplying Pauli (x1,z1) into (x2,z2), elementwise."""
    idx = (np.asarray(x1, dtype=np.uint8) << 3) | (np.asarray(z1, dtype=np.uint8) << 2) \
        | (np.asarray(x2, dtype=np.uint8) << 1) | np.asarray(z2, dtype=np.uint8)
    return _G[idx].astype(np.int64)


class StabilizerState:
    """Stabilizer generators of a pure n-qubit state.

    Gate methods act in place and return ``self`` so they can be chained; the
    module-level functions copy first.
    """

    __slots__ = ("n", "x", "z", "r")

    def __init__(self, n: int, x: np.ndarray | None = None, z: np.ndarray | None = None,
                 r: np.ndarray | None = None):
        self.n = int(n)
        if x is None:
            x = np.zeros((n, n), dtype=np.uint8)
            z = np.eye(n, dtype=np.uint8)
            r = np.zeros(n, dtype=np.uint8)
        self.x = np.ascontiguousarray(x, dtype=np.uint8)
        self.z = np.ascontiguousarray(z, dtype=np.uint8)
        self.r = np.ascontiguousarray(r, dtype=np.uint8)

    @classmethod
    def zeros(cls, n: int) -> "StabilizerState":
        return cls(n)

    @classmethod
    def plus(cls, n: int) -> "StabilizerState":
        return cls(n, np.eye(n, dtype=np.uint8), np.zeros((n, n), dtype=np.uint8),
                   np.zeros(n, dtype=np.uint8))

    @classmethod
    def from_strings(cls, rows: Sequence[str]) -> "StabilizerState":
        """Build from strings like '+XZI' or '-YY'."""
        n = len(rows[0].lstrip("+-"))
        x = np.zeros((len(rows), n), dtype=np.uint8)
        z = np.zeros_like(x)
        r = np.zeros(len(rows), dtype=np.uint8)
        for i, s in enumerate(rows):
            if s[0] in "+-":
                r[i] = s[0] == "-"
                s = s[1:]
            for j, c in enumerate(s):
                x[i, j] = c in "XY"
                z[i, j] = c in "ZY"
        return cls(n, x, z, r)

    def copy(self) -> "StabilizerState":
        return StabilizerState(self.n, self.x.copy(), self.z.copy(), self.r.copy())

    def tableau(self) -> np.ndarray:
        return np.hstack([self.x, self.z])

    def to_strings(self) -> list[str]:
        out = []
        for i in range(self.n):
            s = "-" if self.r[i] else "+"
            for j in range(self.n):
                s += "IXZY"[self.x[i, j] + 2 * self.z[i, j]]
            out.append(s)
        return out

    def __repr__(self) -> str:
        return f"StabilizerState({self.to_strings()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, StabilizerState) or other.n != self.n:
            return NotImplemented
        a, b = canonical_form(self), canonical_form(other)
        return (np.array_equal(a.x, b.x) and np.array_equal(a.z, b.z)
                and np.array_equal(a.r, b.r))

    __hash__ = None

    def _check(self, *qs: int):
        for q in qs:
            if not 0 <= q < self.n:
                raise IndexError(f"qubit {q} out of range for n={self.n}")
        if len(set(qs)) != len(qs):
            raise ValueError(f"repeated target in {qs}")

    # -- single-qubit Cliffords (column operations) --
    def h(self, q: int) -> "StabilizerState":
        self._check(q)
        x, z = self.x[:, q].copy(), self.z[:, q].copy()
        self.r ^= x & z
        self.x[:, q], self.z[:, q] = z, x
        return self

    def s(self, q: int) -> "StabilizerState":
        # X -> Y, Y -> -X
        self._check(q)
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]
        return self

    def s_dag(self, q: int) -> "StabilizerState":
        # X -> -Y, Y -> X
        self._check(q)
        self.r ^= self.x[:, q] & (1 ^ self.z[:, q])
        self.z[:, q] ^= self.x[:, q]
        return self

    def sqrt_ix(self, q: int) -> "StabilizerState":
        # exp(i pi/4 X): Z -> Y, Y -> -Z
        self._check(q)
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q] ^= self.z[:, q]
        return self

    def sqrt_ix_dag(self, q: int) -> "StabilizerState":
        # exp(-i pi/4 X): Z -> -Y, Y -> Z
        self._check(q)
        self.r ^= (1 ^ self.x[:, q]) & self.z[:, q]
        self.x[:, q] ^= self.z[:, q]
        return self

    def pauli_x(self, q: int) -> "StabilizerState":
        self._check(q)
        self.r ^= self.z[:, q]
        return self

    def pauli_z(self, q: int) -> "StabilizerState":
        self._check(q)
        self.r ^= self.x[:, q]
        return self

    def pauli_y(self, q: int) -> "StabilizerState":
        self._check(q)
        self.r ^= self.x[:, q] ^ self.z[:, q]
        return self

    # -- two-qubit gates --
    def cnot(self, c: int, t: int) -> "StabilizerState":
        self._check(c, t)
        xc, zc, xt, zt = self.x[:, c], self.z[:, c], self.x[:, t], self.z[:, t]
        self.r ^= xc & zt & (xt ^ zc ^ 1)
        self.x[:, t] ^= xc
        self.z[:, c] ^= zt
        return self

    def cz(self, a: int, b: int) -> "StabilizerState":
        self._check(a, b)
        xa, za, xb, zb = self.x[:, a], self.z[:, a], self.x[:, b], self.z[:, b]
        self.r ^= xa & xb & (za ^ zb)
        self.z[:, a] ^= xb
        self.z[:, b] ^= xa
        return self

    def apply(self, gate: str, *targets: int) -> "StabilizerState":
        g = gate.upper()
        fn = _GATE_METHODS.get(g)
        if fn is None:
            raise ValueError(f"unknown gate {gate!r}")
        arity = 2 if g in TWO_QUBIT_GATES else 1
        if len(targets) != arity:
            raise ValueError(f"gate {gate} takes {arity} target(s), got {len(targets)}")
        fn(self, *targets)
        return self

    # -- row algebra --
    def _rowsum(self, targets: np.ndarray, src: int) -> None:
        """Multiply row ``src`` into each row listed in ``targets``."""
        if len(targets) == 0:
            return
        g = _g_exponent(self.x[src][None, :], self.z[src][None, :],
                        self.x[targets], self.z[targets]).sum(axis=1)
        tot = (2 * self.r[targets].astype(np.int64) + 2 * int(self.r[src]) + g) % 4
        self.r[targets] = (tot == 2).astype(np.uint8)
        self.x[targets] ^= self.x[src]
        self.z[targets] ^= self.z[src]

    def pauli_sign(self, px: np.ndarray, pz: np.ndarray) -> int | None:
        """Return +1/-1 if (+/-) the Pauli (px, pz) lies in the stabilizer group, else None."""
        px = np.asarray(px, dtype=np.uint8)
        pz = np.asarray(pz, dtype=np.uint8)
        # must commute with every generator
        comm = (self.x.astype(np.int64) @ pz + self.z.astype(np.int64) @ px) % 2
        if comm.any():
            return None
        rows = _solve_rows(np.hstack([self.x, self.z]), np.concatenate([px, pz]))
        if rows is None:
            return None
        acc_x = np.zeros(self.n, dtype=np.uint8)
        acc_z = np.zeros(self.n, dtype=np.uint8)
        acc_r = 0
        for i in rows:
            g = int(_g_exponent(self.x[i], self.z[i], acc_x, acc_z).sum())
            acc_r = 1 if (2 * acc_r + 2 * int(self.r[i]) + g) % 4 == 2 else 0
            acc_x ^= self.x[i]
            acc_z ^= self.z[i]
        return -1 if acc_r else 1

    def single_pauli_sign(self, pauli: str, q: int) -> int | None:
        px = np.zeros(self.n, dtype=np.uint8)
        pz = np.zeros(self.n, dtype=np.uint8)
        px[q] = pauli in "XY"
        pz[q] = pauli in "ZY"
        return self.pauli_sign(px, pz)

    def measure_z(self, q: int, rng: np.random.Generator | None = None,
                  forced: int | None = None) -> int:
        """Measure Z_q in place; return the outcome as +1 or -1."""
        self._check(q)
        anti = np.flatnonzero(self.x[:, q])
        if len(anti) == 0:
            # fast path: +-Z_q already present as a generator
            hit = np.flatnonzero((self.z[:, q] == 1) & (self.z.sum(axis=1) == 1)
                                 & (self.x.sum(axis=1) == 0))
            if len(hit):
                return -1 if self.r[hit[0]] else 1
            sign = self.single_pauli_sign("Z", q)
            assert sign is not None
            return sign
        p = int(anti[0])
        self._rowsum(anti[1:], p)
        if forced is not None:
            bit = 0 if forced == 1 else 1
        else:
            if rng is None:
                raise ValueError("random measurement outcome needs an rng")
            bit = int(rng.integers(2))
        self.x[p] = 0
        self.z[p] = 0
        self.z[p, q] = 1
        self.r[p] = bit
        return -1 if bit else 1

    def measure(self, pauli: str, q: int, rng: np.random.Generator | None = None,
                forced: int | None = None) -> int:
        pauli = pauli.upper()
        if pauli == "Z":
            return self.measure_z(q, rng, forced)
        if pauli == "X":
            self.h(q)
            out = self.measure_z(q, rng, forced)
            self.h(q)
            return out
        if pauli == "Y":
            self.s_dag(q).h(q)
            out = self.measure_z(q, rng, forced)
            self.h(q).s(q)
            return out
        raise ValueError(f"unknown Pauli basis {pauli!r}")

    def reset(self, q: int, rng: np.random.Generator | None = None) -> "StabilizerState":
        if self.measure_z(q, rng if rng is not None else np.random.default_rng(0)) == -1:
            self.pauli_x(q)
        return self

    def is_unentangled(self, q: int) -> bool:
        return any(self.single_pauli_sign(p, q) is not None for p in "XYZ")

    def check_invariants(self) -> None:
        n = self.n
        m = np.hstack([self.x, self.z]).astype(np.uint8)
        if _gf2_rank(m) != n:
            raise AssertionError("stabilizer rows are not independent")
        sym = (self.x.astype(np.int64) @ self.z.T.astype(np.int64)
               + self.z.astype(np.int64) @ self.x.T.astype(np.int64)) % 2
        if sym.any():
            raise AssertionError("stabilizer rows do not commute")


_GATE_METHODS = {
    "I": lambda s, q: s._check(q),
    "H": StabilizerState.h,
    "X": StabilizerState.pauli_x,
    "Y": StabilizerState.pauli_y,
    "Z": StabilizerState.pauli_z,
    "S": StabilizerState.s,
    "S_DAG": StabilizerState.s_dag,
    "SQRT_IX": StabilizerState.sqrt_ix,
    "SQRT_IX_DAG": StabilizerState.sqrt_ix_dag,
    # exp(i pi/4 Z) equals S^dagger up to global phase
    "SQRT_IZ": StabilizerState.s_dag,
    "SQRT_IZ_DAG": StabilizerState.s,
    "CZ": StabilizerState.cz,
    "CNOT": StabilizerState.cnot,
}


def _gf2_rank(m: np.ndarray) -> int:
    m = m.copy() % 2
    rows, cols = m.shape
    rank = 0
    for c in range(cols):
        piv = np.flatnonzero(m[rank:, c])
        if len(piv) == 0:
            continue
        p = rank + piv[0]
        m[[rank, p]] = m[[p, rank]]
        others = np.flatnonzero(m[:, c])
        others = others[others != rank]
        m[others] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _solve_rows(m: np.ndarray, target: np.ndarray) -> list[int] | None:
    """Indices of rows of m whose GF(2) sum equals target, or None."""
    n = m.shape[0]
    # eliminate on the transposed system, tracking which original rows were combined
    a = np.hstack([m, np.eye(n, dtype=np.uint8)])
    t = np.concatenate([target.astype(np.uint8), np.zeros(n, dtype=np.uint8)])
    ncol = m.shape[1]
    row = 0
    for c in range(ncol):
        if row == n:
            break
        cand = np.flatnonzero(a[row:, c])
        if len(cand) == 0:
            continue
        p = row + cand[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        others = np.flatnonzero(a[:, c])
        others = others[others != row]
        a[others] ^= a[row]
        if t[c]:
            t ^= a[row]
        row += 1
    if t[:ncol].any():
        return None
    return [int(i) for i in np.flatnonzero(t[ncol:])]


def _pivots(c: StabilizerState) -> list[tuple[int, int]]:
    """(row, column) pivots of a canonical tableau; columns index x then z."""
    t = c.tableau()
    out = []
    for i in range(c.n):
        nz = np.flatnonzero(t[i])
        if len(nz):
            out.append((i, int(nz[0])))
    return out


def canonical_form(state: StabilizerState) -> StabilizerState:
    """Reduced row echelon form over columns x_0..x_{n-1}, z_0..z_{n-1}, with signs."""
    s = state.copy()
    n = s.n
    row = 0
    for col in range(2 * n):
        if row == n:
            break
        colv = s.x[:, col] if col < n else s.z[:, col - n]
        cand = np.flatnonzero(colv[row:])
        if len(cand) == 0:
            continue
        p = row + int(cand[0])
        if p != row:
            for a in (s.x, s.z):
                a[[row, p]] = a[[p, row]]
            s.r[[row, p]] = s.r[[p, row]]
        colv = s.x[:, col] if col < n else s.z[:, col - n]
        others = np.flatnonzero(colv)
        others = others[others != row]
        s._rowsum(others, row)
        row += 1
    return s


def states_equal(a: StabilizerState, b: StabilizerState) -> bool:
    return a == b


# ---------------------------------------------------------------------------
# functional wrappers

def apply_gate(state: StabilizerState, gate: str, targets: int | Sequence[int]) -> StabilizerState:
    if isinstance(targets, (int, np.integer)):
        targets = (int(targets),)
    return state.copy().apply(gate, *targets)


def measure_pauli(state: StabilizerState, pauli: str, qubit: int,
                  rng: np.random.Generator) -> tuple[int, StabilizerState]:
    s = state.copy()
    out = s.measure(pauli, qubit, rng)
    return out, s


def graph_state_of(graph: GraphAdjacency) -> StabilizerState:
    a = graph.adjacency_matrix()
    n = graph.n
    return StabilizerState(n, np.eye(n, dtype=np.uint8), a, np.zeros(n, dtype=np.uint8))


def local_complement_circuit(state: StabilizerState, v: int,
                             neighbors: Sequence[int]) -> StabilizerState:
    """Apply exp(-i pi/4 X_v) prod_{u in N(v)} exp(i pi/4 Z_u).

    On a graph state whose vertex v has exactly the given neighbours this yields
    the graph state of the locally complemented graph, with no sign corrections.
    """
    nb = sorted(int(u) for u in neighbors)
    px = np.zeros(state.n, dtype=np.uint8)
    pz = np.zeros(state.n, dtype=np.uint8)
    px[v] = 1
    pz[nb] = 1
    if v in nb or state.pauli_sign(px, pz) != 1:
        raise PreconditionError(f"X_{v} Z_N is not a stabilizer for neighbours {nb}")
    s = state.copy()
    s.sqrt_ix_dag(v)
    for u in nb:
        s.s_dag(u)
    return s


def extract_graph(state: StabilizerState) -> tuple[GraphAdjacency, list[tuple[str, int]]]:
    """Find a graph G and local Cliffords C with C|state> = |G>.

    The returned corrections are (gate, qubit) pairs to apply in order.
    """
    n = state.n
    s = state.copy()
    corr: list[tuple[str, int]] = []
    c = canonical_form(s)
    xpiv = [col for _, col in _pivots(c) if col < n]
    for q in range(n):
        if q not in xpiv:
            s.h(q)
            corr.append(("H", q))
    c = canonical_form(s)
    if not np.array_equal(c.x, np.eye(n, dtype=np.uint8)):
        raise NotGraphReachable("X block not invertible after Hadamards")
    for q in range(n):
        if c.z[q, q]:
            c.s_dag(q)
            corr.append(("S_DAG", q))
    if not np.array_equal(c.z, c.z.T) or c.z.diagonal().any():
        raise NotGraphReachable("Z block is not a simple-graph adjacency")
    for q in range(n):
        if c.r[q]:
            corr.append(("Z", q))
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if c.z[i, j]]
    return GraphAdjacency.from_edges(n, edges), corr


def apply_corrections(state: StabilizerState, corrections: Sequence[tuple[str, int]]) -> StabilizerState:
    s = state.copy()
    for g, q in corrections:
        s.apply(g, q)
    return s
