from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from forge.stabilizer import (
    GraphAdjacency, PreconditionError, StabilizerState, apply_gate, canonical_form,
    extract_graph, apply_corrections, graph_state_of, local_complement,
    local_complement_circuit, measure_pauli,
)
from oracles import PX, PY, PZ, StateVector, stabilizers_hold

GATES1 = ["H", "X", "Y", "Z", "S", "S_DAG", "SQRT_IX", "SQRT_IX_DAG", "SQRT_IZ", "SQRT_IZ_DAG"]


def random_circuit(n, depth, rng):
    ops = []
    for _ in range(depth):
        if n > 1 and rng.random() < 0.4:
            a, b = rng.choice(n, 2, replace=False)
            ops.append((rng.choice(["CZ", "CNOT"]), int(a), int(b)))
        else:
            ops.append((str(rng.choice(GATES1)), int(rng.integers(n))))
    return ops


def run_both(n, ops):
    st_ = StabilizerState(n)
    sv = StateVector(n)
    for g, *qs in ops:
        st_.apply(g, *qs)
        sv.apply(g, *qs)
    return st_, sv


def test_cz_on_plus_plus_is_edge():
    s = StabilizerState.plus(2).cz(0, 1)
    assert s == graph_state_of(GraphAdjacency.from_edges(2, [(0, 1)]))


def test_cz_twice_is_identity():
    s = StabilizerState.plus(3)
    t = apply_gate(apply_gate(s, "CZ", (0, 2)), "CZ", (0, 2))
    assert t == s


def test_out_of_range_target():
    with pytest.raises(IndexError):
        apply_gate(StabilizerState(2), "H", 2)
    with pytest.raises(ValueError):
        apply_gate(StabilizerState(2), "CZ", (1, 1))


def test_gates_match_statevector_oracle():
    rng = np.random.default_rng(1)
    for trial in range(1000):
        n = int(rng.integers(1, 6))
        ops = random_circuit(n, 12, rng)
        s, sv = run_both(n, ops)
        assert stabilizers_hold(sv, s.to_strings()), ops
        if trial % 50 == 0:
            s.check_invariants()


def test_rank_and_commutation_preserved():
    rng = np.random.default_rng(2)
    s = StabilizerState(8)
    for g, *qs in random_circuit(8, 1000, rng):
        s.apply(g, *qs)
    s.check_invariants()


def test_measure_x_on_plus():
    rng = np.random.default_rng(0)
    s = StabilizerState.plus(1)
    out, t = measure_pauli(s, "X", 0, rng)
    assert out == 1 and t == s


def test_measure_z_on_plus_is_fair():
    rng = np.random.default_rng(3)
    s = StabilizerState.plus(1)
    outs = [measure_pauli(s, "Z", 0, rng)[0] for _ in range(10_000)]
    assert abs(np.mean(np.array(outs) == 1) - 0.5) < 0.02


def test_measurement_collapse_matches_oracle():
    # post-measurement stabilizers must hold on the projected state vector
    rng = np.random.default_rng(4)
    mats = {"X": PX, "Y": PY, "Z": PZ}
    for _ in range(300):
        n = int(rng.integers(1, 5))
        s, sv = run_both(n, random_circuit(n, 10, rng))
        basis = str(rng.choice(["X", "Y", "Z"]))
        q = int(rng.integers(n))
        out = s.copy().measure(basis, q, rng)
        assert s.measure(basis, q, forced=out) == out
        proj = StateVector(n)
        proj.psi = sv.psi.copy()
        proj._op1((np.eye(2) + out * mats[basis]) / 2, q)
        norm = np.linalg.norm(proj.psi)
        assert norm > 1e-9
        proj.psi /= norm
        assert stabilizers_hold(proj, s.to_strings())


def test_deterministic_measurement_sign():
    s = StabilizerState(2).pauli_x(1)
    assert s.measure("Z", 0) == 1
    assert s.measure("Z", 1) == -1


@pytest.mark.parametrize("nleaf", [1, 2, 3, 4])
def test_star_centre_measurement(nleaf):
    rng = np.random.default_rng(nleaf)
    n = nleaf + 1
    g = GraphAdjacency.from_edges(n, [(0, k) for k in range(1, n)])
    for _ in range(10):
        # Z on the centre plus Z byproducts on the leaves -> |+>^N
        s = graph_state_of(g)
        if s.measure("Z", 0, rng) == -1:
            for k in range(1, n):
                s.pauli_z(k)
        for k in range(1, n):
            assert s.single_pauli_sign("X", k) == 1
        # X on the centre leaves the leaves entangled once there are two or more
        t = graph_state_of(g)
        t.measure("X", 0, rng)
        assert all(t.is_unentangled(k) for k in range(1, n)) == (nleaf == 1)


def test_local_complement_examples():
    star = GraphAdjacency.from_edges(5, [(0, k) for k in range(1, 5)])
    lc = local_complement(star, 0)
    want = set(star.edges) | {(a, b) for a in range(1, 5) for b in range(a + 1, 5)}
    assert set(lc.edges) == want
    assert local_complement(lc, 0) == star
    tri = GraphAdjacency.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    for v in range(3):
        opp = tuple(sorted(set(range(3)) - {v}))
        assert set(local_complement(tri, v).edges) == set(tri.edges) - {opp}


def random_graph(n, rng, p=0.5):
    return GraphAdjacency.from_edges(
        n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p])


def test_local_complement_circuit_matches_graph_rule():
    rng = np.random.default_rng(5)
    star = GraphAdjacency.from_edges(5, [(0, k) for k in range(1, 5)])
    assert local_complement_circuit(graph_state_of(star), 0, [1, 2, 3, 4]) == \
        graph_state_of(local_complement(star, 0))
    path = GraphAdjacency.from_edges(3, [(0, 1), (1, 2)])
    tri = GraphAdjacency.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert local_complement_circuit(graph_state_of(path), 1, [0, 2]) == graph_state_of(tri)
    one = StabilizerState.plus(1)
    assert local_complement_circuit(one, 0, []) == one
    for _ in range(200):
        n = int(rng.integers(1, 7))
        g = random_graph(n, rng)
        v = int(rng.integers(n))
        got = local_complement_circuit(graph_state_of(g), v, g.neighbors(v))
        assert got == graph_state_of(local_complement(g, v))


def test_local_complement_circuit_precondition():
    path = GraphAdjacency.from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(PreconditionError):
        local_complement_circuit(graph_state_of(path), 1, [0])


def test_canonical_form_state_independent_of_circuit():
    # two circuits preparing the same state: compare with the dense oracle
    rng = np.random.default_rng(6)
    found = 0
    for _ in range(400):
        n = int(rng.integers(1, 4))
        a, sva = run_both(n, random_circuit(n, 8, rng))
        b, svb = run_both(n, random_circuit(n, 8, rng))
        same = abs(abs(np.vdot(sva.psi, svb.psi)) - 1) < 1e-9
        ca, cb = canonical_form(a), canonical_form(b)
        eq = (np.array_equal(ca.tableau(), cb.tableau()) and np.array_equal(ca.r, cb.r))
        assert eq == same
        found += same
    assert found > 10


def test_zero_and_one_differ_only_in_phase():
    a, b = canonical_form(StabilizerState(1)), canonical_form(StabilizerState(1).pauli_x(0))
    assert np.array_equal(a.tableau(), b.tableau()) and not np.array_equal(a.r, b.r)


def test_graph_state_of_empty_is_plus():
    assert graph_state_of(GraphAdjacency(3)) == StabilizerState.plus(3)


def rhg_unit_cell():
    pts = [p for p in itertools.product(range(3), repeat=3) if sum(c % 2 for c in p) in (1, 2)]
    idx = {p: i for i, p in enumerate(pts)}
    edges = []
    for p in pts:
        for a in range(3):
            q = list(p)
            q[a] += 1
            if tuple(q) in idx:
                edges.append((idx[p], idx[tuple(q)]))
    return GraphAdjacency.from_edges(len(pts), edges)


def test_extract_graph_round_trip():
    g = rhg_unit_cell()
    got, corr = extract_graph(graph_state_of(g))
    assert got == g and corr == []


def test_extract_graph_after_z_flips():
    rng = np.random.default_rng(7)
    g = rhg_unit_cell()
    s = graph_state_of(g)
    flipped = [q for q in range(g.n) if rng.random() < 0.5]
    for q in flipped:
        s.pauli_z(q)
    got, corr = extract_graph(s)
    assert got == g
    assert sorted(q for _, q in corr) == sorted(flipped)
    assert apply_corrections(s, corr) == graph_state_of(g)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
def test_extract_graph_random_clifford_states(n, seed):
    rng = np.random.default_rng(seed)
    s = StabilizerState(n)
    for g, *qs in random_circuit(n, 25, rng):
        s.apply(g, *qs)
    graph, corr = extract_graph(s)
    assert apply_corrections(s, corr) == graph_state_of(graph)


def test_graph_json_round_trip():
    g = rhg_unit_cell()
    assert GraphAdjacency.from_json(g.to_json()) == g
    with pytest.raises(ValueError):
        GraphAdjacency.from_edges(2, [(0, 0)])
