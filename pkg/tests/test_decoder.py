from __future__ import annotations

import numpy as np
import pytest

from forge.decoder import (
    LOGICAL_FAILURE, PERCOLATION_FAILURE, SUCCESS, DecoderInvariantError, TrialEngine,
    brute_force_mwpm, decode_trial, defect_distances, homology_class, matching_weight, mwpm,
    reference_decode, sample_errors,
)
from forge.error_model import ErrorModelParams, edge_weights, effective_rates
from forge.lattice import build_rhg, merge_superchecks, primal_syndrome, simple_cubic


@pytest.fixture(scope="module")
def g6():
    return primal_syndrome(build_rhg(6))


def _taxicab(L, a, b):
    d = np.abs(np.asarray(a) - np.asarray(b))
    return int(np.minimum(d, L - d).sum())


def test_zero_rates_give_empty_pattern(g6):
    pat = sample_errors(g6, np.zeros(3), np.random.default_rng(0))
    assert not pat.flips.any() and len(pat.defects) == 0


def test_flip_frequency(g6):
    q = np.array([0.02, 0.05, 0.08])
    rng = np.random.default_rng(1)
    counts = np.zeros(3)
    n = 400
    for _ in range(n):
        pat = sample_errors(g6, q, rng)
        for a in range(3):
            counts[a] += pat.flips[g6.axis == a].sum()
    m = n * g6.n_edges / 3
    sigma = np.sqrt(m * q * (1 - q))
    assert (np.abs(counts - m * q) < 4 * sigma).all()


def test_lost_edges_flip_half_the_time(g6):
    lost = np.ones(g6.n_edges, dtype=bool)
    pat = sample_errors(g6, np.zeros(3), np.random.default_rng(2), lost)
    frac = pat.flips.mean()
    assert abs(frac - 0.5) < 4 * np.sqrt(0.25 / g6.n_edges)


def test_bundle_sampling_frequency(g6):
    lost = np.random.default_rng(5).random(g6.n_edges) < 0.2
    q = np.array([0.03, 0.03, 0.03])
    mg = merge_superchecks(g6, lost, q)
    rng = np.random.default_rng(6)
    n = 300
    hits = np.zeros(mg.n_bundles)
    for _ in range(n):
        pat = sample_errors(mg, q, rng)
        on = np.flatnonzero(pat.flips & (mg.edge_bundle >= 0))
        np.add.at(hits, mg.edge_bundle[on], 1)
    expect = n * mg.p_l.sum()
    assert abs(hits.sum() - expect) < 4 * np.sqrt(expect)


def test_single_flip_has_two_defects(g6):
    for e in (0, 100, 500):
        flips = np.zeros(g6.n_edges, dtype=np.uint8)
        flips[e] = 1
        assert set(np.flatnonzero(g6.syndrome(flips))) == {g6.src[e], g6.dst[e]}


def test_distances_are_periodic_taxicab(g6):
    rng = np.random.default_rng(3)
    coords = simple_cubic(6).site_coords()
    defects = rng.choice(g6.n_vertices, 8, replace=False)
    D, _ = defect_distances(g6, defects, np.ones(g6.n_edges))
    for i in range(8):
        for j in range(8):
            assert D[i, j] == _taxicab(6, coords[defects[i]], coords[defects[j]])
    # a single edge's weight is its own distance
    w = rng.random(g6.n_edges) + 0.5
    e = 17
    D, _ = defect_distances(g6, [g6.src[e], g6.dst[e]], w)
    assert D[0, 1] <= w[e]


def test_zero_weight_corridor(g6):
    w = np.ones(g6.n_edges)
    line = [g6.edge_index(0, g6.vertex(x, 0, 0)) for x in range(3)]
    w[line] = 0.0
    D, _ = defect_distances(g6, [g6.vertex(0, 0, 0), g6.vertex(3, 0, 0)], w)
    assert D[0, 1] == 0.0


def test_rectangle_matching():
    # four corners of a 1 x 3 rectangle: short sides pair up
    D = np.array([[0, 1, 3, 4], [1, 0, 4, 3], [3, 4, 0, 1], [4, 3, 1, 0]], dtype=float)
    pairs = mwpm(D)
    assert matching_weight(D, pairs) == 2
    assert pairs == [(0, 1), (2, 3)]
    with pytest.raises(DecoderInvariantError):
        mwpm(np.zeros((3, 3)))


def test_blossom_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(200):
        k = 2 * rng.integers(1, 6)
        A = rng.integers(0, 20, size=(k, k)).astype(float)
        D = np.triu(A, 1) + np.triu(A, 1).T
        assert matching_weight(D, mwpm(D)) == brute_force_mwpm(D)[0]


def test_homology_examples(g6):
    loop = np.zeros(g6.n_edges, dtype=np.uint8)
    loop[[g6.edge_index(0, g6.vertex(x, 2, 1)) for x in range(6)]] = 1
    assert homology_class(g6, loop) == (1, 0, 0)
    # winding count is independent of the cut plane
    for plane in range(6):
        assert homology_class(g6, loop, (plane, 0, 0)) == (1, 0, 0)
    # a plaquette boundary is trivial
    v = g6.vertex(1, 1, 1)
    sq = np.zeros(g6.n_edges, dtype=np.uint8)
    sq[[g6.edge_index(0, v), g6.edge_index(1, g6.vertex(2, 1, 1)),
        g6.edge_index(0, g6.vertex(1, 2, 1)), g6.edge_index(1, v)]] = 1
    assert homology_class(g6, sq) == (0, 0, 0)
    single = np.zeros(g6.n_edges, dtype=np.uint8)
    single[5] = 1
    with pytest.raises(DecoderInvariantError):
        homology_class(g6, single)


def test_reference_decode_clears_syndrome(g6):
    rng = np.random.default_rng(4)
    q = np.full(3, 0.01)
    w = edge_weights(q[g6.axis])
    for _ in range(20):
        pat = sample_errors(g6, q, rng)
        _, rec = reference_decode(g6, pat, w, oracle=True)
        assert not g6.syndrome(pat.flips ^ rec).any()


def test_trial_outcomes():
    assert decode_trial(6, ErrorModelParams.uniform(0.0), 0).status == SUCCESS
    a = decode_trial(6, ErrorModelParams.uniform(0.004, 0.05), 123)
    b = decode_trial(6, ErrorModelParams.uniform(0.004, 0.05), 123)
    assert a == b
    eng = TrialEngine(8, ErrorModelParams.uniform(0.0, 0.4))
    res = [eng.trial(s) for s in range(20)]
    assert sum(r.status == PERCOLATION_FAILURE for r in res) >= 18


def test_high_noise_fails():
    eng = TrialEngine(6, ErrorModelParams.uniform(0.03))
    out = eng.run_batch([np.random.default_rng(s) for s in range(100)])
    assert out[:, :2].any(axis=1).mean() > 0.5


def test_batch_equals_single_trials():
    eng = TrialEngine(6, ErrorModelParams.uniform(0.006))
    out = eng.run_batch([np.random.default_rng(s) for s in range(200)])
    for s in range(0, 200, 13):
        o = eng.trial(np.random.default_rng(s))
        assert tuple(out[s]) == (o.primal_failed, o.dual_failed, False, False)
        assert (o.status == LOGICAL_FAILURE) == bool(out[s, :2].any())


def test_engines_agree_on_matching_weight(g6):
    """pymatching and the reference matcher reach the same total weight; the chosen chains may
    differ when several matchings are tied."""
    import pymatching
    rng = np.random.default_rng(9)
    q = effective_rates(ErrorModelParams.uniform(0.006)).axis
    w = edge_weights(q[g6.axis])
    m = pymatching.Matching.from_check_matrix(g6.check_matrix, weights=w)
    for _ in range(30):
        pat = sample_errors(g6, q, rng)
        syn = np.zeros(g6.n_vertices, dtype=np.uint8)
        syn[pat.defects] = 1
        corr = m.decode(syn)
        ref, _ = reference_decode(g6, pat, w)
        assert float(w @ corr) == pytest.approx(ref.weight, rel=1e-9, abs=1e-9)


def test_oracle_engine_runs():
    eng = TrialEngine(4, ErrorModelParams.uniform(0.005, 0.05), engine="reference",
                      oracle_matchings=True)
    for s in range(10):
        eng.trial(s)


@pytest.mark.slow
def test_size_ordering_across_threshold():
    def rate(L, p, n=1500):
        eng = TrialEngine(L, ErrorModelParams.uniform(p))
        return eng.run_batch([np.random.default_rng(s) for s in range(n)])[:, :2].any(axis=1).mean()
    assert rate(10, 0.003) < rate(6, 0.003)
    assert rate(10, 0.009) > rate(6, 0.009)
