from __future__ import annotations

import math

import numpy as np
import pytest

from forge.analysis import (
    FitError, UncorrectableError, ansatz_curves, ansatz_derivative, ansatz_log, collapse_cost,
    crossing, eta_from_db, fit_phase_boundary, fit_threshold, optimal_L, pairwise_crossings,
    saddle_root,
)

P_TH, NU = 0.005, 1.0


def synthetic(sizes=(6, 8, 10, 12), n=11, noise=0.0, rng=None, linear=False):
    p = np.linspace(0.003, 0.008, n)
    out = {}
    for L in sizes:
        x = (p - P_TH) * L ** (1 / NU)
        y = 0.2 + 0.3 * x / 0.01 if linear else 0.5 * (1 + np.tanh(x / 0.02)) * 0.6 + 0.05
        if noise:
            y = y + rng.normal(0, noise, size=y.shape)
        out[L] = (p, y)
    return out


def test_cost_vanishes_at_truth_for_linear_scaling():
    assert collapse_cost(P_TH, NU, synthetic(linear=True)) < 1e-20


def test_cost_grows_off_truth_and_when_shuffled():
    d = synthetic()
    r0 = collapse_cost(P_TH, NU, d)
    assert collapse_cost(P_TH + 4e-4, NU, d) > r0
    assert collapse_cost(P_TH, 1.4, d) > r0
    rng = np.random.default_rng(0)
    shuf = {L: (p, rng.permutation(y)) for L, (p, y) in d.items()}
    assert collapse_cost(P_TH, NU, shuf) > r0
    # relabelling the size keys consistently leaves the cost alone
    same = {L: d[L] for L in sorted(d, reverse=True)}
    assert collapse_cost(P_TH, NU, same) == r0


def test_fit_recovers_synthetic_truth():
    fit = fit_threshold(synthetic(n=21), n_starts_p=3, nu_starts=(0.8, 1.2))
    assert fit.p_th == pytest.approx(P_TH, abs=1e-4)
    assert fit.nu == pytest.approx(NU, abs=0.05)
    assert fit.uncertainty_available
    assert fit.to_json()["sizes"] == [6, 8, 10, 12]


def test_two_sizes_give_no_uncertainty():
    fit = fit_threshold(synthetic(sizes=(6, 10)), n_starts_p=3, nu_starts=(1.0,))
    assert not fit.uncertainty_available and fit.sigma_nu is None
    assert fit.p_th == pytest.approx(P_TH, abs=2e-4)


def test_non_crossing_data_raises():
    p = np.linspace(0.001, 0.002, 5)
    d = {6: (p, 0.1 + p), 8: (p, 0.05 + p), 10: (p, 0.01 + p)}
    with pytest.raises(FitError):
        fit_threshold(d)


def test_crossings():
    p = np.array([0.0, 1.0, 2.0])
    assert crossing(p, np.array([0, 1, 2.0]), np.array([1, 1, 1.0])) == 1.0
    assert crossing(p, np.array([0, 0, 0.0]), np.array([1, 1, 1.0])) is None
    cs = pairwise_crossings(synthetic())
    assert len(cs) == 6
    for _, _, c in cs:
        assert c == pytest.approx(P_TH, abs=1e-9)


@pytest.mark.slow
def test_fit_unbiased_under_noise():
    rng = np.random.default_rng(42)
    est = []
    for _ in range(50):
        fit = fit_threshold(synthetic(n=11, noise=0.005, rng=rng), n_starts_p=3,
                            nu_starts=(1.0,), pairwise=False)
        est.append(fit.p_th)
    est = np.array(est)
    assert abs(est.mean() - P_TH) < 3 * est.std() / math.sqrt(len(est)) + 1e-5


def test_phase_boundary_exact_and_noisy():
    a, b, xp = 0.02, 0.02, 0.249
    xs = [0.0, 0.05, 0.1, 0.15, 0.2]
    pts = [(x, a * (x - xp) ** 2 + b * (x - xp)) for x in xs]
    pb = fit_phase_boundary(pts, xp)
    assert pb.a == pytest.approx(a, rel=1e-9) and pb.b == pytest.approx(b, rel=1e-9)
    assert pb.max_residual < 1e-15
    assert pb(xp) == 0.0
    assert pb.beta == pytest.approx(a * xp ** 2 - b * xp)
    assert pb.alpha == pytest.approx(-2 * a * xp + b)
    rng = np.random.default_rng(1)
    noisy = [(x, y + rng.normal(0, 5e-5)) for x, y in pts]
    pb2 = fit_phase_boundary(noisy, xp)
    assert pb2.max_residual < 2e-4
    with pytest.raises(ValueError):
        fit_phase_boundary([(0.249, 0.0), (0.1, 0.002)])


def test_saddle_root_is_eta_independent():
    beta, alpha, p = 0.0053, -0.02, 1e-3
    x0 = saddle_root(p, beta)
    assert -beta < x0 < 0
    for eta in (1e-5, 1e-4, 1e-3, 3e-2):
        L, _ = optimal_L(eta, p, alpha, beta)
        assert abs(alpha * eta * L * L - x0) < 1e-10
        assert abs(ansatz_derivative(L, eta, p, alpha, beta)) < 1e-10
    # L_opt scales as eta^(-1/2)
    L1, _ = optimal_L(1e-4, p, alpha, beta)
    L2, _ = optimal_L(4e-4, p, alpha, beta)
    assert L1 / L2 == pytest.approx(2.0, rel=1e-12)


def test_optimal_L_matches_integer_scan():
    rng = np.random.default_rng(7)
    Ls = np.arange(2, 4001)
    for _ in range(20):
        beta = rng.uniform(0.004, 0.006)
        alpha = -rng.uniform(0.005, 0.05)
        p = beta * rng.uniform(0.05, 0.8)
        eta = 10 ** rng.uniform(-6, -2.5)
        L, p_opt = optimal_L(eta, p, alpha, beta)
        f = ansatz_log(Ls, eta, p, alpha, beta)
        best = Ls[int(np.argmin(f))]
        assert abs(best - L) <= 1
        assert p_opt == pytest.approx(math.exp(float(ansatz_log(L, eta, p, alpha, beta))), rel=1e-9)


def test_small_p_limit_and_domain():
    # as p -> beta the optimum moves to x0 -> 0 and the cluster grows without bound
    beta = 0.0053
    assert abs(saddle_root(beta * (1 - 1e-9), beta)) < 1e-8
    with pytest.raises(UncorrectableError):
        optimal_L(1e-3, 0.006, -0.02, beta)
    with pytest.raises(UncorrectableError):
        optimal_L(1e-3, 1e-3, 0.01, beta)
    with pytest.raises(ValueError):
        optimal_L(0.0, 1e-3, -0.02, beta)


def test_ansatz_curves():
    alpha, beta, p = -0.0053 / 0.249, 0.0053, 1e-3
    rows = ansatz_curves([1e-9], [4, 8, 12], p, alpha, beta)
    vals = [r["p_logic"] for r in rows]
    assert vals[0] > vals[1] > vals[2]
    etas = np.logspace(-5, -2, 30)
    rows = ansatz_curves(etas, range(4, 41, 2), p, alpha, beta)
    assert all(0 <= r["p_logic"] <= 1 for r in rows)
    # the lower envelope sits at the optimal size
    for eta in etas[::7]:
        sub = [r for r in rows if r["eta"] == eta]
        best = min(sub, key=lambda r: r["p_logic"])
        L, _ = optimal_L(float(eta), p, alpha, beta)
        if 5 < L < 39:
            assert abs(best["L"] - L) <= 2
    assert eta_from_db(10 / math.log(10)) == pytest.approx(1.0)
