"""Finite-size scaling collapse, phase-boundary fit and optimal cluster size under fiber loss."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq, minimize

P_PERC = 0.249

# data: size -> (p grid ascending, p_logic)
CurveData = Mapping[int, tuple[np.ndarray, np.ndarray]]


class FitError(RuntimeError):
    pass


class UncorrectableError(ValueError):
    """No finite optimum: the circuit error is at or above the loss-free threshold."""


def curves_from_points(points: Iterable, p_loss: float | None = None) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Group RatePoint-like records (L, p, p_loss, p_logic) into per-size curves."""
    by: dict[int, list[tuple[float, float]]] = {}
    for pt in points:
        if p_loss is not None and not math.isclose(pt.p_loss, p_loss, abs_tol=1e-12):
            continue
        by.setdefault(pt.L, []).append((pt.p, pt.p_logic))
    out = {}
    for L, rows in sorted(by.items()):
        rows.sort()
        out[L] = (np.array([r[0] for r in rows]), np.array([r[1] for r in rows]))
    return out


def _prep(data: CurveData) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    out = {}
    for L, (p, y) in data.items():
        p = np.asarray(p, dtype=float)
        y = np.asarray(y, dtype=float)
        o = np.argsort(p)
        out[int(L)] = (p[o], y[o])
    if len(out) < 2:
        raise ValueError("need at least two sizes")
    return out


def collapse_cost(p_th: float, nu: float, data: CurveData) -> float:
    """Sum over sample points x_i and sizes of squared deviations of y_L(x_i) from their mean.

    y_L(x) = P_L(p_th + x L^(-1/nu)) - P_L(p_th), with P_L the piecewise-linear interpolant.
    The x_i are the data x-values of every size, restricted to the range all sizes share;
    a size whose p-range does not contain the needed p (or p_th) is left out at that x_i.
    """
    d = _prep(data)
    xs = []
    lo, hi = -math.inf, math.inf
    for L, (p, _) in d.items():
        x = (p - p_th) * L ** (1.0 / nu)
        xs.append(x)
        lo = max(lo, x[0])
        hi = min(hi, x[-1])
    if not lo <= hi:
        return math.inf
    grid = np.unique(np.concatenate(xs))
    grid = grid[(grid >= lo) & (grid <= hi)]
    if grid.size == 0:
        return math.inf
    ys = np.full((len(d), grid.size), np.nan)
    for k, (L, (p, y)) in enumerate(d.items()):
        if not p[0] <= p_th <= p[-1]:
            continue
        pp = p_th + grid * L ** (-1.0 / nu)
        ok = (pp >= p[0]) & (pp <= p[-1])
        ys[k, ok] = np.interp(pp[ok], p, y) - np.interp(p_th, p, y)
    cnt = np.sum(~np.isnan(ys), axis=0)
    use = cnt >= 2
    if not use.any():
        return math.inf
    ys = ys[:, use]
    mean = np.nanmean(ys, axis=0)
    return float(np.nansum((ys - mean) ** 2))


@dataclass
class CollapseFit:
    p_th: float
    nu: float
    p_logic_c: float
    R_min: float
    sigma_pth: float | None = None
    sigma_nu: float | None = None
    sizes: tuple[int, ...] = ()
    pair_fits: list[tuple[tuple[int, int], float, float]] = field(default_factory=list)

    @property
    def uncertainty_available(self) -> bool:
        return self.sigma_pth is not None

    def to_json(self) -> dict:
        d = asdict(self)
        d["pair_fits"] = [{"sizes": list(s), "p_th": a, "nu": b} for s, a, b in self.pair_fits]
        d["sizes"] = list(self.sizes)
        return d


def _brackets(d: dict[int, tuple[np.ndarray, np.ndarray]]) -> bool:
    """Some pair of sizes swaps order across the shared p-range."""
    lo = max(p[0] for p, _ in d.values())
    hi = min(p[-1] for p, _ in d.values())
    if lo >= hi:
        return False
    grid = np.linspace(lo, hi, 64)
    curves = {L: np.interp(grid, p, y) for L, (p, y) in d.items()}
    for a, b in itertools.combinations(sorted(d), 2):
        diff = curves[b] - curves[a]
        if diff.min() < 0 < diff.max():
            return True
    return False


def _minimize(d, starts_p, starts_nu, p_bounds, nu_bounds=(0.5, 2.0)):
    best = None
    for p0, n0 in itertools.product(starts_p, starts_nu):
        r = minimize(lambda v: collapse_cost(v[0], v[1], d), x0=[p0, n0], method="Nelder-Mead",
                     bounds=[p_bounds, nu_bounds],
                     options={"xatol": 1e-7, "fatol": 1e-14, "maxiter": 400})
        cand = (float(r.fun), float(r.x[0]), float(r.x[1]))
        if best is None or cand < best:
            best = cand
    return best


def fit_threshold(data: CurveData, n_starts_p: int = 5, nu_starts: Sequence[float] = (0.75, 1.0, 1.4),
                  pairwise: bool = True) -> CollapseFit:
    d = _prep(data)
    if not _brackets(d):
        raise FitError("curves for different sizes never cross; no threshold in the swept range")
    lo = max(p[0] for p, _ in d.values())
    hi = min(p[-1] for p, _ in d.values())
    starts = np.linspace(lo, hi, n_starts_p + 2)[1:-1]
    R, pth, nu = _minimize(d, starts, nu_starts, (lo, hi))
    pc = float(np.mean([np.interp(pth, p, y) for p, y in d.values()]))
    fit = CollapseFit(pth, nu, pc, R, sizes=tuple(sorted(d)))
    if pairwise and len(d) >= 3:
        for a, b in itertools.combinations(sorted(d), 2):
            sub = {a: d[a], b: d[b]}
            if not _brackets(sub):
                continue
            slo = max(d[a][0][0], d[b][0][0])
            shi = min(d[a][0][-1], d[b][0][-1])
            _, pp, nn = _minimize(sub, np.linspace(slo, shi, 5)[1:-1], (0.8, 1.25), (slo, shi))
            fit.pair_fits.append(((a, b), pp, nn))
        if len(fit.pair_fits) >= 2:
            fit.sigma_pth = float(np.std([f[1] for f in fit.pair_fits]))
            fit.sigma_nu = float(np.std([f[2] for f in fit.pair_fits]))
    return fit


def crossing(p: np.ndarray, y1: np.ndarray, y2: np.ndarray) -> float | None:
    """First p where two curves sampled on the same grid swap order (linear interpolation)."""
    diff = np.asarray(y2, dtype=float) - np.asarray(y1, dtype=float)
    for i in range(len(diff) - 1):
        if diff[i] == 0:
            return float(p[i])
        if diff[i] * diff[i + 1] < 0:
            t = diff[i] / (diff[i] - diff[i + 1])
            return float(p[i] + t * (p[i + 1] - p[i]))
    return None


def pairwise_crossings(data: CurveData) -> list[tuple[int, int, float]]:
    d = _prep(data)
    out = []
    for a, b in itertools.combinations(sorted(d), 2):
        lo = max(d[a][0][0], d[b][0][0])
        hi = min(d[a][0][-1], d[b][0][-1])
        grid = np.unique(np.concatenate([d[a][0], d[b][0]]))
        grid = grid[(grid >= lo) & (grid <= hi)]
        c = crossing(grid, np.interp(grid, *d[a]), np.interp(grid, *d[b]))
        if c is not None:
            out.append((a, b, c))
    return out


# ---------------------------------------------------------------------------
# phase boundary

@dataclass(frozen=True)
class PhaseBoundary:
    a: float
    b: float
    x_perc: float
    residuals: tuple[float, ...]

    def __call__(self, p_loss):
        x = np.asarray(p_loss, dtype=float) - self.x_perc
        return self.a * x ** 2 + self.b * x

    @property
    def beta(self) -> float:
        """Threshold at zero loss."""
        return float(self(0.0))

    @property
    def alpha(self) -> float:
        """Slope at zero loss (tangent of the fitted quadratic)."""
        return float(-2 * self.a * self.x_perc + self.b)

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "x_perc": self.x_perc, "alpha": self.alpha,
                "beta": self.beta, "residuals": list(self.residuals)}


def fit_phase_boundary(points: Sequence[tuple[float, float]], x_perc: float = P_PERC) -> PhaseBoundary:
    """Least-squares p_th = a (x - x_perc)^2 + b (x - x_perc), pinned to zero at the loss bound."""
    pts = [(float(x), float(y)) for x, y in points if not math.isclose(x, x_perc) or y != 0]
    if len(pts) < 2:
        raise ValueError("need at least two points besides the percolation anchor")
    x = np.array([p[0] for p in pts]) - x_perc
    y = np.array([p[1] for p in pts])
    A = np.stack([x ** 2, x], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = tuple(float(r) for r in y - A @ np.array([a, b]))
    return PhaseBoundary(float(a), float(b), x_perc, res)


# ---------------------------------------------------------------------------
# optimal size

def _g(x0: float, p: float, beta: float) -> float:
    return math.log(p) - math.log(x0 + beta) - 2 * x0 / (x0 + beta)


def saddle_root(p: float, beta: float) -> float:
    """x0 = alpha*eta*L_opt^2 solving the stationarity condition; independent of eta."""
    if not 0 < p < beta:
        raise UncorrectableError(f"p={p} is not below the zero-loss threshold {beta}")
    lo = -beta * (1 - 1e-15)
    return brentq(_g, lo, 0.0, args=(p, beta), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def ansatz_log(L, eta: float, p: float, alpha: float, beta: float, linearized: bool = True):
    """f(L) = (L/2) ln(p / p_th(L)), with p_th = alpha*eta*L^2 + beta (or the unexpanded form)."""
    L = np.asarray(L, dtype=float)
    ploss = eta * L ** 2 if linearized else 1 - np.exp(-eta * L ** 2)
    pth = alpha * ploss + beta
    with np.errstate(divide="ignore", invalid="ignore"):
        f = 0.5 * L * (math.log(p) - np.log(pth))
    return np.where(pth > 0, f, np.inf)


def optimal_L(eta: float, p: float, alpha: float, beta: float) -> tuple[float, float]:
    """(L_opt, p_opt) at loss eta per qubit (nepers, p_loss = 1 - exp(-eta L^2))."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if alpha >= 0:
        raise UncorrectableError("threshold must decrease with loss (alpha < 0) for a finite optimum")
    x0 = saddle_root(p, beta)
    L = math.sqrt(x0 / (eta * alpha))
    p_opt = (p / (x0 + beta)) ** (L / 2)
    return L, p_opt


def ansatz_derivative(L: float, eta: float, p: float, alpha: float, beta: float) -> float:
    x = alpha * eta * L * L
    return 0.5 * (math.log(p) - math.log(x + beta)) - x / (x + beta)


def ansatz_curves(eta_grid: Sequence[float], L_list: Sequence[int], p: float, alpha: float,
                  beta: float, linearized: bool = True) -> list[dict]:
    """Rows (eta, L, p_logic) of the exponential ansatz, clipped at 1."""
    rows = []
    for eta in eta_grid:
        for L in L_list:
            f = float(ansatz_log(L, eta, p, alpha, beta, linearized))
            rows.append({"eta": float(eta), "L": int(L), "p_logic": min(1.0, math.exp(min(f, 0.0)))})
    return rows


def eta_from_db(lambda_v_tau_db: float) -> float:
    """dB per qubit to the natural-log rate eta."""
    return lambda_v_tau_db * math.log(10) / 10
