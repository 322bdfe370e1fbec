"""Physical error channels, effective per-edge flip rates and fiber loss."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import Any

import numpy as np

PAULIS = ("I", "X", "Y", "Z")
Q_MIN = 1e-12
SPEED_IN_FIBER = 2.13e8   # m/s
P_PERC_CUBIC = 0.249


class RateDomainError(ValueError):
    """Some effective rate is >= 1/2, where the log-likelihood weights stop making sense."""


@dataclass(frozen=True)
class ErrorModelParams:
    p_q: float = 0.0    # emitter single-qubit gate
    p_S: float = 0.0    # photonic single-qubit gate (carried, not used by the rates)
    p_T: float = 0.0    # emitter measurement
    p_F: float = 0.0    # photon measurement
    p_2q: float = 0.0   # emission CNOT
    p_2: float = 0.0    # scattering CZ
    p_loss: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0 <= v <= 1:
                raise ValueError(f"{f.name}={v} outside [0, 1]")

    @classmethod
    def uniform(cls, p: float, p_loss: float = 0.0) -> "ErrorModelParams":
        return cls(p, p, p, p, p, p, p_loss)

    def to_json(self) -> dict:
        return {k: (float(v) if not isinstance(v, Fraction) else str(v)) for k, v in asdict(self).items()}

    @classmethod
    def from_json(cls, d: dict | str) -> "ErrorModelParams":
        if isinstance(d, str):
            d = json.loads(d)
        if "uniform" in d:
            return cls.uniform(float(d["uniform"]), float(d.get("p_loss", 0.0)))
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class EffectiveRates:
    q_x: Any
    q_y: Any
    q_z: Any
    q_yz: Any
    q_zy: Any
    q_xy: Any
    q_xz: Any

    @property
    def axis(self) -> np.ndarray:
        """Independent flip rate by face type / syndrome-edge axis (x, y, z)."""
        return np.array([float(self.q_x), float(self.q_y), float(self.q_z)])

    @property
    def in_domain(self) -> bool:
        return all(v < 0.5 for v in asdict(self).values())


def effective_rates(params: ErrorModelParams, check: bool = True) -> EffectiveRates:
    """Lowest-order flip probabilities per face type, from the local gate sequences."""
    p = params
    q_x = (Fraction(4, 3) * p.p_q + Fraction(2, 3) * (p.p_T + p.p_F)
           + Fraction(8, 15) * p.p_2q + Fraction(32, 15) * p.p_2)
    q_y = Fraction(4, 3) * p.p_q + Fraction(2, 3) * p.p_F + Fraction(16, 15) * (p.p_2q + p.p_2)
    q_yz = Fraction(4, 15) * p.p_2
    q_xy = Fraction(4, 15) * p.p_2 + Fraction(8, 15) * p.p_2q
    if not any(isinstance(v, Fraction) for v in asdict(p).values()):
        q_x, q_y, q_yz, q_xy = (float(v) for v in (q_x, q_y, q_yz, q_xy))
    r = EffectiveRates(q_x, q_y, q_y, q_yz, q_yz, q_xy, q_xy)
    if check and not r.in_domain:
        raise RateDomainError(f"effective rates {r} reach 1/2")
    return r


# ---------------------------------------------------------------------------
# depolarizing channels

def depolarize1(p: float, rng: np.random.Generator) -> str:
    if rng.random() >= p:
        return "I"
    return PAULIS[int(rng.integers(1, 4))]


def depolarize2(p: float, rng: np.random.Generator) -> tuple[str, str]:
    if rng.random() >= p:
        return ("I", "I")
    k = int(rng.integers(1, 16))
    return (PAULIS[k // 4], PAULIS[k % 4])


def sample_depolarize1(p: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Pauli indices (0=I, 1=X, 2=Y, 3=Z)."""
    hit = rng.random(size) < p
    return np.where(hit, rng.integers(1, 4, size), 0)


def sample_depolarize2(p: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Two-qubit Pauli indices 4*a + b."""
    hit = rng.random(size) < p
    return np.where(hit, rng.integers(1, 16, size), 0)


# ---------------------------------------------------------------------------

def supercheck_rate(n_x: int, n_y: int, n_z: int, rates: EffectiveRates | Any) -> Any:
    """Probability of an odd number of flips over a bundle of n_x + n_y + n_z edges."""
    if isinstance(rates, EffectiveRates):
        qx, qy, qz = rates.q_x, rates.q_y, rates.q_z
    else:
        qx, qy, qz = rates
    one = Fraction(1) if isinstance(qx, Fraction) else 1.0
    prod = (one - 2 * qx) ** n_x * (one - 2 * qy) ** n_y * (one - 2 * qz) ** n_z
    return (one - prod) / 2


def supercheck_rates(n: np.ndarray, q_axis: np.ndarray) -> np.ndarray:
    """Vectorized supercheck rate; n has shape (..., 3)."""
    base = 1.0 - 2.0 * np.asarray(q_axis, dtype=float)
    return 0.5 * (1.0 - np.prod(base ** n, axis=-1))


def edge_weight(q: Any, q_min: float = Q_MIN) -> float:
    q = float(q)
    if q < 0 or q > 0.5:
        raise ValueError(f"edge rate {q} outside [0, 1/2]")
    q = max(q, q_min)
    return math.log((1 - q) / q)


def edge_weights(q: np.ndarray, q_min: float = Q_MIN) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if (q < 0).any() or (q > 0.5).any():
        raise ValueError("edge rates outside [0, 1/2]")
    q = np.maximum(q, q_min)
    return np.log((1 - q) / q)


# ---------------------------------------------------------------------------
# fiber loss

def loss_per_qubit_db(lambda_db_per_km: float, v: float = SPEED_IN_FIBER, tau: float = 1e-9) -> float:
    """Attenuation accumulated while one photon waits one emission period, in dB."""
    return lambda_db_per_km * v * tau / 1000.0


def loss_from_db_per_qubit(eta_db: float, L: int | np.ndarray) -> Any:
    """A photon waits roughly L^2 emission periods in the delay lines of an L^3 block."""
    return 1.0 - 10.0 ** (-eta_db * np.asarray(L, dtype=float) ** 2 / 10.0)


def fiber_loss(lambda_db_per_km: float, v: float, tau: float, L: int) -> float:
    return float(loss_from_db_per_qubit(loss_per_qubit_db(lambda_db_per_km, v, tau), L))


def l_max(lambda_db_per_km: float, v: float = SPEED_IN_FIBER, tau: float = 1e-9,
          p_perc: float = P_PERC_CUBIC) -> float:
    """Largest L whose delay-line loss stays below the percolation bound."""
    if not 0 < p_perc < 1:
        raise ValueError("p_perc must lie in (0, 1)")
    if lambda_db_per_km <= 0 or v <= 0 or tau <= 0:
        raise ValueError("lambda, v and tau must be positive")
    eta = loss_per_qubit_db(lambda_db_per_km, v, tau)
    return abs(10.0 / eta * math.log10(1.0 - p_perc)) ** 0.5
