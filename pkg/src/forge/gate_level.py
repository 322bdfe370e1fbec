"""Gate-level Pauli propagation through the local emission-and-scattering gadgets.

Each gadget is a short Clifford sequence around the photon(s) of interest with depolarizing
fault locations.  A fault is pushed forward through the remaining gates as a Pauli frame; the
gadget's target is a photon that is finally X-measured, so it is flipped iff the frame ends with
a Z component on it.  Frame propagation is linear over GF(2), so the effect of each fault
location can be tabulated once and the Monte Carlo reduces to sampling faults and looking up.

Conventions that fix the gauge (a photon X error is equivalent to other Paulis modulo the
instantaneous stabilizer):

* after each emission round of a chain, an X on the emitter is traded for the stabilizer
  X_q Z_k of the photon k just released, so emitter X errors become a Z on that photon;
* in the interrupt gadget an X on the fresh photon right after its CNOT is traded for the Bell
  stabilizer X_q X_k;
* X components left on photons at the end are dropped (they only act on neighbours already
  accounted for by the gadgets that own them).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .error_model import ErrorModelParams

# Pauli index -> (x, z): I, X, Y, Z
_X = np.array([0, 1, 1, 0], dtype=np.uint8)
_Z = np.array([0, 0, 1, 1], dtype=np.uint8)


@dataclass(frozen=True)
class Gadget:
    name: str
    n_qubits: int
    ops: tuple[tuple, ...]
    targets: tuple[int, ...]     # one target: single flip; two: joint (pair) flip

    def fault_locations(self) -> list[int]:
        return [i for i, op in enumerate(self.ops) if op[0] in ("F1", "F2")]

    def propagate(self, start: int, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Push a frame (arrays of shape (n_qubits, S)) through ops[start:]."""
        x = x.copy()
        z = z.copy()
        for op in self.ops[start:]:
            kind = op[0]
            if kind == "H":
                q = op[1]
                x[q], z[q] = z[q].copy(), x[q].copy()
            elif kind == "CNOT":
                c, t = op[1], op[2]
                x[t] ^= x[c]
                z[c] ^= z[t]
            elif kind == "CZ":
                a, b = op[1], op[2]
                z[a] ^= x[b]
                z[b] ^= x[a]
            elif kind == "STAB":
                trig, sx, sz = op[1], op[2], op[3]
                hit = x[trig].copy()
                for q in sx:
                    x[q] ^= hit
                for q in sz:
                    z[q] ^= hit
            elif kind == "MEAS":
                # Z-basis readout of the emitter: X/Y flips it; the byproduct lands on photons
                q, byp = op[1], op[2]
                for k in byp:
                    z[k] ^= x[q]
                x[q] = 0
                z[q] = 0
        return x, z

    def _flipped(self, z: np.ndarray) -> np.ndarray:
        out = z[self.targets[0]].astype(bool)
        for t in self.targets[1:]:
            out &= z[t].astype(bool)
        return out

    @cached_property
    def tables(self) -> dict[int, np.ndarray]:
        """Fault location -> boolean table over Pauli indices (4 or 16) of 'target flipped'."""
        out = {}
        for i in self.fault_locations():
            op = self.ops[i]
            qs = op[2:]
            npaulis = 4 ** len(qs)
            x = np.zeros((self.n_qubits, npaulis), dtype=np.uint8)
            z = np.zeros_like(x)
            idx = np.arange(npaulis)
            for j, q in enumerate(qs):
                digit = (idx >> (2 * (len(qs) - 1 - j))) & 3
                x[q] = _X[digit]
                z[q] = _Z[digit]
            _, zf = self.propagate(i + 1, x, z)
            out[i] = self._flipped(zf)
        return out

    def exact_rate(self, params: ErrorModelParams) -> Fraction | float:
        """First-order rate: sum over locations of p times the harmful fraction."""
        total = Fraction(0)
        exact = True
        for i, tab in self.tables.items():
            p = getattr(params, self.ops[i][1])
            frac = Fraction(int(tab[1:].sum()), len(tab) - 1)
            if isinstance(p, Fraction):
                total += p * frac
            else:
                exact = False
                total += Fraction(p) * frac
        return total if exact else float(total)

    def sample(self, params: ErrorModelParams, n_samples: int, rng: np.random.Generator,
               chunk: int = 1 << 18) -> "GadgetEstimate":
        counts_sum = 0
        counts_sq = 0
        odd = 0
        done = 0
        while done < n_samples:
            m = min(chunk, n_samples - done)
            c = np.zeros(m, dtype=np.int64)
            for i, tab in self.tables.items():
                p = float(getattr(params, self.ops[i][1]))
                npaulis = len(tab)
                hit = rng.random(m) < p
                pauli = rng.integers(1, npaulis, m)
                c += tab[pauli] & hit
            counts_sum += int(c.sum())
            counts_sq += int((c * c).sum())
            odd += int((c & 1).sum())
            done += m
        mean = counts_sum / n_samples
        var = max(counts_sq / n_samples - mean * mean, 0.0)
        return GadgetEstimate(mean, (var / n_samples) ** 0.5, odd / n_samples, n_samples)


@dataclass(frozen=True)
class GadgetEstimate:
    rate: float           # mean number of flipping faults per run (first-order rate)
    stderr: float
    parity_rate: float    # fraction of runs with an odd number of flipping faults
    n_samples: int

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.rate - float(value)) <= sigmas * max(self.stderr, 1e-15)


def _f1(name: str, q: int) -> tuple:
    return ("F1", name, q)


def _f2(name: str, a: int, b: int) -> tuple:
    return ("F2", name, a, b)


def x_type_gadget() -> Gadget:
    """An x-face photon n, emitted on its own (interrupt method) and scattered with four neighbours."""
    q, n, m = 0, 1, (2, 3, 4, 5)
    ops = [("H", q), _f1("p_q", q),
           ("CNOT", q, n), _f2("p_2q", q, n),
           ("STAB", n, (q, n), ()),
           ("H", q), _f1("p_q", q),
           _f1("p_T", q),
           ("MEAS", q, (n,))]
    for mi in m:
        ops += [("CZ", n, mi), _f2("p_2", n, mi)]
    ops.append(_f1("p_F", n))
    return Gadget("x", 6, tuple(ops), (n,))


def _chain(prev: int, mid: int, nxt: int, q: int = 0, faults_on_prev: bool = True) -> list[tuple]:
    ops = [("CNOT", q, prev)]
    if faults_on_prev:
        ops.append(_f2("p_2q", q, prev))
    ops += [("H", q), _f1("p_q", q), ("STAB", q, (q,), (prev,)),
            ("CNOT", q, mid), _f2("p_2q", q, mid),
            ("H", q), _f1("p_q", q), ("STAB", q, (q,), (mid,)),
            ("CNOT", q, nxt), ("H", q), ("STAB", q, (q,), (nxt,)),
            ("MEAS", q, ())]
    return ops


def y_type_gadget() -> Gadget:
    """A chain photon n (y or z face) between n-1 and n+1, scattered with its two neighbours."""
    prev, n, nxt, m1, m2 = 1, 2, 3, 4, 5
    ops = _chain(prev, n, nxt)
    ops += [("CZ", n, m1), _f2("p_2", n, m1), ("CZ", n, m2), _f2("p_2", n, m2),
            _f1("p_F", n)]
    return Gadget("y", 6, tuple(ops), (n,))


def xy_pair_gadget() -> Gadget:
    """Joint flip of the two x-face partners of a chain photon k (same scattering module)."""
    prev, k, nxt, n1, n2 = 1, 2, 3, 4, 5
    ops = _chain(prev, k, nxt)
    ops += [("CZ", k, n1), _f2("p_2", k, n1), ("CZ", k, n2), _f2("p_2", k, n2)]
    return Gadget("xy", 6, tuple(ops), (n1, n2))


def yz_pair_gadget() -> Gadget:
    """Joint flip of the two partners an x-face photon meets in one module."""
    q, k, n1, n2 = 0, 1, 2, 3
    ops = [("H", q), _f1("p_q", q),
           ("CNOT", q, k), _f2("p_2q", q, k),
           ("STAB", k, (q, k), ()),
           ("H", q), _f1("p_q", q), _f1("p_T", q),
           ("MEAS", q, (k,)),
           ("CZ", k, n1), _f2("p_2", k, n1), ("CZ", k, n2), _f2("p_2", k, n2)]
    return Gadget("yz", 4, tuple(ops), (n1, n2))


GADGETS = {"x": x_type_gadget, "y": y_type_gadget, "z": y_type_gadget,
           "xy": xy_pair_gadget, "xz": xy_pair_gadget, "yz": yz_pair_gadget, "zy": yz_pair_gadget}


def gadget(kind: str) -> Gadget:
    try:
        return GADGETS[kind]()
    except KeyError:
        raise ValueError(f"unknown gadget {kind!r}; choose from {sorted(GADGETS)}") from None


def sample_rates(params: ErrorModelParams, n_samples: int, rng: np.random.Generator
                 ) -> dict[str, GadgetEstimate]:
    return {k: gadget(k).sample(params, n_samples, rng) for k in ("x", "y", "xy", "yz")}
