"""Bin arrival timelines at the scattering modules, effective circuits and state verification."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..stabilizer import StabilizerState
from .schedule import ProtocolSchedule, PulseKind

K = PulseKind


class CollisionError(AssertionError):
    pass


@dataclass(frozen=True)
class Overlap:
    module: int
    time: Fraction
    left: int          # photon on its first pass (travelling into the loop)
    left_bin: str
    right: int         # photon returning from the loop
    right_bin: str

    def pair(self) -> tuple[int, int]:
        return (min(self.left, self.right), max(self.left, self.right))


@dataclass
class CollisionReport:
    overlaps: list[Overlap]
    missing: list[tuple[int, int, int]] = field(default_factory=list)
    repeated: list[tuple[int, int, int]] = field(default_factory=list)
    unintended: list[Overlap] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing or self.repeated or self.unintended)

    def between(self, a: int, b: int) -> list[Overlap]:
        key = (min(a, b), max(a, b))
        return [o for o in self.overlaps if o.pair() == key]

    def raise_for_failure(self) -> None:
        if self.unintended:
            o = self.unintended[0]
            raise CollisionError(f"unintended overlap of photons {o.left} and {o.right} "
                                 f"in module {o.module} at t={o.time}")
        if self.missing:
            raise CollisionError(f"intended edge {self.missing[0]} never overlaps")
        if self.repeated:
            raise CollisionError(f"intended edge {self.repeated[0]} overlaps more than once")


def photon_bins(schedule: ProtocolSchedule) -> dict[int, dict[str, Fraction]]:
    bins: dict[int, dict[str, Fraction]] = defaultdict(dict)
    for ev in schedule.events:
        if ev.kind == K.PI_O:
            bins[ev.photon][ev.bin] = ev.time
    return dict(bins)


def _blocked(schedule: ProtocolSchedule, module: int, t: Fraction) -> bool:
    return any(w.module == module and w.start <= t <= w.end for w in schedule.scatter_off)


def find_overlaps(schedule: ProtocolSchedule) -> list[Overlap]:
    """Every coincidence of a first-pass bin with a returning bin at each module."""
    bins = photon_bins(schedule)
    out = []
    offset = Fraction(0)
    for m, d in enumerate(schedule.delays):
        left = defaultdict(list)
        for k, bb in bins.items():
            for name, t in bb.items():
                left[t + offset].append((k, name))
        for k, bb in bins.items():
            for name, t in bb.items():
                ta = t + offset + d
                for (j, jname) in left.get(ta, ()):
                    if j == k or _blocked(schedule, m, ta):
                        continue
                    out.append(Overlap(m, ta, j, jname, k, name))
        offset += d
    out.sort(key=lambda o: (o.time, o.module, o.left, o.right))
    return out


def verify_collisions(schedule: ProtocolSchedule) -> CollisionReport:
    """Each intended edge must meet exactly once, in its own module; nothing else may meet."""
    overlaps = find_overlaps(schedule)
    intended = {(m, min(a, b), max(a, b)) for m, a, b in schedule.intended}
    count: dict[tuple[int, int, int], int] = defaultdict(int)
    rep = CollisionReport(overlaps)
    for o in overlaps:
        key = (o.module,) + o.pair()
        if key in intended:
            count[key] += 1
        else:
            rep.unintended.append(o)
    for key in sorted(intended):
        if count[key] == 0:
            rep.missing.append(key)
        elif count[key] > 1:
            rep.repeated.append(key)
    return rep


def static_corrections(overlaps: list[Overlap]) -> list[int]:
    """Z frame left by the X-conjugated CZs: X^a X^b CZ X^a X^b = CZ Z_R^a Z_L^b."""
    out = []
    for o in overlaps:
        if o.left_bin == "late":
            out.append(o.right)
        if o.right_bin == "late":
            out.append(o.left)
    return out


# ---------------------------------------------------------------------------

def effective_circuit(schedule: ProtocolSchedule,
                      overlaps: list[Overlap] | None = None) -> list[tuple]:
    """Ordered operations: ("G", gate, qubits) | ("M", basis, q, byproduct) | ("R", q)."""
    e = schedule.emitter
    if overlaps is None:
        overlaps = find_overlaps(schedule)
    items: list[tuple[tuple, list[tuple]]] = []
    for seq, ev in enumerate(schedule.events):
        ops: list[tuple] = []
        stage = 0
        if ev.kind == K.PI_O:
            if ev.bin == "early":
                ops = [("G", "CNOT", (e, ev.photon))]
            elif ev.bin == "single":
                ops = [("G", "X", (ev.photon,))]
        elif ev.kind == K.PI_R:
            ops = [("G", "X", (e,))]
        elif ev.kind == K.HALF_PI_R:
            ops = [("G", "H", (e,))]
        elif ev.kind == K.PI_R_HALF_PI_R:
            ops = [("G", "X", (e,)), ("G", "H", (e,))]
        elif ev.kind == K.EMITTER_GATE:
            ops = [("G", ev.gate, (e,))]
        elif ev.kind == K.EMITTER_MEASURE:
            ops = [("M", ev.basis, e, ev.byproduct)]
        elif ev.kind == K.EMITTER_RESET:
            ops = [("R", e)]
        elif ev.kind == K.PHOTON_GATE:
            stage = 1
            ops = [("G", ev.gate, ev.qubits)]
        elif ev.kind == K.SWITCH_SET and ev.position == "mzi":
            # unbalanced interferometer on a single-bin photon: |1> -> |+> (H then Z)
            stage = 1
            ops = [("G", "H", (ev.photon,)), ("G", "Z", (ev.photon,))]
        elif ev.kind == K.PHOTON_MEASURE:
            stage = 9
            ops = [("M", ev.basis, ev.photon, ev.byproduct), ("R", ev.photon)]
        if ops:
            items.append(((ev.time, stage, seq), ops))
    for i, o in enumerate(overlaps):
        ops = []
        xs = [q for q, b in ((o.left, o.left_bin), (o.right, o.right_bin)) if b == "late"]
        ops += [("G", "X", (q,)) for q in xs]
        ops.append(("G", "CZ", (o.left, o.right)))
        ops += [("G", "X", (q,)) for q in xs]
        items.append(((o.time, 2 + o.module, i), ops))
    items.sort(key=lambda it: it[0])
    return [op for _, ops in items for op in ops]


def run_circuit(n: int, ops: list[tuple], rng: np.random.Generator) -> tuple[StabilizerState, np.ndarray]:
    """Execute; returns the state and the accumulated Z byproduct mask."""
    s = StabilizerState(n)
    frame = np.zeros(n, dtype=np.uint8)
    for op in ops:
        if op[0] == "G":
            s.apply(op[1], *op[2])
        elif op[0] == "M":
            if s.measure(op[1], op[2], rng) == -1:
                frame[list(op[3])] ^= 1
        elif op[0] == "R":
            s.reset(op[1], rng)
    return s, frame


def expected_state(schedule: ProtocolSchedule) -> StabilizerState:
    n = schedule.n_qubits
    s = StabilizerState(n)
    gone = set(schedule.discarded)
    for q in range(n):
        if q not in gone:
            s.h(q)
    for a, b in sorted(schedule.target.edges):
        s.cz(a, b)
    return s


def verify_protocol(schedule: ProtocolSchedule, seed: int | np.random.Generator = 0,
                    circuit: list[tuple] | None = None) -> bool:
    """Simulate with random measurement outcomes, undo the recorded Pauli frame, compare."""
    return verify_protocol_seeds(schedule, [seed], circuit)[0]


def verify_protocol_seeds(schedule: ProtocolSchedule, seeds, circuit: list[tuple] | None = None
                          ) -> list[bool]:
    overlaps = find_overlaps(schedule)
    ops = effective_circuit(schedule, overlaps) if circuit is None else circuit
    fixed = np.zeros(schedule.n_qubits, dtype=np.uint8)
    for q in static_corrections(overlaps):
        fixed[q] ^= 1
    gone = set(schedule.discarded)
    keep = [q for q in range(schedule.n_qubits) if q not in gone]
    edges = sorted(schedule.target.edges)
    out = []
    for seed in seeds:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        s, frame = run_circuit(schedule.n_qubits, ops, rng)
        for q in np.flatnonzero(frame ^ fixed):
            s.pauli_z(int(q))
        # undo the target preparation; equal states leave exactly |0...0>
        for a, b in edges:
            s.cz(a, b)
        for q in keep:
            s.h(q)
        out.append(bool(not s.x.any() and not s.r.any()))
    return out
