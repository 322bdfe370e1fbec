"""Timed pulse schedules for a single quantum emitter plus passive delay-line modules.

All times are exact ``Fraction`` values in abstract units (tau1 for most
protocols, tau1^(0) for trees). ``time_unit_s`` converts to seconds on export.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable

from ..stabilizer import GraphAdjacency


class SchedulingError(ValueError):
    """Timing parameters that cannot produce the intended collisions."""


class PulseKind(str, Enum):
    PI_O = "PiO"                    # optical pi pulse: emits a photon into the current bin
    PI_R = "PiR"                    # Raman pi pulse: X on the emitter
    HALF_PI_R = "HalfPiR"           # Raman pi/2 pulse: Hadamard on the emitter
    PI_R_HALF_PI_R = "PiR+HalfPiR"  # the two Raman pulses merged into one
    EMITTER_GATE = "EmitterGate"
    EMITTER_MEASURE = "EmitterMeasure"
    EMITTER_RESET = "EmitterReset"
    PHOTON_GATE = "PhotonGate"
    PHOTON_MEASURE = "PhotonMeasure"
    SWITCH_SET = "SwitchSet"


OPTICAL_PULSES = (PulseKind.PI_O, PulseKind.PI_R, PulseKind.HALF_PI_R, PulseKind.PI_R_HALF_PI_R)


def frac(x: Any) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class PulseEvent:
    time: Fraction
    kind: PulseKind
    photon: int | None = None        # PiO target / measured photon / MZI photon
    bin: str | None = None           # "early", "late" or "single" for PiO
    gate: str | None = None          # PhotonGate / EmitterGate
    qubits: tuple[int, ...] = ()     # PhotonGate targets (emission order)
    basis: str | None = None         # measurements
    byproduct: tuple[int, ...] = ()  # photons receiving Z when the outcome is -1
    position: str | None = None      # SwitchSet
    module: int | None = None        # SwitchSet acting on a scatterer

    def to_json(self, unit_s: float) -> dict:
        d: dict[str, Any] = {"time": str(self.time), "time_ns": float(self.time) * unit_s * 1e9,
                             "kind": self.kind.value}
        for k in ("photon", "bin", "gate", "basis", "position", "module"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        if self.qubits:
            d["qubits"] = list(self.qubits)
        if self.byproduct:
            d["byproduct"] = list(self.byproduct)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PulseEvent":
        return cls(
            time=Fraction(d["time"]), kind=PulseKind(d["kind"]), photon=d.get("photon"),
            bin=d.get("bin"), gate=d.get("gate"), qubits=tuple(d.get("qubits", ())),
            basis=d.get("basis"), byproduct=tuple(d.get("byproduct", ())),
            position=d.get("position"), module=d.get("module"),
        )


@dataclass(frozen=True)
class ScatterWindow:
    """Scatterer of ``module`` detuned (no CZ) for arrivals with start <= t <= end."""
    module: int
    start: Fraction
    end: Fraction


@dataclass(frozen=True)
class ProtocolSchedule:
    name: str
    events: tuple[PulseEvent, ...]
    tau1: Fraction
    tau2: Fraction
    delays: tuple[Fraction, ...]
    emitted: int
    target: GraphAdjacency                 # on emitted + 1 qubits; emitter is the last one
    discarded: tuple[int, ...] = ()        # qubits expected back in |0>
    intended: tuple[tuple[int, int, int], ...] = ()   # (module, photon, photon)
    scatter_off: tuple[ScatterWindow, ...] = ()
    params: dict = field(default_factory=dict)
    time_unit_s: float = 1e-9

    def __post_init__(self):
        times = [e.time for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise SchedulingError("event times must be nondecreasing")
        if any(d <= 0 for d in self.delays):
            raise SchedulingError("delays must be strictly positive")
        if self.target.n != self.emitted + 1:
            raise ValueError("target must cover every photon plus the emitter")
        bad = [d for d in self.discarded if self.target.neighbors(d)]
        if bad:
            raise ValueError(f"discarded qubits {bad} carry target edges")

    @property
    def emitter(self) -> int:
        return self.emitted

    @property
    def n_qubits(self) -> int:
        return self.emitted + 1

    def pulse_count(self) -> int:
        return sum(e.kind in OPTICAL_PULSES for e in self.events)

    def count(self, kind: PulseKind) -> int:
        return sum(e.kind == kind for e in self.events)

    def with_delays(self, delays: Iterable[Any]) -> "ProtocolSchedule":
        return replace(self, delays=tuple(frac(d) for d in delays))

    def to_json(self) -> dict:
        u = self.time_unit_s
        return {
            "name": self.name,
            "params": self.params,
            "time_unit_s": u,
            "tau1": str(self.tau1),
            "tau2": str(self.tau2),
            "delays": [str(d) for d in self.delays],
            "delays_ns": [float(d) * u * 1e9 for d in self.delays],
            "emitted": self.emitted,
            "target": self.target.to_json(),
            "discarded": list(self.discarded),
            "intended": [list(t) for t in self.intended],
            "scatter_off": [[w.module, str(w.start), str(w.end)] for w in self.scatter_off],
            "events": [e.to_json(u) for e in self.events],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, d: dict | str) -> "ProtocolSchedule":
        if isinstance(d, str):
            d = json.loads(d)
        return cls(
            name=d["name"],
            events=tuple(PulseEvent.from_json(e) for e in d["events"]),
            tau1=Fraction(d["tau1"]), tau2=Fraction(d["tau2"]),
            delays=tuple(Fraction(x) for x in d["delays"]),
            emitted=int(d["emitted"]),
            target=GraphAdjacency.from_json(d["target"]),
            discarded=tuple(d.get("discarded", ())),
            intended=tuple(tuple(t) for t in d.get("intended", ())),
            scatter_off=tuple(ScatterWindow(int(m), Fraction(a), Fraction(b))
                              for m, a, b in d.get("scatter_off", ())),
            params=d.get("params", {}),
            time_unit_s=float(d.get("time_unit_s", 1e-9)),
        )


@dataclass(frozen=True)
class TreeTiming:
    """Per-layer bin spacings of the tree protocol, in units of tau1_0."""
    depth: int
    tau1_0: Fraction
    tau1: tuple[Fraction, ...]
    tau2: tuple[Fraction, ...]
    t_init: tuple[Fraction, ...]
    Delta: Fraction

    @classmethod
    def build(cls, depth: int, tau1_0: Any = 1) -> "TreeTiming":
        t0 = frac(tau1_0)
        delta = (2 ** depth + 1) * t0
        t1, t2, ti = [t0], [t0], [Fraction(0)]
        for n in range(depth - 1):
            t1.append(t2[n])
            t2.append(2 * t1[n] + t2[n])
            ti.append(delta + ti[n] + t1[n])
        return cls(depth, t0, tuple(t1), tuple(t2), tuple(ti), delta)

    @staticmethod
    def closed_tau1(n: int, t0: Fraction) -> Fraction:
        return Fraction(t0) / 3 * (2 ** (n + 1) + (-1) ** n)

    @staticmethod
    def closed_tau2(n: int, t0: Fraction) -> Fraction:
        return Fraction(t0) / 3 * (2 ** (n + 2) - (-1) ** n)

    @staticmethod
    def closed_t_init(n: int, t0: Fraction, delta: Fraction) -> Fraction:
        return n * delta + Fraction(t0) / 6 * (4 * (2 ** n - 1) + 1 - (-1) ** n)
