"""Compile graph-state targets into emitter pulse schedules.

Photons are numbered in emission order and the emitter is the qubit after the
last photon. Each photon is a time-bin qubit: an early bin at t and a late bin
at t + tau1, with tau2 between the late bin and the next photon's early bin.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from math import prod
from typing import Any, Sequence

from ..stabilizer import GraphAdjacency
from .schedule import (
    ProtocolSchedule, PulseEvent, PulseKind, ScatterWindow, SchedulingError, TreeTiming, frac,
)

K = PulseKind

# event order among equal times: emitter pulses, then switches, then photon-side operations
_RANK = {K.SWITCH_SET: 1, K.PHOTON_GATE: 2, K.PHOTON_MEASURE: 3}


class _Program:
    """Accumulates emitter pulses and photon-side events."""

    def __init__(self):
        self.events: list[PulseEvent] = []
        self.photons = 0
        self.bins: dict[int, tuple[Fraction, Fraction]] = {}

    def add(self, time, kind, **kw) -> None:
        self.events.append(PulseEvent(frac(time), kind, **kw))

    def prepare(self, t) -> None:
        self.add(t, K.HALF_PI_R)

    def emit(self, t, tau1, gap, final: str | None = "R") -> int:
        """Early/late emission pair for a new photon; ``final`` picks the closing Raman pulse."""
        k = self.photons
        self.photons += 1
        t, tau1, gap = frac(t), frac(tau1), frac(gap)
        self.add(t, K.PI_O, photon=k, bin="early")
        self.add(t + tau1 / 2, K.PI_R)
        self.add(t + tau1, K.PI_O, photon=k, bin="late")
        if final == "R":
            self.add(t + tau1 + gap / 4, K.PI_R)
        elif final == "merged":
            self.add(t + tau1 + gap / 4, K.PI_R_HALF_PI_R)
        self.bins[k] = (t, t + tau1)
        return k

    def measure(self, t, basis: str, byproduct: Sequence[int], reset_at=None) -> None:
        self.add(t, K.EMITTER_MEASURE, basis=basis, byproduct=tuple(byproduct))
        if reset_at is not None:
            self.add(reset_at, K.EMITTER_RESET)

    def photon_gate(self, k: int, gate: str) -> None:
        self.add(self.bins[k][0], K.PHOTON_GATE, gate=gate, qubits=(k,))

    def sorted_events(self) -> tuple[PulseEvent, ...]:
        idx = sorted(range(len(self.events)),
                     key=lambda i: (self.events[i].time, _RANK.get(self.events[i].kind, 0), i))
        return tuple(self.events[i] for i in idx)


def _check_positive(**kw) -> None:
    for k, v in kw.items():
        if frac(v) <= 0:
            raise ValueError(f"{k} must be positive, got {v}")


def _check_bins(tau1, tau2, strict: bool) -> None:
    if strict and frac(tau1) >= frac(tau2):
        raise SchedulingError(f"tau1={tau1} must be smaller than tau2={tau2} "
                              "or early and late bins collide in the delay modules")


def _linear_line(prog: _Program, t0: Fraction, n: int, tau1, tau2, measure: bool = True) -> list[int]:
    """One linear cluster; emitter X-measured (Z byproduct on the last photon) and reset."""
    tau = tau1 + tau2
    prog.prepare(t0 - tau2 / 4)
    ks = []
    for i in range(n):
        last = i == n - 1
        final = "R" if (last and measure) else "merged"
        ks.append(prog.emit(t0 + i * tau, tau1, tau2, final))
    if measure:
        tl = t0 + (n - 1) * tau + tau1
        prog.measure(tl + tau2 / 2, "X", (ks[-1],), reset_at=tl + 5 * tau2 / 8)
    return ks


def _plus_photon(prog: _Program, t: Fraction, tau1, tau2) -> int:
    """|+> photon by the interrupt method: Bell pair, emitter X-measurement, reset."""
    prog.prepare(t - tau2 / 4)
    k = prog.emit(t, tau1, tau2, "R")
    prog.measure(t + tau1 + tau2 / 2, "X", (k,), reset_at=t + tau1 + 5 * tau2 / 8)
    return k


def _graph(n: int, edges) -> GraphAdjacency:
    return GraphAdjacency.from_edges(n, edges)


# ---------------------------------------------------------------------------

def compile_linear_cluster(N: int, tau1: Any = 1, tau2: Any = 2,
                           measure_emitter: bool = True) -> ProtocolSchedule:
    if N < 1:
        raise ValueError("N must be at least 1")
    tau1, tau2 = frac(tau1), frac(tau2)
    _check_positive(tau1=tau1, tau2=tau2)
    prog = _Program()
    ks = _linear_line(prog, Fraction(0), N, tau1, tau2, measure=measure_emitter)
    e = N
    edges = list(zip(ks, ks[1:]))
    if not measure_emitter:
        edges.append((ks[-1], e))
    return ProtocolSchedule(
        name="linear", events=prog.sorted_events(), tau1=tau1, tau2=tau2, delays=(),
        emitted=N, target=_graph(N + 1, edges), discarded=(e,) if measure_emitter else (),
        params={"N": N, "tau1": str(tau1), "tau2": str(tau2), "measure_emitter": measure_emitter})


def compile_star(N: int, tau1: Any = 1, tau2: Any = 2,
                 photon_hadamards: bool = True) -> ProtocolSchedule:
    """GHZ state of emitter and N photons; Hadamards on the photons turn it into a star."""
    if N < 1:
        raise ValueError("N must be at least 1")
    tau1, tau2 = frac(tau1), frac(tau2)
    _check_positive(tau1=tau1, tau2=tau2)
    prog = _Program()
    tau = tau1 + tau2
    prog.prepare(-tau2 / 4)
    ks = [prog.emit(i * tau, tau1, tau2, "R") for i in range(N)]
    if photon_hadamards:
        for k in ks:
            prog.photon_gate(k, "H")
    return ProtocolSchedule(
        name="star", events=prog.sorted_events(), tau1=tau1, tau2=tau2, delays=(),
        emitted=N, target=_graph(N + 1, [(k, N) for k in ks]),
        params={"N": N, "tau1": str(tau1), "tau2": str(tau2)})


PLUS_METHODS = ("interrupt", "star_then_measure", "two_level_mzi")


def compile_plus_stream(N: int, method: str = "interrupt", tau1: Any = 1,
                        tau2: Any = 2) -> ProtocolSchedule:
    """N unentangled |+> photons."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if method not in PLUS_METHODS:
        raise ValueError(f"method must be one of {PLUS_METHODS}")
    tau1, tau2 = frac(tau1), frac(tau2)
    _check_positive(tau1=tau1, tau2=tau2)
    tau = tau1 + tau2
    prog = _Program()
    if method == "interrupt":
        for i in range(N):
            _plus_photon(prog, i * tau, tau1, tau2)
    elif method == "star_then_measure":
        prog.prepare(-tau2 / 4)
        ks = [prog.emit(i * tau, tau1, tau2, "R") for i in range(N)]
        for k in ks:
            prog.photon_gate(k, "H")
        tl = (N - 1) * tau + tau1
        prog.measure(tl + tau2 / 2, "Z", ks, reset_at=tl + 5 * tau2 / 8)
    else:
        # emitter parked in |1>: every optical pi pulse releases one photon in a
        # single bin; an interferometer then maps |1> to (|e> + |l>)/sqrt 2
        prog.add(-tau2 / 2, K.PI_R)
        for i in range(N):
            t = i * tau
            k = prog.photons
            prog.photons += 1
            prog.add(t, K.PI_O, photon=k, bin="single")
            prog.bins[k] = (t, t)
            prog.add(t, K.SWITCH_SET, photon=k, position="mzi")
        prog.add((N - 1) * tau + tau1, K.EMITTER_RESET)
    return ProtocolSchedule(
        name="plus_stream", events=prog.sorted_events(), tau1=tau1, tau2=tau2, delays=(),
        emitted=N, target=GraphAdjacency(N + 1), discarded=(N,),
        params={"N": N, "method": method, "tau1": str(tau1), "tau2": str(tau2)})


# ---------------------------------------------------------------------------
# lattices with delay modules

def _stride(dims: Sequence[int], m: int) -> int:
    return prod(dims[:m + 1])


def _grid_edges(dims: Sequence[int], site: dict | None = None):
    """Open-boundary hypercubic edges over slot coordinates (axis 0 fastest)."""
    out = []
    for coord in itertools.product(*[range(L) for L in reversed(dims)]):
        c = tuple(reversed(coord))
        s = _slot(c, dims)
        for a in range(len(dims)):
            if c[a] + 1 < dims[a]:
                c2 = list(c)
                c2[a] += 1
                out.append((a, s, _slot(tuple(c2), dims)))
    return out


def _slot(c, dims) -> int:
    s, m = 0, 1
    for ci, L in zip(c, dims):
        s += ci * m
        m *= L
    return s


def _modules(dims: Sequence[int], tau1: Fraction, tau: Fraction) -> tuple[Fraction, ...]:
    return tuple(_stride(dims, k - 1) * tau + tau1 for k in range(1, len(dims)))


def _gating(dims: Sequence[int], delays, tau1: Fraction, tau: Fraction) -> list[ScatterWindow]:
    """Detune module m while the first row of each new block along axis m+1 passes.

    Without this the first row of a block would be stitched to the last row of
    the previous block (a helical edge) for every module except the last.
    """
    out = []
    d = len(dims)
    for m in range(d - 2):
        off = sum(delays[:m], Fraction(0))
        block = _stride(dims, m + 1)
        row = _stride(dims, m)
        for b in range(block, prod(dims), block):
            out.append(ScatterWindow(m, b * tau + off, (b + row - 1) * tau + tau1 + off))
    return out


def compile_cluster_nd(dims: Sequence[int], tau1: Any = 1, tau2: Any = 2,
                       strict: bool = True) -> ProtocolSchedule:
    """Open-boundary d-dimensional cluster: linear chains along axis 0, stitched by d-1 modules."""
    dims = [int(L) for L in dims]
    if not dims or any(L < 1 for L in dims):
        raise ValueError("dims must be a nonempty list of positive sizes")
    tau1, tau2 = frac(tau1), frac(tau2)
    _check_positive(tau1=tau1, tau2=tau2)
    if len(dims) > 1:
        _check_bins(tau1, tau2, strict)
    tau = tau1 + tau2
    L1 = dims[0]
    n = prod(dims)
    prog = _Program()
    for line in range(n // L1):
        _linear_line(prog, line * L1 * tau, L1, tau1, tau2)
    delays = _modules(dims, tau1, tau)
    windows = _gating(dims, delays, tau1, tau)
    e = n
    edges = _grid_edges(dims)
    intended = tuple((a - 1, i, j) for a, i, j in edges if a > 0)
    for w in windows:
        prog.add(w.start, K.SWITCH_SET, module=w.module, position="scatter_off")
        prog.add(w.end, K.SWITCH_SET, module=w.module, position="scatter_on")
    return ProtocolSchedule(
        name="cluster", events=prog.sorted_events(), tau1=tau1, tau2=tau2, delays=delays,
        emitted=n, target=_graph(n + 1, [(i, j) for _, i, j in edges]), discarded=(e,),
        intended=intended, scatter_off=tuple(windows),
        params={"dims": dims, "tau1": str(tau1), "tau2": str(tau2), "strict": strict})


def rhg_open_sites(L: int) -> list[tuple[int, int, int]]:
    """Kept sites of the open-boundary RHG block with L cells per side (coordinates 0..2L)."""
    n = 2 * L + 1
    return [(x, y, z) for z in range(n) for y in range(n) for x in range(n)
            if (x % 2 + y % 2 + z % 2) in (1, 2)]


def rhg_open_graph(L: int) -> tuple[list[tuple[int, int, int]], list[tuple[int, int]]]:
    sites = rhg_open_sites(L)
    idx = {s: i for i, s in enumerate(sites)}
    edges = []
    for s in sites:
        for a in range(3):
            t = list(s)
            t[a] += 1
            if tuple(t) in idx:
                edges.append((idx[s], idx[tuple(t)]))
    return sites, edges


RHG_MODES = ("direct", "carve")


def compile_rhg(L: int, mode: str = "direct", tau1: Any = 1, tau2: Any = 2) -> ProtocolSchedule:
    """Open-boundary RHG block of L^3 cells.

    carve: emit the full (2L+1)^3 cubic cluster and Z-measure every site with
    zero or three odd coordinates. direct: leave those time slots empty and emit
    the remaining sites as linear chains or |+> photons.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if mode not in RHG_MODES:
        raise ValueError(f"mode must be one of {RHG_MODES}")
    tau1, tau2 = frac(tau1), frac(tau2)
    _check_positive(tau1=tau1, tau2=tau2)
    _check_bins(tau1, tau2, True)
    n = 2 * L + 1
    dims = [n, n, n]
    tau = tau1 + tau2
    delays = _modules(dims, tau1, tau)
    windows = _gating(dims, delays, tau1, tau)

    def removed(c):
        return (c[0] % 2 + c[1] % 2 + c[2] % 2) in (0, 3)

    if mode == "carve":
        base = compile_cluster_nd(dims, tau1, tau2)
        prog = _Program()
        prog.events = list(base.events)
        prog.photons = base.emitted
        n_ph = base.emitted
        t_end = (n_ph - 1) * tau + tau1 + sum(delays, Fraction(0)) + tau
        measured = []
        for z in range(n):
            for y in range(n):
                for x in range(n):
                    c = (x, y, z)
                    if not removed(c):
                        continue
                    k = _slot(c, dims)
                    nb = []
                    for a in range(3):
                        for dlt in (-1, 1):
                            c2 = list(c)
                            c2[a] += dlt
                            if 0 <= c2[a] < n:
                                nb.append(_slot(tuple(c2), dims))
                    prog.add(t_end, K.PHOTON_MEASURE, photon=k, basis="Z", byproduct=tuple(sorted(nb)))
                    measured.append(k)
        keep = [k for k in range(n_ph) if k not in set(measured)]
        kept_set = set(keep)
        edges = [(i, j) for i, j in base.target.edges if i in kept_set and j in kept_set]
        intended = tuple(t for t in base.intended)
        return ProtocolSchedule(
            name="rhg", events=prog.sorted_events(), tau1=tau1, tau2=tau2, delays=delays,
            emitted=n_ph, target=_graph(n_ph + 1, edges),
            discarded=tuple(sorted(measured)) + (n_ph,), intended=intended,
            scatter_off=base.scatter_off,
            params={"L": L, "mode": mode, "tau1": str(tau1), "tau2": str(tau2)})

    # direct
    prog = _Program()
    slot_photon: dict[int, int] = {}
    for z in range(n):
        for y in range(n):
            t0 = (z * n + y) * n * tau
            if (y % 2) != (z % 2):
                ks = _linear_line(prog, t0, n, tau1, tau2)
                for x, k in enumerate(ks):
                    slot_photon[_slot((x, y, z), dims)] = k
            else:
                for x in range(n):
                    if removed((x, y, z)):
                        continue
                    k = _plus_photon(prog, t0 + x * tau, tau1, tau2)
                    slot_photon[_slot((x, y, z), dims)] = k
    n_ph = prog.photons
    edges, intended = [], []
    for a, i, j in _grid_edges(dims):
        if i in slot_photon and j in slot_photon:
            edges.append((slot_photon[i], slot_photon[j]))
            if a > 0:
                intended.append((a - 1, slot_photon[i], slot_photon[j]))
    for w in windows:
        prog.add(w.start, K.SWITCH_SET, module=w.module, position="scatter_off")
        prog.add(w.end, K.SWITCH_SET, module=w.module, position="scatter_on")
    return ProtocolSchedule(
        name="rhg", events=prog.sorted_events(), tau1=tau1, tau2=tau2, delays=delays,
        emitted=n_ph, target=_graph(n_ph + 1, edges), discarded=(n_ph,),
        intended=tuple(intended), scatter_off=tuple(windows),
        params={"L": L, "mode": mode, "tau1": str(tau1), "tau2": str(tau2)})


def compile_repeater(N: int, tau1: Any = 1, tau2: Any = 2) -> ProtocolSchedule:
    """2N-photon repeater graph: complete graph on the inner N photons, one leaf each.

    Outer photons 0..N-1 come first as a measured-out star (|+> after the
    static Hadamards); the inner block is a star turned complete by local
    complementation at the emitter before the emitter is Z-measured.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    tau1, tau2 = frac(tau1), frac(tau2)
    _check_positive(tau1=tau1, tau2=tau2)
    _check_bins(tau1, tau2, True)
    tau = tau1 + tau2
    prog = _Program()
    prog.add(0, K.SWITCH_SET, position="identity")
    prog.prepare(-tau2 / 4)
    outer = [prog.emit(i * tau, tau1, tau2, "R") for i in range(N)]
    tl = (N - 1) * tau + tau1
    prog.measure(tl + tau2 / 2, "Z", outer, reset_at=tl + 5 * tau2 / 8)
    prog.prepare(N * tau - tau2 / 4)
    prog.add(N * tau, K.SWITCH_SET, position="logic")
    inner = [prog.emit((N + i) * tau, tau1, tau2, "R") for i in range(N)]
    tl = (2 * N - 1) * tau + tau1
    prog.add(tl + 3 * tau2 / 8, K.EMITTER_GATE, gate="SQRT_IX_DAG")
    prog.measure(tl + tau2 / 2, "Z", inner, reset_at=tl + 5 * tau2 / 8)
    prog.add(2 * N * tau, K.SWITCH_SET, position="identity")
    for k in outer + inner:
        prog.photon_gate(k, "H")
    for k in inner:
        prog.photon_gate(k, "SQRT_IZ")
    e = 2 * N
    edges = [(a, b) for a, b in itertools.combinations(inner, 2)]
    edges += [(inner[i], outer[i]) for i in range(N)]
    return ProtocolSchedule(
        name="repeater", events=prog.sorted_events(), tau1=tau1, tau2=tau2,
        delays=(N * tau + tau1,), emitted=2 * N, target=_graph(2 * N + 1, edges),
        discarded=(e,), intended=tuple((0, inner[i], outer[i]) for i in range(N)),
        params={"N": N, "tau1": str(tau1), "tau2": str(tau2)})


def compile_tree(N: int, tau1_0: Any = 1) -> tuple[ProtocolSchedule, TreeTiming]:
    """Complete binary tree with 2^N - 1 photons, emitted bottom layer first, one delay loop."""
    if N < 1:
        raise ValueError("depth must be at least 1")
    timing = TreeTiming.build(N, tau1_0)
    prog = _Program()
    layers: list[list[int]] = []
    for n in range(N):
        t1, t2 = timing.tau1[n], timing.tau2[n]
        layer = []
        for j in range(2 ** (N - 1 - n)):
            layer.append(_plus_photon(prog, timing.t_init[n] + j * (t1 + t2), t1, t2))
        layers.append(layer)
    edges = []
    for n in range(1, N):
        for j, parent in enumerate(layers[n]):
            edges += [(parent, layers[n - 1][2 * j]), (parent, layers[n - 1][2 * j + 1])]
    m = prog.photons
    sched = ProtocolSchedule(
        name="tree", events=prog.sorted_events(), tau1=timing.tau1_0, tau2=timing.tau1_0,
        delays=(timing.Delta,), emitted=m, target=_graph(m + 1, edges), discarded=(m,),
        intended=tuple((0, a, b) for a, b in edges),
        params={"N": N, "tau1_0": str(timing.tau1_0)})
    return sched, timing


def compile_protocol(protocol: str, params: dict) -> ProtocolSchedule:
    """Dispatch used by the command line."""
    p = dict(params)
    if protocol == "linear":
        return compile_linear_cluster(**p)
    if protocol == "star":
        return compile_star(**p)
    if protocol == "plus":
        return compile_plus_stream(**p)
    if protocol == "cluster":
        return compile_cluster_nd(**p)
    if protocol == "rhg":
        return compile_rhg(**p)
    if protocol == "repeater":
        return compile_repeater(**p)
    if protocol == "tree":
        return compile_tree(**p)[0]
    raise ValueError(f"unknown protocol {protocol!r}")
