"""Decoding graph generated by enumerating and propagating every single fault.

Each depolarizing component of every gate is pushed through the noiseless
schedule.  Faults that light up one or two detection events become (part of)
a boundary line or an ordinary line; probabilities of faults sharing
endpoints are combined as the probability of an odd number of them firing.
Leakage is deliberately absent from the graph.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from leaksim.circuits import Schedule, detection_events, run_schedule
from leaksim.core import PAULIS, GateKind, PauliLeak, StructuralError
from leaksim.noise import Injection, NoiseParams, rng_stream


class Dot(NamedTuple):
    site: int
    round: int


BOUNDARY = Dot(-1, -1)


@dataclass(frozen=True)
class FaultClass:
    step: int
    kind: GateKind
    qubits: tuple[int, ...]
    paulis: tuple[PauliLeak, ...]
    probability: float


@dataclass
class Line:
    u: Dot
    v: Dot
    probability: float = 0.0
    direct_probability: float = 0.0
    logical: int = 0
    record_flips: frozenset = frozenset()
    _dominant: float = field(default=-1.0, repr=False)

    @property
    def weight(self) -> float:
        return -math.log(self.probability)

    @property
    def endpoints(self) -> tuple[Dot, Dot]:
        return (self.u, self.v)

    @property
    def is_boundary(self) -> bool:
        return self.v == BOUNDARY


def xor_merge(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent events fires."""
    return p1 * (1 - p2) + p2 * (1 - p1)


def geometric_class(u: Dot, v: Dot) -> str:
    if v == BOUNDARY:
        return "boundary"
    if u.round == v.round:
        return "space"
    if u.site == v.site:
        return "time"
    return "diagonal"


def enumerate_fault_classes(schedule: Schedule, params: NoiseParams) -> list[FaultClass]:
    """Every single-gate depolarizing component with its probability."""
    if params.p <= 0:
        raise ValueError("fault enumeration needs p > 0; line weights are undefined at p = 0")
    out = []
    for gates in schedule.steps:
        for g in gates:
            if g.kind is GateKind.CZ:
                for code in range(1, 16):
                    pair = (PAULIS[code >> 2], PAULIS[code & 3])
                    out.append(FaultClass(g.step, g.kind, g.qubits, pair, params.p / 15))
            else:
                for pauli in PAULIS[1:]:
                    out.append(FaultClass(g.step, g.kind, g.qubits, (pauli,), params.p / 3))
    return out


def _propagate(schedule: Schedule, faults: list[FaultClass]) -> np.ndarray:
    """Record flips, shape ``(record_size, len(faults))``; one fault per column."""
    parts: dict[tuple[int, GateKind], list] = defaultdict(list)
    for col, f in enumerate(faults):
        for q, pauli in zip(f.qubits, f.paulis):
            parts[(f.step, f.kind)].append((q, col, pauli.x, pauli.z))
    inject = {}
    for key, items in parts.items():
        rows, cols, xs, zs = zip(*items)
        inject[key] = Injection(
            np.array(rows, dtype=np.intp),
            np.array(cols, dtype=np.intp),
            np.array(xs, dtype=bool),
            np.array(zs, dtype=bool),
        )
    frame = run_schedule(schedule, NoiseParams(0.0, decay_prob=0.0), rng_stream(0, 0), len(faults), inject=inject)
    return frame.record


def _event_dots(events: np.ndarray, n_sites: int) -> list[frozenset]:
    # events: (rounds+1, n_sites, n) -> per column set of Dots
    flat = events.reshape(-1, events.shape[-1])
    out = [set() for _ in range(flat.shape[1])]
    for det, col in zip(*np.nonzero(flat)):
        out[col].add(Dot(int(det % n_sites), int(det // n_sites)))
    return [frozenset(s) for s in out]


def propagate_fault(schedule: Schedule, fault: FaultClass) -> frozenset:
    """Detection events produced by a single fault in an otherwise perfect run."""
    record = _propagate(schedule, [fault])
    return _event_dots(detection_events(record, schedule), schedule.n_sites)[0]


def propagate_faults(schedule: Schedule, faults: list[FaultClass]):
    """Vectorized ``propagate_fault``: (event sets, record-flip sets)."""
    if not faults:
        return [], []
    record = _propagate(schedule, faults)
    events = _event_dots(detection_events(record, schedule), schedule.n_sites)
    flips = [frozenset(np.flatnonzero(record[:, i]).tolist()) for i in range(len(faults))]
    return events, flips


def _key(events: frozenset) -> tuple[Dot, Dot]:
    dots = sorted(events)
    return (dots[0], BOUNDARY) if len(dots) == 1 else (dots[0], dots[1])


@dataclass
class MatchingGraph:
    """Dots and weighted lines for one (schedule, p)."""

    schedule: Schedule
    p: float
    lines: dict[tuple[Dot, Dot], Line]
    decomposed: int = 0
    logical_conflicts: int = 0

    @property
    def n_sites(self) -> int:
        return self.schedule.n_sites

    @property
    def n_detectors(self) -> int:
        return (self.schedule.rounds + 1) * self.n_sites

    def dots(self) -> list[Dot]:
        return [Dot(s, t) for t in range(self.schedule.rounds + 1) for s in range(self.n_sites)]

    def index(self, dot: Dot) -> int:
        if dot == BOUNDARY:
            return -1
        if not (0 <= dot.site < self.n_sites and 0 <= dot.round <= self.schedule.rounds):
            raise StructuralError(f"{dot} is not a dot of this graph")
        return dot.round * self.n_sites + dot.site

    def dot(self, index: int) -> Dot:
        return BOUNDARY if index < 0 else Dot(index % self.n_sites, index // self.n_sites)

    def adjacency(self) -> dict[Dot, list[tuple[Dot, Line]]]:
        adj: dict[Dot, list] = defaultdict(list)
        for line in self.lines.values():
            adj[line.u].append((line.v, line))
            adj[line.v].append((line.u, line))
        return adj

    def dump(self) -> str:
        out = [f"# d={self.schedule.d} rounds={self.schedule.rounds} mode={self.schedule.code.mode} p={self.p!r}"]
        for (u, v), line in sorted(self.lines.items()):
            end = "B" if v == BOUNDARY else f"{v.site},{v.round}"
            flips = ",".join(str(s) for s in sorted(line.record_flips))
            out.append(
                f"{u.site},{u.round} {end} p={line.probability:.6e} w={line.weight:.6f} "
                f"logical={line.logical} flips={flips}"
            )
        return "\n".join(out) + "\n"

    def to_pymatching(self):
        import pymatching

        m = pymatching.Matching()
        for (u, v), line in sorted(self.lines.items()):
            ids = {0} if line.logical else set()
            if v == BOUNDARY:
                m.add_boundary_edge(self.index(u), fault_ids=ids, weight=line.weight, error_probability=line.probability)
            else:
                m.add_edge(
                    self.index(u), self.index(v), fault_ids=ids, weight=line.weight, error_probability=line.probability
                )
        return m


def _decompose(events, component_events, lines):
    """Split a >2-event fault into existing lines whose endpoints XOR to it."""
    comps = [e for e in component_events if e]
    if comps and all(len(e) <= 2 for e in comps):
        acc = frozenset()
        for e in comps:
            acc = acc ^ e
        if acc == events:
            return comps
    # fall back to pairing events along known lines
    dots = sorted(events)
    known = set(lines)

    def split(rest):
        if not rest:
            return []
        first = rest[0]
        if (first, BOUNDARY) in known:
            sub = split(rest[1:])
            if sub is not None:
                return [frozenset([first])] + sub
        for j in range(1, len(rest)):
            if (first, rest[j]) in known:
                sub = split(rest[1:j] + rest[j + 1 :])
                if sub is not None:
                    return [frozenset([first, rest[j]])] + sub
        return None

    return split(dots)


def build_graph(schedule: Schedule, params: NoiseParams) -> MatchingGraph:
    """Enumerate, propagate and merge all single faults into weighted lines."""
    if not any(g.kind is GateKind.MEASURE for g in schedule.gates()):
        raise StructuralError("schedule has no measurements")
    faults = enumerate_fault_classes(schedule, params)
    events, flips = propagate_faults(schedule, faults)
    lines: dict[tuple[Dot, Dot], Line] = {}
    logical_slot = schedule.data_slot(0)
    graph = MatchingGraph(schedule, params.p, lines)

    def add(ev, fl, prob, direct):
        key = _key(ev)
        line = lines.get(key)
        if line is None:
            line = lines[key] = Line(*key)
        line.probability = xor_merge(line.probability, prob)
        if direct:
            line.direct_probability = xor_merge(line.direct_probability, prob)
        logical = int(logical_slot in fl)
        if line._dominant >= 0 and logical != line.logical:
            graph.logical_conflicts += 1
        if prob > line._dominant:
            line._dominant = prob
            line.logical = logical
            line.record_flips = fl

    big = []
    for f, ev, fl in zip(faults, events, flips):
        if not ev:
            continue
        if len(ev) <= 2:
            add(ev, fl, f.probability, True)
        else:
            big.append((f, ev, fl))

    if big:
        singles = []
        for f, _, _ in big:
            for q, pauli in zip(f.qubits, f.paulis):
                if pauli != PAULIS[0]:
                    singles.append(FaultClass(f.step, f.kind, (q,), (pauli,), f.probability))
        s_events, s_flips = propagate_faults(schedule, singles)
        it = iter(zip(s_events, s_flips))
        for f, ev, fl in big:
            comps = [next(it) for pauli in f.paulis if pauli != PAULIS[0]]
            parts = _decompose(ev, [c[0] for c in comps], lines)
            if parts is None:
                raise StructuralError(f"cannot decompose fault {f} with events {sorted(ev)}")
            flips_for = {c[0]: c[1] for c in comps if c[0]}
            for part in parts:
                add(part, flips_for.get(part, _flips_of_line(lines, part)), f.probability, False)
            graph.decomposed += 1
    return graph


def _flips_of_line(lines, part):
    return lines[_key(part)].record_flips


def syndrome_of(lines) -> frozenset:
    """Endpoint symmetric difference of a collection of lines (boundary dropped)."""
    acc = set()
    for line in lines:
        for dot in line.endpoints:
            if dot != BOUNDARY:
                acc ^= {dot}
    return frozenset(acc)

