"""Repetition-code error-detection schedules, with optional teleportation.

Qubits sit on a line.  In the plain layout data qubit ``k`` is physical qubit
``2k`` and the ZZ check between data ``s`` and ``s+1`` is measured by qubit
``2s+1``.  The teleport layout adds one qubit at the bottom and alternates:
even rounds use the plain layout, odd rounds shift everything down by one.

Record layout: stabilizer ``s`` in round ``t`` is slot ``t*(d-1) + s``;
terminal readout of data ``k`` is slot ``T*(d-1) + k``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from leaksim.core import Gate, GateKind, Layer, PauliLeak, StructuralError, SystemFrame
from leaksim.noise import Injection, NoiseParams, apply_gate_noise, noisy_init, noisy_measure

MODES = ("plain", "leakage", "teleport")

# fixed processing order of gate kinds within a step
_KIND_ORDER = (GateKind.INIT, GateKind.IDENTITY, GateKind.HADAMARD, GateKind.CZ, GateKind.MEASURE)

ROUND_STEPS = 6
GADGET_STEPS = 5


def default_rounds(d: int) -> int:
    return max(10, 3 * d)


@dataclass(frozen=True)
class CodeParams:
    d: int
    rounds: int
    mode: str = "plain"

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 3 or self.d % 2 == 0:
            raise StructuralError(f"distance must be an odd integer >= 3, got {self.d!r}")
        if not isinstance(self.rounds, int) or self.rounds < 1:
            raise StructuralError(f"rounds must be a positive integer, got {self.rounds!r}")
        if self.mode not in MODES:
            raise StructuralError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def qubit_count(self) -> int:
        return 2 * self.d if self.mode == "teleport" else 2 * self.d - 1


@dataclass(frozen=True)
class Roles:
    data: tuple[int, ...]
    meas: tuple[int, ...]


def plain_roles(d: int, shift: int = 0) -> Roles:
    return Roles(
        data=tuple(2 * k + shift for k in range(d)),
        meas=tuple(2 * s + 1 + shift for s in range(d - 1)),
    )


@dataclass(frozen=True)
class Schedule:
    code: CodeParams
    qubit_count: int
    steps: tuple[tuple[Gate, ...], ...]
    round_boundaries: tuple[int, ...]
    role_map: tuple[Roles, ...]
    final_data: tuple[int, ...]

    @property
    def d(self) -> int:
        return self.code.d

    @property
    def rounds(self) -> int:
        return self.code.rounds

    @property
    def n_sites(self) -> int:
        return self.code.d - 1

    @property
    def record_size(self) -> int:
        return self.rounds * self.n_sites + self.d

    def stab_slot(self, site: int, rnd: int) -> int:
        return rnd * self.n_sites + site

    def data_slot(self, k: int) -> int:
        return self.rounds * self.n_sites + k

    @cached_property
    def layers(self) -> tuple[tuple[Layer, ...], ...]:
        out = []
        for gates in self.steps:
            by_kind: dict[GateKind, list[Gate]] = {}
            for g in gates:
                by_kind.setdefault(g.kind, []).append(g)
            out.append(tuple(Layer.from_gates(by_kind[k]) for k in _KIND_ORDER if k in by_kind))
        return tuple(out)

    def gates(self):
        for gates in self.steps:
            yield from gates

    def dump(self) -> str:
        lines = [f"# d={self.d} rounds={self.rounds} mode={self.code.mode} qubits={self.qubit_count}"]
        for gates in self.steps:
            for g in gates:
                extra = ""
                if g.slot is not None:
                    extra += f" slot={g.slot}"
                if g.feed is not None:
                    extra += f" feed={g.feed}"
                ops = ",".join(str(q) for q in g.qubits)
                lines.append(f"{g.step} {g.kind.value} {ops}{extra}")
        return "\n".join(lines) + "\n"


def build_standard_round(d: int, roles: Roles | None = None, slot_base: int | None = None) -> list[list[Gate]]:
    """One six-step round of ZZ checks: Init, H, CZ(upper), CZ(lower), H, Measure.

    Idle data qubits get Identity.  Step indices are relative (0..5).
    """
    if not isinstance(d, int) or d < 3 or d % 2 == 0:
        raise StructuralError(f"distance must be an odd integer >= 3, got {d!r}")
    roles = roles or plain_roles(d)
    if len(roles.data) != d or len(roles.meas) != d - 1:
        raise StructuralError("role map does not match the distance")
    data, meas = roles.data, roles.meas

    def with_idle(gates, busy):
        return gates + [Gate(GateKind.IDENTITY, (q,)) for q in data if q not in busy]

    steps = [
        with_idle([Gate(GateKind.INIT, (m,)) for m in meas], ()),
        with_idle([Gate(GateKind.HADAMARD, (m,)) for m in meas], ()),
        with_idle([Gate(GateKind.CZ, (m, data[s])) for s, m in enumerate(meas)], set(data[:-1])),
        with_idle([Gate(GateKind.CZ, (m, data[s + 1])) for s, m in enumerate(meas)], set(data[1:])),
        with_idle([Gate(GateKind.HADAMARD, (m,)) for m in meas], ()),
        with_idle(
            [
                Gate(GateKind.MEASURE, (m,), slot=None if slot_base is None else slot_base + s)
                for s, m in enumerate(meas)
            ],
            (),
        ),
    ]
    return steps


def build_teleport_gadget(source: int, target: int) -> list[list[Gate]]:
    """Move the qubit on ``source`` to the fresh qubit ``target``.

    One-bit teleportation followed by a Hadamard on the target so the data
    returns to its original basis.  The source measurement is fed forward as
    a Z byproduct on the target.  A leaked source scrambles the target at the
    CZ and its leakage leaves through the measurement.
    """
    if source == target:
        raise StructuralError("teleport source and target must differ")
    return [
        [Gate(GateKind.INIT, (target,)), Gate(GateKind.IDENTITY, (source,))],
        [Gate(GateKind.HADAMARD, (target,)), Gate(GateKind.IDENTITY, (source,))],
        [Gate(GateKind.CZ, (source, target))],
        [Gate(GateKind.HADAMARD, (source,)), Gate(GateKind.HADAMARD, (target,))],
        [Gate(GateKind.MEASURE, (source,), feed=target), Gate(GateKind.IDENTITY, (target,))],
    ]


def _merge(fragments: list[list[list[Gate]]]) -> list[list[Gate]]:
    # run fragments in parallel, step by step
    depth = max(len(f) for f in fragments)
    return [[g for f in fragments if i < len(f) for g in f[i]] for i in range(depth)]


def build_experiment(code: CodeParams) -> Schedule:
    """Data preparation, ``rounds`` check rounds and a terminal data readout."""
    d, n = code.d, code.qubit_count
    teleport = code.mode == "teleport"
    raw: list[list[Gate]] = []
    boundaries, role_map = [], []

    roles = plain_roles(d)
    raw.append([Gate(GateKind.INIT, (q,)) for q in roles.data])
    for t in range(code.rounds):
        roles = plain_roles(d, shift=t % 2 if teleport else 0)
        role_map.append(roles)
        boundaries.append(len(raw))
        raw.extend(build_standard_round(d, roles, slot_base=t * (d - 1)))
        if teleport:
            step = 1 if t % 2 == 0 else -1
            raw.extend(_merge([build_teleport_gadget(q, q + step) for q in roles.data]))
    final = plain_roles(d, shift=code.rounds % 2 if teleport else 0).data
    boundaries.append(len(raw))
    raw.append([Gate(GateKind.MEASURE, (q,), slot=code.rounds * (d - 1) + k) for k, q in enumerate(final)])

    steps = []
    for i, gates in enumerate(raw):
        busy = {q for g in gates for q in g.qubits}
        if len(busy) != sum(len(g.qubits) for g in gates):
            raise StructuralError(f"overlapping operands in step {i}")
        gates = gates + [Gate(GateKind.IDENTITY, (q,)) for q in range(n) if q not in busy]
        gates.sort(key=lambda g: g.qubits[0])
        steps.append(tuple(dataclasses.replace(g, step=i) for g in gates))

    return Schedule(
        code=code,
        qubit_count=n,
        steps=tuple(steps),
        round_boundaries=tuple(boundaries),
        role_map=tuple(role_map),
        final_data=tuple(final),
    )


def run_schedule(
    schedule: Schedule,
    params: NoiseParams,
    rng: np.random.Generator,
    shots: int = 1,
    *,
    inject: dict[tuple[int, GateKind], Injection] | None = None,
    forced: dict[int, list[tuple[int, PauliLeak]]] | None = None,
    observer=None,
    leak_counts: np.ndarray | None = None,
) -> SystemFrame:
    """Simulate ``shots`` independent runs of the schedule.

    ``inject`` adds explicit Pauli faults at a (step, gate kind) at the point
    where that gate's depolarizing fault would act.  ``forced`` overwrites
    qubit states after a step (all shots).  ``observer(step, frame)`` is
    called after every step.
    """
    frame = SystemFrame.zeros(schedule.qubit_count, shots, schedule.record_size)
    inject = inject or {}
    forced = forced or {}
    for i, layers in enumerate(schedule.layers):
        for layer in layers:
            extra = inject.get((i, layer.kind))
            if layer.kind is GateKind.INIT:
                noisy_init(frame, layer, params, rng, extra)
            elif layer.kind is GateKind.MEASURE:
                noisy_measure(frame, layer, params, rng, extra)
            else:
                apply_gate_noise(frame, layer, params, rng, extra, leak_counts)
        for q, state in forced.get(i, ()):
            frame.set(q, state)
        if observer is not None:
            observer(i, frame)
    return frame


def detection_events(record: np.ndarray, schedule: Schedule) -> np.ndarray:
    """Detection events, shape ``(rounds + 1, d - 1, shots)``.

    Round ``t`` compares each check with round ``t-1`` (round 0 with the
    quiescent value 0); the last row compares terminal data parities with
    the final check round.
    """
    T, ns, d = schedule.rounds, schedule.n_sites, schedule.d
    shots = record.shape[-1]
    stab = record[: T * ns].reshape(T, ns, shots)
    data = record[T * ns : T * ns + d]
    checks = np.concatenate([stab, (data[:-1] ^ data[1:])[None]], axis=0)
    events = checks.copy()
    events[1:] ^= checks[:-1]
    return events
