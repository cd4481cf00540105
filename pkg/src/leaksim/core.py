"""Pauli-with-leakage error states and their propagation through Clifford gates.

Everything here tracks *deviations* from the ideal circuit (a Pauli frame),
so global phases are dropped and Y is simply ``x=1, z=1``.  A leaked qubit
carries normalized ``(0, 0)`` Pauli bits.

Frames are batched: ``SystemFrame.x[q, s]`` is the X component of qubit ``q``
in shot ``s``.  A single-shot frame is just a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class StructuralError(ValueError):
    """Malformed gate, schedule, record or graph input."""


@dataclass(frozen=True)
class PauliLeak:
    """One of the five single-qubit error states I, X, Y, Z, L."""

    x: int = 0
    z: int = 0
    leaked: int = 0

    def __post_init__(self):
        if self.leaked:
            object.__setattr__(self, "x", 0)
            object.__setattr__(self, "z", 0)
            object.__setattr__(self, "leaked", 1)
        else:
            object.__setattr__(self, "x", int(bool(self.x)))
            object.__setattr__(self, "z", int(bool(self.z)))
            object.__setattr__(self, "leaked", 0)

    @property
    def label(self) -> str:
        if self.leaked:
            return "L"
        return "IZXY"[2 * self.x + self.z]

    @classmethod
    def from_label(cls, label: str) -> "PauliLeak":
        try:
            return _BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown error state {label!r}") from None

    def __repr__(self) -> str:
        return f"PauliLeak({self.label})"


I = PauliLeak()
X = PauliLeak(x=1)
Y = PauliLeak(x=1, z=1)
Z = PauliLeak(z=1)
L = PauliLeak(leaked=1)
PAULIS = (I, X, Y, Z)
_BY_LABEL = {"I": I, "X": X, "Y": Y, "Z": Z, "L": L}


def compose(a: PauliLeak, b: PauliLeak) -> PauliLeak:
    """Apply error ``b`` on top of ``a``.  Anything composed with L stays L."""
    if a.leaked or b.leaked:
        return L
    return PauliLeak(a.x ^ b.x, a.z ^ b.z)


class GateKind(str, Enum):
    INIT = "Init"
    MEASURE = "Measure"
    IDENTITY = "Identity"
    HADAMARD = "Hadamard"
    CZ = "CZ"


@dataclass(frozen=True)
class Gate:
    """A gate at a time step.

    ``slot`` is the record index a Measure writes to (``None`` for a
    teleportation measurement whose outcome is consumed by ``feed``).
    ``feed`` names the qubit whose Z component absorbs the measured bit.
    """

    kind: GateKind
    qubits: tuple[int, ...]
    step: int = 0
    slot: int | None = None
    feed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        want = 2 if self.kind is GateKind.CZ else 1
        if len(self.qubits) != want:
            raise StructuralError(f"{self.kind.value} takes {want} operand(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise StructuralError(f"repeated operand in {self.kind.value}{self.qubits}")
        if (self.slot is not None or self.feed is not None) and self.kind is not GateKind.MEASURE:
            raise StructuralError("only Measure gates carry a record slot or feed-forward target")


@dataclass(frozen=True)
class Layer:
    """All gates of one kind within a time step, as operand index arrays."""

    kind: GateKind
    qubits: np.ndarray  # (k,) or (k, 2) for CZ
    slots: np.ndarray | None = None  # Measure only; -1 where there is no record slot
    feeds: np.ndarray | None = None  # Measure only; -1 where there is no feed-forward

    @classmethod
    def from_gates(cls, gates: Sequence[Gate]) -> "Layer":
        kinds = {g.kind for g in gates}
        if len(kinds) != 1:
            raise StructuralError(f"a layer holds exactly one gate kind, got {kinds}")
        kind = kinds.pop()
        if kind is GateKind.CZ:
            qubits = np.array([g.qubits for g in gates], dtype=np.intp).reshape(-1, 2)
        else:
            qubits = np.array([g.qubits[0] for g in gates], dtype=np.intp)
        slots = feeds = None
        if kind is GateKind.MEASURE:
            slots = np.array([-1 if g.slot is None else g.slot for g in gates], dtype=np.intp)
            feeds = np.array([-1 if g.feed is None else g.feed for g in gates], dtype=np.intp)
        return cls(kind, qubits, slots, feeds)

    @property
    def operands(self) -> np.ndarray:
        """Flat operand rows (CZ pairs flattened as a0, b0, a1, b1, ...)."""
        return self.qubits.reshape(-1)


def as_layer(gate_or_layer: "Gate | Layer") -> Layer:
    if isinstance(gate_or_layer, Layer):
        return gate_or_layer
    return Layer.from_gates([gate_or_layer])


@dataclass
class SystemFrame:
    """Batched Pauli frame plus the classical measurement record."""

    x: np.ndarray
    z: np.ndarray
    leaked: np.ndarray
    record: np.ndarray
    filled: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.filled is None:
            self.filled = np.zeros(self.record.shape[0], dtype=bool)

    @classmethod
    def zeros(cls, n_qubits: int, shots: int = 1, record_size: int = 0) -> "SystemFrame":
        shape = (n_qubits, shots)
        return cls(
            x=np.zeros(shape, dtype=bool),
            z=np.zeros(shape, dtype=bool),
            leaked=np.zeros(shape, dtype=bool),
            record=np.zeros((record_size, shots), dtype=bool),
        )

    @property
    def n_qubits(self) -> int:
        return self.x.shape[0]

    @property
    def shots(self) -> int:
        return self.x.shape[1]

    def get(self, qubit: int, shot: int = 0) -> PauliLeak:
        return PauliLeak(self.x[qubit, shot], self.z[qubit, shot], self.leaked[qubit, shot])

    def set(self, qubit: int, state: PauliLeak, shots=slice(None)) -> None:
        self.x[qubit, shots] = bool(state.x)
        self.z[qubit, shots] = bool(state.z)
        self.leaked[qubit, shots] = bool(state.leaked)

    def states(self, shot: int = 0) -> list[PauliLeak]:
        return [self.get(q, shot) for q in range(self.n_qubits)]

    def write(self, slot: int, bits: np.ndarray) -> None:
        if self.filled[slot]:
            raise StructuralError(f"record slot {slot} written twice")
        self.record[slot] = bits
        self.filled[slot] = True

    def copy(self) -> "SystemFrame":
        return SystemFrame(
            self.x.copy(), self.z.copy(), self.leaked.copy(), self.record.copy(), self.filled.copy()
        )


def _check_operands(frame: SystemFrame, qubits: Iterable[int]) -> None:
    for q in qubits:
        if not 0 <= q < frame.n_qubits:
            raise StructuralError(f"qubit {q} out of range for {frame.n_qubits}-qubit frame")


def hadamard_rows(frame: SystemFrame, rows: np.ndarray) -> None:
    # leaked rows hold (0, 0), so the swap leaves them alone
    frame.x[rows], frame.z[rows] = frame.z[rows], frame.x[rows]


def cz_rows(frame: SystemFrame, a: np.ndarray, b: np.ndarray) -> None:
    xa = frame.x[a]
    xb = frame.x[b]
    frame.z[a] ^= xb & ~frame.leaked[a]
    frame.z[b] ^= xa & ~frame.leaked[b]


def conjugate(frame: SystemFrame, gate: "Gate | Layer") -> SystemFrame:
    """Push the frame through an ideal Hadamard, CZ or Identity (in place)."""
    layer = as_layer(gate)
    _check_operands(frame, layer.operands)
    if layer.kind is GateKind.HADAMARD:
        hadamard_rows(frame, layer.qubits)
    elif layer.kind is GateKind.CZ:
        cz_rows(frame, layer.qubits[:, 0], layer.qubits[:, 1])
    elif layer.kind is not GateKind.IDENTITY:
        raise StructuralError(f"{layer.kind.value} is not a Clifford conjugation")
    return frame


def pauli_bits(states: Sequence[PauliLeak]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array([s.x for s in states], dtype=bool),
        np.array([s.z for s in states], dtype=bool),
    )
