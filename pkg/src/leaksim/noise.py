"""Stochastic gate noise: depolarizing faults, leakage, decay and scrambling.

Faults are sampled sparsely.  For a layer touching ``k`` qubits in a batch of
``S`` shots, the number of faulty (qubit, shot) locations is drawn from a
binomial and the locations themselves uniformly without replacement, which is
exactly a grid of independent Bernoulli trials but far cheaper at small ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from leaksim.core import (
    GateKind,
    Layer,
    StructuralError,
    SystemFrame,
    as_layer,
    conjugate,
)

# error-state codes 0..3 -> (x, z) for I, X, Y, Z
_CODE_X = np.array([0, 1, 1, 0], dtype=bool)
_CODE_Z = np.array([0, 0, 1, 1], dtype=bool)


@dataclass(frozen=True)
class NoiseParams:
    p: float
    leak_factor: float = 0.1
    decay_prob: float = 0.01
    leakage_enabled: bool = False
    teleport_enabled: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.leak_factor < 0 or not 0.0 <= self.leak_factor * self.p <= 1.0:
            raise ValueError(f"leak_factor*p must lie in [0, 1], got {self.leak_factor * self.p}")
        if not 0.0 <= self.decay_prob <= 1.0:
            raise ValueError(f"decay_prob must lie in [0, 1], got {self.decay_prob}")

    @property
    def leak_prob(self) -> float:
        return self.leak_factor * self.p if self.leakage_enabled else 0.0

    @classmethod
    def for_mode(cls, mode: str, p: float, leak_factor: float = 0.1, decay_prob: float = 0.01):
        if mode not in ("plain", "leakage", "teleport"):
            raise ValueError(f"unknown mode {mode!r}")
        return cls(
            p,
            leak_factor,
            decay_prob,
            leakage_enabled=mode != "plain",
            teleport_enabled=mode == "teleport",
        )


def rng_stream(master_seed: int, stream_id: int, domain: int = 0) -> np.random.Generator:
    """Independent generator for ``(master_seed, domain, stream_id)``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(domain), int(stream_id)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class Injection:
    """Explicit Pauli faults at (qubit row, shot column) locations."""

    rows: np.ndarray
    cols: np.ndarray
    x: np.ndarray
    z: np.ndarray

    @classmethod
    def empty(cls) -> "Injection":
        e = np.zeros(0, dtype=np.intp)
        return cls(e, e, e.astype(bool), e.astype(bool))

    def __len__(self):
        return len(self.rows)


def bernoulli_sites(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices of successes among ``n`` independent Bernoulli(p) trials."""
    if n == 0 or p <= 0.0:
        return np.zeros(0, dtype=np.intp)
    if p >= 1.0:
        return np.arange(n, dtype=np.intp)
    k = rng.binomial(n, p)
    if k == 0:
        return np.zeros(0, dtype=np.intp)
    return np.sort(rng.choice(n, size=k, replace=False, shuffle=False))


def sample_depolarizing(
    rng: np.random.Generator, rows: np.ndarray, shots: int, p: float, pairs: bool = False
) -> Injection:
    """Uniform non-identity Pauli on each gate with probability ``p``.

    ``rows`` is the flat operand list; with ``pairs`` it holds CZ operands as
    consecutive (a, b) and a fault is one of the 15 non-identity pairs.
    """
    width = 2 if pairs else 1
    n_gates = len(rows) // width
    hits = bernoulli_sites(rng, n_gates * shots, p)
    if len(hits) == 0:
        return Injection.empty()
    gate = hits // shots
    col = hits % shots
    if pairs:
        code = rng.integers(1, 16, size=len(hits))
        a, b = code >> 2, code & 3
        return Injection(
            rows=np.concatenate([rows[2 * gate], rows[2 * gate + 1]]),
            cols=np.concatenate([col, col]),
            x=np.concatenate([_CODE_X[a], _CODE_X[b]]),
            z=np.concatenate([_CODE_Z[a], _CODE_Z[b]]),
        )
    code = rng.integers(1, 4, size=len(hits))
    return Injection(rows[gate], col, _CODE_X[code], _CODE_Z[code])


def apply_paulis(frame: SystemFrame, inj: Injection) -> None:
    """Compose Paulis onto the frame; leaked locations absorb them."""
    if len(inj) == 0:
        return
    keep = ~frame.leaked[inj.rows, inj.cols]
    np.bitwise_xor.at(frame.x, (inj.rows, inj.cols), inj.x & keep)
    np.bitwise_xor.at(frame.z, (inj.rows, inj.cols), inj.z & keep)


def _randomize(frame: SystemFrame, rows, cols, rng: np.random.Generator) -> None:
    # uniform over {I, X, Y, Z}, unleaked
    code = rng.integers(0, 4, size=len(rows))
    frame.leaked[rows, cols] = False
    frame.x[rows, cols] = _CODE_X[code]
    frame.z[rows, cols] = _CODE_Z[code]


def scramble_partners(frame: SystemFrame, layer: Layer, rng: np.random.Generator) -> None:
    a, b = layer.qubits[:, 0], layer.qubits[:, 1]
    la, lb = frame.leaked[a], frame.leaked[b]
    for victims, mask in ((a, lb & ~la), (b, la & ~lb)):
        g, col = np.nonzero(mask)
        if len(g):
            _randomize(frame, victims[g], col, rng)


def inject_leakage(
    frame: SystemFrame, rows: np.ndarray, prob: float, rng: np.random.Generator, counts=None
) -> int:
    shots = frame.shots
    hits = bernoulli_sites(rng, len(rows) * shots, prob)
    if len(hits) == 0:
        return 0
    r, col = rows[hits // shots], hits % shots
    fresh = ~frame.leaked[r, col]
    frame.leaked[r, col] = True
    frame.x[r, col] = False
    frame.z[r, col] = False
    if counts is not None:
        np.add.at(counts, col[fresh], 1)
    return int(fresh.sum())


def decay_leakage(frame: SystemFrame, rows: np.ndarray, prob: float, rng: np.random.Generator) -> None:
    if prob <= 0.0:
        return
    g, col = np.nonzero(frame.leaked[rows])
    if len(g) == 0:
        return
    sel = rng.random(len(g)) < prob
    if sel.any():
        _randomize(frame, rows[g[sel]], col[sel], rng)


def apply_gate_noise(
    frame: SystemFrame,
    gate,
    params: NoiseParams,
    rng: np.random.Generator,
    inject: Injection | None = None,
    leak_counts: np.ndarray | None = None,
) -> SystemFrame:
    """Run an Identity, Hadamard or CZ layer with its noise, in place.

    Sub-steps: ideal conjugation, CZ scrambling of unleaked partners of leaked
    qubits, depolarizing fault, leakage injection (Hadamard/CZ), decay.
    """
    layer = as_layer(gate)
    if layer.kind not in (GateKind.IDENTITY, GateKind.HADAMARD, GateKind.CZ):
        raise StructuralError(f"apply_gate_noise does not handle {layer.kind.value}")
    conjugate(frame, layer)
    rows = layer.operands
    is_cz = layer.kind is GateKind.CZ
    if is_cz:
        scramble_partners(frame, layer, rng)
    apply_paulis(frame, sample_depolarizing(rng, rows, frame.shots, params.p, pairs=is_cz))
    if inject is not None:
        apply_paulis(frame, inject)
    if layer.kind is not GateKind.IDENTITY and params.leak_prob > 0:
        inject_leakage(frame, rows, params.leak_prob, rng, leak_counts)
    decay_leakage(frame, rows, params.decay_prob, rng)
    return frame


def noisy_init(
    frame: SystemFrame, gate, params: NoiseParams, rng: np.random.Generator, inject: Injection | None = None
) -> SystemFrame:
    """Reset to a fresh unleaked qubit, then a depolarizing fault with probability p."""
    layer = as_layer(gate)
    if layer.kind is not GateKind.INIT:
        raise StructuralError(f"noisy_init got {layer.kind.value}")
    rows = layer.qubits
    frame.x[rows] = False
    frame.z[rows] = False
    frame.leaked[rows] = False
    apply_paulis(frame, sample_depolarizing(rng, rows, frame.shots, params.p))
    if inject is not None:
        apply_paulis(frame, inject)
    return frame


def noisy_measure(
    frame: SystemFrame, gate, params: NoiseParams, rng: np.random.Generator, inject: Injection | None = None
) -> tuple[SystemFrame, np.ndarray]:
    """Z-basis readout of the frame.

    A depolarizing fault with probability p precedes the readout.  Leaked
    qubits report a uniformly random bit and stay leaked.  Bits go to the
    gate's record slot, or are fed forward onto the Z component of the
    teleportation target.  Returns the bits, shape ``(k, shots)``.
    """
    layer = as_layer(gate)
    if layer.kind is not GateKind.MEASURE:
        raise StructuralError(f"noisy_measure got {layer.kind.value}")
    rows = layer.qubits
    apply_paulis(frame, sample_depolarizing(rng, rows, frame.shots, params.p))
    if inject is not None:
        apply_paulis(frame, inject)
    bits = frame.x[rows].copy()
    g, col = np.nonzero(frame.leaked[rows])
    if len(g):
        bits[g, col] = rng.integers(0, 2, size=len(g)).astype(bool)
    for i, (slot, feed) in enumerate(zip(layer.slots, layer.feeds)):
        if slot >= 0:
            frame.write(slot, bits[i])
        if feed >= 0:
            frame.z[feed] ^= bits[i] & ~frame.leaked[feed]
    return frame, bits
