"""Monte Carlo estimation of the logical error rate per round."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from leaksim.circuits import CodeParams, Schedule, build_experiment, detection_events, run_schedule
from leaksim.core import StructuralError, SystemFrame
from leaksim.dgraph import Dot, MatchingGraph, build_graph
from leaksim.matcher import build_event_graph, corrections_from_matching, make_decoder, min_weight_match
from leaksim.noise import NoiseParams, rng_stream

CHUNK_SHOTS = 20_000
Z95 = 1.959963984540054


@dataclass(frozen=True)
class ShotResult:
    failed: bool
    detection_event_count: int
    leak_events: int


@dataclass(frozen=True)
class LogicalErrorEstimate:
    shots: int
    failures: int
    rounds: int
    p_shot: float
    p_round: float
    ci_low: float
    ci_high: float


def extract_detection_events(frame_or_record, schedule: Schedule) -> frozenset:
    """Detection events of a single-shot run as a set of ``Dot``."""
    if isinstance(frame_or_record, SystemFrame):
        if not frame_or_record.filled.all():
            raise StructuralError("measurement record is incomplete for this schedule")
        record = frame_or_record.record
    else:
        record = np.asarray(frame_or_record, dtype=bool)
        if record.ndim == 1:
            record = record[:, None]
    if record.shape[0] != schedule.record_size:
        raise StructuralError(f"record has {record.shape[0]} entries, schedule needs {schedule.record_size}")
    if record.shape[1] != 1:
        raise StructuralError("extract_detection_events takes a single shot")
    ev = detection_events(record, schedule)[:, :, 0]
    return frozenset(Dot(int(s), int(t)) for t, s in zip(*np.nonzero(ev)))


def corrected_record(record: np.ndarray, flips) -> np.ndarray:
    out = np.array(record, dtype=bool).reshape(-1).copy()
    for slot in flips:
        out[slot] ^= True
    return out


def run_shot(
    schedule: Schedule,
    graph: MatchingGraph,
    params: NoiseParams,
    rng: np.random.Generator,
    *,
    forced=None,
    inject=None,
    check: bool = True,
) -> ShotResult:
    """One noisy run decoded with the in-house matcher."""
    leaks = np.zeros(1, dtype=np.int64)
    frame = run_schedule(schedule, params, rng, 1, forced=forced, inject=inject, leak_counts=leaks)
    events = extract_detection_events(frame, schedule)
    eg = build_event_graph(graph, events)
    corr = corrections_from_matching(min_weight_match(eg), eg)
    fixed = corrected_record(frame.record[:, 0], corr.record_flips)
    if check and extract_detection_events(fixed, schedule):
        raise AssertionError("corrections left residual detection events")
    failed = bool(fixed[schedule.data_slot(0)])
    if check and failed != bool(frame.record[schedule.data_slot(0), 0] ^ corr.logical):
        raise AssertionError("logical parity disagrees with record corrections")
    return ShotResult(failed, len(events), int(leaks[0]))


def wilson_interval(failures: int, shots: int, z: float = Z95) -> tuple[float, float]:
    p = failures / shots
    denom = 1 + z * z / shots
    centre = (p + z * z / (2 * shots)) / denom
    half = z * math.sqrt(p * (1 - p) / shots + z * z / (4 * shots * shots)) / denom
    lo = 0.0 if failures == 0 else max(0.0, centre - half)
    hi = 1.0 if failures == shots else min(1.0, centre + half)
    return lo, hi


def per_round(p_shot: float, rounds: int) -> float:
    if p_shot >= 1.0:
        return 1.0
    return -math.expm1(math.log1p(-p_shot) / rounds)


def summarize(failures: int, shots: int, rounds: int) -> LogicalErrorEstimate:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p_shot = failures / shots
    lo, hi = wilson_interval(failures, shots)
    return LogicalErrorEstimate(
        shots=shots,
        failures=failures,
        rounds=rounds,
        p_shot=p_shot,
        p_round=per_round(p_shot, rounds),
        ci_low=per_round(lo, rounds),
        ci_high=per_round(hi, rounds),
    )


@dataclass(frozen=True)
class Cell:
    d: int
    rounds: int
    mode: str
    p: float
    leak_factor: float = 0.1
    decay_prob: float = 0.01

    @property
    def domain(self) -> int:
        """Stable per-cell RNG domain so different cells never share streams."""
        key = f"{self.mode}:{self.d}:{self.rounds}:{self.p!r}:{self.leak_factor!r}:{self.decay_prob!r}"
        return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")

    @property
    def code(self) -> CodeParams:
        return CodeParams(self.d, self.rounds, self.mode)

    @property
    def params(self) -> NoiseParams:
        return NoiseParams.for_mode(self.mode, self.p, self.leak_factor, self.decay_prob)


@lru_cache(maxsize=8)
def _prepared(cell: Cell, decoder: str):
    schedule = build_experiment(cell.code)
    # the graph is built as if leakage were absent
    graph = build_graph(schedule, NoiseParams(cell.p))
    return schedule, graph, make_decoder(graph, decoder)


def sample_chunk(schedule: Schedule, params: NoiseParams, rng: np.random.Generator, shots: int):
    """Events ``(shots, n_detectors)`` as uint8 and the raw logical readout bit per shot."""
    frame = run_schedule(schedule, params, rng, shots)
    ev = detection_events(frame.record, schedule)
    events = np.ascontiguousarray(ev.reshape(-1, shots).T, dtype=np.uint8)
    return events, frame.record[schedule.data_slot(0)].astype(np.uint8)


def count_failures(cell: Cell, seed: int, chunk: int, shots: int, decoder: str = "pymatching") -> int:
    schedule, _, dec = _prepared(cell, decoder)
    events, observed = sample_chunk(schedule, cell.params, rng_stream(seed, chunk, cell.domain), shots)
    return int(np.count_nonzero(dec.decode_batch(events) ^ observed))


def _chunk_plan(shots: int, chunk_shots: int) -> list[tuple[int, int]]:
    full, rest = divmod(shots, chunk_shots)
    plan = [(i, chunk_shots) for i in range(full)]
    if rest:
        plan.append((full, rest))
    return plan


def _count_star(args):
    return count_failures(*args)


def estimate(
    cell: Cell,
    shots: int,
    seed: int = 0,
    workers: int = 1,
    decoder: str = "pymatching",
    chunk_shots: int = CHUNK_SHOTS,
    executor=None,
) -> LogicalErrorEstimate:
    """Logical error rate per round from ``shots`` independent runs.

    Chunk ``i`` draws from stream ``(seed, i)`` whatever worker runs it, so
    results do not depend on ``workers``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    tasks = [(cell, seed, i, n, decoder) for i, n in _chunk_plan(shots, chunk_shots)]
    if executor is not None:
        failures = sum(executor.map(_count_star, tasks))
    elif workers <= 1 or len(tasks) == 1:
        failures = sum(map(_count_star, tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            failures = sum(pool.map(_count_star, tasks))
    return summarize(failures, shots, cell.rounds)
