"""Minimum-weight matching of detection events, with the boundary.

Events are paired with each other or sent to the boundary.  Shortest paths
over the line lattice are precomputed once per graph; each matching is then
a small dense problem solved exactly with the blossom algorithm after the
usual boundary-twin construction.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from leaksim.blossom import max_weight_matching
from leaksim.core import StructuralError
from leaksim.dgraph import BOUNDARY, Dot, Line, MatchingGraph


@dataclass(frozen=True)
class Corrections:
    logical: int = 0
    record_flips: frozenset = frozenset()

    def __xor__(self, other: "Corrections") -> "Corrections":
        return Corrections(self.logical ^ other.logical, self.record_flips ^ other.record_flips)


class PathTable:
    """All-pairs shortest paths between dots; the boundary is a sink only."""

    def __init__(self, graph: MatchingGraph):
        self.graph = graph
        self.nodes = graph.dots() + [BOUNDARY]
        self.pos = {dot: i for i, dot in enumerate(self.nodes)}
        n = len(self.nodes)
        adj = graph.adjacency()
        self.dist = np.full((n, n), np.inf)
        self.pred: list[dict] = []
        for i, src in enumerate(self.nodes):
            dist, pred = _dijkstra(adj, src)
            for dot, dv in dist.items():
                self.dist[i, self.pos[dot]] = dv
            self.pred.append(pred)
        self._corr: dict[tuple[int, int], Corrections] = {}

    def path(self, u: Dot, v: Dot) -> list[Line]:
        pred = self.pred[self.pos[u]]
        if v != u and v not in pred:
            raise StructuralError(f"no path from {u} to {v}")
        out = []
        while v != u:
            prev, line = pred[v]
            out.append(line)
            v = prev
        out.reverse()
        return out

    def corrections(self, u: Dot, v: Dot) -> Corrections:
        key = (self.pos[u], self.pos[v])
        c = self._corr.get(key)
        if c is None:
            c = Corrections()
            for line in self.path(u, v):
                c = c ^ Corrections(line.logical, line.record_flips)
            self._corr[key] = c
        return c


def _dijkstra(adj, src: Dot):
    # ties broken towards the lexicographically smaller (site, round) predecessor
    dist = {src: 0.0}
    pred: dict[Dot, tuple[Dot, Line]] = {}
    heap = [(0.0, src)]
    done = set()
    while heap:
        du, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == BOUNDARY and u != src:
            continue
        for v, line in sorted(adj.get(u, ()), key=lambda item: item[0]):
            nd = du + line.weight
            old = dist.get(v)
            if old is None or nd < old or (nd == old and v not in done and u < pred[v][0]):
                dist[v] = nd
                pred[v] = (u, line)
                heapq.heappush(heap, (nd, v))
    return dist, pred


@dataclass
class EventGraph:
    events: list[Dot]
    pair_distances: np.ndarray
    boundary_distances: np.ndarray
    paths: PathTable


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    boundary_matches: tuple[int, ...]
    total_weight: float


def path_table(graph: MatchingGraph) -> PathTable:
    table = getattr(graph, "_path_table", None)
    if table is None:
        table = PathTable(graph)
        graph._path_table = table
    return table


def build_event_graph(graph: MatchingGraph, events) -> EventGraph:
    table = path_table(graph)
    events = sorted(events)
    for e in events:
        if e == BOUNDARY or e not in table.pos:
            raise StructuralError(f"{e} is not a dot of the graph")
    idx = np.array([table.pos[e] for e in events], dtype=np.intp)
    pair = table.dist[np.ix_(idx, idx)]
    bnd = table.dist[idx, table.pos[BOUNDARY]]
    return EventGraph(events, pair, bnd, table)


def min_weight_match(eg: EventGraph) -> Matching:
    return match_distances(eg.pair_distances, eg.boundary_distances)


def match_distances(pair: np.ndarray, bnd: np.ndarray) -> Matching:
    """Exact minimum-weight matching where every event may instead use the boundary.

    Event ``i`` is vertex ``i`` and its boundary twin is ``n + i``; twins are
    joined to each other at zero cost so any number of events can go to the
    boundary.  Pair edges no cheaper than both boundary options are dropped.
    """
    n = len(bnd)
    if n == 0:
        return Matching((), (), 0.0)
    if n == 1:
        return Matching((), (0,), float(bnd[0]))
    if n == 2:
        if pair[0, 1] < bnd[0] + bnd[1]:
            return Matching(((0, 1),), (), float(pair[0, 1]))
        return Matching((), (0, 1), float(bnd[0] + bnd[1]))

    edges = []
    for i in range(n):
        edges.append((i, n + i, float(bnd[i])))
        for j in range(i + 1, n):
            if pair[i, j] < bnd[i] + bnd[j]:
                edges.append((i, j, float(pair[i, j])))
            edges.append((n + i, n + j, 0.0))
    top = max(w for _, _, w in edges) + 1.0
    mate = max_weight_matching([(i, j, top - w) for i, j, w in edges], maxcardinality=True)

    pairs, singles = [], []
    for i in range(n):
        m = mate[i]
        if m == n + i:
            singles.append(i)
        elif i < m < n:
            pairs.append((i, m))
        elif m < 0 or m >= n:
            raise RuntimeError("matching is not perfect")
    return Matching(tuple(pairs), tuple(singles), matching_weight(pair, bnd, pairs, singles))


def matching_weight(pair, bnd, pairs, singles) -> float:
    """Total weight summed in canonical order (sorted pairs, then sorted singles)."""
    total = 0.0
    for i, j in sorted(pairs):
        total += float(pair[i, j])
    for i in sorted(singles):
        total += float(bnd[i])
    return total


def corrections_from_matching(m: Matching, eg: EventGraph) -> Corrections:
    c = Corrections()
    for i, j in m.pairs:
        c = c ^ eg.paths.corrections(eg.events[i], eg.events[j])
    for i in m.boundary_matches:
        c = c ^ eg.paths.corrections(eg.events[i], BOUNDARY)
    return c


class NativeDecoder:
    """Decode whole event arrays with the in-house matcher, memoizing repeats."""

    def __init__(self, graph: MatchingGraph):
        self.graph = graph
        self.table = path_table(graph)
        self._memo: dict[tuple[int, ...], int] = {}

    def decode_dots(self, events) -> Corrections:
        eg = build_event_graph(self.graph, events)
        return corrections_from_matching(min_weight_match(eg), eg)

    def decode_batch(self, events: np.ndarray) -> np.ndarray:
        """Predicted logical flips for ``events`` of shape (shots, n_detectors)."""
        out = np.zeros(events.shape[0], dtype=np.uint8)
        shots, dets = np.nonzero(events)
        if len(shots) == 0:
            return out
        splits = np.flatnonzero(np.diff(shots)) + 1
        for shot_ids, det_ids in zip(np.split(shots, splits), np.split(dets, splits)):
            key = tuple(det_ids.tolist())
            bit = self._memo.get(key)
            if bit is None:
                bit = self.decode_dots([self.graph.dot(i) for i in key]).logical
                self._memo[key] = bit
            out[shot_ids[0]] = bit
        return out


class PyMatchingDecoder:
    """Sparse-blossom decoding through PyMatching on the same lines."""

    def __init__(self, graph: MatchingGraph):
        self.matching = graph.to_pymatching()

    @cached_property
    def n_detectors(self) -> int:
        return self.matching.num_detectors

    def decode_batch(self, events: np.ndarray) -> np.ndarray:
        pred = self.matching.decode_batch(events)
        return pred[:, 0].astype(np.uint8)


DECODERS = {"pymatching": PyMatchingDecoder, "native": NativeDecoder}


def make_decoder(graph: MatchingGraph, method: str = "pymatching"):
    try:
        return DECODERS[method](graph)
    except KeyError:
        raise ValueError(f"unknown decoder {method!r}; choose from {sorted(DECODERS)}") from None
