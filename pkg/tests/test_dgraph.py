import math
from collections import Counter

import pytest

from leaksim.circuits import CodeParams, build_experiment
from leaksim.core import I, X, GateKind, StructuralError
from leaksim.dgraph import (
    BOUNDARY,
    Dot,
    FaultClass,
    Line,
    _decompose,
    build_graph,
    enumerate_fault_classes,
    geometric_class,
    propagate_fault,
    propagate_faults,
    syndrome_of,
    xor_merge,
)
from leaksim.noise import NoiseParams

P = 1e-3


@pytest.fixture(scope="module")
def plain3():
    s = build_experiment(CodeParams(3, 4, "plain"))
    return s, build_graph(s, NoiseParams(P))


def taxonomy(events, n_sites):
    """Location class (1..5) of a single-fault event set, 0 if silent, None if foreign."""
    dots = sorted(events)
    if not dots:
        return 0
    if len(dots) == 1:
        (s, _), = dots
        return 1 if s == 0 else 3 if s == n_sites - 1 else None
    if len(dots) != 2:
        return None
    (s1, t1), (s2, t2) = dots
    if t1 == t2 and s2 == s1 + 1:
        return 2
    if s1 == s2 and t2 == t1 + 1:
        return 5
    if s2 == s1 + 1 and t2 == t1 + 1:
        return 4
    return None


def fault(schedule, step, kind, qubits, paulis):
    return FaultClass(step, kind, qubits, paulis, P / 3)


def test_fault_enumeration_counts(plain3):
    s, _ = plain3
    faults = enumerate_fault_classes(s, NoiseParams(P))
    per_kind = Counter(f.kind for f in faults)
    gates = Counter(g.kind for g in s.gates())
    assert per_kind[GateKind.CZ] == 15 * gates[GateKind.CZ]
    for kind in (GateKind.INIT, GateKind.IDENTITY, GateKind.HADAMARD, GateKind.MEASURE):
        assert per_kind[kind] == 3 * gates[kind]
    assert all(f.probability == (P / 15 if f.kind is GateKind.CZ else P / 3) for f in faults)


def test_zero_p_has_no_weights(plain3):
    s, _ = plain3
    with pytest.raises(ValueError):
        enumerate_fault_classes(s, NoiseParams(0.0))
    with pytest.raises(ValueError):
        build_graph(s, NoiseParams(0.0))


def test_location_examples(plain3):
    s, _ = plain3
    t = 1
    b = s.round_boundaries[t]
    # X on each data qubit while it idles before any CZ
    assert propagate_fault(s, fault(s, b + 1, GateKind.IDENTITY, (0,), (X,))) == {Dot(0, t)}
    assert propagate_fault(s, fault(s, b + 1, GateKind.IDENTITY, (2,), (X,))) == {Dot(0, t), Dot(1, t)}
    assert propagate_fault(s, fault(s, b + 1, GateKind.IDENTITY, (4,), (X,))) == {Dot(1, t)}
    # X on the middle data qubit between its two CZs
    diag = propagate_fault(s, FaultClass(b + 2, GateKind.CZ, (3, 2), (I, X), P / 15))
    assert diag == {Dot(0, t), Dot(1, t + 1)}
    # flipped readout
    assert propagate_fault(s, fault(s, b + 5, GateKind.MEASURE, (1,), (X,))) == {Dot(0, t), Dot(0, t + 1)}


@pytest.mark.parametrize("d, mode", [(3, "plain"), (5, "plain"), (3, "teleport"), (5, "teleport")])
def test_every_fault_fits_the_taxonomy(d, mode):
    s = build_experiment(CodeParams(d, 4, mode))
    faults = enumerate_fault_classes(s, NoiseParams(P))
    events, _ = propagate_faults(s, faults)
    classes = Counter(taxonomy(ev, s.n_sites) for ev in events)
    assert None not in classes
    assert {1, 2, 3, 4, 5} <= set(classes)


def test_line_classes_d3(plain3):
    s, g = plain3
    kinds = Counter(geometric_class(u, v) for u, v in g.lines)
    assert kinds == {"boundary": 10, "time": 8, "space": 5, "diagonal": 4}
    assert g.decomposed == 0 and g.logical_conflicts == 0


def test_weights_and_probabilities(plain3):
    _, g = plain3
    for line in g.lines.values():
        assert 0 < line.probability < 0.5
        assert line.weight > 0
        assert line.direct_probability == pytest.approx(line.probability)
    assert Line(Dot(0, 0), BOUNDARY, probability=math.exp(-1)).weight == pytest.approx(1.0)


def test_xor_merge():
    assert xor_merge(0.1, 0.2) == pytest.approx(0.26)
    assert xor_merge(0.0, 0.3) == 0.3
    assert xor_merge(0.5, 0.123) == pytest.approx(0.5)


def test_logical_lines(plain3):
    s, g = plain3
    # only boundary lines on the top edge cross the logical cut
    for (u, v), line in g.lines.items():
        if line.logical:
            assert v == BOUNDARY and u.site == 0
            assert s.data_slot(0) in line.record_flips


def test_bulk_periodicity():
    for mode, period in (("plain", 1), ("teleport", 2)):
        s = build_experiment(CodeParams(5, 8, mode))
        g = build_graph(s, NoiseParams(P))
        for (u, v), line in g.lines.items():
            if v == BOUNDARY or not (1 <= u.round and v.round <= 5):
                continue
            twin = g.lines[(Dot(u.site, u.round + period), Dot(v.site, v.round + period))]
            assert twin.probability == pytest.approx(line.probability, rel=1e-12)


def test_every_fault_is_its_lines_symmetric_difference(plain3):
    s, g = plain3
    faults = enumerate_fault_classes(s, NoiseParams(P))
    events, _ = propagate_faults(s, faults)
    for ev in events:
        if not ev:
            continue
        dots = sorted(ev)
        key = (dots[0], BOUNDARY) if len(dots) == 1 else tuple(dots)
        assert syndrome_of([g.lines[key]]) == ev


def test_decompose_synthetic():
    a, b, c, d = Dot(0, 0), Dot(1, 0), Dot(0, 1), Dot(1, 1)
    events = frozenset({a, b, c, d})
    comps = [frozenset({a, b}), frozenset({c, d})]
    assert _decompose(events, comps, {}) == comps
    lines = {(a, c): None, (b, BOUNDARY): None, (d, BOUNDARY): None}
    parts = _decompose(events, [frozenset({a, b, c})], lines)
    assert syndrome_of([Line(*sorted(p) if len(p) == 2 else (next(iter(p)), BOUNDARY)) for p in parts]) == events
    assert _decompose(events, [], {}) is None


def test_graph_needs_measurements(plain3):
    s, _ = plain3
    import dataclasses

    silent = dataclasses.replace(
        s, steps=tuple(tuple(g for g in gates if g.kind is not GateKind.MEASURE) for gates in s.steps)
    )
    with pytest.raises(StructuralError):
        build_graph(silent, NoiseParams(P))


def test_graph_dump_and_indexing(plain3):
    _, g = plain3
    text = g.dump()
    assert text.startswith("# d=3 rounds=4 mode=plain")
    assert len(text.splitlines()) == len(g.lines) + 1
    for dot in g.dots():
        assert g.dot(g.index(dot)) == dot
    assert g.index(BOUNDARY) == -1
    with pytest.raises(StructuralError):
        g.index(Dot(5, 0))
