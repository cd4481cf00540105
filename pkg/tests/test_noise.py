import math

import numpy as np
import pytest

from leaksim.circuits import CodeParams, build_experiment, run_schedule
from leaksim.core import Gate, GateKind, I, L, SystemFrame, X, Y, Z
from leaksim.noise import (
    Injection,
    NoiseParams,
    apply_gate_noise,
    bernoulli_sites,
    noisy_init,
    noisy_measure,
    rng_stream,
)

H0 = Gate(GateKind.HADAMARD, (0,))
ID0 = Gate(GateKind.IDENTITY, (0,))
CZ01 = Gate(GateKind.CZ, (0, 1))


def within(count, n, p, sigmas=3.0):
    sd = math.sqrt(n * p * (1 - p))
    return abs(count - n * p) <= sigmas * sd


def labels(frame, q):
    x, z, lk = frame.x[q], frame.z[q], frame.leaked[q]
    return {
        "I": int(np.sum(~lk & ~x & ~z)),
        "X": int(np.sum(~lk & x & ~z)),
        "Y": int(np.sum(~lk & x & z)),
        "Z": int(np.sum(~lk & ~x & z)),
        "L": int(np.sum(lk)),
    }


def filled(n_qubits, shots, state):
    f = SystemFrame.zeros(n_qubits, shots)
    for q in range(n_qubits):
        f.set(q, state)
    return f


def test_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(-0.1)
    with pytest.raises(ValueError):
        NoiseParams(0.5, leak_factor=3.0)
    with pytest.raises(ValueError):
        NoiseParams(0.1, decay_prob=1.5)
    with pytest.raises(ValueError):
        NoiseParams.for_mode("bogus", 0.1)
    assert NoiseParams.for_mode("plain", 1e-3).leak_prob == 0.0
    assert NoiseParams.for_mode("leakage", 1e-3).leak_prob == pytest.approx(1e-4)


@pytest.mark.parametrize("gate", [H0, ID0, CZ01])
def test_zero_noise_is_conjugation_only(gate):
    f = filled(2, 50, X)
    apply_gate_noise(f, gate, NoiseParams(0.0, decay_prob=0.0, leakage_enabled=True), rng_stream(1, 0))
    expected = {"H": [Z, X], "I": [X, X], "CZ": [Y, Y]}[
        {GateKind.HADAMARD: "H", GateKind.IDENTITY: "I", GateKind.CZ: "CZ"}[gate.kind]
    ]
    for q, s in enumerate(expected):
        assert labels(f, q)[s.label] == 50


def test_cz_scrambles_partner_uniformly():
    n = 100_000
    f = SystemFrame.zeros(2, n)
    f.set(0, L)
    apply_gate_noise(f, CZ01, NoiseParams(0.0, decay_prob=0.0), rng_stream(2, 0))
    counts = labels(f, 1)
    assert counts["L"] == 0
    assert labels(f, 0)["L"] == n
    for key in "IXYZ":
        assert within(counts[key], n, 0.25), counts


def test_cz_between_two_leaked_qubits_leaves_both_leaked():
    f = filled(2, 10, L)
    apply_gate_noise(f, CZ01, NoiseParams(0.0, decay_prob=0.0), rng_stream(2, 1))
    assert labels(f, 0)["L"] == labels(f, 1)["L"] == 10


def test_decay_with_certainty_gives_uniform_pauli():
    n = 100_000
    f = filled(1, n, L)
    apply_gate_noise(f, ID0, NoiseParams(0.0, decay_prob=1.0), rng_stream(3, 1))
    counts = labels(f, 0)
    assert counts["L"] == 0
    for key in "IXYZ":
        assert within(counts[key], n, 0.25)


def test_init_clears_state():
    for state in (L, Y):
        f = filled(1, 4, state)
        noisy_init(f, Gate(GateKind.INIT, (0,)), NoiseParams(0.0), rng_stream(4, 0))
        assert labels(f, 0)["I"] == 4


def test_init_with_certain_fault_is_uniform_over_paulis():
    n = 60_000
    f = SystemFrame.zeros(1, n)
    noisy_init(f, Gate(GateKind.INIT, (0,)), NoiseParams(1.0, leak_factor=0.0), rng_stream(4, 1))
    counts = labels(f, 0)
    assert counts["I"] == 0
    for key in "XYZ":
        assert within(counts[key], n, 1 / 3)


def test_measure_examples():
    f = SystemFrame.zeros(2, 3, record_size=2)
    f.set(1, X)
    g = Gate(GateKind.MEASURE, (0,), slot=0)
    _, bits = noisy_measure(f, g, NoiseParams(0.0), rng_stream(5, 0))
    assert not bits.any()
    _, bits = noisy_measure(f, Gate(GateKind.MEASURE, (1,), slot=1), NoiseParams(0.0), rng_stream(5, 0))
    assert bits.all()
    assert f.record[1].all() and not f.record[0].any()
    with pytest.raises(ValueError):
        noisy_measure(f, g, NoiseParams(0.0), rng_stream(5, 0))


def test_leaked_measurement_is_a_fair_coin_and_stays_leaked():
    n = 200_000
    f = filled(1, n, L)
    _, bits = noisy_measure(f, Gate(GateKind.MEASURE, (0,)), NoiseParams(0.0), rng_stream(6, 0))
    assert within(int(bits.sum()), n, 0.5)
    assert labels(f, 0)["L"] == n


def test_measurement_feed_forward_applies_z_to_target():
    f = SystemFrame.zeros(2, 2)
    f.x[0, 1] = True
    noisy_measure(f, Gate(GateKind.MEASURE, (0,), feed=1), NoiseParams(0.0), rng_stream(6, 1))
    assert f.z[1].tolist() == [False, True]


def test_leaked_qubit_absorbs_depolarizing_faults():
    f = filled(1, 1000, L)
    for step in range(20):
        apply_gate_noise(f, H0, NoiseParams(0.9, leak_factor=0.0, decay_prob=0.0), rng_stream(7, step))
    assert labels(f, 0)["L"] == 1000
    assert not f.x.any() and not f.z.any()


def test_explicit_injection_is_absorbed_by_leaked_qubits():
    f = SystemFrame.zeros(2, 1)
    f.set(0, L)
    inj = Injection(np.array([0, 1]), np.array([0, 0]), np.array([True, True]), np.array([False, True]))
    apply_gate_noise(f, Gate(GateKind.IDENTITY, (0,)), NoiseParams(0.0, decay_prob=0.0), rng_stream(0, 0), inj)
    assert f.states() == [L, Y]


def test_decay_lifetime_is_geometric():
    n, q = 100_000, 0.05
    f = filled(1, n, L)
    life = np.zeros(n, dtype=np.int64)
    params = NoiseParams(0.0, decay_prob=q)
    rng = rng_stream(8, 0)
    step = 0
    while f.leaked.any():
        step += 1
        apply_gate_noise(f, ID0, params, rng)
        just = (life == 0) & ~f.leaked[0]
        life[just] = step
    mean = life.mean()
    sd = math.sqrt((1 - q) / q**2 / n)
    assert abs(mean - 1 / q) <= 3 * sd


def test_leak_rate_per_hadamard():
    n, p = 1_000_000, 0.01
    params = NoiseParams(p, leak_factor=0.1, decay_prob=0.0, leakage_enabled=True)
    f = SystemFrame.zeros(1, n)
    counts = np.zeros(n, dtype=np.int64)
    apply_gate_noise(f, H0, params, rng_stream(9, 0), leak_counts=counts)
    assert counts.sum() == f.leaked.sum()
    assert within(int(f.leaked.sum()), n, 0.1 * p)


def test_identity_never_leaks():
    params = NoiseParams(0.5, leak_factor=1.0, decay_prob=0.0, leakage_enabled=True)
    f = SystemFrame.zeros(1, 10_000)
    apply_gate_noise(f, ID0, params, rng_stream(9, 1))
    assert not f.leaked.any()


def test_leakage_disabled_never_produces_leaked_states():
    schedule = build_experiment(CodeParams(3, 5, "plain"))
    seen = []
    run_schedule(
        schedule,
        NoiseParams(0.05),
        rng_stream(10, 0),
        2000,
        observer=lambda step, frame: seen.append(bool(frame.leaked.any())),
    )
    assert not any(seen)


def test_same_stream_same_result():
    def draw():
        f = SystemFrame.zeros(3, 500)
        params = NoiseParams(0.2, leakage_enabled=True)
        rng = rng_stream(11, 3, domain=7)
        apply_gate_noise(f, Gate(GateKind.CZ, (0, 2)), params, rng)
        apply_gate_noise(f, Gate(GateKind.HADAMARD, (1,)), params, rng)
        return f

    a, b = draw(), draw()
    assert np.array_equal(a.x, b.x) and np.array_equal(a.z, b.z) and np.array_equal(a.leaked, b.leaked)
    c = rng_stream(11, 4, domain=7).random(4)
    assert not np.array_equal(rng_stream(11, 3, domain=7).random(4), c)


def test_bernoulli_sites():
    rng = rng_stream(12, 0)
    assert len(bernoulli_sites(rng, 100, 0.0)) == 0
    assert bernoulli_sites(rng, 5, 1.0).tolist() == [0, 1, 2, 3, 4]
    hits = bernoulli_sites(rng, 1_000_000, 0.01)
    assert np.all(np.diff(hits) > 0)
    assert within(len(hits), 1_000_000, 0.01)


def test_cz_fault_marginals():
    # each of the 15 non-identity pairs with probability p/15
    n = 300_000
    f = SystemFrame.zeros(2, n)
    apply_gate_noise(f, CZ01, NoiseParams(1.0, leak_factor=0.0), rng_stream(13, 0))
    code = (2 * f.x[0] + f.z[0]) * 4 + (2 * f.x[1] + f.z[1])
    hist = np.bincount(code, minlength=16)
    assert hist[0] == 0
    for c in range(1, 16):
        assert within(int(hist[c]), n, 1 / 15)
