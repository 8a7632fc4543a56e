"""Statevector kernels against dense matrix algebra on small registers."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcsbench.circuits import (
    ErrorInjection,
    Gate,
    PAULI_1Q,
    inject_pauli,
    sample_haar_unitary,
    sample_rqc,
)
from rcsbench.rng import spawn_rng
from rcsbench.statevec import (
    PureState,
    apply_gate,
    apply_gate_amps,
    output_probability,
    pauli_expectation,
    pauli_overlap_sq,
    probabilities,
    read_probabilities,
    run_circuit,
    sample_bitstrings,
    simulate_units,
    write_probabilities,
)


def _dense_unitary(circuit) -> np.ndarray:
    """Full 2^n x 2^n matrix by kron products; qubit 0 is the MSB."""
    n = circuit.n
    u = np.eye(2**n, dtype=complex)
    for layer in circuit.layers:
        for g in layer:
            u = _embed(g.matrix, g.targets, n) @ u
    return u


def _embed(m: np.ndarray, targets, n: int) -> np.ndarray:
    """Embed a k-qubit gate into the full register, any target order."""
    k = len(targets)
    gate = m.reshape((2,) * (2 * k))
    t = np.eye(2**n, dtype=complex).reshape((2,) * (2 * n))
    # contract gate input axes with the row axes at the target positions
    t = np.tensordot(gate, t, axes=(list(range(k, 2 * k)), list(targets)))
    # tensordot puts gate output axes first; restore register axis order
    pos = {d: i for i, d in enumerate(targets)}
    order = []
    take = 0
    for axis in range(2 * n):
        if axis in pos:
            order.append(pos[axis])
        else:
            order.append(k + take)
            take += 1
    return t.transpose(order).reshape(2**n, 2**n)


def test_msb_convention():
    # X on qubit 0 of |000> must set the high-order bit: index 4 of 8
    state = PureState(amps=np.eye(1, 8, 0, dtype=complex).ravel(), n=3, norm2=1.0)
    out = apply_gate(state, Gate(PAULI_1Q["X"], (0,)))
    assert np.argmax(np.abs(out.amps)) == 4
    out2 = apply_gate(state, Gate(PAULI_1Q["X"], (2,)))
    assert np.argmax(np.abs(out2.amps)) == 1


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 5), seed=st.integers(0, 2**31))
def test_run_circuit_matches_dense_oracle(n, seed):
    n = 2 * (n // 2) + (n % 2)
    boundary = "open" if n % 2 else "ring"
    circ = sample_rqc(n, 3, boundary=boundary, rng=seed)
    psi = run_circuit(circ).amps
    zero = np.zeros(2**n, dtype=complex)
    zero[0] = 1.0
    ref = _dense_unitary(circ) @ zero
    assert np.allclose(psi, ref, atol=1e-10)


def test_dense_oracle_wrapped_pair():
    circ = sample_rqc(4, 2, rng=7)  # layer 2 contains the (3, 0) wrap gate
    psi = run_circuit(circ).amps
    zero = np.zeros(16, dtype=complex)
    zero[0] = 1.0
    assert np.allclose(psi, _dense_unitary(circ) @ zero, atol=1e-10)


def test_apply_gate_amps_batched_rows():
    rng = spawn_rng(3)
    u = sample_haar_unitary(4, rng)
    batch = rng.standard_normal((5, 16)) + 1j * rng.standard_normal((5, 16))
    got = apply_gate_amps(batch, u, (1, 2), 4)
    for b in range(5):
        row = apply_gate_amps(batch[b].copy(), u, (1, 2), 4)
        assert np.allclose(got[b], row, atol=1e-12)


def test_norm_preserved_and_probabilities():
    circ = sample_rqc(6, 4, rng=5)
    state = run_circuit(circ)
    p = probabilities(state)
    assert abs(p.sum() - 1.0) < 1e-10
    assert abs(state.norm2 - 1.0) < 1e-10
    x = format(13, "06b")
    assert np.isclose(output_probability(state, x), p[13])


def test_simulate_units_counts_and_prefix_consistency():
    circ = sample_rqc(4, 5, gate_set="cnot_haar1q", rng=2)
    snaps = list(simulate_units(circ))
    assert [u for u, _ in snaps] == [1, 2, 3, 4, 5]
    assert np.allclose(snaps[-1][1], run_circuit(circ).amps, atol=1e-12)


def test_pauli_expectation_matches_dense():
    circ = sample_rqc(4, 3, rng=8)
    amps = run_circuit(circ).amps
    for label in ("XIII", "IZII", "IIYI", "ZZII", "XYZX"):
        op = np.array([[1.0 + 0j]])
        for c in label:
            op = np.kron(op, PAULI_1Q[c])
        want = amps.conj() @ op @ amps
        got = pauli_expectation(amps, 4, label)
        assert np.isclose(got, want, atol=1e-10)


def test_pauli_overlap_sq_matches_explicit_injection():
    circ = sample_rqc(6, 4, rng=21)
    inj = ErrorInjection(pauli="IXIIZI", layer=2)
    ideal = run_circuit(circ).amps
    errored = run_circuit(inject_pauli(circ, inj)).amps
    want = abs(np.vdot(ideal, errored)) ** 2
    assert np.isclose(pauli_overlap_sq(circ, inj), want, atol=1e-10)


def test_pauli_overlap_sq_trailing_gates_cancel():
    # the overlap only depends on the prefix up to the injection unit
    circ = sample_rqc(4, 6, rng=4)
    inj = ErrorInjection(pauli="XIII", layer=3)
    short = sample_rqc(4, 6, rng=4)
    short.layers = short.layers[:3]
    short.depth = 3
    assert np.isclose(
        pauli_overlap_sq(circ, inj),
        pauli_overlap_sq(short, ErrorInjection(pauli="XIII", layer=3)),
        atol=1e-12,
    )


def test_sample_bitstrings_frequencies():
    circ = sample_rqc(4, 8, rng=6)
    state = run_circuit(circ)
    p = probabilities(state)
    samples = sample_bitstrings(state, 20000, spawn_rng(1))
    assert all(len(s) == 4 and set(s) <= {"0", "1"} for s in samples)
    counts = np.zeros(16)
    for s in samples:
        counts[int(s, 2)] += 1
    freq = counts / 20000
    # multinomial: 4 sigma per bin
    sigma = np.sqrt(p * (1 - p) / 20000)
    assert np.all(np.abs(freq - p) < 4 * sigma + 1e-9)


def test_probability_file_round_trip(tmp_path):
    p = probabilities(run_circuit(sample_rqc(4, 3, rng=9)))
    path = tmp_path / "probs.bin"
    write_probabilities(path, p)
    back = read_probabilities(path)
    assert back.dtype == np.float64
    assert np.array_equal(back, p)


def test_output_probability_rejects_bad_strings():
    state = run_circuit(sample_rqc(4, 2, rng=0))
    with pytest.raises(ValueError):
        output_probability(state, "010")
    with pytest.raises(ValueError):
        output_probability(state, "01a0")
