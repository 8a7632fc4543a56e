"""Structure, determinism, and serialization of random brickwork circuits."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcsbench.circuits import (
    Circuit,
    ErrorInjection,
    Gate,
    circuit_from_json,
    circuit_to_json,
    inject_pauli,
    layer_pairs,
    sample_haar_unitary,
    sample_rqc,
)
from rcsbench.rng import spawn_rng


def test_layer_pairs_parity_and_wrap():
    assert layer_pairs(6, 1, "ring") == [(0, 1), (2, 3), (4, 5)]
    assert layer_pairs(6, 2, "ring") == [(1, 2), (3, 4), (5, 0)]
    assert layer_pairs(6, 3, "ring") == layer_pairs(6, 1, "ring")
    assert layer_pairs(6, 2, "open") == [(1, 2), (3, 4)]
    assert layer_pairs(6, 1, "open") == [(0, 1), (2, 3), (4, 5)]


def test_haar2q_structure():
    circ = sample_rqc(8, 5, rng=3)
    assert circ.depth == 5
    assert circ.layers_per_unit == 1
    assert len(circ.layers) == 5
    assert circ.two_qubit_gate_count() == 5 * 4
    circ.validate()
    for t, layer in enumerate(circ.layers, start=1):
        assert [g.targets for g in layer] == layer_pairs(8, t, "ring")


def test_cnot_haar1q_structure():
    circ = sample_rqc(6, 4, gate_set="cnot_haar1q", rng=1)
    assert circ.depth == 4
    assert circ.layers_per_unit == 2
    assert len(circ.layers) == 8
    assert len(circ.unit_slices()) == 4
    circ.validate()
    for u, (haar_layer, cnot_layer) in enumerate(circ.unit_slices(), start=1):
        assert [g.targets for g in haar_layer] == [(q,) for q in range(6)]
        assert all(g.matrix.shape == (2, 2) for g in haar_layer)
        want = [(min(p), max(p)) for p in layer_pairs(6, u, "ring")]
        assert [g.targets for g in cnot_layer] == want
        cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        assert all(np.array_equal(g.matrix, cnot) for g in cnot_layer)


def test_open_boundary_has_no_wrap_pair():
    circ = sample_rqc(6, 4, boundary="open", rng=0)
    circ.validate()
    for t, layer in enumerate(circ.layers, start=1):
        targets = [g.targets for g in layer]
        assert (5, 0) not in targets
        assert len(targets) == (3 if t % 2 == 1 else 2)


def test_gates_are_haar_unitary():
    rng = spawn_rng(11)
    for dim in (2, 4):
        u = sample_haar_unitary(dim, rng)
        assert np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-12)
    # phase convention makes the distribution invariant, not just the QR output
    us = [sample_haar_unitary(2, rng)[0, 0] for _ in range(2000)]
    assert abs(np.mean(us)) < 0.05


def test_seeded_determinism():
    a = sample_rqc(6, 3, rng=42)
    b = sample_rqc(6, 3, rng=42)
    c = sample_rqc(6, 3, rng=43)
    flat_a = np.concatenate([g.matrix.ravel() for l in a.layers for g in l])
    flat_b = np.concatenate([g.matrix.ravel() for l in b.layers for g in l])
    flat_c = np.concatenate([g.matrix.ravel() for l in c.layers for g in l])
    assert np.array_equal(flat_a, flat_b)
    assert not np.array_equal(flat_a, flat_c)
    assert a.seed == 42


def test_generator_input_leaves_seed_unset():
    circ = sample_rqc(4, 2, rng=spawn_rng(5))
    assert circ.seed is None


def test_json_round_trip():
    circ = sample_rqc(6, 3, gate_set="cnot_haar1q", boundary="open", rng=9)
    back = circuit_from_json(circuit_to_json(circ))
    assert back.n == circ.n and back.depth == circ.depth
    assert back.boundary == "open" and back.gate_set == "cnot_haar1q"
    assert back.seed == 9
    assert len(back.layers) == len(circ.layers)
    for la, lb in zip(circ.layers, back.layers):
        for ga, gb in zip(la, lb):
            assert ga.targets == gb.targets
            assert np.array_equal(ga.matrix, gb.matrix)


def test_inject_pauli_inserts_after_unit():
    circ = sample_rqc(4, 3, rng=0)
    inj = ErrorInjection(pauli="IXYI", layer=2)
    out = inject_pauli(circ, inj)
    assert len(out.layers) == 4
    assert len(circ.layers) == 3  # original untouched
    extra = out.layers[2]
    assert [g.targets for g in extra] == [(1,), (2,)]
    assert np.array_equal(extra[0].matrix, np.array([[0, 1], [1, 0]], dtype=complex))


def test_inject_pauli_cut_respects_layers_per_unit():
    circ = sample_rqc(4, 3, gate_set="cnot_haar1q", rng=0)
    out = inject_pauli(circ, ErrorInjection(pauli="XIII", layer=1))
    assert len(out.layers) == 7
    assert out.layers[2][0].targets == (0,)


def test_injection_validation():
    circ = sample_rqc(4, 3, rng=0)
    with pytest.raises(ValueError):
        ErrorInjection(pauli="IIII", layer=1).validate(circ)
    with pytest.raises(ValueError):
        ErrorInjection(pauli="XII", layer=1).validate(circ)
    with pytest.raises(ValueError):
        ErrorInjection(pauli="XIII", layer=4).validate(circ)
    with pytest.raises(ValueError):
        ErrorInjection(pauli="AIII", layer=1).validate(circ)


def test_validate_rejects_bad_circuits():
    with pytest.raises(ValueError):
        sample_rqc(5, 2)  # odd n on a ring
    with pytest.raises(ValueError):
        sample_rqc(4, 0)
    circ = sample_rqc(4, 1, rng=0)
    bad = Circuit(n=4, depth=1, layers=[[Gate(circ.layers[0][0].matrix, (0, 2))]])
    with pytest.raises(ValueError, match="not adjacent"):
        bad.validate()
    notu = Circuit(n=4, depth=1, layers=[[Gate(np.ones((2, 2), dtype=complex), (0,))]])
    with pytest.raises(ValueError, match="unitary"):
        notu.validate()


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 10).map(lambda k: 2 * k),
    d=st.integers(1, 8),
    gate_set=st.sampled_from(["haar2q", "cnot_haar1q"]),
    boundary=st.sampled_from(["ring", "open"]),
    seed=st.integers(0, 2**31),
)
def test_sampled_circuits_always_validate(n, d, gate_set, boundary, seed):
    circ = sample_rqc(n, d, gate_set=gate_set, boundary=boundary, rng=seed)
    circ.validate()
    assert len(circ.layers) == d * circ.layers_per_unit
    assert len(circ.unit_slices()) == d
    per_unit = [sum(1 for l in u for g in l if len(g.targets) == 2) for u in circ.unit_slices()]
    for u, cnt in enumerate(per_unit, start=1):
        assert cnt == len(layer_pairs(n, u, boundary))
