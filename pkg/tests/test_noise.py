"""Collapse terms, effective noise rates, process matrices, preset models."""
import numpy as np
import pytest

from rcsbench.noise import (
    CollapseTerm,
    MODEL_PRESETS,
    NoiseModel,
    ProcessMatrix,
    collapse_matrix,
    diagonalize_channel,
    enr_of_model,
    enr_of_term,
    first_order_process_matrix,
    jj_diagonal,
    model_from_json,
    model_to_json,
    pauli_basis,
    pauli_vector,
    preset_model,
    support_mask,
)


def test_collapse_matrices():
    sigma = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
    num = np.array([[0, 0], [0, 1]], dtype=complex)  # |1><1|
    assert np.array_equal(collapse_matrix(CollapseTerm("amplitude_decay", (0,), 0.1)), sigma)
    assert np.array_equal(collapse_matrix(CollapseTerm("dephasing", (0,), 0.1)), num)
    assert np.array_equal(
        collapse_matrix(CollapseTerm("corr_amplitude", (0, 1), 0.1)), np.kron(sigma, sigma)
    )
    assert np.array_equal(
        collapse_matrix(CollapseTerm("corr_dephasing", (0, 1), 0.1)), np.kron(num, num)
    )
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.diag([1, -1]).astype(complex)
    assert np.array_equal(
        collapse_matrix(CollapseTerm("pauli_string", (0, 2), 0.1, pauli="XZ")), np.kron(x, z)
    )


def test_enr_per_kind():
    g = 0.12
    cases = {
        "amplitude_decay": g / 2,
        "dephasing": g / 4,
        "corr_amplitude": g / 4,
        "corr_dephasing": 3 * g / 16,
    }
    for kind, want in cases.items():
        support = (0,) if kind in ("amplitude_decay", "dephasing") else (0, 1)
        assert np.isclose(enr_of_term(CollapseTerm(kind, support, g)), want, atol=1e-14)
    assert enr_of_term(CollapseTerm("pauli_string", (0, 1), g, pauli="XY")) == g


def test_pauli_basis_orthonormal():
    for k in (1, 2):
        basis = pauli_basis(k)
        assert len(basis) == 4**k
        dim = 2**k
        for i, (_, a) in enumerate(basis):
            for j, (_, b) in enumerate(basis):
                want = dim if i == j else 0.0
                assert np.isclose(np.trace(a.conj().T @ b), want, atol=1e-12)


def test_pauli_vector_reconstructs():
    rng = np.random.default_rng(0)
    op = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    c = pauli_vector(op)
    rebuilt = sum(ci * p for ci, (_, p) in zip(c, pauli_basis(2)))
    assert np.allclose(rebuilt, op, atol=1e-12)


def test_preset_enrs_hit_target():
    for name in MODEL_PRESETS:
        model = preset_model(name, 8, 0.04)
        assert model.n == 8
        assert np.isclose(enr_of_model(model), 0.04, atol=1e-14), name


def test_preset_structures():
    t = preset_model("t1t2", 4, 0.02)
    assert len(t.terms) == 8
    kinds = {term.kind for term in t.terms}
    assert kinds == {"amplitude_decay", "dephasing"}
    amp = [x for x in t.terms if x.kind == "amplitude_decay"]
    deph = [x for x in t.terms if x.kind == "dephasing"]
    assert all(np.isclose(x.gamma, 0.005) for x in amp)
    assert all(np.isclose(x.gamma, 0.01) for x in deph)

    w = preset_model("weight_nm1", 6, 0.05)
    assert len(w.terms) == 1
    assert w.terms[0].support == (0, 1, 2, 3, 4)
    assert w.terms[0].pauli == "X" * 5
    assert w.terms[0].gamma == 0.05

    c = preset_model("corr_xx", 6, 0.03)
    assert len(c.terms) == 6  # ring pairs
    c_open = preset_model("corr_xx", 6, 0.03, boundary="open")
    assert len(c_open.terms) == 5

    with pytest.raises(ValueError):
        preset_model("bogus", 4, 0.01)


def test_first_order_process_matrix_enr_matches_term():
    for term in (
        CollapseTerm("amplitude_decay", (1,), 0.03),
        CollapseTerm("dephasing", (0,), 0.05),
        CollapseTerm("corr_dephasing", (2, 3), 0.02),
        CollapseTerm("pauli_string", (0,), 0.04, pauli="Y"),
    ):
        pm = first_order_process_matrix(term)
        assert np.isclose(pm.enr(), enr_of_term(term), atol=1e-14)
        assert np.allclose(pm.chi, pm.chi.conj().T, atol=1e-14)
        assert np.isclose(np.trace(pm.chi).real, 1.0, atol=1e-12)


def test_diagonalize_channel_preserves_enr():
    pm = first_order_process_matrix(CollapseTerm("amplitude_decay", (0,), 0.08))
    diag = diagonalize_channel(pm)
    assert np.isclose(diag.enr(), pm.enr(), atol=1e-15)
    assert np.count_nonzero(diag.chi - np.diag(np.diag(diag.chi))) == 0


def test_process_matrix_validate():
    good = ProcessMatrix(chi=np.diag([0.9, 0.1, 0.0, 0.0]).astype(complex), k=1)
    good.validate()
    with pytest.raises(ValueError, match="hermitian"):
        bad = np.diag([0.9, 0.1, 0.0, 0.0]).astype(complex)
        bad[0, 1] = 0.1j
        ProcessMatrix(chi=bad, k=1).validate()
    with pytest.raises(ValueError, match="trace"):
        ProcessMatrix(chi=np.diag([0.5, 0.1, 0, 0]).astype(complex), k=1).validate()
    with pytest.raises(ValueError, match="positive"):
        ProcessMatrix(chi=np.diag([1.1, -0.1, 0, 0]).astype(complex), k=1).validate()
    with pytest.raises(ValueError):
        ProcessMatrix(chi=np.eye(4, dtype=complex), k=2)


def test_support_mask_msb():
    assert support_mask((0,), 4) == 0b1000
    assert support_mask((3,), 4) == 0b0001
    assert support_mask((0, 2), 4) == 0b1010


def test_jj_diagonal():
    # amplitude decay on qubit 0 of n=2: J^dag J projects onto qubit-0 = 1
    d = jj_diagonal(CollapseTerm("amplitude_decay", (0,), 0.1), 2)
    assert np.array_equal(d, [0, 0, 1, 1])
    d2 = jj_diagonal(CollapseTerm("corr_dephasing", (0, 1), 0.1), 2)
    assert np.array_equal(d2, [0, 0, 0, 1])
    dp = jj_diagonal(CollapseTerm("pauli_string", (0,), 0.1, pauli="X"), 2)
    assert np.array_equal(dp, [1, 1, 1, 1])


def test_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(n=2, terms=(CollapseTerm("amplitude_decay", (2,), 0.1),)).validate()
    with pytest.raises(ValueError):
        NoiseModel(n=2, terms=(CollapseTerm("amplitude_decay", (0,), -0.1),)).validate()
    with pytest.raises(ValueError):
        NoiseModel(n=2, terms=(CollapseTerm("pauli_string", (0, 1), 0.1, pauli="X"),)).validate()
    NoiseModel(n=2, terms=()).validate()  # noiseless model is allowed


def test_model_json_round_trip():
    model = preset_model("corr_xx", 6, 0.03)
    back = model_from_json(model_to_json(model))
    assert back.n == model.n
    assert len(back.terms) == len(model.terms)
    for a, b in zip(model.terms, back.terms):
        assert (a.kind, a.support, a.pauli) == (b.kind, b.support, b.pauli)
        assert np.isclose(a.gamma, b.gamma, atol=0)
    assert np.isclose(enr_of_model(back), enr_of_model(model), atol=1e-15)
