"""Exact pure-state simulation: amplitudes, output probabilities, sampling.

Bit convention (global): qubit 0 is the most significant bit of the basis
index, so axis q of amps.reshape((2,)*n) is qubit q. Gate kernels accept an
optional leading batch axis; trajectory ensembles and density evolution
(rows/columns as a doubled register) reuse them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, ErrorInjection, Gate

__all__ = [
    "PureState",
    "apply_gate",
    "apply_gate_amps",
    "run_circuit",
    "simulate_units",
    "output_probability",
    "probabilities",
    "sample_bitstrings",
    "write_probabilities",
    "read_probabilities",
    "pauli_terms",
    "pauli_expectation",
    "pauli_overlap_sq",
    "MAX_STATEVEC_QUBITS",
]

MAX_STATEVEC_QUBITS = 24


@dataclass
class PureState:
    amps: np.ndarray
    n: int
    norm2: float

    @classmethod
    def zero(cls, n: int) -> "PureState":
        if n > MAX_STATEVEC_QUBITS:
            raise ValueError(f"n={n} exceeds statevector limit {MAX_STATEVEC_QUBITS}")
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(amps=amps, n=n, norm2=1.0)

    def refresh_norm2(self) -> float:
        self.norm2 = float(np.real(np.vdot(self.amps, self.amps)))
        return self.norm2


def apply_gate_amps(amps: np.ndarray, matrix: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    """Apply a small unitary to the last axis (2^n) of amps; leading axes are a batch."""
    lead = amps.shape[:-1]
    flat = amps.reshape(-1, 2**n)
    if len(targets) == 1:
        q = targets[0]
        view = flat.reshape(-1, 2**q, 2, 2 ** (n - q - 1))
        out = np.einsum("ij,bpjs->bpis", matrix, view, optimize=True)
    elif len(targets) == 2 and targets[1] == targets[0] + 1:
        a = targets[0]
        view = flat.reshape(-1, 2**a, 4, 2 ** (n - a - 2))
        out = np.einsum("ij,bpjs->bpis", matrix, view, optimize=True)
    else:
        out = _apply_general(flat, matrix, targets, n)
    return out.reshape(lead + (2**n,))


def _apply_general(flat: np.ndarray, matrix: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    k = len(targets)
    view = flat.reshape((-1,) + (2,) * n)
    mt = matrix.reshape((2,) * (2 * k))
    state_sub = [1 + q for q in range(n)]
    out_sub = list(state_sub)
    mat_sub = []
    for j, t in enumerate(targets):
        mat_sub.append(n + 1 + j)
        out_sub[t] = n + 1 + j
    mat_sub += [1 + t for t in targets]
    return np.einsum(mt, mat_sub, view, [0] + state_sub, [0] + out_sub, optimize=True)


def apply_gate(state: PureState, gate: Gate) -> PureState:
    if any(q >= state.n for q in gate.targets):
        raise ValueError(f"gate targets {gate.targets} exceed n={state.n}")
    amps = apply_gate_amps(state.amps, gate.matrix, gate.targets, state.n)
    return PureState(amps=amps, n=state.n, norm2=state.norm2)


def simulate_units(circuit: Circuit):
    """Yield (depth_unit_index, amps) after each depth unit, starting at unit 1."""
    amps = PureState.zero(circuit.n).amps
    for u, group in enumerate(circuit.unit_slices(), start=1):
        for layer in group:
            for g in layer:
                amps = apply_gate_amps(amps, g.matrix, g.targets, circuit.n)
        yield u, amps


def run_circuit(circuit: Circuit) -> PureState:
    amps = PureState.zero(circuit.n).amps
    for layer in circuit.layers:
        for g in layer:
            amps = apply_gate_amps(amps, g.matrix, g.targets, circuit.n)
    state = PureState(amps=amps, n=circuit.n, norm2=1.0)
    state.refresh_norm2()
    return state


def output_probability(state: PureState, x: str) -> float:
    if len(x) != state.n:
        raise ValueError(f"bitstring length {len(x)} != n={state.n}")
    return float(np.abs(state.amps[int(x, 2)]) ** 2)


def probabilities(state: PureState) -> np.ndarray:
    return np.abs(state.amps) ** 2


def sample_bitstrings(state: PureState, M: int, rng: np.random.Generator) -> list[str]:
    """M i.i.d. computational-basis samples, as bitstrings (qubit 0 leftmost)."""
    if M == 0:
        return []
    p = probabilities(state)
    total = p.sum()
    if abs(total - 1.0) > 1e-8:
        p = p / total
    idx = rng.choice(p.size, size=M, p=p / p.sum())
    return [format(i, f"0{state.n}b") for i in idx]


def write_probabilities(path, probs: np.ndarray) -> None:
    """Binary dump: uint64 little-endian count, then float64 little-endian values."""
    arr = np.asarray(probs, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(np.uint64(arr.size).astype("<u8").tobytes())
        fh.write(arr.tobytes())


def read_probabilities(path) -> np.ndarray:
    with open(path, "rb") as fh:
        count = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
    if data.size != count:
        raise ValueError(f"truncated probability file: header {count}, got {data.size}")
    return data.astype(np.float64)


def pauli_terms(label: str) -> tuple[int, int, complex]:
    """Decompose a Pauli label into (flip_mask, sign_mask, scalar prefactor).

    P|x> = prefactor * (-1)^{parity(x & sign_mask)} |x ^ flip_mask>, with
    qubit 0 as the most significant bit.
    """
    n = len(label)
    flip = 0
    sign = 0
    ny = 0
    for q, c in enumerate(label):
        bit = 1 << (n - 1 - q)
        if c == "X":
            flip |= bit
        elif c == "Y":
            flip |= bit
            sign |= bit
            ny += 1
        elif c == "Z":
            sign |= bit
        elif c != "I":
            raise ValueError(f"bad pauli letter {c!r}")
    return flip, sign, 1j**ny


def _parity_signs(n: int, mask: int) -> np.ndarray:
    idx = np.arange(2**n, dtype=np.uint64)
    par = np.bitwise_count(idx & np.uint64(mask)) & np.uint64(1)
    return 1.0 - 2.0 * par.astype(np.float64)


def pauli_expectation(amps: np.ndarray, n: int, label: str) -> complex:
    """<phi|P|phi> for an n-qubit Pauli label."""
    flip, sign, pref = pauli_terms(label)
    signs = _parity_signs(n, sign)
    if flip == 0:
        acc = np.vdot(amps, signs * amps)
    else:
        idx = np.arange(2**n) ^ flip
        acc = np.vdot(amps[idx], signs * amps)
    return complex(pref * acc)


def pauli_overlap_sq(circuit: Circuit, injection: ErrorInjection) -> float:
    """|<psi_injected|psi_ideal>|^2; gates after the injection layer cancel."""
    injection.validate(circuit)
    cut = injection.layer * circuit.layers_per_unit
    amps = PureState.zero(circuit.n).amps
    for layer in circuit.layers[:cut]:
        for g in layer:
            amps = apply_gate_amps(amps, g.matrix, g.targets, circuit.n)
    val = pauli_expectation(amps, circuit.n, injection.pauli)
    return float(abs(val) ** 2)
