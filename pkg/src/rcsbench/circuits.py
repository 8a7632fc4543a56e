"""Random circuit generation: alternating 1D architectures with Haar gates.

Circuits are lists of gate layers on n qubits arranged on a ring or open
chain. Depth counts layers of 2-qubit gates; for the cnot_haar1q gate set a
depth unit is one layer of single-qubit Haar gates on every qubit followed
by one fixed CNOT layer.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import qr

from .rng import spawn_rng

__all__ = [
    "Gate",
    "Circuit",
    "ErrorInjection",
    "sample_haar_unitary",
    "sample_rqc",
    "inject_pauli",
    "layer_pairs",
    "circuit_to_json",
    "circuit_from_json",
    "PAULI_1Q",
]

PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


@dataclass(frozen=True)
class Gate:
    """A 1- or 2-qubit unitary acting on ordered target qubits."""

    matrix: np.ndarray
    targets: tuple[int, ...]

    def validate(self, n: int) -> None:
        k = len(self.targets)
        if self.matrix.shape != (2**k, 2**k):
            raise ValueError(f"gate matrix shape {self.matrix.shape} does not match {k} targets")
        if len(set(self.targets)) != k or any(not (0 <= q < n) for q in self.targets):
            raise ValueError(f"invalid targets {self.targets} for n={n}")
        dev = np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(2**k)))
        if dev > 1e-12:
            raise ValueError(f"gate is not unitary (deviation {dev:.2e})")


@dataclass
class Circuit:
    """n qubits, depth d (2-qubit gate layers), plus layer list and provenance seed."""

    n: int
    depth: int
    layers: list[list[Gate]]
    boundary: str = "ring"  # ring | open
    gate_set: str = "haar2q"  # haar2q | cnot_haar1q
    seed: int | None = None

    @property
    def layers_per_unit(self) -> int:
        """Internal layers per depth unit (noise is applied once per unit)."""
        return 2 if self.gate_set == "cnot_haar1q" else 1

    def unit_slices(self) -> list[list[list[Gate]]]:
        """Layer groups, one group per depth unit."""
        lpu = self.layers_per_unit
        return [self.layers[i : i + lpu] for i in range(0, len(self.layers), lpu)]

    def two_qubit_gate_count(self) -> int:
        return sum(1 for layer in self.layers for g in layer if len(g.targets) == 2)

    def validate(self) -> None:
        if self.boundary not in ("ring", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.gate_set not in ("haar2q", "cnot_haar1q"):
            raise ValueError(f"unknown gate_set {self.gate_set!r}")
        if self.boundary == "ring" and self.n % 2:
            raise ValueError("ring boundary requires even n")
        for layer in self.layers:
            for g in layer:
                g.validate(self.n)
                if len(g.targets) == 2 and not _adjacent(self.n, self.boundary, g.targets):
                    raise ValueError(f"2-qubit gate targets {g.targets} are not adjacent")


@dataclass(frozen=True)
class ErrorInjection:
    """A Pauli inserted after the gates of depth-unit `layer` (1-based)."""

    pauli: str
    layer: int

    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.pauli) if c != "I")

    def validate(self, circuit: Circuit) -> None:
        if len(self.pauli) != circuit.n or any(c not in "IXYZ" for c in self.pauli):
            raise ValueError(f"bad pauli label {self.pauli!r} for n={circuit.n}")
        if not self.support():
            raise ValueError("all-identity pauli injection is not allowed")
        if not (1 <= self.layer <= circuit.depth):
            raise ValueError(f"layer {self.layer} outside [1, {circuit.depth}]")


def _adjacent(n: int, boundary: str, pair: tuple[int, ...]) -> bool:
    a, b = sorted(pair)
    if b - a == 1:
        return True
    return boundary == "ring" and a == 0 and b == n - 1


def layer_pairs(n: int, t: int, boundary: str) -> list[tuple[int, int]]:
    """Qubit pairs of layer t (1-based): (i, i+1) for i even when t odd, i odd when t even."""
    start = 0 if t % 2 == 1 else 1
    pairs = []
    for i in range(start, n - 1, 2):
        pairs.append((i, i + 1))
    if boundary == "ring" and start == 1 and n % 2 == 0 and n >= 2:
        pairs.append((n - 1, 0))
    return pairs


def sample_haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via complex Ginibre + QR with R-diagonal phase fix."""
    if dim not in (2, 4):
        raise ValueError(f"unsupported dimension {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return q


def sample_rqc(
    n: int,
    d: int,
    gate_set: str = "haar2q",
    boundary: str = "ring",
    rng: np.random.Generator | int | None = None,
) -> Circuit:
    """Draw one circuit from the depth-d random-circuit ensemble."""
    if n < 2:
        raise ValueError("need n >= 2")
    if d < 1:
        raise ValueError("need depth >= 1")
    if boundary == "ring" and n % 2:
        raise ValueError("ring boundary requires even n")
    if gate_set not in ("haar2q", "cnot_haar1q"):
        raise ValueError(f"unknown gate_set {gate_set!r}")
    seed = None
    if rng is None or isinstance(rng, (int, np.integer)):
        seed = 0 if rng is None else int(rng)
        rng = spawn_rng(seed)

    layers: list[list[Gate]] = []
    for t in range(1, d + 1):
        pairs = layer_pairs(n, t, boundary)
        if gate_set == "haar2q":
            layers.append([Gate(sample_haar_unitary(4, rng), pair) for pair in pairs])
        else:
            layers.append([Gate(sample_haar_unitary(2, rng), (q,)) for q in range(n)])
            # fixed CNOT layer; control is the lower qubit index
            layers.append([Gate(_CNOT, (min(p), max(p))) for p in pairs])
    return Circuit(n=n, depth=d, layers=layers, boundary=boundary, gate_set=gate_set, seed=seed)


def inject_pauli(circuit: Circuit, injection: ErrorInjection) -> Circuit:
    """Insert the injection Pauli as an extra 1-qubit gate layer after depth unit l."""
    injection.validate(circuit)
    pauli_layer = [Gate(PAULI_1Q[injection.pauli[q]], (q,)) for q in injection.support()]
    cut = injection.layer * circuit.layers_per_unit
    layers = circuit.layers[:cut] + [pauli_layer] + circuit.layers[cut:]
    return replace(circuit, layers=layers)


def _matrix_to_json(m: np.ndarray) -> list[list[float]]:
    flat = m.reshape(-1)
    return [[float(v.real), float(v.imag)] for v in flat]


def _matrix_from_json(entries: list[list[float]]) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in entries])
    dim = int(round(np.sqrt(flat.size)))
    return flat.reshape(dim, dim)


def circuit_to_json(circuit: Circuit) -> str:
    doc = {
        "n": circuit.n,
        "depth": circuit.depth,
        "boundary": circuit.boundary,
        "gate_set": circuit.gate_set,
        "seed": circuit.seed,
        "layers": [
            [{"targets": list(g.targets), "matrix": _matrix_to_json(g.matrix)} for g in layer]
            for layer in circuit.layers
        ],
    }
    return json.dumps(doc)


def circuit_from_json(text: str) -> Circuit:
    doc = json.loads(text)
    layers = [
        [Gate(_matrix_from_json(g["matrix"]), tuple(g["targets"])) for g in layer]
        for layer in doc["layers"]
    ]
    circuit = Circuit(
        n=doc["n"],
        depth=doc["depth"],
        layers=layers,
        boundary=doc["boundary"],
        gate_set=doc["gate_set"],
        seed=doc["seed"],
    )
    circuit.validate()
    return circuit
