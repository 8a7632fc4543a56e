"""Lindblad noise models, effective noise rates, and process matrices.

A model is a sum of dissipators gamma*D[J] acting between gate layers. The
effective noise rate (ENR) of a term is gamma * sum_{alpha != 0} |c_alpha|^2
where J = sum_alpha c_alpha P_alpha over plain Pauli strings.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .circuits import PAULI_1Q

__all__ = [
    "KINDS",
    "CollapseTerm",
    "NoiseModel",
    "ProcessMatrix",
    "collapse_matrix",
    "pauli_basis",
    "pauli_vector",
    "enr_of_term",
    "enr_of_model",
    "first_order_process_matrix",
    "diagonalize_channel",
    "support_mask",
    "jj_diagonal",
    "preset_model",
    "MODEL_PRESETS",
    "model_to_json",
    "model_from_json",
]

KINDS = ("amplitude_decay", "dephasing", "pauli_string", "corr_amplitude", "corr_dephasing")

_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1|
_NUM = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)  # |1><1|


@dataclass(frozen=True)
class CollapseTerm:
    kind: str
    support: tuple[int, ...]
    gamma: float
    pauli: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(q) for q in self.support))

    def validate(self, n: int) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown collapse kind {self.kind!r}")
        if self.gamma < 0:
            raise ValueError(f"negative rate {self.gamma}")
        if len(set(self.support)) != len(self.support):
            raise ValueError(f"repeated support qubits {self.support}")
        if any(q < 0 or q >= n for q in self.support):
            raise ValueError(f"support {self.support} out of range for n={n}")
        if self.kind in ("amplitude_decay", "dephasing") and len(self.support) != 1:
            raise ValueError(f"{self.kind} needs a single support qubit")
        if self.kind in ("corr_amplitude", "corr_dephasing") and len(self.support) != 2:
            raise ValueError(f"{self.kind} needs exactly two support qubits")
        if self.kind == "pauli_string":
            if not self.pauli or len(self.pauli) != len(self.support):
                raise ValueError("pauli_string needs a label matching its support")
            if any(c not in "XYZ" for c in self.pauli):
                raise ValueError(f"pauli label {self.pauli!r} must use X/Y/Z only")
        elif self.pauli is not None:
            raise ValueError(f"{self.kind} does not take a pauli label")


@dataclass(frozen=True)
class NoiseModel:
    n: int
    terms: tuple[CollapseTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def validate(self) -> None:
        # empty terms = the zero generator (noiseless evolution)
        for t in self.terms:
            t.validate(self.n)


def collapse_matrix(term: CollapseTerm) -> np.ndarray:
    """Dense collapse operator on the term's support (MSB = first support entry)."""
    if term.kind == "amplitude_decay":
        return _SIGMA.copy()
    if term.kind == "dephasing":
        return _NUM.copy()
    if term.kind == "corr_amplitude":
        return np.kron(_SIGMA, _SIGMA)
    if term.kind == "corr_dephasing":
        return np.kron(_NUM, _NUM)
    if term.kind == "pauli_string":
        op = np.array([[1.0 + 0.0j]])
        for c in term.pauli:
            op = np.kron(op, PAULI_1Q[c])
        return op
    raise ValueError(f"unknown collapse kind {term.kind!r}")


def pauli_basis(k: int) -> list[tuple[str, np.ndarray]]:
    out = []
    for letters in itertools.product("IXYZ", repeat=k):
        op = np.array([[1.0 + 0.0j]])
        for c in letters:
            op = np.kron(op, PAULI_1Q[c])
        out.append(("".join(letters), op))
    return out


def pauli_vector(op: np.ndarray) -> np.ndarray:
    """Coefficients c with op = sum_alpha c_alpha P_alpha, P plain Pauli strings."""
    dim = op.shape[0]
    k = int(round(np.log2(dim)))
    if 2**k != dim or op.shape != (dim, dim):
        raise ValueError(f"operator shape {op.shape} is not a square qubit operator")
    basis = pauli_basis(k)
    return np.array([np.trace(p @ op) / dim for _, p in basis])


@dataclass(frozen=True)
class ProcessMatrix:
    chi: np.ndarray
    k: int

    def __post_init__(self):
        dim = 4**self.k
        if self.k > 3:
            raise ValueError(f"process matrices support at most 3 qubits, got k={self.k}")
        if self.chi.shape != (dim, dim):
            raise ValueError(f"chi shape {self.chi.shape} != ({dim},{dim})")

    @property
    def labels(self) -> list[str]:
        return ["".join(p) for p in itertools.product("IXYZ", repeat=self.k)]

    def enr(self) -> float:
        return float(np.real(np.trace(self.chi) - self.chi[0, 0]))

    def entanglement_fidelity(self) -> float:
        return float(np.real(self.chi[0, 0]))

    def validate(self, psd_tol: float = 1e-10) -> None:
        if not np.allclose(self.chi, self.chi.conj().T, atol=1e-12):
            raise ValueError("chi is not hermitian")
        if abs(np.trace(self.chi).real - 1.0) > 1e-9:
            raise ValueError(f"chi trace {np.trace(self.chi).real} != 1")
        w = np.linalg.eigvalsh(self.chi)
        if w.min() < -psd_tol:
            raise ValueError(f"chi not positive semidefinite: min eigenvalue {w.min()}")


def enr_of_term(term: CollapseTerm) -> float:
    """First-order effective noise rate contribution gamma * sum_{a != 0} |c_a|^2."""
    if term.kind not in KINDS:
        raise ValueError(f"unknown collapse kind {term.kind!r}")
    if term.kind == "pauli_string":
        return float(term.gamma)
    c = pauli_vector(collapse_matrix(term))
    return float(term.gamma * (np.sum(np.abs(c) ** 2) - np.abs(c[0]) ** 2))


def enr_of_model(model: NoiseModel) -> float:
    return float(sum(enr_of_term(t) for t in model.terms))


def first_order_process_matrix(term: CollapseTerm) -> ProcessMatrix:
    """Unit-time channel chi to first order in gamma, over the support's Pauli basis.

    chi = e0 e0^T + gamma * (c c^dag - (d e0^T + e0 d^T)/2), with c the Pauli
    coefficients of J and d those of J^dag J. Positive semidefiniteness can be
    violated at O(gamma^2); callers needing a strict channel should use the
    exact unit-time tomography instead.
    """
    k = len(term.support)
    if k > 3:
        raise ValueError(f"support size {k} exceeds process-matrix limit of 3")
    J = collapse_matrix(term)
    c = pauli_vector(J)
    d = pauli_vector(J.conj().T @ J)
    dim = 4**k
    e0 = np.zeros(dim)
    e0[0] = 1.0
    chi = np.outer(e0, e0).astype(complex)
    chi += term.gamma * (np.outer(c, c.conj()) - 0.5 * (np.outer(d, e0) + np.outer(e0, d.conj())))
    return ProcessMatrix(chi=chi, k=k)


def diagonalize_channel(pm: ProcessMatrix) -> ProcessMatrix:
    """Zero the off-diagonal entries; preserves ENR exactly."""
    return ProcessMatrix(chi=np.diag(np.diag(pm.chi)).astype(complex), k=pm.k)


def support_mask(support: tuple[int, ...], n: int) -> int:
    """Bitmask of the support qubits under the qubit-0-is-MSB convention."""
    mask = 0
    for q in support:
        mask |= 1 << (n - 1 - q)
    return mask


def jj_diagonal(term: CollapseTerm, n: int) -> np.ndarray:
    """Diagonal of J^dag J over the full register (0/1 per basis state)."""
    if term.kind not in KINDS:
        raise ValueError(f"unknown collapse kind {term.kind!r}")
    if term.kind == "pauli_string":
        return np.ones(2**n)
    idx = np.arange(2**n, dtype=np.uint64)
    mask = np.uint64(support_mask(term.support, n))
    return ((idx & mask) == mask).astype(np.float64)


def preset_model(name: str, n: int, lam: float, boundary: str = "ring") -> NoiseModel:
    """Named models with total ENR lam.

    t1t2: per qubit gamma*D[|0><1|] + 2*gamma*D[|1><1|] with gamma = lam/n.
    pauli_x: per qubit gamma*D[X] with gamma = lam/n.
    corr_xx: gamma*D[X_i X_{i+1}] on neighbor pairs, gamma = lam/(pair count).
    weight_nm1: one term gamma*D[X^(n-1)] on qubits 0..n-2, gamma = lam.
    """
    terms: list[CollapseTerm] = []
    if name == "t1t2":
        g = lam / n
        for q in range(n):
            terms.append(CollapseTerm("amplitude_decay", (q,), g))
            terms.append(CollapseTerm("dephasing", (q,), 2 * g))
    elif name == "pauli_x":
        g = lam / n
        for q in range(n):
            terms.append(CollapseTerm("pauli_string", (q,), g, pauli="X"))
    elif name == "corr_xx":
        pairs = [(i, i + 1) for i in range(n - 1)]
        if boundary == "ring":
            pairs.append((n - 1, 0))
        g = lam / len(pairs)
        for a, b in pairs:
            terms.append(CollapseTerm("pauli_string", (a, b), g, pauli="XX"))
    elif name == "weight_nm1":
        terms.append(CollapseTerm("pauli_string", tuple(range(n - 1)), lam, pauli="X" * (n - 1)))
    else:
        raise ValueError(f"unknown noise preset {name!r}")
    model = NoiseModel(n=n, terms=tuple(terms))
    model.validate()
    return model


MODEL_PRESETS = ("t1t2", "pauli_x", "corr_xx", "weight_nm1")


def model_to_json(model: NoiseModel) -> str:
    terms = []
    for t in model.terms:
        entry = {"kind": t.kind, "support": list(t.support), "gamma": t.gamma}
        if t.pauli is not None:
            entry["pauli"] = t.pauli
        terms.append(entry)
    return json.dumps({"n": model.n, "terms": terms}, indent=2)


def model_from_json(text: str) -> NoiseModel:
    data = json.loads(text)
    terms = tuple(
        CollapseTerm(
            kind=e["kind"],
            support=tuple(e["support"]),
            gamma=float(e["gamma"]),
            pauli=e.get("pauli"),
        )
        for e in data["terms"]
    )
    model = NoiseModel(n=int(data["n"]), terms=terms)
    model.validate()
    return model
