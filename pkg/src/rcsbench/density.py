"""Exact density-matrix evolution under gate layers and Lindblad noise (n <= 10).

Unit-time noise evolution has two paths. When every pair of collapse terms
commutes as superoperators (true for all built-in model presets) the channel
factorizes and each term is applied in closed form. Otherwise a fixed-step
RK4 integration of the master equation with h = 0.02 is used. Both paths are
cross-validated in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import Circuit
from .noise import CollapseTerm, NoiseModel, ProcessMatrix, jj_diagonal, pauli_basis, support_mask
from .statevec import apply_gate_amps, pauli_terms, run_circuit

__all__ = [
    "MAX_DENSITY_QUBITS",
    "DensityState",
    "terms_commute",
    "model_commutes",
    "evolve_density_unit_time",
    "simulate_noisy_density",
    "run_noisy_density",
    "simulate_density_with_channels",
    "run_density_with_channels",
    "fidelity",
    "fidelity_state",
    "apply_pauli_channel",
    "channel_process_matrix",
]

MAX_DENSITY_QUBITS = 10

RK4_STEP = 0.02


@dataclass
class DensityState:
    rho: np.ndarray
    n: int

    @classmethod
    def zero(cls, n: int) -> "DensityState":
        if n > MAX_DENSITY_QUBITS:
            raise ValueError(f"n={n} exceeds density limit {MAX_DENSITY_QUBITS}")
        rho = np.zeros((2**n, 2**n), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho=rho, n=n)

    def validate(self) -> None:
        if not np.allclose(self.rho, self.rho.conj().T, atol=1e-10):
            raise ValueError("rho is not hermitian")
        tr = np.trace(self.rho).real
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"rho trace {tr} != 1")
        if np.linalg.eigvalsh(self.rho).min() < -1e-8:
            raise ValueError("rho has a significantly negative eigenvalue")


def _full_label(term: CollapseTerm, n: int) -> str:
    letters = ["I"] * n
    if term.kind == "pauli_string":
        for q, c in zip(term.support, term.pauli):
            letters[q] = c
    return "".join(letters)


def _is_elementwise(term: CollapseTerm) -> bool:
    """True when the term's dissipator acts as an elementwise multiplier on rho."""
    if term.kind in ("dephasing", "corr_dephasing"):
        return True
    return term.kind == "pauli_string" and set(term.pauli) == {"Z"}


def terms_commute(a: CollapseTerm, b: CollapseTerm) -> bool:
    """Sufficient structural test that two dissipators commute as superoperators.

    False negatives only cost speed (the RK4 path is taken); each True rule is
    checked against explicit superoperator commutators in the tests.
    """
    shared = set(a.support) & set(b.support)
    if not shared:
        return True
    if a.kind == b.kind == "pauli_string":
        return True
    if _is_elementwise(a) and _is_elementwise(b):
        return True
    kinds = {a.kind, b.kind}
    if kinds == {"amplitude_decay", "dephasing"}:
        return True
    if kinds == {"corr_amplitude", "dephasing"}:
        return True
    if kinds == {"corr_amplitude", "corr_dephasing"}:
        return a.support == b.support
    if "pauli_string" in kinds:
        ps, other = (a, b) if a.kind == "pauli_string" else (b, a)
        shared_letters = {c for q, c in zip(ps.support, ps.pauli) if q in shared}
        if shared_letters <= {"Z"}:
            return other.kind in ("amplitude_decay", "dephasing", "corr_amplitude", "corr_dephasing")
        return other.kind == "dephasing"
    return False


def model_commutes(model: NoiseModel) -> bool:
    terms = model.terms
    return all(terms_commute(terms[i], terms[j]) for i in range(len(terms)) for j in range(i + 1, len(terms)))


class _SplitPlan:
    """Precomputed exact unit-time channel factors for a commuting model."""

    def __init__(self, model: NoiseModel):
        n = model.n
        dim = 2**n
        idx = np.arange(dim)
        log_mult = None
        self.decays: list[tuple[np.ndarray, np.ndarray, np.ndarray, float]] = []
        self.mixes: list[tuple[np.ndarray, np.ndarray, float, float]] = []
        for t in model.terms:
            if t.kind in ("dephasing", "corr_dephasing"):
                m = jj_diagonal(t, n)
                contrib = t.gamma * (np.outer(m, m) - 0.5 * (m[:, None] + m[None, :]))
                log_mult = contrib if log_mult is None else log_mult + contrib
            elif t.kind in ("amplitude_decay", "corr_amplitude"):
                mask = support_mask(t.support, n)
                src = idx[(idx & mask) == mask]
                tgt = src ^ mask
                w = np.ones(dim)
                w[src] = np.exp(-t.gamma / 2)
                self.decays.append((src, tgt, w, 1.0 - np.exp(-t.gamma)))
            elif t.kind == "pauli_string":
                flip, sign, _ = pauli_terms(_full_label(t, n))
                signs = _parity_signs_cached(n, sign)
                a_coef = (1.0 + np.exp(-2 * t.gamma)) / 2
                self.mixes.append((np.asarray(idx ^ flip), signs, a_coef, 1.0 - a_coef))
            else:
                raise ValueError(f"unknown collapse kind {t.kind!r}")
        self.mult = None if log_mult is None else np.exp(log_mult)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self.mult is not None:
            rho = rho * self.mult
        for src, tgt, w, transfer in self.decays:
            old_block = rho[np.ix_(src, src)].copy()
            rho = rho * w[:, None]
            rho *= w[None, :]
            rho[np.ix_(tgt, tgt)] += transfer * old_block
        for perm, signs, a_coef, b_coef in self.mixes:
            flipped = rho[perm][:, perm]
            rho = a_coef * rho + b_coef * (signs[:, None] * signs[None, :]) * flipped
        return rho


def _parity_signs_cached(n: int, mask: int) -> np.ndarray:
    idx = np.arange(2**n, dtype=np.uint64)
    par = np.bitwise_count(idx & np.uint64(mask)) & np.uint64(1)
    return 1.0 - 2.0 * par.astype(np.float64)


class _Lindbladian:
    """Matrix-free action of the generator, for the RK4 path."""

    def __init__(self, model: NoiseModel):
        n = model.n
        self.n = n
        dim = 2**n
        idx = np.arange(dim)
        gvec = np.zeros(dim)
        self.deph: list[tuple[np.ndarray, float]] = []
        self.decays: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.mixes: list[tuple[np.ndarray, np.ndarray, float]] = []
        for t in model.terms:
            m = jj_diagonal(t, n)
            gvec += t.gamma * m
            if t.kind in ("dephasing", "corr_dephasing"):
                self.deph.append((m, t.gamma))
            elif t.kind in ("amplitude_decay", "corr_amplitude"):
                mask = support_mask(t.support, n)
                src = idx[(idx & mask) == mask]
                self.decays.append((src, src ^ mask, t.gamma))
            else:
                flip, sign, _ = pauli_terms(_full_label(t, n))
                self.mixes.append((np.asarray(idx ^ flip), _parity_signs_cached(n, sign), t.gamma))
        self.anti = 0.5 * (gvec[:, None] + gvec[None, :])

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -self.anti * rho
        for m, g in self.deph:
            out += g * (m[:, None] * m[None, :]) * rho
        for src, tgt, g in self.decays:
            out[np.ix_(tgt, tgt)] += g * rho[np.ix_(src, src)]
        for perm, signs, g in self.mixes:
            out += g * (signs[:, None] * signs[None, :]) * rho[perm][:, perm]
        return out


_PLAN_CACHE: dict[tuple, object] = {}


def _model_key(model: NoiseModel) -> tuple:
    return (model.n,) + tuple((t.kind, t.support, t.gamma, t.pauli) for t in model.terms)


def _get_plan(model: NoiseModel, cls):
    key = (cls.__name__,) + _model_key(model)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = cls(model)
        if len(_PLAN_CACHE) > 32:
            _PLAN_CACHE.clear()
        _PLAN_CACHE[key] = plan
    return plan


def evolve_density_unit_time(rho: np.ndarray, model: NoiseModel, method: str = "auto") -> np.ndarray:
    """Advance rho by one time unit under the model's Lindblad generator."""
    n = model.n
    if n > MAX_DENSITY_QUBITS:
        raise ValueError(f"n={n} exceeds density limit {MAX_DENSITY_QUBITS}")
    if rho.shape != (2**n, 2**n):
        raise ValueError(f"rho shape {rho.shape} does not match n={n}")
    if method == "auto":
        method = "split" if model_commutes(model) else "rk4"
    if method == "split":
        if not model_commutes(model):
            raise ValueError("split method requires pairwise-commuting collapse terms")
        return _get_plan(model, _SplitPlan).apply(rho.copy())
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    lind = _get_plan(model, _Lindbladian)
    steps = int(round(1.0 / RK4_STEP))
    h = 1.0 / steps
    for _ in range(steps):
        k1 = lind(rho)
        k2 = lind(rho + 0.5 * h * k1)
        k3 = lind(rho + 0.5 * h * k2)
        k4 = lind(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def _apply_gate_rho(rho: np.ndarray, matrix: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    """Conjugate rho by a gate: the flattened rho is a 2n-qubit register."""
    flat = rho.reshape(4**n)
    flat = apply_gate_amps(flat, matrix, targets, 2 * n)
    flat = apply_gate_amps(flat, matrix.conj(), tuple(n + q for q in targets), 2 * n)
    return flat.reshape(2**n, 2**n)


def simulate_noisy_density(circuit: Circuit, model: NoiseModel, method: str = "auto"):
    """Yield (unit, rho) after the gates plus noise of each depth unit.

    The yielded rho is the live buffer; copy it before storing.
    """
    if circuit.n != model.n:
        raise ValueError(f"circuit n={circuit.n} != model n={model.n}")
    rho = DensityState.zero(circuit.n).rho
    for unit, group in enumerate(circuit.unit_slices(), start=1):
        for layer in group:
            for g in layer:
                rho = _apply_gate_rho(rho, g.matrix, g.targets, circuit.n)
        rho = evolve_density_unit_time(rho, model, method=method)
        yield unit, rho


def run_noisy_density(circuit: Circuit, model: NoiseModel, method: str = "auto") -> DensityState:
    """Alternate perfect gate layers with unit-time noise, one unit per depth unit."""
    rho = DensityState.zero(circuit.n).rho
    for _, rho in simulate_noisy_density(circuit, model, method=method):
        pass
    return DensityState(rho=rho, n=circuit.n)


def simulate_density_with_channels(circuit: Circuit, channels: list[tuple[tuple[int, ...], ProcessMatrix]]):
    """Yield (unit, rho) applying the given process matrices after each depth unit."""
    rho = DensityState.zero(circuit.n).rho
    for unit, group in enumerate(circuit.unit_slices(), start=1):
        for layer in group:
            for g in layer:
                rho = _apply_gate_rho(rho, g.matrix, g.targets, circuit.n)
        for support, pm in channels:
            rho = apply_pauli_channel(rho, pm, support, n=circuit.n)
        yield unit, rho


def run_density_with_channels(circuit: Circuit, channels: list[tuple[tuple[int, ...], ProcessMatrix]]) -> DensityState:
    """Apply the given process matrices on their supports after each depth unit."""
    rho = DensityState.zero(circuit.n).rho
    for _, rho in simulate_density_with_channels(circuit, channels):
        pass
    return DensityState(rho=rho, n=circuit.n)


def fidelity_state(rho: np.ndarray, amps: np.ndarray) -> float:
    val = float(np.real(np.vdot(amps, rho @ amps)))
    if val < -1e-8 or val > 1 + 1e-8:
        raise ValueError(f"fidelity {val} outside [0,1] beyond tolerance")
    return min(max(val, 0.0), 1.0)


def fidelity(state: DensityState, circuit: Circuit) -> float:
    """<psi|rho|psi> against the ideal output of the circuit, clamped to [0,1]."""
    if circuit.n != state.n:
        raise ValueError(f"circuit n={circuit.n} != state n={state.n}")
    ideal = run_circuit(circuit)
    return fidelity_state(state.rho, ideal.amps)


def apply_pauli_channel(rho: np.ndarray, pm: ProcessMatrix, support: tuple[int, ...], n: int | None = None) -> np.ndarray:
    """rho -> sum_{ab} chi_ab P_a rho P_b on the support qubits."""
    if n is None:
        n = int(round(np.log2(rho.shape[0])))
    if len(support) != pm.k:
        raise ValueError(f"support size {len(support)} != process matrix k={pm.k}")
    pm.validate()
    labels = pm.labels
    actions = []
    for lab in labels:
        letters = ["I"] * n
        for q, c in zip(support, lab):
            letters[q] = c
        flip, sign, pref = pauli_terms("".join(letters))
        actions.append((np.arange(2**n) ^ flip, _parity_signs_cached(n, sign), pref))
    out = np.zeros_like(rho)
    for a, (pa, sa, fa) in enumerate(actions):
        for b, (pb, sb, fb) in enumerate(actions):
            coef = pm.chi[a, b] * np.conj(fa) * fb
            if abs(coef) < 1e-16:
                continue
            out += coef * (sa[:, None] * sb[None, :]) * rho[pa][:, pb]
    return out


def channel_process_matrix(term: CollapseTerm, method: str = "split") -> ProcessMatrix:
    """Process matrix of the exact unit-time channel of a single term, on its support."""
    k = len(term.support)
    if k > 3:
        raise ValueError(f"support size {k} exceeds process-matrix limit of 3")
    local = CollapseTerm(kind=term.kind, support=tuple(range(k)), gamma=term.gamma, pauli=term.pauli)
    model = NoiseModel(n=k, terms=(local,))
    dim = 2**k
    sup = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1.0
            out = evolve_density_unit_time(e, model, method=method)
            sup[:, np.ravel_multi_index((i, j), (dim, dim), order="F")] = out.ravel(order="F")
    basis = pauli_basis(k)
    chi = np.zeros((4**k, 4**k), dtype=complex)
    for a, (_, pa) in enumerate(basis):
        for b, (_, pb) in enumerate(basis):
            op = np.kron(pb.conj(), pa)
            chi[a, b] = np.trace(op.conj().T @ sup) / dim**2
    return ProcessMatrix(chi=chi, k=k)
