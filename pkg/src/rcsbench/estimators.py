"""Fidelity estimators: sample and full-distribution XEB family, DFE, and sRB.

Conventions: D = 2^n, p is the ideal output distribution of a circuit, q the
noisy one. Sample estimators take bitstrings; full-distribution forms take q
exactly (density diagonal or trajectory-averaged probabilities).
"""
from __future__ import annotations

import io
import itertools
from dataclasses import dataclass

import numpy as np

from .statevec import PureState, pauli_expectation, pauli_terms

__all__ = [
    "IdealDistribution",
    "NoisyDistribution",
    "EstimatorValue",
    "xeb_samples",
    "uxeb_samples",
    "uxeb_full",
    "xeb_full",
    "logxeb_full",
    "hog_full",
    "dfe",
    "srb_estimate",
    "estimator_csv",
    "MAX_DFE_QUBITS",
]

MAX_DFE_QUBITS = 8

EULER_GAMMA = float(np.euler_gamma)

_DENOM_TOL = 1e-12


@dataclass(frozen=True)
class IdealDistribution:
    probs: np.ndarray
    sum_p_sq: float

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "IdealDistribution":
        probs = np.asarray(probs, dtype=np.float64)
        if probs.min() < 0:
            raise ValueError("negative ideal probability")
        if abs(probs.sum() - 1.0) > 1e-10:
            raise ValueError(f"ideal probabilities sum to {probs.sum()}, not 1")
        return cls(probs=probs, sum_p_sq=float(probs @ probs))

    @classmethod
    def from_state(cls, state: PureState) -> "IdealDistribution":
        return cls.from_probs(np.abs(state.amps) ** 2)

    @property
    def n(self) -> int:
        return int(round(np.log2(self.probs.size)))


@dataclass(frozen=True)
class NoisyDistribution:
    probs: np.ndarray
    exact: bool = True

    @classmethod
    def from_probs(cls, probs: np.ndarray, exact: bool = True) -> "NoisyDistribution":
        probs = np.asarray(probs, dtype=np.float64)
        if exact and abs(probs.sum() - 1.0) > 1e-8:
            raise ValueError(f"noisy probabilities sum to {probs.sum()}, not 1")
        return cls(probs=probs, exact=exact)


@dataclass(frozen=True)
class EstimatorValue:
    kind: str
    value: float
    stderr: float | None = None

    def __post_init__(self):
        if self.stderr is not None and self.stderr < 0:
            raise ValueError("stderr must be nonnegative")


def _sample_indices(samples, n: int) -> np.ndarray:
    if len(samples) == 0:
        raise ValueError("no samples")
    if isinstance(samples[0], str):
        return np.array([int(s, 2) for s in samples])
    return np.asarray(samples, dtype=np.int64)


def xeb_samples(samples, ideal: IdealDistribution) -> EstimatorValue:
    """(D/M) sum_i p(x_i) - 1 with the sample standard error."""
    n = ideal.n
    idx = _sample_indices(samples, n)
    vals = (2.0**n) * ideal.probs[idx]
    m = vals.size
    stderr = float(vals.std(ddof=1) / np.sqrt(m)) if m > 1 else None
    return EstimatorValue(kind="XEB", value=float(vals.mean() - 1.0), stderr=stderr)


def _uxeb_denominator(ideal: IdealDistribution) -> float:
    denom = (2.0 ** ideal.n) * ideal.sum_p_sq - 1.0
    if abs(denom) <= _DENOM_TOL:
        raise ValueError("uXEB denominator degenerate (ideal distribution too uniform)")
    return denom


def uxeb_samples(samples, ideal: IdealDistribution) -> EstimatorValue:
    """((D/M) sum_i p(x_i) - 1) / (D sum_x p(x)^2 - 1)."""
    denom = _uxeb_denominator(ideal)
    n = ideal.n
    idx = _sample_indices(samples, n)
    vals = ((2.0**n) * ideal.probs[idx] - 1.0) / denom
    m = vals.size
    stderr = float(vals.std(ddof=1) / np.sqrt(m)) if m > 1 else None
    return EstimatorValue(kind="uXEB", value=float(vals.mean()), stderr=stderr)


def xeb_full(q: NoisyDistribution, ideal: IdealDistribution) -> EstimatorValue:
    val = float((2.0 ** ideal.n) * (ideal.probs @ q.probs) - 1.0)
    return EstimatorValue(kind="XEB", value=val)


def uxeb_full(q: NoisyDistribution, ideal: IdealDistribution) -> EstimatorValue:
    denom = _uxeb_denominator(ideal)
    num = (2.0 ** ideal.n) * (ideal.probs @ q.probs) - 1.0
    return EstimatorValue(kind="uXEB", value=float(num / denom))


def logxeb_full(q: NoisyDistribution, ideal: IdealDistribution) -> EstimatorValue:
    """ln D + Euler gamma + sum_x q(x) ln p(x); errors on q-weighted zero p."""
    p = ideal.probs
    dead = (p < 1e-300) & (q.probs > 0)
    if np.any(dead):
        raise ValueError("logXEB undefined: q-weighted zero ideal probability")
    terms = np.zeros_like(p)
    live = q.probs > 0
    terms[live] = q.probs[live] * np.log(p[live])
    val = ideal.n * np.log(2.0) + EULER_GAMMA + terms.sum()
    return EstimatorValue(kind="logXEB", value=float(val))


def hog_full(q: NoisyDistribution, ideal: IdealDistribution) -> EstimatorValue:
    """(2 sum_x q(x) 1[p(x) >= ln2 / D] - 1) / ln 2."""
    thresh = np.log(2.0) / (2.0 ** ideal.n)
    heavy = float(q.probs[ideal.probs >= thresh].sum())
    return EstimatorValue(kind="HOG", value=(2.0 * heavy - 1.0) / np.log(2.0))


def _pauli_expectation_rho(rho: np.ndarray, n: int, label: str) -> float:
    flip, sign, pref = pauli_terms(label)
    idx = np.arange(2**n, dtype=np.uint64)
    par = np.bitwise_count(idx & np.uint64(sign)) & np.uint64(1)
    signs = 1.0 - 2.0 * par.astype(np.float64)
    col = np.arange(2**n) ^ flip
    val = pref * np.sum(signs * rho[np.arange(2**n), col])
    return float(np.real(val))


def _all_labels(n: int) -> list[str]:
    return ["".join(t) for t in itertools.product("IXYZ", repeat=n)]


def dfe(
    ideal: PureState,
    noisy,
    K: int,
    rng: np.random.Generator,
    shots_per_pauli: int | None = None,
) -> EstimatorValue:
    """Direct fidelity estimation: E over alpha ~ gamma_alpha^2 of gamma'_alpha/gamma_alpha.

    noisy is a density matrix or a callable mapping a Pauli label to Tr(rho P).
    With shots_per_pauli set, each noisy expectation is estimated from that
    many simulated two-outcome measurements.
    """
    n = ideal.n
    if n > MAX_DFE_QUBITS:
        raise ValueError(f"dfe supports n <= {MAX_DFE_QUBITS}, got {n} (sample complexity)")
    if K < 1:
        raise ValueError("K must be >= 1")
    labels = _all_labels(n)
    norm = 2.0 ** (n / 2)
    gam = np.array([np.real(pauli_expectation(ideal.amps, n, lab)) for lab in labels]) / norm
    weights = gam**2
    total = weights.sum()
    weights = weights / total
    draws = rng.choice(len(labels), size=K, p=weights)
    ratios = np.empty(K)
    for i, a in enumerate(draws):
        if gam[a] == 0.0:
            raise ValueError("sampled a zero ideal Fourier coefficient")
        if callable(noisy):
            expect = float(noisy(labels[a]))
        else:
            expect = _pauli_expectation_rho(noisy, n, labels[a])
        if shots_per_pauli is not None:
            prob_up = min(max((1.0 + expect) / 2.0, 0.0), 1.0)
            ups = rng.binomial(shots_per_pauli, prob_up)
            expect = 2.0 * ups / shots_per_pauli - 1.0
        ratios[i] = (expect / norm) / gam[a]
    stderr = float(ratios.std(ddof=1) / np.sqrt(K)) if K > 1 else None
    return EstimatorValue(kind="DFE", value=float(ratios.mean()), stderr=stderr)


def srb_estimate(error_rates, circuit=None) -> EstimatorValue:
    """Product form prod_i (1 - e_i) over the circuit's two-qubit gates."""
    e = np.asarray(list(error_rates), dtype=np.float64)
    if np.any((e < 0) | (e >= 1)):
        raise ValueError("error rates must lie in [0, 1)")
    if circuit is not None:
        m = circuit.two_qubit_gate_count()
        if e.size != m:
            raise ValueError(f"{e.size} rates for {m} two-qubit gates")
    return EstimatorValue(kind="sRB", value=float(np.prod(1.0 - e)))


def estimator_csv(records) -> str:
    """CSV rows (circuit_seed, depth, kind, value, stderr) with a header line."""
    buf = io.StringIO()
    buf.write("circuit_seed,depth,kind,value,stderr\n")
    for seed, depth, est in records:
        se = "" if est.stderr is None else f"{est.stderr:.17g}"
        buf.write(f"{seed},{depth},{est.kind},{est.value:.17g},{se}\n")
    return buf.getvalue()
