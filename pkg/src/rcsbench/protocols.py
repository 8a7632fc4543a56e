"""End-to-end experiment drivers.

rcs_benchmark runs the full pipeline: sample circuits at each depth,
simulate them under a noise model, aggregate fidelity estimators over
circuits, and fit the exponential decay whose rate is the effective noise
rate. Also here: simultaneous two-qubit RB, the correlated-noise extraction
combining decay/Ramsey/benchmark rates, and two diagnostics that compare
full channels against their Pauli-diagonal and first-order reductions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__
from .circuits import Circuit, Gate, layer_pairs, sample_haar_unitary, sample_rqc
from .density import (
    MAX_DENSITY_QUBITS,
    fidelity_state,
    run_density_with_channels,
    run_noisy_density,
    simulate_density_with_channels,
    simulate_noisy_density,
    evolve_density_unit_time,
)
from .estimators import (
    IdealDistribution,
    NoisyDistribution,
    hog_full,
    logxeb_full,
    uxeb_samples,
    xeb_samples,
)
from .mcwf import trajectory_ensemble
from .noise import CollapseTerm, NoiseModel, ProcessMatrix, diagonalize_channel, enr_of_model
from .rng import derive_seed, spawn_rng
from .spinmodel import first_order_fidelity
from .stats import DecayFit, DepthPoint, aggregate_depth, fit_exponential, fit_rb_decay
from .statevec import simulate_units

__all__ = [
    "ESTIMATOR_KINDS",
    "BenchmarkConfig",
    "BenchmarkReport",
    "rcs_benchmark",
    "report_to_json",
    "report_per_depth_csv",
    "benchmark_config_to_json",
    "benchmark_config_from_json",
    "SrbResult",
    "simultaneous_rb",
    "VirtualResult",
    "virtual_experiment",
    "Theorem1Result",
    "theorem1_check",
    "FirstOrderRow",
    "first_order_check",
    "SRB_PAULI_FACTOR",
]

ESTIMATOR_KINDS = ("fidelity", "xeb", "uxeb", "logxeb", "hog")

# 2-qubit depolarizing-to-Pauli-error conversion: e = (15/16)(1 - p)
SRB_PAULI_FACTOR = 15.0 / 16.0

# seed-path tags keeping circuit, trajectory, and sampling streams disjoint
_TAG_CIRCUIT = 1
_TAG_TRAJ = 2
_TAG_SAMPLE = 3


@dataclass
class BenchmarkConfig:
    """Inputs of one decay-benchmark run."""

    n: int
    depths: list[int]
    L: int
    backend: str = "mcwf"  # mcwf | density | statevec_sampling
    T: int = 400
    M: int = 100000
    gate_set: str = "haar2q"
    boundary: str = "ring"
    model: NoiseModel | None = None
    estimators: tuple[str, ...] = ("fidelity", "uxeb")
    master_seed: int = 0
    fit_range: tuple[int, int] | None = None
    depth_mode: str = "fresh"  # fresh | prefix

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError("need n >= 2")
        if not self.depths or any(b <= a for a, b in zip(self.depths, self.depths[1:])):
            raise ValueError("depths must be non-empty and strictly increasing")
        if self.depths[0] < 1:
            raise ValueError("depths must be >= 1")
        if self.L < 1:
            raise ValueError("need L >= 1")
        if self.backend not in ("mcwf", "density", "statevec_sampling"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "density" and self.n > MAX_DENSITY_QUBITS:
            raise ValueError(f"density backend requires n <= {MAX_DENSITY_QUBITS}")
        if self.backend in ("mcwf", "density"):
            if self.model is None:
                raise ValueError(f"{self.backend} backend requires a noise model")
            if self.model.n != self.n:
                raise ValueError(f"model n={self.model.n} != config n={self.n}")
        if self.backend == "statevec_sampling":
            if self.model is not None:
                raise ValueError("statevec_sampling is noiseless; model must be None")
            bad = set(self.estimators) - {"xeb", "uxeb"}
            if bad:
                raise ValueError(f"statevec_sampling supports xeb/uxeb only, got {sorted(bad)}")
            if self.M < 2:
                raise ValueError("need M >= 2 samples")
        if self.backend == "mcwf" and self.T < 2:
            raise ValueError("need T >= 2 trajectories")
        if not self.estimators or any(k not in ESTIMATOR_KINDS for k in self.estimators):
            raise ValueError(f"estimators must be a non-empty subset of {ESTIMATOR_KINDS}")
        if any(k in ("logxeb", "hog") for k in self.estimators) and self.n > 16:
            raise ValueError("logxeb/hog need the full 2^n distribution; n <= 16")
        if self.gate_set not in ("haar2q", "cnot_haar1q"):
            raise ValueError(f"unknown gate_set {self.gate_set!r}")
        if self.boundary not in ("ring", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "ring" and self.n % 2:
            raise ValueError("ring boundary requires even n")
        if self.fit_range is not None:
            lo, hi = self.fit_range
            if lo > hi:
                raise ValueError("fit_range must satisfy d_min <= d_max")
            if sum(1 for d in self.depths if lo <= d <= hi) < 3:
                raise ValueError("fit_range must keep at least 3 depth points")
        if self.depth_mode not in ("fresh", "prefix"):
            raise ValueError(f"unknown depth_mode {self.depth_mode!r}")


@dataclass
class BenchmarkReport:
    """Per-depth aggregates, decay fits, and provenance of one run."""

    config: BenchmarkConfig
    points: dict[str, list[DepthPoint]]
    fits: dict[str, DecayFit]
    enr_true: float | None
    circuit_seeds: dict[int, list[int]]
    versions: dict[str, str]


def _collect_values(kind: str, D: float, T: int, acc, p: np.ndarray | None):
    """Per-circuit estimator value and within-circuit variance from one ensemble."""
    pq = acc.sum_p_weighted / T
    var_pq = max(acc.sum_pq_sq / T - pq**2, 0.0) * T / max(T - 1, 1)
    if kind == "fidelity":
        f = acc.fidelity_sum / T
        var_f = max(acc.sum_fid_sq / T - f**2, 0.0) * T / max(T - 1, 1)
        return f, var_f / T
    if kind == "xeb":
        return D * pq - 1.0, D**2 * var_pq / T
    if kind == "uxeb":
        denom = D * acc.sum_p_sq - 1.0
        if abs(denom) < 1e-12:
            raise ValueError("uXEB denominator vanished")
        return (D * pq - 1.0) / denom, D**2 * var_pq / T / denom**2
    ideal = IdealDistribution.from_probs(p)
    noisy = NoisyDistribution(np.asarray(acc.q_mean, dtype=float))
    if kind == "logxeb":
        return logxeb_full(noisy, ideal).value, np.nan
    if kind == "hog":
        return hog_full(noisy, ideal).value, np.nan
    raise ValueError(f"unknown estimator kind {kind!r}")


def _density_values(kind: str, D: float, q: np.ndarray, p: np.ndarray, fid: float):
    if kind == "fidelity":
        return fid, 0.0
    ideal = IdealDistribution.from_probs(p)
    noisy = NoisyDistribution(q)
    if kind == "xeb":
        return float(D * (p @ q) - 1.0), 0.0
    if kind == "uxeb":
        denom = D * float(p @ p) - 1.0
        if abs(denom) < 1e-12:
            raise ValueError("uXEB denominator vanished")
        return float(D * (p @ q) - 1.0) / denom, 0.0
    if kind == "logxeb":
        return logxeb_full(noisy, ideal).value, 0.0
    if kind == "hog":
        return hog_full(noisy, ideal).value, 0.0
    raise ValueError(f"unknown estimator kind {kind!r}")


def _run_mcwf(config: BenchmarkConfig):
    """values[kind][depth] and within[kind][depth] lists over circuits."""
    collect_q = any(k in ("logxeb", "hog") for k in config.estimators)
    need_p = collect_q
    D = float(2**config.n)
    values = {k: {d: [] for d in config.depths} for k in config.estimators}
    within = {k: {d: [] for d in config.depths} for k in config.estimators}
    seeds: dict[int, list[int]] = {d: [] for d in config.depths}

    if config.depth_mode == "prefix":
        jobs = [(config.depths, 0)]
    else:
        jobs = [([d], di) for di, d in enumerate(config.depths)]
    for snapshot_depths, d_idx in jobs:
        d_max = snapshot_depths[-1]
        for i in range(config.L):
            cseed = derive_seed(config.master_seed, _TAG_CIRCUIT, d_idx, i)
            circ = sample_rqc(config.n, d_max, gate_set=config.gate_set,
                              boundary=config.boundary, rng=cseed)
            for d in snapshot_depths:
                seeds[d].append(cseed)
            p_by_unit = {}
            if need_p:
                want = set(snapshot_depths)
                for unit, amps in simulate_units(circ):
                    if unit in want:
                        p_by_unit[unit] = np.abs(amps) ** 2
            accs = trajectory_ensemble(
                circ, config.model, config.T,
                derive_seed(config.master_seed, _TAG_TRAJ, d_idx, i),
                snapshots=list(snapshot_depths), collect_q=collect_q)
            for acc in accs:
                for k in config.estimators:
                    v, wv = _collect_values(k, D, config.T, acc, p_by_unit.get(acc.unit))
                    values[k][acc.unit].append(v)
                    within[k][acc.unit].append(wv)
    return values, within, seeds


def _run_density(config: BenchmarkConfig):
    D = float(2**config.n)
    values = {k: {d: [] for d in config.depths} for k in config.estimators}
    within = {k: {d: [] for d in config.depths} for k in config.estimators}
    seeds: dict[int, list[int]] = {d: [] for d in config.depths}

    if config.depth_mode == "prefix":
        jobs = [(config.depths, 0)]
    else:
        jobs = [([d], di) for di, d in enumerate(config.depths)]
    for snapshot_depths, d_idx in jobs:
        d_max = snapshot_depths[-1]
        want = set(snapshot_depths)
        for i in range(config.L):
            cseed = derive_seed(config.master_seed, _TAG_CIRCUIT, d_idx, i)
            circ = sample_rqc(config.n, d_max, gate_set=config.gate_set,
                              boundary=config.boundary, rng=cseed)
            for d in snapshot_depths:
                seeds[d].append(cseed)
            for (unit, amps), (_, rho) in zip(simulate_units(circ),
                                              simulate_noisy_density(circ, config.model)):
                if unit not in want:
                    continue
                p = np.abs(amps) ** 2
                q = np.clip(np.diag(rho).real, 0.0, None)
                fid = fidelity_state(rho, amps)
                for k in config.estimators:
                    v, wv = _density_values(k, D, q, p, fid)
                    values[k][unit].append(v)
                    within[k][unit].append(wv)
    return values, within, seeds


def _run_statevec_sampling(config: BenchmarkConfig):
    values = {k: {d: [] for d in config.depths} for k in config.estimators}
    within = {k: {d: [] for d in config.depths} for k in config.estimators}
    seeds: dict[int, list[int]] = {d: [] for d in config.depths}

    if config.depth_mode == "prefix":
        jobs = [(config.depths, 0)]
    else:
        jobs = [([d], di) for di, d in enumerate(config.depths)]
    for snapshot_depths, d_idx in jobs:
        d_max = snapshot_depths[-1]
        want = set(snapshot_depths)
        for i in range(config.L):
            cseed = derive_seed(config.master_seed, _TAG_CIRCUIT, d_idx, i)
            circ = sample_rqc(config.n, d_max, gate_set=config.gate_set,
                              boundary=config.boundary, rng=cseed)
            for d in snapshot_depths:
                seeds[d].append(cseed)
            for unit, amps in simulate_units(circ):
                if unit not in want:
                    continue
                p = np.abs(amps) ** 2
                p = p / p.sum()
                ideal = IdealDistribution.from_probs(p)
                srng = spawn_rng(config.master_seed, _TAG_SAMPLE, d_idx, i, unit)
                idx = srng.choice(p.size, size=config.M, p=p)
                for k in config.estimators:
                    est = xeb_samples(idx, ideal) if k == "xeb" else uxeb_samples(idx, ideal)
                    values[k][unit].append(est.value)
                    within[k][unit].append(est.stderr**2 if est.stderr else 0.0)
    return values, within, seeds


def rcs_benchmark(config: BenchmarkConfig) -> BenchmarkReport:
    """Sample, simulate, aggregate, and fit; the fitted rate estimates the ENR."""
    config.validate()
    runner = {"mcwf": _run_mcwf, "density": _run_density,
              "statevec_sampling": _run_statevec_sampling}[config.backend]
    values, within, seeds = runner(config)

    samples_per_circuit = {"mcwf": config.T, "density": 0,
                           "statevec_sampling": config.M}[config.backend]
    points: dict[str, list[DepthPoint]] = {}
    fits: dict[str, DecayFit] = {}
    for k in config.estimators:
        pts = []
        for d in config.depths:
            wv = np.asarray(within[k][d], dtype=float)
            pts.append(aggregate_depth(d, values[k][d],
                                       within_vars=None if np.isnan(wv).any() else wv,
                                       samples_per_circuit=samples_per_circuit))
        points[k] = pts
        sel = pts
        if config.fit_range is not None:
            lo, hi = config.fit_range
            sel = [p for p in pts if lo <= p.depth <= hi]
        if len(sel) >= 3:
            fits[k] = fit_exponential(sel)

    enr = None if config.model is None else enr_of_model(config.model)
    versions = {"rcsbench": __version__, "numpy": np.__version__, "scipy": scipy.__version__}
    return BenchmarkReport(config=config, points=points, fits=fits,
                           enr_true=enr, circuit_seeds=seeds, versions=versions)


def _model_dict(model: NoiseModel | None):
    if model is None:
        return None
    from .noise import model_to_json

    return json.loads(model_to_json(model))


def benchmark_config_to_json(config: BenchmarkConfig) -> str:
    doc = {
        "n": config.n,
        "depths": list(config.depths),
        "L": config.L,
        "backend": config.backend,
        "T": config.T,
        "M": config.M,
        "gate_set": config.gate_set,
        "boundary": config.boundary,
        "model": _model_dict(config.model),
        "estimators": list(config.estimators),
        "master_seed": config.master_seed,
        "fit_range": None if config.fit_range is None else list(config.fit_range),
        "depth_mode": config.depth_mode,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def benchmark_config_from_json(text: str) -> BenchmarkConfig:
    from .noise import model_from_json

    doc = json.loads(text)
    known = {"n", "depths", "L", "backend", "T", "M", "gate_set", "boundary",
             "model", "estimators", "master_seed", "fit_range", "depth_mode"}
    extra = set(doc) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    if "n" not in doc or "depths" not in doc or "L" not in doc:
        raise ValueError("config requires n, depths, L")
    model = doc.get("model")
    cfg = BenchmarkConfig(
        n=int(doc["n"]),
        depths=[int(d) for d in doc["depths"]],
        L=int(doc["L"]),
        backend=doc.get("backend", "mcwf"),
        T=int(doc.get("T", 400)),
        M=int(doc.get("M", 100000)),
        gate_set=doc.get("gate_set", "haar2q"),
        boundary=doc.get("boundary", "ring"),
        model=None if model is None else model_from_json(json.dumps(model)),
        estimators=tuple(doc.get("estimators", ("fidelity", "uxeb"))),
        master_seed=int(doc.get("master_seed", 0)),
        fit_range=None if doc.get("fit_range") is None else tuple(int(v) for v in doc["fit_range"]),
        depth_mode=doc.get("depth_mode", "fresh"),
    )
    cfg.validate()
    return cfg


def _fit_dict(fit: DecayFit) -> dict:
    return {
        "A": fit.A,
        "lambda": fit.lam,
        "sigma_A": fit.sigma_A,
        "sigma_lambda": fit.sigma_lambda,
        "d_min": int(fit.depths.min()),
        "d_max": int(fit.depths.max()),
        "n_points": int(fit.depths.size),
        "residual_norm": float(np.linalg.norm(fit.residuals)),
    }


def report_to_json(report: BenchmarkReport) -> str:
    doc = {
        "config": json.loads(benchmark_config_to_json(report.config)),
        "enr_true": report.enr_true,
        "estimators": {
            k: {
                "points": [
                    {
                        "depth": p.depth,
                        "mean": p.mean,
                        "stderr": p.stderr,
                        "L": p.L,
                        "M": p.M,
                        "values": [float(v) for v in p.values],
                        "within_vars": None if p.within_vars is None
                        else [float(v) for v in p.within_vars],
                    }
                    for p in report.points[k]
                ],
                "fit": _fit_dict(report.fits[k]) if k in report.fits else None,
            }
            for k in sorted(report.points)
        },
        "circuit_seeds": {str(d): s for d, s in sorted(report.circuit_seeds.items())},
        "versions": report.versions,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def report_per_depth_csv(report: BenchmarkReport) -> str:
    lines = ["kind,depth,mean,stderr,L,M"]
    for k in sorted(report.points):
        for p in report.points[k]:
            se = "" if p.stderr is None else f"{p.stderr:.17g}"
            lines.append(f"{k},{p.depth},{p.mean:.17g},{se},{p.L},{p.M}")
    return "\n".join(lines) + "\n"


@dataclass
class SrbResult:
    """Per-pair RB error rates for both brickwork parities."""

    n: int
    sequence_lengths: list[int]
    pairs: list[list[tuple[int, int]]]
    error_rates: list[dict[tuple[int, int], float]]
    decay_params: list[dict[tuple[int, int], float]]
    sigma_p: list[dict[tuple[int, int], float]]
    survivals: list[dict[tuple[int, int], np.ndarray]]
    lambda_srb: float
    pauli_factor: float = SRB_PAULI_FACTOR

    def all_error_rates(self) -> list[float]:
        return [e for parity in self.error_rates for e in parity.values()]


def _pair_survival(q: np.ndarray, n: int, pair: tuple[int, int]) -> float:
    """P(both pair qubits read 0) from a full output distribution."""
    x = np.arange(q.size)
    keep = np.ones(q.size, dtype=bool)
    for qubit in pair:
        keep &= (x >> (n - 1 - qubit)) & 1 == 0
    return float(q[keep].sum())


def _rb_circuit(n: int, pairs, s: int, rng, boundary: str) -> Circuit:
    """s Haar layers on fixed pairs plus the exact per-pair inverse layer."""
    prods = {pair: np.eye(4, dtype=complex) for pair in pairs}
    layers = []
    for _ in range(s):
        layer = []
        for pair in pairs:
            u = sample_haar_unitary(4, rng)
            prods[pair] = u @ prods[pair]
            layer.append(Gate(u, pair))
        layers.append(layer)
    layers.append([Gate(prods[pair].conj().T, pair) for pair in pairs])
    return Circuit(n=n, depth=s + 1, layers=layers, boundary=boundary, gate_set="haar2q")


def simultaneous_rb(
    n: int,
    model: NoiseModel | None,
    sequence_lengths: list[int],
    n_sequences: int,
    master_seed: int,
    backend: str = "density",
    T: int = 2000,
    boundary: str = "ring",
    fix_baseline: float | None = 0.25,
) -> SrbResult:
    """Parallel per-pair two-qubit RB under the global noise model.

    Haar-random 2-qubit gates with an exact terminal inverse give the same
    twirled exponential decay as a Clifford RB sequence; the depolarizing
    parameter p is converted to a Pauli error rate with the factor 15/16.
    The survival baseline defaults to the twirled-marginal value 1/4; pass
    fix_baseline=None to fit it.
    """
    if len(sequence_lengths) < 3 or any(s < 1 for s in sequence_lengths):
        raise ValueError("need >= 3 sequence lengths, all >= 1")
    if n_sequences < 2:
        raise ValueError("need >= 2 sequences for error bars")
    if backend not in ("density", "mcwf"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "density" and n > MAX_DENSITY_QUBITS:
        raise ValueError(f"density backend requires n <= {MAX_DENSITY_QUBITS}")
    if model is None:
        model = NoiseModel(n=n, terms=())
    if model.n != n:
        raise ValueError(f"model n={model.n} != n={n}")

    parity_pairs = [layer_pairs(n, 1, boundary), layer_pairs(n, 2, boundary)]
    error_rates, decay_params, sigmas, survived = [], [], [], []
    lam_parity = []
    seq = list(sequence_lengths)
    for parity, pairs in enumerate(parity_pairs):
        # surv[pair][si, j] = survival of sequence j at length seq[si]
        surv = {pair: np.zeros((len(seq), n_sequences)) for pair in pairs}
        for j in range(n_sequences):
            for si, s in enumerate(seq):
                rng = spawn_rng(master_seed, 20 + parity, j, s)
                circ = _rb_circuit(n, pairs, s, rng, boundary)
                if backend == "density":
                    rho = run_noisy_density(circ, model).rho
                    q = np.clip(np.diag(rho).real, 0.0, None)
                else:
                    acc = trajectory_ensemble(
                        circ, model, T,
                        derive_seed(master_seed, 30 + parity, j, s),
                        collect_q=True)[0]
                    q = np.asarray(acc.q_mean, dtype=float)
                for pair in pairs:
                    surv[pair][si, j] = _pair_survival(q, n, pair)
        rates, params, sig, means = {}, {}, {}, {}
        for pair in pairs:
            m = surv[pair].mean(axis=1)
            se = surv[pair].std(axis=1, ddof=1) / np.sqrt(n_sequences)
            means[pair] = m
            if m.max() - m.min() < 1e-9:
                rates[pair], params[pair], sig[pair] = 0.0, 1.0, 0.0
                continue
            try:
                fit = fit_rb_decay(seq, m, se if np.all(se > 0) else None,
                                   fix_baseline=fix_baseline)
            except RuntimeError as exc:
                raise RuntimeError(f"RB fit failed for pair {pair}: {exc}") from exc
            p = min(max(fit.p, 0.0), 1.0)
            rates[pair] = SRB_PAULI_FACTOR * (1.0 - p)
            params[pair] = p
            sig[pair] = fit.sigma_p
        error_rates.append(rates)
        decay_params.append(params)
        sigmas.append(sig)
        survived.append(means)
        lam_parity.append(-sum(np.log1p(-e) for e in rates.values()))
    return SrbResult(
        n=n,
        sequence_lengths=seq,
        pairs=parity_pairs,
        error_rates=error_rates,
        decay_params=decay_params,
        sigma_p=sigmas,
        survivals=survived,
        lambda_srb=float(np.mean(lam_parity)),
    )


@dataclass
class VirtualResult:
    """Extraction of the correlated dephasing rate from three experiments."""

    n: int
    gamma1: float
    gamma2: float
    gamma3: float
    Gamma1: float
    sigma_Gamma1: float
    Gamma2: float
    sigma_Gamma2: float
    lam: float
    sigma_lam: float
    gamma3_hat: float
    sigma_gamma3: float
    decay_series: np.ndarray
    ramsey_series: np.ndarray
    benchmark: BenchmarkReport


def correlated_model(n: int, gamma1: float, gamma2: float, gamma3: float) -> NoiseModel:
    """Per-qubit decay + dephasing plus ZZ dephasing on ring neighbors."""
    terms: list[CollapseTerm] = []
    for q in range(n):
        if gamma1 > 0:
            terms.append(CollapseTerm("amplitude_decay", (q,), gamma1))
        if gamma2 > 0:
            terms.append(CollapseTerm("dephasing", (q,), gamma2))
    if gamma3 > 0:
        for q in range(n):
            terms.append(CollapseTerm("pauli_string", (q, (q + 1) % n), gamma3, pauli="ZZ"))
    return NoiseModel(n=n, terms=tuple(terms))


def _fit_series(times: np.ndarray, series: np.ndarray) -> DecayFit:
    pts = [DepthPoint(int(t), float(v), None, 1, 0, np.array([v]))
           for t, v in zip(times, series)]
    return fit_exponential(pts)


def virtual_experiment(
    n: int,
    gamma1: float,
    gamma2: float,
    gamma3: float,
    backend: str = "density",
    L: int = 24,
    depths: list[int] | None = None,
    T: int = 400,
    master_seed: int = 7,
    t_max: int = 20,
) -> VirtualResult:
    """Extract the ZZ rate as gamma3 = Gamma1/4 + Gamma2/4 - lambda/n.

    (a) amplitude decay from the all-ones state gives Gamma1 = gamma1;
    (b) Ramsey decay of <X_i> at rate Gamma2/2 gives
        Gamma2 = gamma1 + gamma2 + 8 gamma3 (two ZZ neighbors per qubit);
    (c) the decay benchmark gives lambda/n = gamma1/2 + gamma2/4 + gamma3.
    """
    if n > MAX_DENSITY_QUBITS:
        raise ValueError(f"free-evolution fits use the density backend; n <= {MAX_DENSITY_QUBITS}")
    model = correlated_model(n, gamma1, gamma2, gamma3)
    dim = 2**n
    times = np.arange(1, t_max + 1)

    # (a) excited-population decay from |1...1>
    rho = np.zeros((dim, dim), dtype=complex)
    rho[dim - 1, dim - 1] = 1.0
    x = np.arange(dim)
    nbits = np.zeros(dim)
    for q in range(n):
        nbits += (x >> (n - 1 - q)) & 1
    pop = np.empty(t_max)
    for ti in range(t_max):
        rho = evolve_density_unit_time(rho, model)
        pop[ti] = float(np.clip(np.diag(rho).real, 0.0, None) @ nbits) / n
    fit1 = _fit_series(times, pop)

    # (b) Ramsey: <X_i> decay from |+...+>
    rho = np.full((dim, dim), 1.0 / dim, dtype=complex)
    masks = [1 << (n - 1 - q) for q in range(n)]
    xbar = np.empty(t_max)
    for ti in range(t_max):
        rho = evolve_density_unit_time(rho, model)
        xbar[ti] = float(np.mean([rho[x, x ^ m].real.sum() for m in masks]))
    fit2 = _fit_series(times, xbar)

    # (c) decay benchmark
    if depths is None:
        depths = [2, 4, 6, 8, 10, 12]
    config = BenchmarkConfig(
        n=n, depths=list(depths), L=L, backend=backend, T=T,
        model=model, estimators=("fidelity",), master_seed=master_seed,
        depth_mode="prefix")
    report = rcs_benchmark(config)
    fit3 = report.fits["fidelity"]

    Gamma1, sG1 = fit1.lam, fit1.sigma_lambda
    Gamma2, sG2 = 2.0 * fit2.lam, 2.0 * fit2.sigma_lambda
    lam, slam = fit3.lam, fit3.sigma_lambda
    g3 = Gamma1 / 4.0 + Gamma2 / 4.0 - lam / n
    sg3 = float(np.sqrt((sG1 / 4) ** 2 + (sG2 / 4) ** 2 + (slam / n) ** 2))
    return VirtualResult(
        n=n, gamma1=gamma1, gamma2=gamma2, gamma3=gamma3,
        Gamma1=Gamma1, sigma_Gamma1=sG1, Gamma2=Gamma2, sigma_Gamma2=sG2,
        lam=lam, sigma_lam=slam, gamma3_hat=g3, sigma_gamma3=sg3,
        decay_series=pop, ramsey_series=xbar, benchmark=report)


@dataclass
class Theorem1Result:
    mean_full: float
    mean_diag: float
    z: float
    L: int
    diffs: np.ndarray


def _block_channels(n: int, pm: ProcessMatrix):
    if pm.k == 1:
        return [((q,), pm) for q in range(n)]
    if n % pm.k:
        raise ValueError(f"n={n} not divisible by channel support k={pm.k}")
    return [(tuple(range(q, q + pm.k)), pm) for q in range(0, n, pm.k)]


def theorem1_check(n: int, d: int, pm: ProcessMatrix, L: int, master_seed: int) -> Theorem1Result:
    """Average fidelity of a channel vs its Pauli-diagonal reduction.

    Uses the same circuit seeds for both channels and reports the paired
    z-score of the per-circuit fidelity differences.
    """
    if L < 2:
        raise ValueError("need L >= 2")
    ch_full = _block_channels(n, pm)
    ch_diag = _block_channels(n, diagonalize_channel(pm))
    f_full = np.empty(L)
    f_diag = np.empty(L)
    for i in range(L):
        circ = sample_rqc(n, d, rng=derive_seed(master_seed, 40, i))
        ideal = None
        for (unit, amps), (_, rho) in zip(simulate_units(circ),
                                          simulate_density_with_channels(circ, ch_full)):
            if unit == d:
                f_full[i] = fidelity_state(rho, amps)
                ideal = amps
        rho = run_density_with_channels(circ, ch_diag).rho
        f_diag[i] = fidelity_state(rho, ideal)
    diffs = f_full - f_diag
    sd = diffs.std(ddof=1)
    z = 0.0 if sd == 0.0 else float(diffs.mean() / (sd / np.sqrt(L)))
    return Theorem1Result(float(f_full.mean()), float(f_diag.mean()), z, L, diffs)


@dataclass
class FirstOrderRow:
    d: int
    F0: float
    EF1: float
    EF: float
    ratio1: float
    ratio2: float


def first_order_check(n: int, d_max: int, eps: float, L: int, master_seed: int) -> list[FirstOrderRow]:
    """Exact average fidelity under per-qubit X noise vs the first-order series.

    ratio1 = EF1/F0 and ratio2 = (EF - F0 - EF1)/F0; for shallow circuits
    the second-order remainder is far below the first-order term.
    """
    if eps < 0 or eps >= 1:
        raise ValueError("eps must lie in [0, 1)")
    chi = np.diag([1.0 - eps, eps, 0.0, 0.0]).astype(complex)
    pm = ProcessMatrix(chi=chi, k=1)
    channels = _block_channels(n, pm)
    ef = np.zeros(d_max)
    for i in range(L):
        circ = sample_rqc(n, d_max, rng=derive_seed(master_seed, 50, i))
        for (unit, amps), (_, rho) in zip(simulate_units(circ),
                                          simulate_density_with_channels(circ, channels)):
            ef[unit - 1] += fidelity_state(rho, amps) / L
    rows = []
    for d in range(1, d_max + 1):
        F0, EF1 = first_order_fidelity(n, d, eps)
        EF = float(ef[d - 1])
        rows.append(FirstOrderRow(
            d=d, F0=F0, EF1=EF1, EF=EF,
            ratio1=EF1 / F0, ratio2=(EF - F0 - EF1) / F0))
    return rows
