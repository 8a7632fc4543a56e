"""Monte Carlo wave function trajectories for unit-time noise between gate layers.

All collapse operators have diagonal J^dag J, so no-jump evolution is the
exact elementwise decay psi_x *= exp(-Gamma_x t / 2). A jump fires when the
squared norm crosses a uniform threshold p; the crossing time is solved on
the (few) distinct Gamma values rather than all 2^n amplitudes. Ensembles
evolve trajectories as rows of a (batch, 2^n) array with one RNG stream per
trajectory index, so results do not depend on the batch size.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit
from .noise import CollapseTerm, NoiseModel, jj_diagonal, model_to_json, support_mask
from .rng import spawn_rng
from .statevec import PureState, apply_gate_amps, pauli_terms

__all__ = [
    "DecayProfile",
    "TrajectoryState",
    "decay_profile",
    "jump_time",
    "select_jump",
    "apply_jump",
    "evolve_unit_time",
    "run_noisy_trajectory",
    "trajectory_ensemble",
    "EnsembleAccumulator",
    "accumulator_to_json",
]

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class DecayProfile:
    rates: np.ndarray

    def __post_init__(self):
        if np.any(self.rates < 0):
            raise ValueError("decay rates must be nonnegative")


@dataclass
class TrajectoryState:
    state: PureState
    pending_threshold: float
    elapsed: float = 0.0


def decay_profile(model: NoiseModel) -> DecayProfile:
    """Gamma_x = sum_l gamma_l <x|J_l^dag J_l|x>; exact for all supported kinds."""
    rates = np.zeros(2**model.n)
    for t in model.terms:
        rates += t.gamma * jj_diagonal(t, model.n)
    return DecayProfile(rates=rates)


class _McwfPlan:
    """Per-model precomputation shared by single and batched trajectory paths."""

    def __init__(self, model: NoiseModel):
        n = model.n
        self.n = n
        self.model = model
        self.rates = decay_profile(model).rates
        self.decay_half = np.exp(-self.rates / 2)
        self.decay_full = np.exp(-self.rates)
        self.gamma_values, codes = np.unique(self.rates, return_inverse=True)
        self.gamma_codes = codes.astype(np.int64)
        if model.terms:
            self.term_masks = np.stack([jj_diagonal(t, n) for t in model.terms])
        else:
            self.term_masks = np.zeros((0, 2**n))
        self.term_gammas = np.array([t.gamma for t in model.terms])

    def grouped_weights(self, w: np.ndarray) -> np.ndarray:
        return np.bincount(self.gamma_codes, weights=w, minlength=self.gamma_values.size)

    def jump_weights(self, w: np.ndarray) -> np.ndarray:
        return self.term_gammas * (self.term_masks @ w)


_PLANS: dict[tuple, _McwfPlan] = {}


def _plan_for(model: NoiseModel) -> _McwfPlan:
    key = (model.n,) + tuple((t.kind, t.support, t.gamma, t.pauli) for t in model.terms)
    plan = _PLANS.get(key)
    if plan is None:
        plan = _McwfPlan(model)
        if len(_PLANS) > 16:
            _PLANS.clear()
        _PLANS[key] = plan
    return plan


def _solve_crossing(wg: np.ndarray, gv: np.ndarray, p: float, t_max: float) -> float | None:
    """Unique t in [0, t_max] with sum_g wg*exp(-gv*t) = p, or None if no crossing."""

    def f(t: float) -> float:
        return float(wg @ np.exp(-gv * t) - p)

    f0 = f(0.0)
    if f0 <= 0.0:
        return 0.0
    if f(t_max) > 0.0:
        return None
    lo, hi = 0.0, t_max
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(60):
        ft = f(t)
        if abs(ft) <= _NORM_TOL:
            return t
        dft = float(-(wg * gv) @ np.exp(-gv * t))
        if dft == 0.0:
            break
        step = ft / dft
        t_new = t - step
        if not (lo <= t_new <= hi):
            if ft > 0.0:
                lo = t
            else:
                hi = t
            t_new = 0.5 * (lo + hi)
        t = t_new
    return t


def jump_time(amps: np.ndarray, profile: DecayProfile, p: float, t_max: float = 1.0) -> float | None:
    """Time at which the decaying squared norm reaches p, or None within t_max."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"threshold p={p} outside (0,1)")
    w = np.abs(amps) ** 2
    gv, codes = np.unique(profile.rates, return_inverse=True)
    wg = np.bincount(codes.astype(np.int64), weights=w, minlength=gv.size)
    return _solve_crossing(wg, gv, p, t_max)


def select_jump(amps: np.ndarray, model: NoiseModel, rng: np.random.Generator) -> int:
    """Categorical draw over P_l proportional to gamma_l <psi|J_l^dag J_l|psi>."""
    plan = _plan_for(model)
    w = np.abs(amps) ** 2
    weights = plan.jump_weights(w)
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("no jump possible: all collapse weights vanish")
    return int(rng.choice(weights.size, p=weights / total))


def apply_jump(amps: np.ndarray, term: CollapseTerm, n: int) -> np.ndarray:
    """J|psi> renormalized to unit norm."""
    if term.kind == "pauli_string":
        letters = ["I"] * n
        for q, c in zip(term.support, term.pauli):
            letters[q] = c
        flip, sign, pref = pauli_terms("".join(letters))
        idx = np.arange(2**n) ^ flip
        par = np.bitwise_count((np.arange(2**n, dtype=np.uint64) ^ np.uint64(flip)) & np.uint64(sign)) & np.uint64(1)
        out = pref * (1.0 - 2.0 * par.astype(np.float64)) * amps[idx]
    else:
        m = jj_diagonal(term, n)
        if term.kind in ("dephasing", "corr_dephasing"):
            out = m * amps
        else:
            out = np.zeros_like(amps)
            mask = support_mask(term.support, n)
            src = np.where(m > 0)[0]
            out[src ^ mask] = amps[src]
    nrm = np.linalg.norm(out)
    if nrm <= 0.0:
        raise ValueError("jump operator annihilates the state")
    return out / nrm


def _evolve_row(amps: np.ndarray, p: float, plan: _McwfPlan, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Advance one trajectory row by one time unit; returns (amps, threshold)."""
    remaining = 1.0
    while remaining > 0.0:
        w = amps.real**2 + amps.imag**2
        wg = plan.grouped_weights(w)
        t = _solve_crossing(wg, plan.gamma_values, p, remaining)
        if t is None:
            amps = amps * np.exp(-plan.rates * (remaining / 2)) if remaining != 1.0 else amps * plan.decay_half
            break
        if t > 0.0:
            amps = amps * np.exp(-plan.rates * (t / 2))
        w = amps.real**2 + amps.imag**2
        weights = plan.jump_weights(w)
        total = weights.sum()
        if total <= 0.0:
            raise ValueError("no jump possible: all collapse weights vanish")
        l = int(rng.choice(weights.size, p=weights / total))
        amps = apply_jump(amps, plan.model.terms[l], plan.n)
        p = float(rng.random())
        remaining -= t
    return amps, p


def evolve_unit_time(traj: TrajectoryState, model: NoiseModel, rng: np.random.Generator) -> TrajectoryState:
    plan = _plan_for(model)
    amps, p = _evolve_row(traj.state.amps, traj.pending_threshold, plan, rng)
    state = PureState(amps=amps, n=traj.state.n, norm2=float(np.real(np.vdot(amps, amps))))
    return TrajectoryState(state=state, pending_threshold=p, elapsed=0.0)


def run_noisy_trajectory(circuit: Circuit, model: NoiseModel, rng: np.random.Generator) -> PureState:
    """One trajectory: perfect gate layers alternating with unit-time noise."""
    if circuit.n != model.n:
        raise ValueError(f"circuit n={circuit.n} != model n={model.n}")
    plan = _plan_for(model)
    amps = PureState.zero(circuit.n).amps
    p = float(rng.random())
    for group in circuit.unit_slices():
        for layer in group:
            for g in layer:
                amps = apply_gate_amps(amps, g.matrix, g.targets, circuit.n)
        amps, p = _evolve_row(amps, p, plan, rng)
    nrm = np.linalg.norm(amps)
    return PureState(amps=amps / nrm, n=circuit.n, norm2=1.0)


@dataclass
class EnsembleAccumulator:
    """Trajectory-averaged quantities at one snapshot depth.

    sum_p_weighted = sum over trajectories of sum_x p(x) q_traj(x);
    sum_p_sq = sum_x p(x)^2 for the ideal state at this depth;
    fidelity_sum = sum over trajectories of |<psi_ideal|psi_traj>|^2.
    """

    unit: int
    n: int
    T: int
    sum_p_weighted: float
    sum_p_sq: float
    fidelity_sum: float
    q_sum: np.ndarray | None = None
    sum_pq_sq: float = 0.0
    sum_fid_sq: float = 0.0

    @property
    def fidelity_mean(self) -> float:
        return self.fidelity_sum / self.T

    @property
    def q_mean(self) -> np.ndarray:
        if self.q_sum is None:
            raise ValueError("ensemble was run without q collection")
        return self.q_sum / self.T


def _auto_batch(n: int, T: int) -> int:
    per_traj = 40 * (2**n)
    return max(1, min(T, int(1.5e9 // per_traj)))


def trajectory_ensemble(
    circuit: Circuit,
    model: NoiseModel,
    T: int,
    master_seed: int,
    snapshots: list[int] | None = None,
    batch_size: int | None = None,
    collect_q: bool = False,
    return_states: bool = False,
):
    """T trajectories with streams (master_seed, index); accumulators per snapshot.

    snapshots lists depth units at which estimator inputs are recorded
    (default: final depth only). With return_states=True the final normalized
    states are returned instead (small n and T only).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if circuit.n != model.n:
        raise ValueError(f"circuit n={circuit.n} != model n={model.n}")
    n = circuit.n
    dim = 2**n
    units = circuit.depth
    snaps = sorted(set(snapshots)) if snapshots else [units]
    if any(s < 1 or s > units for s in snaps):
        raise ValueError(f"snapshots {snaps} outside 1..{units}")
    plan = _plan_for(model)
    if batch_size is None:
        batch_size = _auto_batch(n, T)

    pq = {s: np.zeros(T) for s in snaps}
    fid = {s: np.zeros(T) for s in snaps}
    psq: dict[int, float] = {}
    qsum = {s: np.zeros(dim) for s in snaps} if collect_q else None
    states: list[PureState] = []

    for start in range(0, T, batch_size):
        idxs = list(range(start, min(start + batch_size, T)))
        gens = [spawn_rng(master_seed, i) for i in idxs]
        thresholds = np.array([g.random() for g in gens])
        amps = np.zeros((len(idxs), dim), dtype=complex)
        amps[:, 0] = 1.0
        ideal = np.zeros(dim, dtype=complex)
        ideal[0] = 1.0
        unit = 0
        for group in circuit.unit_slices():
            unit += 1
            for layer in group:
                for g in layer:
                    amps = apply_gate_amps(amps, g.matrix, g.targets, n)
                    ideal = apply_gate_amps(ideal, g.matrix, g.targets, n)
            w = amps.real**2 + amps.imag**2
            end_norm = w @ plan.decay_full
            safe = end_norm > thresholds
            amps[safe] *= plan.decay_half
            for k in np.where(~safe)[0]:
                amps[k], thresholds[k] = _evolve_row(amps[k], float(thresholds[k]), plan, gens[k])
            if unit in snaps:
                w = amps.real**2 + amps.imag**2
                norms = w.sum(axis=1)
                p_ideal = ideal.real**2 + ideal.imag**2
                if unit not in psq:
                    psq[unit] = float(p_ideal @ p_ideal)
                pq[unit][idxs] = (w @ p_ideal) / norms
                ov = amps @ ideal.conj()
                fid[unit][idxs] = (ov.real**2 + ov.imag**2) / norms
                if collect_q:
                    qsum[unit] += (1.0 / norms) @ w
        if return_states:
            nr = np.sqrt((amps.real**2 + amps.imag**2).sum(axis=1))
            for row in range(len(idxs)):
                states.append(PureState(amps=amps[row] / nr[row], n=n, norm2=1.0))

    if return_states:
        return states
    return [
        EnsembleAccumulator(
            unit=s,
            n=n,
            T=T,
            sum_p_weighted=float(pq[s].sum()),
            sum_p_sq=psq[s],
            fidelity_sum=float(fid[s].sum()),
            q_sum=None if qsum is None else qsum[s],
            sum_pq_sq=float((pq[s] ** 2).sum()),
            sum_fid_sq=float((fid[s] ** 2).sum()),
        )
        for s in snaps
    ]


def accumulator_to_json(acc: EnsembleAccumulator, circuit_seed: int | None, model: NoiseModel) -> str:
    return json.dumps(
        {
            "circuit_seed": circuit_seed,
            "model": json.loads(model_to_json(model)),
            "T": acc.T,
            "sum_p_weighted": acc.sum_p_weighted,
            "sum_p_sq": acc.sum_p_sq,
            "fidelity_sum": acc.fidelity_sum,
        },
        indent=2,
    )
