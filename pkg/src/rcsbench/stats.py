"""Exponential decay fitting, per-depth aggregation, and variance estimators.

Fidelity estimates at each depth are averaged over L circuits; the sample
standard error across circuits is the error bar (it already contains both
the circuit-to-circuit and the per-circuit sampling contributions). The
decay F = A exp(-lambda d) is fit by weighted Levenberg-Marquardt with an
analytic Jacobian.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .circuits import Circuit, sample_rqc
from .statevec import PureState, apply_gate_amps, pauli_expectation

__all__ = [
    "DepthPoint",
    "DecayFit",
    "RbFit",
    "aggregate_depth",
    "varc_unbiased",
    "fit_exponential",
    "fit_rb_decay",
    "fit_to_json",
    "al_covariance",
]


@dataclass
class DepthPoint:
    """Estimator values at one depth, aggregated over L circuits."""

    depth: int
    mean: float
    stderr: float | None
    L: int
    M: int
    values: np.ndarray
    within_vars: np.ndarray | None = None


@dataclass
class DecayFit:
    """Parameters of F = A exp(-lambda d) with standard errors."""

    A: float
    lam: float
    sigma_A: float
    sigma_lambda: float
    cov: np.ndarray
    residuals: np.ndarray
    depths: np.ndarray

    def validate(self) -> None:
        if not np.isfinite([self.A, self.lam, self.sigma_A, self.sigma_lambda]).all():
            raise ValueError("non-finite fit parameters")
        eigs = np.linalg.eigvalsh(self.cov)
        if eigs.min() < -1e-12 * max(1.0, eigs.max()):
            raise ValueError("fit covariance is not positive semi-definite")


@dataclass
class RbFit:
    """Parameters of the RB decay F = A p^s + B."""

    A: float
    p: float
    B: float
    sigma_p: float
    residuals: np.ndarray


def aggregate_depth(
    depth: int,
    values,
    within_vars=None,
    samples_per_circuit: int = 0,
) -> DepthPoint:
    """Mean and cross-circuit standard error of per-circuit estimates."""
    values = np.asarray(values, dtype=float)
    L = values.size
    if L < 1:
        raise ValueError("need at least one circuit value")
    wv = None if within_vars is None else np.asarray(within_vars, dtype=float)
    if wv is not None and wv.size != L:
        raise ValueError("within_vars length does not match values")
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(L)) if L >= 2 else None
    return DepthPoint(depth, mean, stderr, L, samples_per_circuit, values, wv)


def varc_unbiased(values, within_vars) -> float:
    """Cross-circuit variance with the per-circuit sampling variance removed.

    May be negative (noise); reported as-is to keep the estimator unbiased.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("need at least two circuits")
    within = np.asarray(within_vars, dtype=float)
    return float(values.var(ddof=1) - within.mean())


def _model(d, A, lam):
    return A * np.exp(-lam * d)


def _jac(d, A, lam):
    e = np.exp(-lam * d)
    return np.column_stack([e, -A * d * e])


def _log_linear_init(d: np.ndarray, y: np.ndarray, w: np.ndarray | None):
    """Weighted linear regression on log(y); requires y > 0."""
    ly = np.log(y)
    # delta method: var(log y) ~ (sigma/y)^2, so weights scale with (y/sigma)^2
    wts = np.ones_like(y) if w is None else w * y**2
    X = np.column_stack([np.ones_like(d), -d])
    W = np.sqrt(wts)
    coef, *_ = np.linalg.lstsq(X * W[:, None], ly * W, rcond=None)
    return float(np.exp(coef[0])), float(coef[1])


def fit_exponential(points: list[DepthPoint]) -> DecayFit:
    """Weighted nonlinear least squares for F = A exp(-lambda d).

    Weights are 1/stderr^2 when every point carries a positive stderr,
    otherwise the fit is unweighted. Initialized by weighted linear
    regression on log(mean) when all means are positive.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 depth points")
    d = np.asarray([p.depth for p in points], dtype=float)
    y = np.asarray([p.mean for p in points], dtype=float)
    errs = [p.stderr for p in points]
    weighted = all(e is not None and e > 0 for e in errs)
    sigma = np.asarray(errs, dtype=float) if weighted else None
    w = 1.0 / sigma**2 if weighted else None

    if np.all(y > 0):
        p0 = _log_linear_init(d, y, w)
        if not np.isfinite(p0).all():
            p0 = (max(y.max(), 1e-6), 0.01)
    else:
        p0 = (max(abs(y).max(), 1e-6), 0.01)

    try:
        popt, pcov = curve_fit(
            _model,
            d,
            y,
            p0=p0,
            sigma=sigma,
            absolute_sigma=weighted,
            jac=_jac,
            method="lm",
            xtol=1e-10,
            ftol=1e-10,
            maxfev=1000,
        )
    except RuntimeError as exc:
        raise RuntimeError(f"exponential fit failed: {exc}") from exc
    if not np.isfinite(pcov).all():
        raise RuntimeError("singular Jacobian in exponential fit")
    resid = y - _model(d, *popt)
    if weighted:
        resid = resid / sigma
    fit = DecayFit(
        A=float(popt[0]),
        lam=float(popt[1]),
        sigma_A=float(np.sqrt(pcov[0, 0])),
        sigma_lambda=float(np.sqrt(pcov[1, 1])),
        cov=pcov,
        residuals=resid,
        depths=d,
    )
    fit.validate()
    return fit


def fit_to_json(fit: DecayFit) -> str:
    payload = {
        "A": fit.A,
        "lambda": fit.lam,
        "sigma_A": fit.sigma_A,
        "sigma_lambda": fit.sigma_lambda,
        "d_min": int(fit.depths.min()),
        "d_max": int(fit.depths.max()),
        "n_points": int(fit.depths.size),
        "residual_norm": float(np.linalg.norm(fit.residuals)),
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def fit_rb_decay(
    lengths,
    means,
    stderrs=None,
    fix_baseline: float | None = None,
) -> RbFit:
    """Fit F = A p^s + B to survival probabilities vs sequence length."""
    s = np.asarray(lengths, dtype=float)
    y = np.asarray(means, dtype=float)
    if s.size < 3:
        raise ValueError("need at least 3 sequence lengths")
    weighted = stderrs is not None and np.all(np.asarray(stderrs) > 0)
    sigma = np.asarray(stderrs, dtype=float) if weighted else None

    B0 = float(y.min()) if fix_baseline is None else fix_baseline
    A0 = max(float(y[0] - B0), 1e-6)
    pos = y - B0 > 1e-12
    if pos.sum() >= 2:
        slope, _ = np.polyfit(s[pos], np.log(y[pos] - B0), 1)
        p0_p = float(np.clip(np.exp(slope), 1e-3, 0.99999))
    else:
        p0_p = 0.9

    if fix_baseline is None:
        def f(sv, A, p, B):
            return A * p**sv + B

        popt, pcov = curve_fit(f, s, y, p0=(A0, p0_p, B0), sigma=sigma,
                               absolute_sigma=weighted, maxfev=5000)
        A, p, B = popt
        sigma_p = float(np.sqrt(pcov[1, 1]))
    else:
        def f(sv, A, p):
            return A * p**sv + fix_baseline

        popt, pcov = curve_fit(f, s, y, p0=(A0, p0_p), sigma=sigma,
                               absolute_sigma=weighted, maxfev=5000)
        A, p = popt
        B = fix_baseline
        sigma_p = float(np.sqrt(pcov[1, 1]))
    resid = y - (A * p**s + B)
    return RbFit(float(A), float(p), float(B), sigma_p, resid)


def _prefix_pauli_sums(circuit: Circuit, pauli: str) -> np.ndarray:
    """o[l-1, i] = |<phi_l|P_i|phi_l>|^2 for prefix states phi_l, l = 1..d.

    The overlap of the error-injected state with the ideal state reduces to
    a Pauli expectation on the prefix state because the trailing gates cancel.
    """
    n = circuit.n
    out = np.empty((circuit.depth, n))
    amps = PureState.zero(n).amps
    for u, unit in enumerate(circuit.unit_slices()):
        for layer in unit:
            for g in layer:
                amps = apply_gate_amps(amps, g.matrix, g.targets, n)
        for i in range(n):
            label = "I" * i + pauli + "I" * (n - 1 - i)
            out[u, i] = abs(pauli_expectation(amps, n, label)) ** 2
    return out


def al_covariance(
    n: int,
    d: int,
    L: int,
    K: int | None,
    rng: np.random.Generator,
    gate_set: str = "haar2q",
    boundary: str = "ring",
    pauli: str = "X",
) -> float:
    """Cross-circuit variance of sum_l A_l, A_l = (1/n) sum_i |<phi_l|P_i|phi_l>|^2.

    With K locations sampled per circuit the per-circuit Monte-Carlo variance
    is subtracted (same construction as varc_unbiased); K=None enumerates all
    n*d error locations exactly.
    """
    if L < 2:
        raise ValueError("need at least two circuits")
    totals = np.empty(L)
    within = np.zeros(L)
    for c in range(L):
        circ = sample_rqc(n, d, rng=rng, gate_set=gate_set, boundary=boundary)
        o = _prefix_pauli_sums(circ, pauli)
        if K is None:
            totals[c] = o.mean() * d
        else:
            picks = o.ravel()[rng.integers(0, o.size, size=K)]
            totals[c] = picks.mean() * d
            within[c] = d**2 * picks.var(ddof=1) / K
    return float(totals.var(ddof=1) - within.mean())
