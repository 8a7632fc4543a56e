"""Aggregation, weighted decay fits, and cross-circuit variance estimators."""
import json

import numpy as np
import pytest

from rcsbench.circuits import ErrorInjection, sample_rqc
from rcsbench.rng import spawn_rng
from rcsbench.statevec import pauli_overlap_sq
from rcsbench.stats import (
    DepthPoint,
    aggregate_depth,
    al_covariance,
    fit_exponential,
    fit_rb_decay,
    fit_to_json,
    varc_unbiased,
)


def test_aggregate_depth_formulas():
    pt = aggregate_depth(6, [0.25, 0.5, 0.75], samples_per_circuit=100)
    assert pt.depth == 6 and pt.L == 3 and pt.M == 100
    assert pt.mean == 0.5
    assert np.isclose(pt.stderr, 0.25 / np.sqrt(3), atol=1e-15)
    assert pt.within_vars is None

    single = aggregate_depth(2, [0.3])
    assert single.stderr is None

    wv = aggregate_depth(2, [0.2, 0.4], within_vars=[0.01, 0.02])
    assert np.allclose(wv.within_vars, [0.01, 0.02])

    with pytest.raises(ValueError):
        aggregate_depth(2, [])


def test_varc_unbiased_deterministic():
    vals = [1.0, 2.0, 3.0]
    assert np.isclose(varc_unbiased(vals, [0.5, 0.5, 0.5]), 1.0 - 0.5, atol=1e-12)
    # subtraction is allowed to push the estimate negative
    assert varc_unbiased([1.0, 1.0, 1.0], [0.2, 0.2, 0.2]) < 0


def test_varc_unbiased_statistics():
    rng = spawn_rng(42)
    sigma_b, sigma_w, L, reps = 0.3, 0.5, 40, 200
    ests = np.empty(reps)
    for r in range(reps):
        centers = rng.normal(0.0, sigma_b, size=L)
        shots = centers + rng.normal(0.0, sigma_w, size=L)
        ests[r] = varc_unbiased(shots, np.full(L, sigma_w**2))
    se = ests.std(ddof=1) / np.sqrt(reps)
    z = (ests.mean() - sigma_b**2) / se
    assert abs(z) < 4, (ests.mean(), sigma_b**2, z)


def _points(depths, y, stderr=None):
    return [
        DepthPoint(depth=d, mean=float(v), stderr=None if stderr is None else float(s),
                   L=8, M=0, values=np.array([v]), within_vars=None)
        for d, v, s in zip(depths, y, stderr if stderr is not None else y)
    ]


def test_fit_exponential_exact_recovery():
    depths = np.array([4, 8, 12, 16, 20])
    y = 0.93 * np.exp(-0.07 * depths)
    fit = fit_exponential(_points(depths, y))
    assert abs(fit.A - 0.93) < 1e-8
    assert abs(fit.lam - 0.07) < 1e-9
    fit.validate()
    doc = json.loads(fit_to_json(fit))
    assert set(doc) == {"A", "lambda", "sigma_A", "sigma_lambda", "d_min", "d_max",
                        "n_points", "residual_norm"}
    assert doc["d_min"] == 4 and doc["d_max"] == 20 and doc["n_points"] == 5


def test_fit_exponential_weighted_errors_calibrated():
    rng = spawn_rng(8)
    depths = np.array([5, 10, 15, 20, 25, 30])
    sigma = 0.004
    hits = 0
    reps = 60
    for _ in range(reps):
        y = 0.98 * np.exp(-0.04 * depths) + rng.normal(0, sigma, size=depths.size)
        fit = fit_exponential(_points(depths, y, np.full(depths.size, sigma)))
        if abs(fit.lam - 0.04) < 1.96 * fit.sigma_lambda:
            hits += 1
    assert hits >= int(0.8 * reps), hits


def test_fit_exponential_needs_three_points():
    with pytest.raises(ValueError):
        fit_exponential(_points([2, 4], [0.5, 0.4]))


def test_fit_exponential_handles_negative_means():
    # uXEB points can dip below zero at deep depths; init must not take logs
    depths = np.array([2, 4, 6, 8])
    y = np.array([0.5, 0.2, 0.05, -0.01])
    fit = fit_exponential(_points(depths, y))
    assert np.isfinite(fit.lam)


def test_fit_rb_decay_exact():
    s = np.array([1, 2, 4, 8, 16])
    y = 0.7 * 0.9**s + 0.25
    fit = fit_rb_decay(s, y)
    assert abs(fit.p - 0.9) < 1e-6
    assert abs(fit.A - 0.7) < 1e-6
    assert abs(fit.B - 0.25) < 1e-6
    fixed = fit_rb_decay(s, y, fix_baseline=0.25)
    assert abs(fixed.p - 0.9) < 1e-9
    assert fixed.B == 0.25


def test_al_covariance_matches_bruteforce_enumeration():
    n, d, L = 4, 3, 12
    got = al_covariance(n, d, L, None, spawn_rng(5))
    gen = spawn_rng(5)
    totals = np.empty(L)
    for c in range(L):
        circ = sample_rqc(n, d, rng=gen)
        acc = 0.0
        for l in range(1, d + 1):
            for i in range(n):
                pauli = "I" * i + "X" + "I" * (n - 1 - i)
                acc += pauli_overlap_sq(circ, ErrorInjection(pauli=pauli, layer=l))
        totals[c] = acc / n
    want = float(totals.var(ddof=1))
    assert np.isclose(got, want, rtol=1e-10, atol=1e-12)


def test_al_covariance_sampled_locations_unbiased():
    n, d = 4, 4
    reference = al_covariance(n, d, 600, None, spawn_rng(77))
    reps = 40
    ests = np.array(
        [al_covariance(n, d, 30, 20, spawn_rng(7, r)) for r in range(reps)]
    )
    se = ests.std(ddof=1) / np.sqrt(reps)
    z = (ests.mean() - reference) / se
    assert abs(z) < 4, (ests.mean(), reference, z)


def test_al_covariance_input_validation():
    with pytest.raises(ValueError):
        al_covariance(4, 3, 1, None, spawn_rng(0))
