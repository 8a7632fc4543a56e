"""Benchmark orchestration: backends, fits, RB, virtual experiment, checks."""
import dataclasses
import json

import numpy as np
import pytest

from rcsbench.density import channel_process_matrix
from rcsbench.noise import (
    CollapseTerm,
    NoiseModel,
    diagonalize_channel,
    enr_of_model,
    preset_model,
)
from rcsbench.protocols import (
    BenchmarkConfig,
    ESTIMATOR_KINDS,
    benchmark_config_from_json,
    benchmark_config_to_json,
    correlated_model,
    first_order_check,
    rcs_benchmark,
    report_per_depth_csv,
    report_to_json,
    simultaneous_rb,
    theorem1_check,
    virtual_experiment,
)


def _cfg(**kw):
    base = dict(
        n=4,
        depths=[2, 4, 6],
        L=5,
        backend="density",
        model=preset_model("t1t2", 4, 0.04),
        estimators=("fidelity", "uxeb"),
        master_seed=3,
    )
    base.update(kw)
    return BenchmarkConfig(**base)


def test_config_validation_catalog():
    _cfg().validate()
    with pytest.raises(ValueError):
        _cfg(n=5, model=preset_model("t1t2", 5, 0.04, boundary="open")).validate()
    with pytest.raises(ValueError):
        _cfg(depths=[4, 2]).validate()
    with pytest.raises(ValueError):
        _cfg(backend="bogus").validate()
    with pytest.raises(ValueError):
        _cfg(model=None).validate()  # density needs a model
    with pytest.raises(ValueError):
        _cfg(estimators=("fidelity", "nope")).validate()
    with pytest.raises(ValueError):
        _cfg(backend="statevec_sampling").validate()  # model must be None
    with pytest.raises(ValueError):
        _cfg(fit_range=(5, 6)).validate()  # keeps < 3 points
    with pytest.raises(ValueError):
        _cfg(depth_mode="sideways").validate()
    with pytest.raises(ValueError):
        _cfg(model=preset_model("t1t2", 6, 0.04)).validate()  # n mismatch
    with pytest.raises(ValueError):
        BenchmarkConfig(
            n=12, depths=[2, 3, 4], L=3, backend="density",
            model=preset_model("t1t2", 12, 0.04)).validate()


def test_config_json_round_trip():
    cfg = _cfg(fit_range=(2, 6), depth_mode="prefix")
    back = benchmark_config_from_json(benchmark_config_to_json(cfg))
    assert back.n == cfg.n and back.depths == cfg.depths
    assert back.fit_range == (2, 6) and back.depth_mode == "prefix"
    assert back.model is not None and len(back.model.terms) == len(cfg.model.terms)
    assert np.isclose(enr_of_model(back.model), enr_of_model(cfg.model), atol=1e-15)
    with pytest.raises((KeyError, ValueError)):
        benchmark_config_from_json(json.dumps({"n": 4, "depths": [2], "L": 1, "zzz": 1}))


def test_benchmark_deterministic_and_seed_sensitive():
    cfg = _cfg()
    a = report_to_json(rcs_benchmark(cfg))
    b = report_to_json(rcs_benchmark(cfg))
    c = report_to_json(rcs_benchmark(dataclasses.replace(cfg, master_seed=4)))
    assert a == b
    assert a != c


def test_backends_agree_on_fidelity():
    model = preset_model("t1t2", 4, 0.05)
    dens = rcs_benchmark(_cfg(model=model, estimators=("fidelity",)))
    mc = rcs_benchmark(
        _cfg(model=model, backend="mcwf", T=1500, estimators=("fidelity",))
    )
    for pd, pm in zip(dens.points["fidelity"], mc.points["fidelity"]):
        # same circuits: density is exact, mcwf carries trajectory noise
        se = np.sqrt(np.var(pm.values - pd.values, ddof=1) / pd.L)
        z = (pm.mean - pd.mean) / max(se, 1e-12)
        assert abs(z) < 4, (pd.depth, z)


def test_sampling_backend_uxeb_unbiased_small():
    cfg = BenchmarkConfig(
        n=6, depths=[6], L=40, M=400, backend="statevec_sampling",
        model=None, estimators=("uxeb",), master_seed=11)
    rep = rcs_benchmark(cfg)
    pt = rep.points["uxeb"][0]
    z = (pt.mean - 1.0) / pt.stderr
    assert abs(z) < 4, (pt.mean, pt.stderr)
    assert rep.fits == {}  # single depth: no decay fit


def test_fresh_and_prefix_modes_agree():
    model = preset_model("pauli_x", 4, 0.05)
    fresh = rcs_benchmark(_cfg(model=model, L=12, depth_mode="fresh",
                               estimators=("fidelity",)))
    prefix = rcs_benchmark(_cfg(model=model, L=12, depth_mode="prefix",
                                estimators=("fidelity",)))
    fa, fb = fresh.fits["fidelity"], prefix.fits["fidelity"]
    sig = np.hypot(fa.sigma_lambda, fb.sigma_lambda)
    assert abs(fa.lam - fb.lam) < 4 * sig
    # prefix reuses one circuit family across depths
    seeds = prefix.circuit_seeds
    assert all(seeds[d] == seeds[2] for d in (4, 6))
    fresh_seeds = fresh.circuit_seeds
    assert fresh_seeds[2] != fresh_seeds[4]


def test_report_outputs_well_formed():
    rep = rcs_benchmark(_cfg())
    doc = json.loads(report_to_json(rep))
    assert set(doc) == {"config", "enr_true", "estimators", "circuit_seeds", "versions"}
    assert np.isclose(doc["enr_true"], 0.04, atol=1e-12)
    for kind in ("fidelity", "uxeb"):
        est = doc["estimators"][kind]
        assert len(est["points"]) == 3
        assert est["fit"]["n_points"] == 3
    csv = report_per_depth_csv(rep)
    lines = csv.strip().split("\n")
    assert lines[0] == "kind,depth,mean,stderr,L,M"
    assert len(lines) == 1 + 2 * 3
    assert {"rcsbench", "numpy", "scipy"} <= set(doc["versions"])


def test_fit_respects_fit_range():
    rep = rcs_benchmark(_cfg(depths=[1, 2, 4, 6, 8], fit_range=(2, 8)))
    fit = rep.fits["fidelity"]
    assert fit.depths[0] == 2 and fit.depths[-1] == 8
    assert len(fit.depths) == 4


def test_estimator_kinds_constant():
    assert set(ESTIMATOR_KINDS) == {"fidelity", "xeb", "uxeb", "logxeb", "hog"}
    rep = rcs_benchmark(_cfg(estimators=("logxeb", "hog"), depths=[2, 3, 4], L=3))
    assert set(rep.points) == {"logxeb", "hog"}


def test_srb_recovers_local_noise_rate():
    model = preset_model("pauli_x", 4, 0.04)
    res = simultaneous_rb(4, model, [1, 2, 4, 8], 3, master_seed=5)
    lam_true = enr_of_model(model)
    assert res.lambda_srb == pytest.approx(lam_true, rel=0.3)
    rates = res.all_error_rates()
    assert len(rates) == 4  # two pairs per parity at n=4
    assert all(0 <= e < 0.05 for e in rates)
    assert res.pairs[0] == [(0, 1), (2, 3)]
    assert res.pairs[1] == [(1, 2), (3, 0)]


def test_srb_noiseless_reads_zero():
    res = simultaneous_rb(4, None, [1, 2, 4], 2, master_seed=1)
    assert res.lambda_srb == 0.0
    assert all(e == 0.0 for e in res.all_error_rates())


def test_srb_mcwf_backend_close_to_density():
    model = preset_model("pauli_x", 4, 0.06)
    a = simultaneous_rb(4, model, [1, 2, 4], 2, master_seed=3)
    b = simultaneous_rb(4, model, [1, 2, 4], 2, master_seed=3, backend="mcwf", T=1500)
    assert abs(a.lambda_srb - b.lambda_srb) < 0.03


def test_virtual_experiment_internal_identity():
    res = virtual_experiment(4, 0.01, 0.02, 0.005, L=6, master_seed=2)
    # combiner must implement gamma3 = Gamma1/4 + Gamma2/4 - lambda/n
    want = res.Gamma1 / 4 + res.Gamma2 / 4 - res.lam / res.n
    assert np.isclose(res.gamma3_hat, want, atol=1e-12)
    # free-evolution fits are deterministic and tight
    assert res.Gamma1 == pytest.approx(0.01, rel=0.02)
    assert res.Gamma2 == pytest.approx(0.01 + 0.02 + 8 * 0.005, rel=0.02)
    assert res.decay_series.size == 20 and res.ramsey_series.size == 20


def test_correlated_model_enr():
    model = correlated_model(6, 0.01, 0.02, 0.004)
    # per qubit: amp/2 + deph/4 + one ZZ string per qubit
    want = 6 * (0.01 / 2 + 0.02 / 4) + 6 * 0.004
    assert np.isclose(enr_of_model(model), want, atol=1e-12)
    zero = correlated_model(4, 0.01, 0.0, 0.0)
    assert all(t.kind == "amplitude_decay" for t in zero.terms)


def test_theorem1_full_vs_diagonal_chi():
    term = CollapseTerm("amplitude_decay", (0,), 0.08)
    pm = channel_process_matrix(term)
    res = theorem1_check(4, 3, pm, L=40, master_seed=9)
    assert res.L == 40
    assert abs(res.z) < 4
    # a diagonal chi must give literally identical runs
    res_diag = theorem1_check(4, 3, diagonalize_channel(pm), L=10, master_seed=9)
    assert res_diag.z == 0.0
    assert np.all(res_diag.diffs == 0.0)


def test_first_order_check_rows():
    rows = first_order_check(4, 3, 0.005, L=20, master_seed=4)
    assert [r.d for r in rows] == [1, 2, 3]
    for r in rows:
        assert 0 < r.F0 < 1 and r.EF1 > 0 and 0 < r.EF <= 1
        assert np.isclose(r.ratio1, r.EF1 / r.F0, atol=1e-12)
        assert np.isclose(r.ratio2, (r.EF - r.F0 - r.EF1) / r.F0, atol=1e-12)

    clean = first_order_check(4, 2, 0.0, L=4, master_seed=0)
    for r in clean:
        assert r.EF == pytest.approx(1.0, abs=1e-9)
        assert r.F0 == 1.0 and r.EF1 == 0.0
