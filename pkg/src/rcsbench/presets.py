"""Named experiment presets.

Each preset resolves to a command plus fully specified parameters so that a
single CLI invocation reproduces one benchmark table row or figure pipeline.
Benchmark presets scale the total noise rate with n to keep per-qubit rates
fixed; pass n to override the default qubit count.
"""
from __future__ import annotations

from .noise import preset_model
from .protocols import BenchmarkConfig

__all__ = ["PRESET_NAMES", "build_preset"]

_TABLE1_MODELS = ("t1t2", "pauli_x", "corr_xx", "weight_nm1")

# per-qubit effective rate 0.0025 (total lam = 0.0025 n), deep-depth fit window
_TABLE1 = {
    "per_qubit_rate": 0.0025,
    "n": 20,
    "depths": [20, 26, 32, 38, 44, 50],
    "fit_range": (20, 50),
    "L": 100,
    "T": 400,
}

# per-qubit effective rate 0.005 (total lam = 0.05 at n=10)
_TABLE4 = {
    "per_qubit_rate": 0.005,
    "n": 10,
    "depths": [10, 13, 16, 19, 22, 25],
    "fit_range": (10, 25),
    "L": 60,
    "T": 400,
}


def _benchmark_preset(params: dict, model_name: str, n: int | None, seed: int | None) -> dict:
    n = params["n"] if n is None else n
    lam = params["per_qubit_rate"] * n
    model = preset_model(model_name, n, lam)
    config = BenchmarkConfig(
        n=n,
        depths=list(params["depths"]),
        L=params["L"],
        backend="mcwf",
        T=params["T"],
        model=model,
        estimators=("fidelity", "uxeb"),
        master_seed=2024 if seed is None else seed,
        fit_range=params["fit_range"],
        depth_mode="prefix",
    )
    return {"command": "benchmark", "config": config}


def _model_slug(name: str) -> str:
    return name.replace("_", "-")


_BENCHMARK_PRESETS = {}
for _m in _TABLE1_MODELS:
    _BENCHMARK_PRESETS[f"table1-{_model_slug(_m)}"] = ("table1", _m)
    _BENCHMARK_PRESETS[f"table4-{_model_slug(_m)}"] = ("table4", _m)


def build_preset(name: str, n: int | None = None, master_seed: int | None = None) -> dict:
    """Resolve a preset name to {"command": ..., plus command parameters}."""
    if name in _BENCHMARK_PRESETS:
        table, model_name = _BENCHMARK_PRESETS[name]
        params = _TABLE1 if table == "table1" else _TABLE4
        return _benchmark_preset(params, model_name, n, master_seed)
    seed = 2024 if master_seed is None else master_seed
    if name == "fig6-rb":
        nn = 10 if n is None else n
        return {
            "command": "rb",
            "n": nn,
            "model_name": "weight_nm1",
            "lam": 0.005 * nn,
            "lengths": [1, 2, 4, 7, 11],
            "n_sequences": 4,
            "backend": "density",
            "master_seed": seed,
            "compare_uxeb": True,
        }
    if name.startswith("fig7-virtual-alpha"):
        alpha = {"fig7-virtual-alpha0": 0.0,
                 "fig7-virtual-alpha025": 0.25,
                 "fig7-virtual-alpha1": 1.0}.get(name)
        if alpha is None:
            raise KeyError(name)
        return {
            "command": "virtual-exp",
            "n": 10 if n is None else n,
            "gamma1": 0.01,
            "gamma2": 0.02,
            "gamma3": alpha * 0.02,
            "L": 24,
            "master_seed": seed,
        }
    if name == "fig9-firstorder":
        # exact average fidelity vs the first-order series, via spinmodel cmd
        return {
            "command": "spinmodel",
            "n": 6 if n is None else n,
            "l_max": 15,
            "eps": 0.001,
            "exact_ef_L": 60,
            "support": (0,),
            "master_seed": seed,
        }
    if name == "fig10-spinmodel":
        return {
            "command": "spinmodel",
            "n": 8 if n is None else n,
            "l_max": 60,
            "eps": 0.001,
            "exact_ef_L": 0,
            "support": (0,),
            "master_seed": seed,
        }
    if name == "fig11-variance":
        return {
            "command": "variance",
            "n": 8 if n is None else n,
            "depths": [5, 10, 15, 20, 25, 30],
            "L": 400,
            "K": None,
            "gate_sets": ["haar2q", "cnot_haar1q"],
            "master_seed": seed,
        }
    raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


PRESET_NAMES = tuple(sorted(
    list(_BENCHMARK_PRESETS)
    + ["fig6-rb", "fig7-virtual-alpha0", "fig7-virtual-alpha025",
       "fig7-virtual-alpha1", "fig9-firstorder", "fig10-spinmodel",
       "fig11-variance"]
))
