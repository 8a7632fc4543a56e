"""Command-line entry point: configuration, dispatch, persistence, figures.

Every command writes its results plus a manifest.json recording the config
hash, tool version, seed, timestamps, and all emitted files. Exit codes:
0 success, 1 runtime failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import circuit_to_json, sample_rqc
from .noise import NoiseModel, enr_of_model, model_from_json, preset_model
from .presets import PRESET_NAMES, build_preset
from .protocols import (
    BenchmarkConfig,
    benchmark_config_from_json,
    benchmark_config_to_json,
    first_order_check,
    rcs_benchmark,
    report_per_depth_csv,
    report_to_json,
    simultaneous_rb,
    virtual_experiment,
)
from .rng import spawn_rng
from .spinmodel import (
    error_gates_for_support,
    expected_overlap_sq,
    first_order_fidelity,
    haar_limit,
)
from .statevec import run_circuit, sample_bitstrings, write_probabilities
from .stats import al_covariance

__all__ = ["main"]


class ConfigError(Exception):
    """User-facing configuration problem; maps to exit code 2."""


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _config_hash(doc) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _write_manifest(out: Path, config_doc, master_seed, outputs, started: str) -> None:
    doc = {
        "config_hash": _config_hash(config_doc),
        "tool_version": __version__,
        "master_seed": master_seed,
        "started_at": started,
        "finished_at": _utcnow(),
        "outputs": sorted(outputs),
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_ints(text: str) -> list[int]:
    """Comma list "4,8,12" or inclusive range "4:12:4"."""
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        if len(parts) == 2:
            lo, hi, step = parts[0], parts[1], 1
        elif len(parts) == 3:
            lo, hi, step = parts
        else:
            raise ConfigError(f"bad range {text!r}; use lo:hi[:step]")
        if step < 1 or hi < lo:
            raise ConfigError(f"bad range {text!r}")
        return list(range(lo, hi + 1, step))
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def _parse_noise(text: str, n: int) -> NoiseModel | None:
    """none | preset:NAME:LAM | file:PATH."""
    if text == "none":
        return NoiseModel(n=n, terms=())
    if text.startswith("preset:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("noise preset syntax: preset:NAME:LAM")
        try:
            return preset_model(parts[1], n, float(parts[2]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad noise preset {text!r}: {exc}") from exc
    if text.startswith("file:"):
        path = Path(text[5:])
        if not path.is_file():
            raise ConfigError(f"noise model file not found: {path}")
        model = model_from_json(path.read_text())
        if model.n != n:
            raise ConfigError(f"noise model n={model.n} does not match n={n}")
        return model
    raise ConfigError(f"bad --noise {text!r}; use none, preset:NAME:LAM, or file:PATH")


def _limit_threads(threads: int | None) -> None:
    if threads is None:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=threads)
    except ImportError:
        pass


def _resolve_benchmark_config(args) -> BenchmarkConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            config = benchmark_config_from_json(path.read_text())
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
    elif args.preset:
        try:
            job = build_preset(args.preset, n=args.n, master_seed=args.seed)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from exc
        if job["command"] != "benchmark":
            raise ConfigError(f"preset {args.preset!r} is not a benchmark preset")
        config = job["config"]
    else:
        if args.n is None or args.depths is None:
            raise ConfigError("need --config, --preset, or both --n and --depths")
        config = BenchmarkConfig(
            n=args.n,
            depths=_parse_ints(args.depths),
            L=args.circuits or 20,
            backend=args.backend or "mcwf",
            T=args.trajectories or 400,
            model=None,
            master_seed=args.seed or 0,
        )
        noise = args.noise or "none"
        if noise == "none" and config.backend == "statevec_sampling":
            config = dataclasses.replace(config, model=None)
        else:
            config = dataclasses.replace(config, model=_parse_noise(noise, config.n))

    # flag overrides apply on top of config files and presets
    updates = {}
    if args.backend:
        updates["backend"] = args.backend
    if args.trajectories:
        updates["T"] = args.trajectories
    if args.circuits:
        updates["L"] = args.circuits
    if args.depths and (args.config or args.preset):
        updates["depths"] = _parse_ints(args.depths)
    if args.seed is not None and args.config:
        updates["master_seed"] = args.seed
    if args.fit_range:
        vals = _parse_ints(args.fit_range)
        if len(vals) != 2:
            raise ConfigError("--fit-range takes lo,hi")
        updates["fit_range"] = (vals[0], vals[1])
    if args.noise and (args.config or args.preset):
        updates["model"] = _parse_noise(args.noise, args.n or config.n)
    if updates:
        config = dataclasses.replace(config, **updates)
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def cmd_benchmark(args) -> int:
    config = _resolve_benchmark_config(args)
    out = _out_dir(args)
    started = _utcnow()
    report = rcs_benchmark(config)

    report_doc = json.loads(report_to_json(report))
    (out / "report.json").write_text(report_to_json(report) + "\n")
    (out / "per_depth.csv").write_text(report_per_depth_csv(report))
    fits = {k: v["fit"] for k, v in report_doc["estimators"].items()}
    (out / "fit.json").write_text(json.dumps(fits, indent=2, sort_keys=True) + "\n")
    from .plotting import plot_decay

    plot_decay(report, out / "decay.png")
    _write_manifest(out, report_doc["config"], config.master_seed,
                    ["report.json", "per_depth.csv", "fit.json", "decay.png"], started)
    lam = {k: f"{report.fits[k].lam:.5f}({report.fits[k].sigma_lambda:.5f})"
           for k in sorted(report.fits)}
    print(f"benchmark n={config.n} done: lambda = {lam}, ENR_true = {report.enr_true}")
    return 0


def cmd_spinmodel(args) -> int:
    params = None
    if args.preset:
        try:
            params = build_preset(args.preset, n=args.n, master_seed=args.seed)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from exc
        if params["command"] != "spinmodel":
            raise ConfigError(f"preset {args.preset!r} is not a spinmodel preset")
    n = (params["n"] if params else args.n) or 8
    l_max = (params["l_max"] if params else args.lmax) or 30
    eps = params["eps"] if params else args.eps
    exact_L = params["exact_ef_L"] if params else args.exact_ef_circuits
    support = tuple(params["support"]) if params else tuple(_parse_ints(args.support))
    seed = (params["master_seed"] if params else args.seed) or 0
    if n % 2:
        raise ConfigError("spinmodel requires even n (ring brickwork)")
    if l_max < 1:
        raise ConfigError("need l_max >= 1")

    out = _out_dir(args)
    started = _utcnow()
    ls = list(range(1, l_max + 1))
    vals = [expected_overlap_sq(n, l, error_gates_for_support(n, l, support)) for l in ls]
    lines = [
        "# expected squared overlap of an error-injected state with the ideal state",
        "# columns: l (error depth unit, dimensionless), overlap_sq (dimensionless)",
        "l,overlap_sq",
    ]
    lines += [f"{l},{v:.17g}" for l, v in zip(ls, vals)]
    (out / "overlap.csv").write_text("\n".join(lines) + "\n")

    fo_lines = [
        "# zeroth/first-order average fidelity for per-qubit X error rate eps",
        f"# eps = {eps}",
        "d,F0,EF1",
    ]
    for d in ls:
        F0, EF1 = first_order_fidelity(n, d, eps)
        fo_lines.append(f"{d},{F0:.17g},{EF1:.17g}")
    (out / "first_order.csv").write_text("\n".join(fo_lines) + "\n")
    outputs = ["overlap.csv", "first_order.csv", "spinmodel.png"]

    from .plotting import plot_firstorder, plot_spinmodel

    plot_spinmodel(ls, vals, haar_limit(n), out / "spinmodel.png")

    summary = {"n": n, "l_max": l_max, "support": list(support), "eps": eps,
               "haar_limit": haar_limit(n), "first_value": vals[0], "last_value": vals[-1]}
    if exact_L:
        rows = first_order_check(n, l_max, eps, exact_L, seed)
        ef_lines = ["# exact average fidelity vs first-order series, per-qubit X channels",
                    f"# eps = {eps}, circuits L = {exact_L}",
                    "d,F0,EF1,EF,ratio1,ratio2"]
        ef_lines += [f"{r.d},{r.F0:.17g},{r.EF1:.17g},{r.EF:.17g},{r.ratio1:.17g},{r.ratio2:.17g}"
                     for r in rows]
        (out / "exact_ef.csv").write_text("\n".join(ef_lines) + "\n")
        plot_firstorder(rows, out / "first_order.png")
        outputs += ["exact_ef.csv", "first_order.png"]
        summary["first_order_dominates"] = bool(all(abs(r.ratio2) < r.ratio1 for r in rows))
    (out / "spinmodel.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    outputs.append("spinmodel.json")
    _write_manifest(out, summary, seed, outputs, started)
    print(f"spinmodel n={n}: l=1 -> {vals[0]:.6f}, l={l_max} -> {vals[-1]:.6g}, "
          f"Haar limit {haar_limit(n):.6g}")
    return 0


def cmd_virtual_exp(args) -> int:
    if args.preset:
        try:
            params = build_preset(args.preset, n=args.n, master_seed=args.seed)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from exc
        if params["command"] != "virtual-exp":
            raise ConfigError(f"preset {args.preset!r} is not a virtual-exp preset")
        n, g1, g2, g3 = params["n"], params["gamma1"], params["gamma2"], params["gamma3"]
        L, seed = params["L"], params["master_seed"]
    else:
        n = args.n or 10
        g1, g2 = args.gamma1, args.gamma2
        g3 = args.alpha * g2 if args.gamma3 is None else args.gamma3
        L, seed = args.circuits or 24, args.seed or 0
    if n % 2:
        raise ConfigError("ring layout requires even n")
    if min(g1, g2, g3) < 0:
        raise ConfigError("rates must be >= 0")

    out = _out_dir(args)
    started = _utcnow()
    res = virtual_experiment(n, g1, g2, g3, L=L, master_seed=seed)
    doc = {
        "n": n, "gamma1": g1, "gamma2": g2, "gamma3_true": g3,
        "Gamma1": res.Gamma1, "sigma_Gamma1": res.sigma_Gamma1,
        "Gamma2": res.Gamma2, "sigma_Gamma2": res.sigma_Gamma2,
        "lambda": res.lam, "sigma_lambda": res.sigma_lam,
        "gamma3_hat": res.gamma3_hat, "sigma_gamma3": res.sigma_gamma3,
        "master_seed": seed, "L": L,
    }
    (out / "virtual_exp.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    lines = ["# free-evolution series; population from |1..1>, <X> from |+..+>",
             "t,population,x_mean"]
    for ti in range(res.decay_series.size):
        lines.append(f"{ti + 1},{res.decay_series[ti]:.17g},{res.ramsey_series[ti]:.17g}")
    (out / "virtual_series.csv").write_text("\n".join(lines) + "\n")
    from .plotting import plot_virtual

    plot_virtual(res, out / "virtual_exp.png")
    _write_manifest(out, doc, seed,
                    ["virtual_exp.json", "virtual_series.csv", "virtual_exp.png"], started)
    print(f"virtual-exp n={n}: gamma3_hat = {res.gamma3_hat:.5f} +- {res.sigma_gamma3:.5f} "
          f"(true {g3})")
    return 0


def cmd_rb(args) -> int:
    compare_uxeb = False
    if args.preset:
        try:
            params = build_preset(args.preset, n=args.n, master_seed=args.seed)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from exc
        if params["command"] != "rb":
            raise ConfigError(f"preset {args.preset!r} is not an rb preset")
        n = params["n"]
        model = preset_model(params["model_name"], n, params["lam"])
        lengths, n_seq = params["lengths"], params["n_sequences"]
        backend, seed = params["backend"], params["master_seed"]
        compare_uxeb = params.get("compare_uxeb", False)
    else:
        if args.n is None or args.noise is None:
            raise ConfigError("need --preset or both --n and --noise")
        n = args.n
        model = _parse_noise(args.noise, n)
        lengths = _parse_ints(args.lengths)
        n_seq = args.sequences
        backend = args.backend or "density"
        seed = args.seed or 0
        compare_uxeb = args.compare_uxeb

    out = _out_dir(args)
    started = _utcnow()
    res = simultaneous_rb(n, model, lengths, n_seq, seed, backend=backend,
                          T=args.trajectories or 2000)
    lam_true = enr_of_model(model)
    doc = {
        "n": n,
        "sequence_lengths": lengths,
        "n_sequences": n_seq,
        "backend": backend,
        "master_seed": seed,
        "pauli_conversion_factor": res.pauli_factor,
        "error_rates": [
            {f"{a}-{b}": rates[(a, b)] for a, b in sorted(rates)}
            for rates in res.error_rates
        ],
        "lambda_srb": res.lambda_srb,
        "lambda_true": lam_true,
        "srb_over_true": None if lam_true == 0 else res.lambda_srb / lam_true,
        "srb_overestimates_2x": bool(lam_true > 0 and res.lambda_srb >= 2 * lam_true),
    }
    outputs = ["rb.json", "rb_survival.csv", "rb_survival.png"]
    if compare_uxeb:
        cfg = BenchmarkConfig(
            n=n, depths=[10, 13, 16, 19, 22, 25], L=40, backend="mcwf", T=400,
            model=model, estimators=("uxeb",), master_seed=seed + 1,
            fit_range=(10, 25), depth_mode="prefix")
        rep = rcs_benchmark(cfg)
        doc["lambda_uxeb"] = rep.fits["uxeb"].lam
        doc["sigma_lambda_uxeb"] = rep.fits["uxeb"].sigma_lambda
        doc["uxeb_over_true"] = None if lam_true == 0 else rep.fits["uxeb"].lam / lam_true
    (out / "rb.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    lines = ["# per-pair |00> survival means vs sequence length", "parity,pair,s,survival"]
    for parity in range(2):
        for pair in res.pairs[parity]:
            for s, v in zip(lengths, res.survivals[parity][pair]):
                lines.append(f"{parity + 1},{pair[0]}-{pair[1]},{s},{v:.17g}")
    (out / "rb_survival.csv").write_text("\n".join(lines) + "\n")
    from .plotting import plot_rb

    plot_rb(res, out / "rb_survival.png")
    _write_manifest(out, {k: doc[k] for k in ("n", "sequence_lengths", "n_sequences",
                                              "backend", "master_seed")},
                    seed, outputs, started)
    msg = f"rb n={n}: lambda_srb = {res.lambda_srb:.5f}, lambda_true = {lam_true:.5f}"
    if "lambda_uxeb" in doc:
        msg += f", lambda_uxeb = {doc['lambda_uxeb']:.5f}"
    print(msg)
    return 0


def cmd_variance(args) -> int:
    if args.preset:
        try:
            params = build_preset(args.preset, n=args.n, master_seed=args.seed)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from exc
        if params["command"] != "variance":
            raise ConfigError(f"preset {args.preset!r} is not a variance preset")
        n, depths, L, K = params["n"], params["depths"], params["L"], params["K"]
        gate_sets, seed = params["gate_sets"], params["master_seed"]
    else:
        n = args.n or 8
        depths = _parse_ints(args.depths or "5,10,15,20,25,30")
        L = args.circuits or 200
        K = None if not args.locations else args.locations
        gate_sets = (["haar2q", "cnot_haar1q"] if args.gate_set == "both"
                     else [args.gate_set])
        seed = args.seed or 0
    if n % 2:
        raise ConfigError("ring layout requires even n")

    out = _out_dir(args)
    started = _utcnow()
    rows = []
    for gi, gs in enumerate(gate_sets):
        for d in depths:
            val = al_covariance(n, d, L, K, spawn_rng(seed, gi, d), gate_set=gs)
            rows.append((gs, d, val))
    lines = ["# cross-circuit variance of the summed error-location overlaps",
             "gate_set,depth,variance"]
    lines += [f"{gs},{d},{v:.17g}" for gs, d, v in rows]
    (out / "variance.csv").write_text("\n".join(lines) + "\n")
    doc = {"n": n, "depths": depths, "L": L, "K": K, "gate_sets": gate_sets,
           "master_seed": seed,
           "values": {gs: {str(d): v for g2, d, v in rows if g2 == gs} for gs in gate_sets}}
    (out / "variance.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    from .plotting import plot_variance

    plot_variance(rows, out / "variance.png")
    _write_manifest(out, {k: doc[k] for k in ("n", "depths", "L", "K", "gate_sets",
                                              "master_seed")},
                    seed, ["variance.csv", "variance.json", "variance.png"], started)
    for gs in gate_sets:
        vals = [v for g2, d, v in rows if g2 == gs]
        print(f"variance {gs}: " + ", ".join(f"d={d}:{v:.4f}" for (_, d, _2), v
                                             in zip([r for r in rows if r[0] == gs], vals)))
    return 0


def cmd_sample(args) -> int:
    if args.n is None or args.depth is None:
        raise ConfigError("need --n and --depth")
    seed = args.seed or 0
    out = _out_dir(args)
    started = _utcnow()
    circ = sample_rqc(args.n, args.depth, gate_set=args.gate_set,
                      boundary=args.boundary, rng=seed)
    state = run_circuit(circ)
    samples = sample_bitstrings(state, args.samples, spawn_rng(seed, 1))
    (out / "samples.txt").write_text("\n".join(samples) + "\n")
    write_probabilities(out / "probs.bin", np.abs(state.amps) ** 2)
    (out / "circuit.json").write_text(circuit_to_json(circ) + "\n")
    doc = {"n": args.n, "depth": args.depth, "samples": args.samples,
           "gate_set": args.gate_set, "boundary": args.boundary, "master_seed": seed}
    _write_manifest(out, doc, seed, ["samples.txt", "probs.bin", "circuit.json"], started)
    print(f"sampled {args.samples} bitstrings from n={args.n} d={args.depth} circuit")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcsbench",
        description="Random-circuit-sampling noise benchmarking toolkit")
    parser.add_argument("--version", action="version", version=f"rcsbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset=True):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--n", type=int, default=None, help="number of qubits")
        p.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
        if preset:
            p.add_argument("--preset", default=None,
                           help=f"named preset; one of: {', '.join(PRESET_NAMES)}")

    b = sub.add_parser("benchmark", help="decay benchmark: fit the effective noise rate")
    common(b)
    b.add_argument("--config", default=None, help="BenchmarkConfig JSON file")
    b.add_argument("--backend", choices=("mcwf", "density", "statevec_sampling"),
                   default=None)
    b.add_argument("--trajectories", type=int, default=None, help="MCWF trajectories T")
    b.add_argument("--circuits", type=int, default=None, help="circuits per depth L")
    b.add_argument("--depths", default=None, help="comma list or lo:hi:step")
    b.add_argument("--fit-range", default=None, help="d_min,d_max")
    b.add_argument("--noise", default=None, help="none | preset:NAME:LAM | file:PATH")

    s = sub.add_parser("spinmodel", help="analytic expected overlaps and first-order series")
    common(s)
    s.add_argument("--lmax", type=int, default=None, help="maximum error depth")
    s.add_argument("--support", default="0", help="error support qubits, comma list")
    s.add_argument("--eps", type=float, default=0.001, help="per-qubit X rate")
    s.add_argument("--exact-ef-circuits", type=int, default=0,
                   help="if > 0, also compute exact average fidelity over this many circuits")

    v = sub.add_parser("virtual-exp", help="extract the correlated ZZ rate")
    common(v)
    v.add_argument("--gamma1", type=float, default=0.01)
    v.add_argument("--gamma2", type=float, default=0.02)
    v.add_argument("--gamma3", type=float, default=None)
    v.add_argument("--alpha", type=float, default=0.0, help="gamma3 = alpha * gamma2")
    v.add_argument("--circuits", type=int, default=None, help="benchmark circuits per depth")

    r = sub.add_parser("rb", help="simultaneous two-qubit randomized benchmarking")
    common(r)
    r.add_argument("--noise", default=None, help="none | preset:NAME:LAM | file:PATH")
    r.add_argument("--lengths", default="1,2,4,7,11", help="sequence lengths")
    r.add_argument("--sequences", type=int, default=4, help="sequences per length")
    r.add_argument("--backend", choices=("density", "mcwf"), default=None)
    r.add_argument("--trajectories", type=int, default=None, help="MCWF trajectories")
    r.add_argument("--compare-uxeb", action="store_true",
                   help="also run a uXEB benchmark under the same model")

    va = sub.add_parser("variance", help="cross-circuit variance of error-location overlaps")
    common(va)
    va.add_argument("--depths", default=None, help="comma list or lo:hi:step")
    va.add_argument("--circuits", type=int, default=None, help="circuits L")
    va.add_argument("--locations", type=int, default=0,
                    help="sampled error locations K per circuit; 0 = enumerate")
    va.add_argument("--gate-set", choices=("haar2q", "cnot_haar1q", "both"), default="both")

    sm = sub.add_parser("sample", help="sample bitstrings from one ideal circuit")
    common(sm, preset=False)
    sm.add_argument("--depth", type=int, default=None)
    sm.add_argument("--samples", type=int, default=10000)
    sm.add_argument("--gate-set", choices=("haar2q", "cnot_haar1q"), default="haar2q")
    sm.add_argument("--boundary", choices=("ring", "open"), default="ring")

    return parser


_COMMANDS = {
    "benchmark": cmd_benchmark,
    "spinmodel": cmd_spinmodel,
    "virtual-exp": cmd_virtual_exp,
    "rb": cmd_rb,
    "variance": cmd_variance,
    "sample": cmd_sample,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _limit_threads(getattr(args, "threads", None))
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # simulation/runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
