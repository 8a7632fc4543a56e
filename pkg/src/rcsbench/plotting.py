"""Figure rendering for CLI reports; matplotlib with the file-only Agg backend."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_decay",
    "plot_rb",
    "plot_variance",
    "plot_virtual",
    "plot_spinmodel",
    "plot_firstorder",
]


def plot_decay(report, path) -> None:
    """Per-depth estimator means with error bars and the fitted exponentials."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for kind in sorted(report.points):
        pts = report.points[kind]
        d = np.array([p.depth for p in pts], dtype=float)
        m = np.array([p.mean for p in pts])
        se = np.array([np.nan if p.stderr is None else p.stderr for p in pts])
        eb = ax.errorbar(d, m, yerr=None if np.isnan(se).any() else se,
                         fmt="o", ms=4, capsize=2, label=kind)
        fit = report.fits.get(kind)
        if fit is not None:
            dd = np.linspace(d.min(), d.max(), 200)
            ax.plot(dd, fit.A * np.exp(-fit.lam * dd), "--", lw=1,
                    color=eb.lines[0].get_color(),
                    label=f"{kind} fit: lam={fit.lam:.4f}({fit.sigma_lambda:.4f})")
    if report.enr_true is not None:
        d_all = [p.depth for p in next(iter(report.points.values()))]
        dd = np.linspace(min(d_all), max(d_all), 200)
        ax.plot(dd, np.exp(-report.enr_true * dd), "k:", lw=1, label="exp(-ENR d)")
    ax.set_xlabel("depth d")
    ax.set_ylabel("estimator value")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rb(result, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    s = np.asarray(result.sequence_lengths, dtype=float)
    ss = np.linspace(s.min(), s.max(), 200)
    for parity, ax in enumerate(axes):
        for pair in result.pairs[parity]:
            m = result.survivals[parity][pair]
            e = result.error_rates[parity][pair]
            p = result.decay_params[parity][pair]
            a0 = m[0] - 0.25
            line, = ax.plot(s, m, "o", ms=4, label=f"{pair}: e={e:.4f}")
            ax.plot(ss, a0 * p ** (ss - s[0]) + 0.25, "--", lw=1,
                    color=line.get_color())
        ax.set_title(f"parity {parity + 1}")
        ax.set_xlabel("sequence length s")
        ax.legend(fontsize=7)
    axes[0].set_ylabel("pair |00> survival")
    fig.suptitle(f"lambda_srb = {result.lambda_srb:.4f}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_variance(rows, path) -> None:
    """rows: list of (gate_set, depth, value)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    gate_sets = sorted({r[0] for r in rows})
    for gs in gate_sets:
        d = [r[1] for r in rows if r[0] == gs]
        v = [r[2] for r in rows if r[0] == gs]
        ax.plot(d, v, "o-", label=gs)
    ax.set_xlabel("depth d")
    ax.set_ylabel("Var_C(sum_l A_l)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_virtual(result, path) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
    t = np.arange(1, result.decay_series.size + 1)
    axes[0].semilogy(t, result.decay_series, "o-")
    axes[0].set_title(f"population, Gamma1={result.Gamma1:.4f}")
    axes[0].set_xlabel("t")
    axes[1].semilogy(t, result.ramsey_series, "o-")
    axes[1].set_title(f"<X>, Gamma2={result.Gamma2:.4f}")
    axes[1].set_xlabel("t")
    pts = result.benchmark.points["fidelity"]
    d = [p.depth for p in pts]
    axes[2].semilogy(d, [p.mean for p in pts], "o")
    dd = np.linspace(min(d), max(d), 100)
    fit = result.benchmark.fits["fidelity"]
    axes[2].semilogy(dd, fit.A * np.exp(-fit.lam * dd), "--")
    axes[2].set_title(f"benchmark, lam={result.lam:.4f}")
    axes[2].set_xlabel("depth d")
    fig.suptitle(f"gamma3_hat = {result.gamma3_hat:.5f} +- {result.sigma_gamma3:.5f}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_spinmodel(ls, vals, limit, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ls, vals, "o-", label="E|<psi_l|psi>|^2")
    ax.axhline(limit, color="k", ls=":", label="Haar limit")
    ax.set_xlabel("error layer l")
    ax.set_ylabel("expected squared overlap")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_firstorder(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    d = [r.d for r in rows]
    ax.semilogy(d, [r.ratio1 for r in rows], "o-", label="EF1/F0")
    ax.semilogy(d, [abs(r.ratio2) for r in rows], "s-", label="|EF - F0 - EF1|/F0")
    ax.set_xlabel("depth d")
    ax.set_ylabel("ratio")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
