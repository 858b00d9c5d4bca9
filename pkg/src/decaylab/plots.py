"""Matplotlib renderers for the report path; every figure goes to a file."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["trace_figure", "bounds_figure", "sweep_figure"]

_FIGSIZE = (7.0, 4.5)


def trace_figure(trace, path, fit=None, title=""):
    """Energy trace on a log scale plus the gradient dissipation panel."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.0, 4.0))
    pos = trace.l2_sq > 0.0
    ax1.semilogy(trace.times[pos], trace.l2_sq[pos], "b-", lw=1.2, label=r"$\|u(t)\|_2^2$")
    if fit is not None and fit.kind == "exp":
        ref = trace.l2_sq[pos][0] * np.exp(-fit.rate * (trace.times[pos] - trace.times[pos][0]))
        ax1.semilogy(trace.times[pos], ref, "k--", lw=0.8, label=f"exp rate {fit.rate:.3g}")
    elif fit is not None and fit.kind == "power":
        t0 = max(trace.times[pos][0], 1e-12)
        mask = trace.times[pos] > 0
        tt = trace.times[pos][mask]
        ref = trace.l2_sq[pos][mask][-1] * (tt / tt[-1]) ** fit.exponent
        ax1.semilogy(tt, ref, "k--", lw=0.8, label=f"power slope {fit.exponent:.3g}")
    ax1.set_xlabel("t")
    ax1.set_ylabel("squared L2 norm")
    ax1.legend(fontsize=9)
    ax2.plot(trace.times, trace.grad_p, "r-", lw=1.0)
    ax2.set_xlabel("t")
    ax2.set_ylabel(r"$\int |\nabla u|^p$")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def bounds_figure(times, gamma, curves, path, title=""):
    """Trace against one or more bound curves, log scale."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    gamma = np.asarray(gamma, dtype=float)
    pos = gamma > 0.0
    ax.semilogy(np.asarray(times)[pos], gamma[pos], "b-", lw=1.4, label="trace")
    styles = ("k--", "g-.", "m:", "c--")
    for curve, style in zip(curves, styles):
        cpos = curve.values > 0.0
        ax.semilogy(curve.times[cpos], curve.values[cpos], style, lw=1.0, label=curve.provenance)
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(fontsize=9)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def sweep_figure(rows, axis_name, path, metric="sup_l2"):
    """One metric across the sweep axis."""
    ok = [r for r in rows if r.get("status") == "ok" and r.get(metric) is not None]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    if ok:
        xs = [r["axis_value"] for r in ok]
        ys = [r[metric] for r in ok]
        ax.plot(xs, ys, "bo-", lw=1.0)
    ax.set_xlabel(axis_name)
    ax.set_ylabel(metric)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
