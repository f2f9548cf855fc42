"""Figure rendering for the report path of each CLI mode.

Every figure-writing function takes already-computed data and a target
path; nothing here touches the simulation state.  The Agg backend is
forced so runs work headless, and figures are saved without volatile
metadata so identical runs produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE_KW = {"dpi": 150, "metadata": {"Software": "qtl"}}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_variance_figure(path, rec) -> None:
    """sqrt(V_x) against time, log scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(rec.t, np.sqrt(np.maximum(rec.var_x, 0.0)), lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\sqrt{V_x}$")
    _save(fig, path)


def save_phase_figure(path, rec) -> None:
    """Phase-space trace of (x, p) or (<X>, <P>)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(rec.mean_x, rec.mean_p, lw=0.5)
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    _save(fig, path)


def save_strobe_figure(path, points_by_run) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    for points in points_by_run:
        ax.plot([pt.x for pt in points], [pt.p for pt in points],
                ".", ms=1.5, alpha=0.6)
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    _save(fig, path)


def save_lyapunov_figure(path, res) -> None:
    """Mean log-separation curve with the fitted slope overlaid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(res.tau, res.mean_ln_delta, lw=1.0, label="mean ln $\\Delta$")
    lo, hi = res.fit_window
    mask = (res.tau >= lo) & (res.tau <= hi)
    if np.any(mask):
        t_fit = res.tau[mask]
        mid = res.mean_ln_delta[mask]
        intercept = float(np.mean(mid) - res.lam * np.mean(t_fit))
        ax.plot(t_fit, res.lam * t_fit + intercept, "--",
                label=rf"$\lambda = {res.lam:.3f} \pm {res.stderr:.3f}$")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$\ln \Delta$")
    ax.legend()
    _save(fig, path)


def save_sweep_figure(path, rows) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = [r.k for r in rows]
    lams = [r.result.lam for r in rows]
    errs = [r.result.stderr for r in rows]
    ax.errorbar(ks, lams, yerr=errs, fmt="o", capsize=3)
    for r in rows:
        if r.flatness != "ok":
            ax.annotate(r.flatness, (r.k, r.result.lam), fontsize=8,
                        xytext=(0, 8), textcoords="offset points", ha="center")
    ax.set_xscale("log")
    ax.set_xlabel("k")
    ax.set_ylabel(r"$\lambda$")
    _save(fig, path)
