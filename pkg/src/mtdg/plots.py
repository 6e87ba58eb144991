"""PNG figures for the command-line reports (Agg backend, fixed metadata)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import atomic_write_bytes  # noqa: E402
from .moments import FLAG_PAIRS  # noqa: E402

# no timestamp or version in the file, so identical inputs give identical bytes
_META = {"Software": None, "Creation Time": None}


def _save(fig, path) -> Path:
    import io

    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata=_META)
    plt.close(fig)
    return atomic_write_bytes(path, buf.getvalue())


def plot_correlations(path, empirical=None, model=None, title: str = "") -> Path:
    """2x2 panels of C_{pi1,pi2}(l) on log-log axes (absolute values)."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 7), sharex=True)
    for ax, key in zip(axes.ravel(), FLAG_PAIRS):
        if empirical is not None:
            v = np.abs(np.asarray(empirical[key]))
            if empirical.stderr is not None:
                ax.errorbar(empirical.lags, v, yerr=empirical.stderr[key], fmt="o", ms=3,
                            label="empirical", alpha=0.7)
            else:
                ax.plot(empirical.lags, v, "o", ms=3, label="empirical")
        if model is not None:
            ax.plot(model.lags, np.abs(np.asarray(model[key])), "-", label="model")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_title(f"|C_{{{key[0]},{key[1]}}}(l)|")
        ax.set_xlabel("lag")
    axes[0, 0].legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_signature(path, lags, curves: dict, title: str = "") -> Path:
    """``curves``: label -> D(l) series on ``lags``."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, d in curves.items():
        ax.plot(lags, d, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("lag (events)")
    ax.set_ylabel("D(l)")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_lag_weights(path, lam, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    g = np.arange(1, len(lam) + 1)
    ax.plot(g, lam, "o-", ms=3)
    ax.set_xlabel("g")
    ax.set_ylabel("lambda_g")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_epe(path, report) -> Path:
    """Bar chart of EPE with 2-standard-error whiskers per predictor."""
    names = list(report.scores)
    epe = [report.scores[n].epe for n in names]
    se = [2 * report.scores[n].stderr for n in names]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, epe, yerr=se, capsize=4)
    lo = min(epe) - 3 * max(se) if names else 0
    ax.set_ylim(max(0.0, lo * 0.98), None)
    ax.set_ylabel("EPE")
    fig.tight_layout()
    return _save(fig, path)
