"""Static SVG figures with deterministic bytes."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_svg(fig, path, chash: str, version: str) -> None:
    with matplotlib.rc_context({"svg.hashsalt": chash, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg",
                    metadata={"Date": None, "Description": f"config_hash={chash} version={version}"})
    plt.close(fig)


def error_curves_figure(curves, fits=None, title: str = ""):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for cv in curves:
        lab = cv.method
        if fits and cv.method in fits:
            lab += f" (slope {fits[cv.method].slope:.2f})"
        ax.loglog(cv.Ns, cv.err2, "o-", ms=3, label=lab)
    ax.set_xlabel("N")
    ax.set_ylabel(r"$\|f - f_N\|^2$")
    ax.grid(True, which="both", lw=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def profile_figure(xi1, lo, hi, axis):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(xi1, lo, hi, alpha=0.3, label="min/max over cross ratios")
    ax.plot(xi1, axis, lw=1, label="on the axis")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\xi_1$")
    ax.set_ylabel(r"$\Phi(\xi, 0)$")
    ax.legend()
    fig.tight_layout()
    return fig


def slice_figure(vol, axis: int = 2):
    d = np.take(vol.data, vol.n // 2, axis=axis)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.imshow(d.T, origin="lower", extent=(0, 1, 0, 1), cmap="gray", interpolation="nearest")
    ax.set_xticks([0, 0.5, 1])
    ax.set_yticks([0, 0.5, 1])
    fig.tight_layout()
    return fig


def loglog_fit_figure(x, y, slope, intercept, xlabel: str, ylabel: str, base=np.e):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    x = np.asarray(x, dtype=float)
    ax.loglog(x, y, "o", ms=4)
    xs = np.geomspace(x.min(), x.max(), 50)
    ax.loglog(xs, np.exp(intercept) * xs ** slope if base == np.e else base ** intercept * xs ** slope,
              "--", lw=1, label=f"slope {slope:.2f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    ax.grid(True, which="both", lw=0.3)
    fig.tight_layout()
    return fig


def semilog_figure(x, y, xlabel: str, ylabel: str, label: str = ""):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogy(x, y, "o-", ms=4, label=label or None)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if label:
        ax.legend()
    ax.grid(True, which="both", lw=0.3)
    fig.tight_layout()
    return fig
