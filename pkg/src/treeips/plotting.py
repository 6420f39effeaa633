"""Figures written next to the CSV/JSON reports (Agg backend, PNG)."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({"figure.dpi": 110, "font.size": 9, "axes.grid": True,
                     "grid.alpha": 0.3, "savefig.bbox": "tight"})


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_phase(rows, path):
    """Phi-hat against lambda with error bars, points coloured by class."""
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    colors = {"dies_out": "C3", "weak": "C1", "strong": "C2", "survives": "C0",
              "inconclusive": "0.5"}
    for d in sorted({r["d"] for r in rows}):
        sel = sorted((r for r in rows if r["d"] == d), key=lambda r: r["lam"])
        lam = [r["lam"] for r in sel]
        ax.errorbar(lam, [r["phi"] for r in sel], yerr=[2 * r["phi_se"] for r in sel],
                    fmt="-", color="0.6", lw=0.8, zorder=1)
        for r in sel:
            ax.scatter(r["lam"], r["phi"], color=colors.get(r["classification"], "k"), s=18,
                       zorder=2)
    ax.axhline(1.0, color="k", lw=0.6, ls="--")
    for c, col in colors.items():
        ax.scatter([], [], color=col, s=18, label=c)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$\hat\Phi(\lambda)$")
    ax.legend(fontsize=7, frameon=False)
    return _save(fig, path)


def plot_qscan(rows, path, lam=None):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    q = np.array([r["q"] for r in rows])
    ax.plot(q, [r["min_h"] for r in rows], label="min h(A)")
    ax2 = ax.twinx()
    ax2.plot(q, [r["min_ratio"] for r in rows], color="C1", label="min ratio")
    ax2.axhline(1 / 0.6369, color="C1", ls=":", lw=0.8)
    ax2.set_ylabel("ratio", color="C1")
    ax.axhline(0, color="k", lw=0.6, ls="--")
    ax.set_xlabel("q")
    ax.set_ylabel("min h over family")
    if lam is not None:
        ax.set_title(r"$\lambda=%g$" % lam)
    return _save(fig, path)


def plot_supermartingale(res, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    g = np.asarray(res["grid"])
    m = np.asarray(res["mean"])
    s = np.asarray(res["se"])
    ax.fill_between(g, m - 3 * s, m + 3 * s, alpha=0.3)
    ax.plot(g, m, "o-", ms=3)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$E[1/f(\tilde\xi_{t\wedge\tau})]$")
    return _save(fig, path)


def plot_chain(rows, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    N = [r["N"] for r in rows]
    ax.plot(N, [r["walk"] for r in rows], label="rescaled walk")
    ax.plot(N, [r["dominating"] for r in rows], label="dominating chain")
    ax.plot(N, [r["bound"] for r in rows], "--", label="lower-bound sum")
    ax.set_xlabel("N")
    ax.set_ylabel(r"$E^1[\tau_0\wedge\tau_N]$")
    ax.set_yscale("log")
    ax.legend(fontsize=7, frameon=False)
    return _save(fig, path)


def plot_traces(traces, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    for i, tr in enumerate(traces):
        g, e, s = np.asarray(tr["grid"]), np.asarray(tr["estimate"]), np.asarray(tr["se"])
        ax.errorbar(g, e, yerr=3 * s, fmt="o-", ms=3, color="C%d" % i,
                    label="%s %s B=%s" % (tr["model"], tr["initial"], tr["B"]))
        p = tr.get("predicted")
        if isinstance(p, float) and np.isfinite(p):
            ax.axhline(p, color="C%d" % i, ls="--", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("cylinder probability")
    ax.legend(fontsize=6, frameon=False)
    return _save(fig, path)


def plot_duality(rows, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    labels = [r["label"] for r in rows]
    z = [r["z"] for r in rows]
    ax.barh(range(len(z)), np.abs(z), color=["C2" if abs(v) <= 4 else "C3" for v in z])
    ax.axvline(4, color="k", ls="--", lw=0.8)
    ax.set_yticks(range(len(z)))
    ax.set_yticklabels(labels, fontsize=6)
    ax.set_xlabel("|z|")
    return _save(fig, path)
