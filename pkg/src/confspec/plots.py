"""Static SVG figures for bound reports."""

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "confspec"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Date": None, "Creator": "confspec"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_cap_landscape(landscape, path):
    """``min_t |psi(p, t)|`` over the searched directions.

    On S^2 directions are drawn by longitude and latitude; in higher
    dimensions by grid index.
    """
    dirs = np.asarray(landscape["directions"])
    vals = np.asarray(landscape["psi_norm"]).min(axis=1)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    if dirs.shape[1] == 3:
        lon = np.degrees(np.arctan2(dirs[:, 1], dirs[:, 0]))
        lat = np.degrees(np.arcsin(np.clip(dirs[:, 2], -1, 1)))
        sc = ax.scatter(lon, lat, c=np.log10(vals + 1e-300), cmap="viridis", s=28)
        best = landscape.get("best")
        if best:
            p = np.asarray(best["p"])
            ax.plot(np.degrees(np.arctan2(p[1], p[0])), np.degrees(np.arcsin(p[2])), "r*", ms=12)
        ax.set_xlabel("longitude of p (deg)")
        ax.set_ylabel("latitude of p (deg)")
        fig.colorbar(sc, ax=ax, label="log10 min_t |psi|")
    else:
        ax.semilogy(np.arange(len(vals)), vals, "o", ms=3)
        ax.set_xlabel("direction index")
        ax.set_ylabel("min_t |psi|")
    ax.set_title("cap search landscape")
    fig.tight_layout()
    return _save(fig, path)


def plot_chain(report, path):
    """Bar chart of the normalized quantities along the bound chain."""
    d = report if isinstance(report, dict) else report.to_dict()
    labels = ["lambda2 vol", "rayleigh vol", "2 folded area", "4 Vc estimate"]
    vals = [d["lambda2_bar"], d["rayleigh_bound"] * d["volume"], 2.0 * d["folded_area"], d["theorem_rhs"]]
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    colors = ["tab:blue", "tab:orange", "tab:green", "tab:red"]
    ax.bar(range(4), vals, color=colors)
    for i, v in enumerate(vals):
        ax.text(i, v, f"{v:.3f}", ha="center", va="bottom", fontsize=8)
    ax.set_xticks(range(4))
    ax.set_xticklabels(labels)
    ax.set_ylabel("normalized value")
    ax.set_title("chain " + ("holds" if d["chain_ok"] else "VIOLATED"))
    fig.tight_layout()
    return _save(fig, path)
