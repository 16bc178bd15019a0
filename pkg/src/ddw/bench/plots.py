"""Figures written next to the CSV outputs (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def gap_grid(rows, path) -> Path:
    """Heat map of the worst DDW gap per (N, m) cell."""
    ddw = [r for r in rows if r.mode == "ddw"]
    Ns = sorted({r.N for r in ddw})
    ms = sorted({r.m for r in ddw})
    grid = np.full((len(Ns), len(ms)), np.nan)
    for r in ddw:
        i, j = Ns.index(r.N), ms.index(r.m)
        grid[i, j] = np.nanmax([grid[i, j], r.gap])
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(np.log10(np.maximum(grid, 1e-16)), cmap="viridis", origin="lower")
    ax.set_xticks(range(len(ms)), [str(m) for m in ms])
    ax.set_yticks(range(len(Ns)), [str(n) for n in Ns])
    ax.set_xlabel("linking rows m")
    ax.set_ylabel("blocks N")
    ax.set_title("worst relative gap per cell")
    for i in range(len(Ns)):
        for j in range(len(ms)):
            if np.isfinite(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.1e}", ha="center", va="center", color="w", fontsize=7)
    fig.colorbar(im, ax=ax, label="log10 gap")
    return _save(fig, path)


def speedup_curve(hosts, speedups, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(hosts, speedups, "o-", label="measured")
    ax.plot(hosts, hosts, "--", color="grey", label="linear")
    ax.set_xlabel("worker hosts p")
    ax.set_ylabel("speedup t1 / tp")
    ax.legend()
    return _save(fig, path)


def utilization_bars(hosts, per_host, path) -> Path:
    """``per_host[i]`` lists the utilization of each host in the run with ``hosts[i]`` hosts."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for p, utils in zip(hosts, per_host):
        ax.scatter(np.full(len(utils), p), utils, s=18)
    ax.plot(hosts, [np.mean(u) for u in per_host], "k-", label="mean")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("worker hosts p")
    ax.set_ylabel("utilization T_u / (T_u + T_c + T_s)")
    ax.legend()
    return _save(fig, path)
