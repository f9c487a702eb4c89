"""Matplotlib rendering for the CLI report paths: heatmaps, evaluation bar
charts, and training-trace curves, all written to files next to the
delimited outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .env import Environment
from .planner import CostMap


def _draw_environment(ax, env: Environment):
    for poly in env.obstacles:
        ax.fill(poly[:, 0], poly[:, 1], color="0.3", alpha=0.8, zorder=3)
    for obj in env.objects:
        ax.plot(*obj.position, marker="s", color="tab:brown", ms=5, zorder=4)
    for act in env.activities:
        h = act.human_position
        o = act.object_position
        ax.plot(*h, marker="o", color="tab:blue", ms=7, zorder=5)
        ax.plot(*o, marker="s", color="tab:orange", ms=6, zorder=5)
        ax.plot([h[0], o[0]], [h[1], o[1]], color="tab:blue", lw=0.8, alpha=0.6, zorder=4)
        ax.annotate(act.activity_type, h, fontsize=7, xytext=(3, 3),
                    textcoords="offset points", zorder=6)


def save_heatmap(cost_map: CostMap, path, env: Environment | None = None, title: str = ""):
    """Render a cost map (log color scale) to a PNG, optionally with the
    environment geometry overlaid."""
    fig, ax = plt.subplots(figsize=(6, 6 * cost_map.height / max(cost_map.width, 1)))
    extent = (
        cost_map.origin[0],
        cost_map.origin[0] + cost_map.width * cost_map.resolution,
        cost_map.origin[1],
        cost_map.origin[1] + cost_map.height * cost_map.resolution,
    )
    shown = np.log10(np.maximum(cost_map.values, 1e-300))
    im = ax.imshow(shown, origin="lower", extent=extent, cmap="inferno", aspect="equal")
    if cost_map.obstacle_mask.any():
        overlay = np.where(cost_map.obstacle_mask, 1.0, np.nan)
        ax.imshow(overlay, origin="lower", extent=extent, cmap="Greys",
                  vmin=0, vmax=1, alpha=0.55, aspect="equal")
    if env is not None:
        _draw_environment(ax, env)
    fig.colorbar(im, ax=ax, label="log10 cost")
    if title:
        ax.set_title(title)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_plan_figure(cost_map: CostMap, waypoints, path, env: Environment | None = None):
    """Planned path drawn over the cost map."""
    fig, ax = plt.subplots(figsize=(6, 6 * cost_map.height / max(cost_map.width, 1)))
    extent = (
        cost_map.origin[0],
        cost_map.origin[0] + cost_map.width * cost_map.resolution,
        cost_map.origin[1],
        cost_map.origin[1] + cost_map.height * cost_map.resolution,
    )
    ax.imshow(np.log10(np.maximum(cost_map.values, 1e-300)), origin="lower",
              extent=extent, cmap="inferno", aspect="equal")
    if env is not None:
        _draw_environment(ax, env)
    pts = np.asarray(waypoints)
    ax.plot(pts[:, 0], pts[:, 1], "-o", color="cyan", ms=3, lw=1.6)
    ax.plot(*pts[0], marker="^", color="lime", ms=9)
    ax.plot(*pts[-1], marker="*", color="white", ms=12)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_eval_charts(rows, path, k: int = 5):
    """Misclassification and nDCG@k bars per algorithm."""
    names = [r.algorithm for r in rows]
    rates = [r.misclassification for r in rows]
    errs = [r.stderr for r in rows]
    ndcgs = [r.ndcg_at.get(k, float("nan")) for r in rows]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    xs = np.arange(len(names))
    ax1.bar(xs, rates, yerr=errs, capsize=3, color="tab:red", alpha=0.85)
    ax1.set_xticks(xs, names, rotation=30, ha="right")
    ax1.set_ylabel("misclassification rate")
    ax1.axhline(0.5, color="0.5", lw=0.8, ls="--")
    ax2.bar(xs, ndcgs, color="tab:green", alpha=0.85)
    ax2.set_xticks(xs, names, rotation=30, ha="right")
    ax2.set_ylabel(f"nDCG@{k}")
    ax2.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_trace_plot(trace_dict: dict, path):
    """Average log-likelihood per iteration for every restart."""
    fig, ax = plt.subplots(figsize=(6, 4))
    restarts = sorted({e["restart"] for e in trace_dict["entries"]})
    for restart in restarts:
        entries = [e for e in trace_dict["entries"] if e["restart"] == restart]
        ax.plot(
            [e["iteration"] for e in entries],
            [e["avg_log_likelihood"] for e in entries],
            marker=".",
            label=f"restart {restart}"
            + (" (best)" if restart == trace_dict.get("best_restart") else ""),
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("average log-likelihood")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
