"""File-rendered diagnostics figures for match results and benchmarks."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import MatchResult

__all__ = ["write_match_figures", "write_bench_figure"]


def write_match_figures(result: MatchResult, out_dir: str) -> list[str]:
    """Render balance and pair-cost figures under ``out_dir``.

    Returns the paths written; skips figures whose data is absent (no
    balance table, or an empty matching).
    """
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    if result.balance is not None and result.balance.rows:
        rows = result.balance.rows
        names = [r.name for r in rows]
        pre = [abs(r.smd_pre) if r.smd_pre is not None else np.nan for r in rows]
        post = [abs(r.smd_post) if r.smd_post is not None else np.nan for r in rows]
        y = np.arange(len(rows))
        fig, ax = plt.subplots(figsize=(6, 1 + 0.4 * len(rows)))
        ax.scatter(pre, y, marker="o", label="before", color="#777777")
        ax.scatter(post, y, marker="D", label="after", color="#1f77b4")
        ax.axvline(0.1, linestyle="--", color="#cccccc", linewidth=1)
        ax.set_yticks(y)
        ax.set_yticklabels(names)
        ax.invert_yaxis()
        ax.set_xlabel("|standardized mean difference|")
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        path = os.path.join(out_dir, "balance_smd.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if result.pair_records:
        costs = [w for _, _, w in result.pair_records]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(costs, bins=min(30, max(5, len(costs) // 2)), color="#1f77b4")
        ax.set_xlabel("pair cost")
        ax.set_ylabel("pairs")
        fig.tight_layout()
        path = os.path.join(out_dir, "pair_costs.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written


def write_bench_figure(records: list[dict], out_path: str) -> str:
    """Bar chart of build and solve wall times, one group per record."""
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    labels = [r.get("label", f"run {k + 1}") for k, r in enumerate(records)]
    build = [r.get("build_seconds", 0.0) for r in records]
    solve = [r.get("solve_seconds", 0.0) for r in records]
    x = np.arange(len(records))
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(records), 4))
    ax.bar(x - 0.2, build, width=0.4, label="build", color="#777777")
    ax.bar(x + 0.2, solve, width=0.4, label="solve", color="#1f77b4")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("seconds")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
