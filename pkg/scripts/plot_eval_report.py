#!/usr/bin/env python3
"""Render an eval_report.json as a confusion heatmap and PR curves.

Usage:
    python3 scripts/plot_eval_report.py path/to/eval_report.json [--out DIR]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("report", type=Path)
    parser.add_argument("--out", type=Path, default=None)
    args = parser.parse_args()

    data = json.loads(args.report.read_text(encoding="utf-8"))
    out_dir = args.out or args.report.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    labels = data["classes"] + ["background"]
    rates = np.array(data["normalized"])

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    im = ax.imshow(rates, cmap="Blues", vmin=0, vmax=1)
    ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(len(labels)):
        for j in range(len(labels)):
            ax.text(j, i, f"{rates[i][j]:.2f}", ha="center", va="center",
                    color="white" if rates[i][j] > 0.5 else "black", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    heatmap_path = out_dir / "confusion_heatmap.png"
    fig.savefig(heatmap_path, dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    for curve in data["curves"]:
        pts = curve["points"]
        if not pts:
            continue
        recalls = [r for r, _ in pts]
        precisions = [p for _, p in pts]
        ax.plot(recalls, precisions, marker="o", markersize=3,
                label=f"{curve['label']} (AUC {curve['auc']:.3f})")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower left")
    fig.tight_layout()
    pr_path = out_dir / "pr_curves.png"
    fig.savefig(pr_path, dpi=150)
    plt.close(fig)

    print(heatmap_path)
    print(pr_path)
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
