"""Figure rendering for the report commands.

Each report command writes its delimited table plus a PNG next to it;
everything here is headless (Agg backend).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def plot_sweep(curve, path):
    """Mean EER and accuracy versus retained template size."""
    sizes = [p.size for p in curve]
    fig, ax1 = plt.subplots(figsize=(7, 4.5))
    ax1.plot(sizes, [100 * p.mean_eer for p in curve], "o-", color="tab:red", label="EER")
    ax1.set_xlabel("template size (features kept)")
    ax1.set_ylabel("EER (%)", color="tab:red")
    ax1.tick_params(axis="y", labelcolor="tab:red")
    ax2 = ax1.twinx()
    ax2.plot(sizes, [100 * p.mean_accuracy for p in curve], "s--", color="tab:blue",
             label="accuracy")
    ax2.set_ylabel("accuracy (%)", color="tab:blue")
    ax2.tick_params(axis="y", labelcolor="tab:blue")
    if len(sizes) > 1 and max(sizes) / max(1, min(sizes)) >= 8:
        ax1.set_xscale("log")
    ax1.set_title("Performance vs. biometric template size")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_protection(rows, path):
    """EER per protection configuration."""
    labels = [f"{r.case}\n{r.n_features} {r.feature_kind}" for r in rows]
    values = [100 * r.eer for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    colors = ["tab:gray"] + ["tab:green"] * (len(rows) - 1)
    ax.bar(labels, values, color=colors[: len(rows)])
    ax.set_ylabel("EER (%)")
    ax.set_title("Unprotected vs. protected template performance")
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.2f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_cost_report(rows, storage_rows, path):
    """Two panels: per-KB storage costs and per-operation gas by scheme."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 4.8),
                                   gridspec_kw={"width_ratios": [1, 2.4]})

    ops = [r["operation"] for r in storage_rows]
    ax1.bar(ops, [r["gas"] for r in storage_rows], color=["tab:blue", "tab:orange"])
    ax1.set_yscale("log")
    ax1.set_ylabel("gas per KB")
    ax1.set_title("Non-volatile storage cost")
    for i, r in enumerate(storage_rows):
        ax1.text(i, r["gas"], f"{r['gas']:,}", ha="center", va="bottom", fontsize=9)

    writes = [r for r in rows if r["operation"] == "create"]
    labels = [f"{r['case']}\n({r['scheme']})" for r in writes]
    ax2.bar(labels, [r["gas"] for r in writes], color="tab:green")
    ax2.set_yscale("log")
    ax2.set_ylabel("gas per creation")
    ax2.set_title("Template creation cost by scheme")
    ax2.tick_params(axis="x", labelsize=7, rotation=30)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
