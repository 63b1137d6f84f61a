"""Report figures rendered to SVG files.

Uses the Agg backend so runs never need a display, and pins the SVG hash
salt plus the document date so repeated runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "forta"

import matplotlib.pyplot as plt  # noqa: E402

_COLORS = {"fedavg": "tab:gray", "krum": "tab:blue", "modified_krum": "tab:red"}


def accuracy_plot(logs, path) -> None:
    """Test accuracy per round, one series per selection rule."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for log in logs:
        rule = log.records[0].rule if log.records else log.config.rule
        rounds = [rec.round for rec in log.records]
        acc = [rec.accuracy for rec in log.records]
        ax.plot(rounds, acc, label=rule, color=_COLORS.get(rule),
                linewidth=1.5)
        aborted = [(rec.round, rec.accuracy) for rec in log.records if rec.aborted]
        if aborted:
            ax.scatter([r for r, _ in aborted], [a for _, a in aborted],
                       marker="x", color=_COLORS.get(rule), s=30)
    ax.set_xlabel("round")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def flag_profile_plot(logs, path) -> None:
    """Total per-user flag counts summed over rounds, one panel per rule."""
    logs = [log for log in logs if log.records]
    if not logs:
        return
    fig, axes = plt.subplots(1, len(logs), figsize=(4.0 * len(logs), 3.0),
                             squeeze=False)
    for ax, log in zip(axes[0], logs):
        rule = log.records[0].rule
        n = log.config.n_users
        totals = [sum(int(rec.profile_counts[u - 1]) for rec in log.records)
                  for u in range(1, n + 1)]
        byz = set(log.config.attack.byzantine_set)
        colors = ["tab:red" if u in byz else "tab:blue" for u in range(1, n + 1)]
        ax.bar(range(1, n + 1), totals, color=colors)
        ax.set_title(rule)
        ax.set_xlabel("user")
        ax.set_ylabel("flags")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
