"""CSV metrics sink and chart emission.

metrics.csv holds one row per (round, party, phase):

* phase ``init``   -- round 0, accuracy after local initialization training,
  train_loss from the final initialization epoch;
* phase ``collab`` -- the accuracy trajectory, rounds 0..R. Round 0 repeats
  the post-initialization state (the trajectory's starting point); round t+1
  reports accuracy after round t's revisit and that round's mean train loss.

So a run with N parties and R rounds emits N init rows plus N*(R+1)
trajectory rows. Accuracies and losses carry six decimals, files end with a
trailing LF, and identical runs produce byte-identical files.

Charts are rebuilt from metrics.csv alone (no hidden state) and are optional:
headless runs never need them.
"""

from __future__ import annotations

import csv
import math
import os

from .config import SimulationConfig, effective_text
from .federation import SimulationResult

METRICS_HEADER = "round,party,phase,test_accuracy,train_loss"
SUMMARY_HEADER = "party,n,k,scheme,epsilon_nat,epsilon_log10,delta,final_accuracy"


def format_budget_value(value: float) -> str:
    if math.isinf(value):
        return "+inf"
    return f"{value:.10g}"


def metrics_lines(result: SimulationResult) -> list[str]:
    lines = [METRICS_HEADER]
    parties = range(len(result.init.accuracy))
    for party in parties:
        lines.append(
            f"0,{party},init,{result.init.accuracy[party]:.6f},{result.init.train_loss[party]:.6f}"
        )
    for party in parties:
        lines.append(
            f"0,{party},collab,{result.init.accuracy[party]:.6f},{result.init.train_loss[party]:.6f}"
        )
    for record in result.records:
        for party in parties:
            lines.append(
                f"{record.round_index + 1},{party},collab,"
                f"{record.post_revisit_accuracy[party]:.6f},{record.train_loss[party]:.6f}"
            )
    return lines


def write_metrics_csv(path: str, result: SimulationResult) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(metrics_lines(result)) + "\n")


def write_summary_csv(path: str, result: SimulationResult) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for party, budget in enumerate(result.party_budgets):
            fh.write(
                ",".join(
                    [
                        str(party),
                        str(result.party_n),
                        str(result.k),
                        result.scheme.value,
                        format_budget_value(budget.epsilon_nat),
                        format_budget_value(budget.epsilon_log10),
                        format_budget_value(budget.delta),
                        f"{result.final_accuracy[party]:.6f}",
                    ]
                )
                + "\n"
            )


def write_effective_config(path: str, config: SimulationConfig) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(effective_text(config))


def read_metrics_csv(path: str) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_HEADER.split(","):
            raise ValueError(f"unexpected metrics header: {reader.fieldnames}")
        return list(reader)


def write_accuracy_chart(metrics_path: str, svg_path: str) -> None:
    """Accuracy-vs-round per party, rendered to a self-contained SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in read_metrics_csv(metrics_path) if r["phase"] == "collab"]
    parties = sorted({int(r["party"]) for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for party in parties:
        series = sorted(
            ((int(r["round"]), float(r["test_accuracy"])) for r in rows if int(r["party"]) == party)
        )
        ax.plot([s[0] for s in series], [s[1] for s in series], marker="o", markersize=3,
                label=f"party {party}")
    ax.set_xlabel("communication round")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)


def write_run_outputs(out_dir: str, config: SimulationConfig, result: SimulationResult) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "metrics": os.path.join(out_dir, "metrics.csv"),
        "summary": os.path.join(out_dir, "summary.csv"),
        "effective_config": os.path.join(out_dir, "effective_config"),
    }
    write_metrics_csv(paths["metrics"], result)
    write_summary_csv(paths["summary"], result)
    write_effective_config(paths["effective_config"], config)
    if config.charts:
        paths["chart"] = os.path.join(out_dir, "accuracy.svg")
        write_accuracy_chart(paths["metrics"], paths["chart"])
    return paths
