"""Render model reports: matplotlib figures plus delimited companions.

Every figure gets a CSV sibling with the same numbers, so reports are both
eyeballable and greppable. Layout is deterministic for a given model (no
random seeds involved), which keeps golden-image style tests stable.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .model import Dag  # noqa: E402


def _layered_positions(dag: Dag) -> dict[str, tuple[float, float]]:
    """Longest-path layering: parents above children, deterministic x order."""
    depth: dict[str, int] = {}
    for v in dag.topological_order():
        ps = dag.parents(v)
        depth[v] = 1 + max((depth[p] for p in ps), default=-1)
    layers: dict[int, list[str]] = {}
    for v, d in depth.items():
        layers.setdefault(d, []).append(v)
    pos = {}
    for d, members in layers.items():
        members.sort()
        for i, v in enumerate(members):
            x = (i + 1) / (len(members) + 1)
            pos[v] = (x, -float(d))
    return pos


def save_structure_figure(
    dag: Dag,
    path: str | Path,
    edge_strength: Mapping[tuple[str, str], float] | None = None,
    marked_nodes: Sequence[str] = (),
    title: str = "Consensus structure",
) -> Path:
    """Draw the DAG with edge width proportional to ensemble strength.

    ``marked_nodes`` (e.g. nodes with a wildcard incoming blacklist) render
    with a square outline so the constraint is visible.
    """
    pos = _layered_positions(dag)
    strength = edge_strength or {}
    fig, ax = plt.subplots(figsize=(max(6, len(dag.nodes) * 0.9), 6))
    for u, v in dag.edges:
        s = strength.get((u, v), strength.get((v, u), 1.0))
        x0, y0 = pos[u]
        x1, y1 = pos[v]
        ax.annotate(
            "",
            xy=(x1, y1), xytext=(x0, y0),
            arrowprops=dict(
                arrowstyle="-|>", lw=0.5 + 3.0 * s, color="0.35",
                shrinkA=16, shrinkB=16,
            ),
        )
        ax.text((x0 + x1) / 2, (y0 + y1) / 2, f"{s:.2f}", fontsize=7, color="0.4",
                ha="center", va="center")
    marked = set(marked_nodes)
    for v, (x, y) in pos.items():
        box = dict(
            boxstyle="square,pad=0.4" if v in marked else "round,pad=0.4",
            fc="#dbe9f6" if v in marked else "#f2f2f2",
            ec="#33557a" if v in marked else "0.3",
        )
        ax.text(x, y, v, ha="center", va="center", fontsize=9, bbox=box)
    ax.set_title(title)
    ax.set_axis_off()
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_posterior_figure(dist_doc: Mapping, path: str | Path) -> Path:
    """Bar chart of one distribution; approximate results carry error bars."""
    states = list(dist_doc["probabilities"].keys())
    probs = [dist_doc["probabilities"][s] for s in states]
    errs = None
    if dist_doc.get("std_error"):
        errs = [dist_doc["std_error"][s] for s in states]
    fig, ax = plt.subplots(figsize=(max(4, len(states) * 1.3), 4))
    xs = np.arange(len(states))
    ax.bar(xs, probs, yerr=errs, capsize=4, color="#5b8db8", edgecolor="0.25")
    for x, p in zip(xs, probs):
        ax.text(x, p, f"{p:.3f}", ha="center", va="bottom", fontsize=8)
    ax.set_xticks(xs)
    ax.set_xticklabels(states, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("probability")
    ax.set_ylim(0, 1.05)
    method = dist_doc.get("method", "exact")
    ax.set_title(f"P({dist_doc['variable']}) [{method}]")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_policy_figure(table_doc: Mapping, path: str | Path, max_rows: int = 10) -> Path:
    """Policy table as a figure: one column per decision node plus payoff."""
    nodes = list(table_doc["decision_nodes"])
    rows = table_doc["rows"][:max_rows]
    cells = [[r[n] for n in nodes] + [f"{r['payoff']:.3f}"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(5, 1.6 * (len(nodes) + 1)), 0.5 + 0.4 * len(cells)))
    ax.set_axis_off()
    tbl = ax.table(
        cellText=cells,
        colLabels=nodes + ["payoff"],
        loc="center",
        cellLoc="center",
    )
    tbl.auto_set_font_size(False)
    tbl.set_fontsize(8)
    for j in range(len(nodes) + 1):
        tbl[0, j].set_facecolor("#dce6f0")
    ax.set_title(f"Policy table ({table_doc['method']})", pad=12)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_edges_csv(ensemble_doc: Mapping, path: str | Path) -> Path:
    path = Path(path)
    consensus = {tuple(e) for e in ensemble_doc.get("consensus_edges", [])}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["from", "to", "strength", "in_consensus"])
        for rec in ensemble_doc["edge_strength"]:
            writer.writerow([
                rec["from"], rec["to"], repr(rec["strength"]),
                int((rec["from"], rec["to"]) in consensus),
            ])
    return path


def write_posterior_csv(dist_doc: Mapping, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        has_err = bool(dist_doc.get("std_error"))
        writer.writerow(["variable", "state", "probability"] + (["std_error"] if has_err else []))
        for state, p in dist_doc["probabilities"].items():
            row = [dist_doc["variable"], state, repr(p)]
            if has_err:
                row.append(repr(dist_doc["std_error"][state]))
            writer.writerow(row)
    return path


def write_policy_csv(table_doc: Mapping, path: str | Path) -> Path:
    path = Path(path)
    nodes = list(table_doc["decision_nodes"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(nodes + ["payoff"])
        for r in table_doc["rows"]:
            writer.writerow([r[n] for n in nodes] + [repr(r["payoff"])])
    return path


def generate_report(
    record: Mapping,
    out_dir: str | Path,
    query_results: Sequence[Mapping] = (),
    policy_result: Mapping | None = None,
    fmt: str = "png",
) -> list[Path]:
    """Write the full report bundle for a model record.

    Always: the structure figure and the edge-strength CSV. Per query
    result: a posterior bar chart and CSV. With a policy result: the ranked
    table figure and CSV. Returns every path written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    net_doc = record["network"]
    dag = Dag(
        [v["name"] for v in net_doc["variables"]],
        [tuple(e) for e in net_doc["edges"]],
    )
    ensemble_doc = record.get("ensemble")
    strength = {}
    if ensemble_doc:
        strength = {
            (r["from"], r["to"]): r["strength"] for r in ensemble_doc["edge_strength"]
        }
    blacklist = record.get("provenance", {}).get("config", {}).get("blacklist", [])
    marked = [v for u, v in blacklist if u == "*"]
    written.append(
        save_structure_figure(dag, out / f"structure.{fmt}", strength, marked)
    )
    if ensemble_doc:
        written.append(write_edges_csv(ensemble_doc, out / "edges.csv"))

    for doc in query_results:
        stem = f"posterior_{doc['variable']}"
        written.append(save_posterior_figure(doc, out / f"{stem}.{fmt}"))
        written.append(write_posterior_csv(doc, out / f"{stem}.csv"))

    if policy_result is not None:
        written.append(save_policy_figure(policy_result, out / f"policy.{fmt}"))
        written.append(write_policy_csv(policy_result, out / "policy.csv"))
    return written
