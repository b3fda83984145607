"""Command line interface mirroring the service endpoints.

learn / query / policy run fully in-process against a model JSON file;
serve starts the HTTP facade; report renders figures and CSVs for a model.
Flags can be overridden by PORT, DATA_DIR and DEFAULT_SEED environment
variables where noted.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import decision, inference, ingest, pipeline, report
from .jsonutil import canonical_dumps
from .structure import EdgeConstraints


def _echo_json(doc) -> None:
    click.echo(canonical_dumps(doc))


def _load_record(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _resolve_evidence(record: dict, evidence: dict) -> dict[str, str]:
    specs = pipeline.specs_from_record(record)
    resolved = {}
    for var, value in evidence.items():
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            spec = specs.get(var)
            if spec is None:
                raise click.ClickException(
                    f"variable {var!r} has no discretization; pass a state label"
                )
            resolved[var] = spec.bin_labels[spec.bin_index(float(value))]
        else:
            resolved[var] = str(value)
    return resolved


@click.group()
def main() -> None:
    """Bayesian-network learning, inference and policy toolkit."""


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True),
              help="Training CSV (RFC-4180, header row).")
@click.option("--key-column", default=None, help="Unique row identifier; excluded from the model.")
@click.option("--blacklist", "blacklist_path", type=click.Path(exists=True), default=None,
              help='JSON constraints: {"blacklist": [["*","State"], ...], "whitelist": [...]}.')
@click.option("--derived-spec", "derived_path", type=click.Path(exists=True), default=None,
              help="JSON list of derived columns: [{op, name, args}, ...].")
@click.option("--bootstraps", default=1001, show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--bins", default=3, show_default=True)
@click.option("--alpha", default=1.0, show_default=True)
@click.option("--jobs", default=1, show_default=True, help="Bootstrap worker processes.")
@click.option("--exclude", default="", help="Comma-separated columns to leave out of the model.")
@click.option("--out", "out_path", required=True, type=click.Path())
def learn(data_path, key_column, blacklist_path, derived_path, bootstraps, threshold,
          seed, bins, alpha, jobs, exclude, out_path) -> None:
    """Learn an ensemble-averaged network from a CSV and write the model JSON."""
    constraints_doc = {}
    if blacklist_path:
        constraints_doc = json.loads(Path(blacklist_path).read_text())
        if isinstance(constraints_doc, list):
            constraints_doc = {"blacklist": constraints_doc}
    derived = []
    if derived_path:
        derived = json.loads(Path(derived_path).read_text())
    config = pipeline.LearnConfig.from_dict({
        "key_column": key_column,
        "blacklist": constraints_doc.get("blacklist", []),
        "whitelist": constraints_doc.get("whitelist", []),
        "bootstraps": bootstraps,
        "threshold": threshold,
        "seed": seed,
        "bins": bins,
        "alpha": alpha,
        "n_jobs": jobs,
        "derived": derived,
        "exclude": [c for c in exclude.split(",") if c],
    })
    raw = Path(data_path).read_bytes()
    table = ingest.parse_csv(raw.decode("utf-8"), key_column, source=data_path)

    def progress(k: int, n: int) -> None:
        if k == n or k % max(1, n // 20) == 0:
            click.echo(f"bootstrap {k}/{n}", err=True)

    record = pipeline.learn_model(
        table, config, ds_hash=pipeline.dataset_hash(raw), on_progress=progress
    )
    Path(out_path).write_text(canonical_dumps(record))
    click.echo(f"model {record['id']} -> {out_path}", err=True)
    consensus = record["ensemble"]["consensus_edges"]
    click.echo(f"consensus edges: {len(consensus)}", err=True)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--variable", required=True)
@click.option("--evidence", default="{}", help='JSON map, e.g. {"A": "t", "income": 45000}.')
@click.option("--method", type=click.Choice(["exact", "approx"]), default="exact",
              show_default=True)
@click.option("--samples", default=10000, show_default=True)
@click.option("--repeats", default=25, show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
def query(model_path, variable, evidence, method, samples, repeats, seed) -> None:
    """Posterior of one variable given evidence (exact or rejection-sampled)."""
    record = _load_record(model_path)
    net = pipeline.network_from_record(record)
    resolved = _resolve_evidence(record, json.loads(evidence))
    if method == "exact":
        tree = inference.compile_clique_tree(net)
        dist = inference.posterior(tree, variable, resolved)
    else:
        dist = inference.rejection_sample(
            net, variable, resolved, n_samples=samples, repeats=repeats, seed=seed
        )
    _echo_json(dist.as_dict())


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--decisions", required=True, help="Comma-separated decision variables.")
@click.option("--utility", required=True,
              help='JSON: {"variable": "H", "preferences": {"state": value}}.')
@click.option("--evidence", default="{}")
@click.option("--mode", type=click.Choice(["exact", "gibbs"]), default="exact",
              show_default=True)
@click.option("--iterations", default=1000, show_default=True)
@click.option("--burn-in", default=None, type=int)
@click.option("--beta", default=5.0, show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--top-k", default=None, type=int)
def policy(model_path, decisions, utility, evidence, mode, iterations, burn_in,
           beta, seed, top_k) -> None:
    """Rank decision combinations by expected utility."""
    record = _load_record(model_path)
    net = pipeline.network_from_record(record)
    u_doc = json.loads(utility)
    spec = decision.UtilitySpec(u_doc["variable"], u_doc["preferences"], u_doc.get("name", ""))
    bdn = decision.DecisionNetwork(net, [d for d in decisions.split(",") if d], [spec])
    resolved = _resolve_evidence(record, json.loads(evidence))
    table = decision.policy_table(
        bdn, resolved, mode=mode, top_k=top_k, iterations=iterations,
        burn_in=burn_in, beta=beta, seed=seed,
    )
    _echo_json(table.to_dict())


@main.command("report")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", default="reports", show_default=True, type=click.Path())
@click.option("--query", "queries", multiple=True,
              help='Repeatable. JSON: {"variable": "X", "evidence": {...}, "method": "exact"}.')
@click.option("--policy-request", default=None,
              help='JSON: {"decisions": [...], "utility": {...}, "evidence": {...}, "mode": "exact"}.')
@click.option("--fmt", default="png", show_default=True, type=click.Choice(["png", "svg", "pdf"]))
def report_cmd(model_path, out_dir, queries, policy_request, fmt) -> None:
    """Render the figure + CSV report bundle for a learned model."""
    record = _load_record(model_path)
    net = pipeline.network_from_record(record)
    tree = inference.compile_clique_tree(net)

    query_docs = []
    for q in queries:
        q_doc = json.loads(q)
        resolved = _resolve_evidence(record, q_doc.get("evidence") or {})
        if q_doc.get("method", "exact") == "exact":
            dist = inference.posterior(tree, q_doc["variable"], resolved)
        else:
            dist = inference.rejection_sample(
                net, q_doc["variable"], resolved,
                n_samples=int(q_doc.get("n_samples", 10000)),
                repeats=int(q_doc.get("repeats", 25)),
                seed=int(q_doc.get("seed", 0)),
            )
        query_docs.append(dist.as_dict())

    policy_doc = None
    if policy_request:
        p = json.loads(policy_request)
        u_doc = p["utility"]
        spec = decision.UtilitySpec(u_doc["variable"], u_doc["preferences"], u_doc.get("name", ""))
        bdn = decision.DecisionNetwork(net, p["decisions"], [spec])
        bdn._tree = tree
        table = decision.policy_table(
            bdn,
            _resolve_evidence(record, p.get("evidence") or {}),
            mode=p.get("mode", "exact"),
            top_k=p.get("top_k"),
            iterations=int(p.get("iterations", 1000)),
            burn_in=p.get("burn_in"),
            beta=float(p.get("beta", 5.0)),
            seed=int(p.get("seed", 0)),
        )
        policy_doc = table.to_dict()

    written = report.generate_report(record, out_dir, query_docs, policy_doc, fmt)
    for path in written:
        click.echo(str(path))


@main.command()
@click.option("--port", default=8330, show_default=True, envvar="PORT", type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default="bdnet-data", show_default=True, envvar="DATA_DIR")
@click.option("--seed", default=0, show_default=True, envvar="DEFAULT_SEED", type=int)
def serve(port, host, data_dir, seed) -> None:
    """Run the HTTP service (uvicorn)."""
    import uvicorn

    from .service import create_app

    app = create_app(data_dir, default_seed=seed)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
