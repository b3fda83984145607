"""End-to-end learning pipeline: table -> derived columns -> imputation ->
discretization -> bootstrap ensemble -> fitted network.

The pipeline produces a self-contained model record (a plain dict, JSON
ready) carrying the fitted network, the per-column discretization specs so
later evidence is binned exactly like the training data, the ensemble vote
detail, and enough provenance to reproduce the run bit-for-bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Mapping, Sequence

import pandas as pd

from . import ingest
from .discretize import ConstantColumnError, DiscretizationSpec, discretize_column
from .ingest import DerivedColumn, RawTable
from .jsonutil import canonical_dumps
from .model import DiscreteNetwork
from .structure import (
    CategoricalData,
    EdgeConstraints,
    EnsembleResult,
    bootstrap_ensemble,
    fit_cpts,
)


@dataclass(frozen=True)
class LearnConfig:
    """Everything a learning run depends on besides the dataset bytes."""

    key_column: str | None = None
    blacklist: tuple[tuple[str, str], ...] = ()
    whitelist: tuple[tuple[str, str], ...] = ()
    bootstraps: int = 1001
    threshold: float = 0.5
    seed: int = 0
    bins: int = 3
    alpha: float = 1.0
    n_jobs: int = 1
    derived: tuple[DerivedColumn, ...] = ()
    exclude: tuple[str, ...] = ()

    def constraints(self) -> EdgeConstraints:
        return EdgeConstraints(frozenset(self.blacklist), frozenset(self.whitelist))

    def to_dict(self) -> dict:
        return {
            "key_column": self.key_column,
            "blacklist": sorted(list(e) for e in self.blacklist),
            "whitelist": sorted(list(e) for e in self.whitelist),
            "bootstraps": self.bootstraps,
            "threshold": self.threshold,
            "seed": self.seed,
            "bins": self.bins,
            "alpha": self.alpha,
            "derived": [
                {"op": d.op, "name": d.name, "args": d.args} for d in self.derived
            ],
            "exclude": sorted(self.exclude),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "LearnConfig":
        return cls(
            key_column=doc.get("key_column"),
            blacklist=tuple(tuple(e) for e in doc.get("blacklist", [])),
            whitelist=tuple(tuple(e) for e in doc.get("whitelist", [])),
            bootstraps=int(doc.get("bootstraps", 1001)),
            threshold=float(doc.get("threshold", 0.5)),
            seed=int(doc.get("seed", 0)),
            bins=int(doc.get("bins", 3)),
            alpha=float(doc.get("alpha", 1.0)),
            n_jobs=int(doc.get("n_jobs", 1)),
            derived=tuple(ingest.parse_derived_spec(doc.get("derived", []))),
            exclude=tuple(doc.get("exclude", ())),
        )


def dataset_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def model_id(ds_hash: str, config: LearnConfig) -> str:
    payload = ds_hash + "\n" + canonical_dumps(config.to_dict())
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def prepare_table(table: RawTable, config: LearnConfig) -> tuple[
    CategoricalData,
    dict[str, DiscretizationSpec],
    dict[str, str],
    dict[str, int],
]:
    """Derive, impute and discretize a raw table into coded categorical data.

    Returns the coded data, the per-column discretization specs, a map of
    skipped columns to reasons, and the imputation report. The key column
    and explicitly excluded columns never become model variables.
    """
    if config.derived:
        table = ingest.derive(table, config.derived)
    table, fill_report = ingest.impute(table, config.seed)

    drop = set(config.exclude)
    if config.key_column:
        drop.add(config.key_column)

    frame = {}
    specs: dict[str, DiscretizationSpec] = {}
    skipped: dict[str, str] = {}
    state_orders: dict[str, Sequence[str]] = {}
    for col in table.columns:
        if col in drop:
            continue
        if table.is_numeric(col):
            try:
                spec, labels = discretize_column(
                    table.column_values(col), column=col, k=config.bins, seed=config.seed
                )
            except (ConstantColumnError, ValueError) as exc:
                skipped[col] = str(exc)
                continue
            specs[col] = spec
            frame[col] = labels
            state_orders[col] = spec.bin_labels
        else:
            values = [str(v) for v in table.column_values(col)]
            if len(set(values)) < 2:
                skipped[col] = "constant column"
                continue
            frame[col] = values
    data = CategoricalData.from_frame(pd.DataFrame(frame), state_orders)
    return data, specs, skipped, fill_report


def learn_model(
    table: RawTable,
    config: LearnConfig,
    ds_hash: str = "",
    on_phase: Callable[[str], None] | None = None,
    on_progress: Callable[[int, int], None] | None = None,
) -> dict:
    """Run the full pipeline and return a model record dict."""
    phase = on_phase or (lambda _: None)
    phase("ingesting")
    data, specs, skipped, fill_report = prepare_table(table, config)

    phase("learning")
    ensemble = bootstrap_ensemble(
        data,
        config.constraints(),
        n_bootstraps=config.bootstraps,
        vote_threshold=config.threshold,
        seed=config.seed,
        n_jobs=config.n_jobs,
        on_progress=on_progress,
    )

    phase("fitting")
    net = fit_cpts(ensemble.consensus, data, alpha=config.alpha)

    import json as _json

    record = {
        "id": model_id(ds_hash, config),
        "name": "",
        "created_at": datetime.now(timezone.utc).isoformat(),
        "network": _json.loads(net.to_json()),
        "discretization": [s.to_dict() for s in specs.values()],
        "ensemble": ensemble.to_dict(),
        "provenance": {
            "dataset_hash": ds_hash,
            "config": config.to_dict(),
            "skipped_columns": skipped,
            "imputation_report": fill_report,
        },
    }
    return record


def network_from_record(record: Mapping) -> DiscreteNetwork:
    import json as _json

    return DiscreteNetwork.from_json(_json.dumps(record["network"]))


def specs_from_record(record: Mapping) -> dict[str, DiscretizationSpec]:
    return {
        doc["column"]: DiscretizationSpec.from_dict(doc)
        for doc in record.get("discretization", [])
    }


def ensemble_from_record(record: Mapping) -> EnsembleResult | None:
    doc = record.get("ensemble")
    return EnsembleResult.from_dict(doc) if doc else None


def reproducible_view(record: Mapping) -> dict:
    """The record minus volatile fields; byte-compare this across runs."""
    view = dict(record)
    view.pop("created_at", None)
    return view
