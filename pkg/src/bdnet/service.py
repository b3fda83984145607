"""HTTP facade: dataset upload, asynchronous learning jobs, query and policy.

Storage is a single directory of content-addressed blobs plus JSON
manifests; no external database. Model records are immutable once written,
so a restarted service serves everything learned before the restart. All
responses are canonical JSON (sorted keys, 17-significant-digit floats) so
identical requests produce byte-identical bodies.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from . import decision, inference, ingest, pipeline
from .jsonutil import canonical_dumps
from .model import InvalidAssignmentError

PHASES = ("queued", "ingesting", "learning", "fitting", "done", "failed")
_PHASE_FLOOR = {"queued": 0.0, "ingesting": 0.02, "learning": 0.05, "fitting": 0.95,
                "done": 1.0, "failed": 1.0}


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class JobStatus:
    """Pollable progress of one learning job; phases only move forward."""

    job_id: str
    dataset_id: str
    model_id: str | None = None
    phase: str = "queued"
    progress: float = 0.0
    bootstrap_done: int = 0
    bootstrap_total: int = 0
    error: str | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def advance(self, phase: str, progress: float | None = None) -> None:
        with self._lock:
            if PHASES.index(phase) < PHASES.index(self.phase):
                return
            self.phase = phase
            floor = _PHASE_FLOOR[phase]
            self.progress = max(self.progress, floor if progress is None else progress)

    def bootstrap_progress(self, done: int, total: int) -> None:
        with self._lock:
            self.bootstrap_done = done
            self.bootstrap_total = total
            self.progress = max(self.progress, 0.05 + 0.90 * done / max(total, 1))

    def as_dict(self) -> dict:
        doc = {
            "job_id": self.job_id,
            "dataset_id": self.dataset_id,
            "phase": self.phase,
            "progress": round(self.progress, 6),
            "error": self.error,
        }
        if self.phase == "learning":
            doc["detail"] = f"bootstrap {self.bootstrap_done} of {self.bootstrap_total}"
        if self.model_id:
            doc["model_id"] = self.model_id
        return doc


class ModelStore:
    """Content-addressed blobs and JSON manifests under one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "blobs").mkdir(parents=True, exist_ok=True)
        (self.root / "models").mkdir(parents=True, exist_ok=True)
        self._manifest_path = self.root / "datasets.json"
        self._lock = threading.Lock()

    def _manifest(self) -> dict:
        if self._manifest_path.exists():
            return json.loads(self._manifest_path.read_text())
        return {}

    def _write_manifest(self, manifest: dict) -> None:
        self._manifest_path.write_text(canonical_dumps(manifest))

    def put_dataset(self, data: bytes, key_column: str | None) -> tuple[str, dict]:
        ds_id = hashlib.sha256(data).hexdigest()
        table = ingest.parse_csv(data.decode("utf-8"), key_column, source=f"dataset {ds_id[:8]}")
        meta = {
            "id": ds_id,
            "key_column": key_column,
            "columns": table.columns,
            "n_rows": table.n_rows,
        }
        with self._lock:
            (self.root / "blobs" / ds_id).write_bytes(data)
            manifest = self._manifest()
            manifest[ds_id] = meta
            self._write_manifest(manifest)
        return ds_id, meta

    def dataset_meta(self, ds_id: str) -> dict:
        meta = self._manifest().get(ds_id)
        if meta is None:
            raise ServiceError(404, "dataset_not_found", f"no dataset {ds_id!r}")
        return meta

    def dataset_table(self, ds_id: str) -> ingest.RawTable:
        meta = self.dataset_meta(ds_id)
        data = (self.root / "blobs" / ds_id).read_bytes()
        return ingest.parse_csv(data.decode("utf-8"), meta["key_column"], source=ds_id[:8])

    def put_model(self, record: dict) -> None:
        path = self.root / "models" / f"{record['id']}.json"
        path.write_text(canonical_dumps(record))

    def get_model(self, model_id: str) -> dict:
        path = self.root / "models" / f"{model_id}.json"
        if not path.exists():
            raise ServiceError(404, "model_not_found", f"no model {model_id!r}")
        return json.loads(path.read_text())

    def list_models(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "models").glob("*.json"))


class Engine:
    """Shared application state: store, job registry, model cache."""

    def __init__(self, data_dir: str | Path, default_seed: int = 0):
        self.store = ModelStore(data_dir)
        self.default_seed = default_seed
        self.jobs: dict[str, JobStatus] = {}
        self.active_by_dataset: dict[str, str] = {}
        self._job_counter = 0
        self._lock = threading.Lock()
        self._model_cache: dict[str, tuple] = {}

    # -- learning jobs ----------------------------------------------------

    def start_learning(self, dataset_id: str, config_doc: Mapping) -> str:
        meta = self.store.dataset_meta(dataset_id)
        config = pipeline.LearnConfig.from_dict(
            {"key_column": meta["key_column"], **config_doc}
        )
        known = set(meta["columns"]) | {d.name for d in config.derived} | {"*"}
        bad = [
            list(e)
            for e in (tuple(config.blacklist) + tuple(config.whitelist))
            for n in e
            if n not in known
        ]
        if bad:
            raise ServiceError(422, "unknown_constraint_variable",
                               f"constraints reference unknown variables: {bad}")
        with self._lock:
            active = self.active_by_dataset.get(dataset_id)
            if active is not None and self.jobs[active].phase not in ("done", "failed"):
                return active
            self._job_counter += 1
            job_id = f"job-{self._job_counter:04d}-{dataset_id[:8]}"
            status = JobStatus(job_id, dataset_id)
            self.jobs[job_id] = status
            self.active_by_dataset[dataset_id] = job_id
        thread = threading.Thread(
            target=self._run_job, args=(status, config), daemon=True
        )
        thread.start()
        return job_id

    def _run_job(self, status: JobStatus, config: pipeline.LearnConfig) -> None:
        try:
            table = self.store.dataset_table(status.dataset_id)
            record = pipeline.learn_model(
                table,
                config,
                ds_hash=status.dataset_id,
                on_phase=status.advance,
                on_progress=status.bootstrap_progress,
            )
            self.store.put_model(record)
            status.model_id = record["id"]
            status.advance("done")
        except Exception as exc:  # noqa: BLE001 - job failures surface via status
            status.error = f"{type(exc).__name__}: {exc}"
            status.advance("failed")

    def job_status(self, job_id: str) -> JobStatus:
        status = self.jobs.get(job_id)
        if status is None:
            raise ServiceError(404, "job_not_found", f"no job {job_id!r}")
        return status

    # -- queries -----------------------------------------------------------

    def _loaded(self, model_id: str) -> tuple:
        if model_id not in self._model_cache:
            record = self.store.get_model(model_id)
            net = pipeline.network_from_record(record)
            specs = pipeline.specs_from_record(record)
            tree = inference.compile_clique_tree(net)
            self._model_cache[model_id] = (record, net, specs, tree)
        return self._model_cache[model_id]

    def resolve_evidence(self, model_id: str, evidence: Mapping[str, Any]) -> dict[str, str]:
        """Map raw numeric evidence through the training-time bins."""
        _, net, specs, _ = self._loaded(model_id)
        resolved: dict[str, str] = {}
        for var, value in evidence.items():
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                spec = specs.get(var)
                if spec is None:
                    raise ServiceError(
                        422, "not_discretized",
                        f"variable {var!r} has no discretization; pass a state label",
                    )
                resolved[var] = spec.bin_labels[spec.bin_index(float(value))]
            else:
                resolved[var] = str(value)
        return resolved

    def query(self, model_id: str, request: Mapping) -> dict:
        _, net, specs, tree = self._loaded(model_id)
        variable = request.get("variable")
        if not variable:
            raise ServiceError(422, "missing_variable", "request needs a 'variable'")
        evidence = self.resolve_evidence(model_id, request.get("evidence") or {})
        method = request.get("method", "exact")
        try:
            if method == "exact":
                dist = inference.posterior(tree, variable, evidence)
            elif method in ("approx", "approximate"):
                dist = inference.rejection_sample(
                    net,
                    variable,
                    evidence,
                    n_samples=int(request.get("n_samples", 10_000)),
                    repeats=int(request.get("repeats", 25)),
                    seed=int(request.get("seed", self.default_seed)),
                )
            else:
                raise ServiceError(422, "unknown_method", f"unknown method {method!r}")
        except inference.ImpossibleEvidenceError as exc:
            raise ServiceError(422, "impossible_evidence", str(exc)) from None
        except inference.AcceptanceFailureError as exc:
            raise ServiceError(422, "acceptance_failure", str(exc)) from None
        except InvalidAssignmentError as exc:
            raise ServiceError(422, "unknown_variable_or_state", str(exc)) from None
        return dist.as_dict()

    def learn_policy(self, model_id: str, request: Mapping) -> dict:
        _, net, specs, tree = self._loaded(model_id)
        decisions = request.get("decisions") or []
        if not decisions:
            raise ServiceError(422, "missing_decisions", "request needs 'decisions'")
        utilities_doc = request.get("utilities") or []
        if request.get("utility"):
            utilities_doc = [request["utility"], *utilities_doc]
        if not utilities_doc:
            raise ServiceError(422, "missing_utility", "request needs a 'utility'")
        try:
            utilities = [
                decision.UtilitySpec(u["variable"], u["preferences"], u.get("name", ""))
                for u in utilities_doc
            ]
            bdn = decision.DecisionNetwork(net, decisions, utilities)
            bdn._tree = tree
            evidence = self.resolve_evidence(model_id, request.get("evidence") or {})
            table = decision.policy_table(
                bdn,
                evidence,
                mode=request.get("mode", "exact"),
                top_k=request.get("top_k"),
                iterations=int(request.get("iterations", 1000)),
                burn_in=request.get("burn_in"),
                beta=float(request.get("beta", 5.0)),
                seed=int(request.get("seed", self.default_seed)),
            )
        except InvalidAssignmentError as exc:
            raise ServiceError(422, "unknown_variable_or_state", str(exc)) from None
        except decision.UtilityStructureError as exc:
            raise ServiceError(422, "utility_structure", str(exc)) from None
        except decision.ImpossibleActionError as exc:
            raise ServiceError(422, "impossible_action", str(exc)) from None
        except decision.DecisionSpaceError as exc:
            raise ServiceError(422, "decision_space", str(exc)) from None
        except (ValueError, KeyError) as exc:
            raise ServiceError(422, "invalid_request", str(exc)) from None
        return table.to_dict()


def _json_response(payload: Any, status: int = 200) -> Response:
    return Response(canonical_dumps(payload), status_code=status,
                    media_type="application/json")


def create_app(data_dir: str | Path, default_seed: int = 0) -> FastAPI:
    engine = Engine(data_dir, default_seed)
    app = FastAPI(title="bdnet", version="0.1.0")
    app.state.engine = engine
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError) -> Response:
        return _json_response(
            {"error": {"code": exc.code, "message": exc.message}}, exc.status
        )

    @app.get("/healthz")
    async def healthz() -> Response:
        return _json_response({"status": "ok"})

    @app.post("/datasets")
    async def upload_dataset(request: Request, key_column: str | None = None) -> Response:
        body = await request.body()
        if not body:
            raise ServiceError(422, "empty_body", "request body must be the CSV bytes")
        try:
            ds_id, meta = engine.store.put_dataset(body, key_column)
        except (ingest.CsvParseError, ingest.MergeKeyError, UnicodeDecodeError) as exc:
            raise ServiceError(422, "csv_parse", str(exc)) from None
        return _json_response(meta)

    @app.get("/datasets/{ds_id}")
    async def get_dataset(ds_id: str) -> Response:
        return _json_response(engine.store.dataset_meta(ds_id))

    @app.post("/models")
    async def start_learning(request: Request) -> Response:
        doc = await request.json()
        dataset_id = doc.get("dataset_id")
        if not dataset_id:
            raise ServiceError(422, "missing_dataset", "request needs 'dataset_id'")
        try:
            job_id = engine.start_learning(dataset_id, doc.get("config") or {})
        except (ValueError, KeyError) as exc:
            raise ServiceError(422, "invalid_config", str(exc)) from None
        return _json_response({"job": job_id})

    @app.get("/jobs/{job_id}")
    async def job_status(job_id: str) -> Response:
        return _json_response(engine.job_status(job_id).as_dict())

    @app.get("/models/{model_id}")
    async def get_model(model_id: str) -> Response:
        return _json_response(engine.store.get_model(model_id))

    @app.post("/models/{model_id}/query")
    async def query(model_id: str, request: Request) -> Response:
        doc = await request.json()
        return _json_response(engine.query(model_id, doc))

    @app.post("/models/{model_id}/policy")
    async def policy(model_id: str, request: Request) -> Response:
        doc = await request.json()
        return _json_response(engine.learn_policy(model_id, doc))

    return app
