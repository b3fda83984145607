"""Record service responses as UI test fixtures.

Drives the real HTTP service in-process and saves the exact bytes the UI
would receive, so the frontend test suite runs with no backend. Re-run after
any wire-format change:

    python3 frontend/scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd
from fastapi.testclient import TestClient

from bdnet.service import create_app

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"


def simulate_training_csv(n=400, seed=11) -> bytes:
    """Six correlated county-flavored columns; strong enough to learn edges."""
    rng = np.random.default_rng(seed)
    diversity = rng.normal(0.2, 0.08, n).clip(0.01, 0.6)
    house_value = 120 + 400 * diversity + rng.normal(0, 25, n)
    gap = 11 - 14 * diversity + rng.normal(0, 1.2, n)
    prev_care = rng.normal(70, 9, n)
    life_exp = 76 + 0.09 * prev_care - 0.15 * gap + rng.normal(0, 0.8, n)
    region = rng.choice(["coastal", "inland", "mountain"], n)
    df = pd.DataFrame({
        "county_id": np.arange(n),
        "region": region,
        "diversity": diversity.round(4),
        "house_value": house_value.round(1),
        "longevity_gap": gap.round(3),
        "preventive_care": prev_care.round(2),
        "life_expectancy": life_exp.round(3),
    })
    return df.to_csv(index=False).encode()


def wait_done(client, job_id):
    while True:
        doc = client.get(f"/jobs/{job_id}").json()
        if doc["phase"] in ("done", "failed"):
            assert doc["phase"] == "done", doc
            return doc
        time.sleep(0.05)


def save(name: str, payload: bytes) -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    (FIXTURE_DIR / name).write_bytes(payload)
    print(f"wrote fixtures/{name} ({len(payload)} bytes)")


def main(tmp_store: str) -> None:
    app = create_app(tmp_store, default_seed=0)
    with TestClient(app) as client:
        ds = client.post("/datasets?key_column=county_id",
                         content=simulate_training_csv()).json()
        job = client.post("/models", json={
            "dataset_id": ds["id"],
            "config": {
                "bootstraps": 25,
                "seed": 7,
                "blacklist": [["*", "region"]],
            },
        }).json()["job"]
        status = wait_done(client, job)
        model_id = status["model_id"]

        save("model.json", client.get(f"/models/{model_id}").content)
        save("job_done.json", client.get(f"/jobs/{job}").content)

        save("query_exact.json", client.post(f"/models/{model_id}/query", json={
            "variable": "life_expectancy",
            "evidence": {"preventive_care": 80.0},
            "method": "exact",
        }).content)
        save("query_exact_empty.json", client.post(f"/models/{model_id}/query", json={
            "variable": "life_expectancy", "evidence": {},
        }).content)
        save("query_approx.json", client.post(f"/models/{model_id}/query", json={
            "variable": "life_expectancy",
            "evidence": {"preventive_care": 80.0},
            "method": "approx", "n_samples": 4000, "repeats": 25, "seed": 5,
        }).content)
        states = json.loads(save_model_states(client, model_id))
        save("query_point_mass.json", client.post(f"/models/{model_id}/query", json={
            "variable": "life_expectancy",
            "evidence": {"life_expectancy": states[-1]},
            "method": "exact",
        }).content)
        save("policy_exact.json", client.post(f"/models/{model_id}/policy", json={
            "decisions": ["preventive_care", "diversity"],
            "utility": {
                "variable": "life_expectancy",
                "preferences": {
                    s: p for s, p in zip(
                        json.loads(save_model_states(client, model_id)),
                        (-1.0, 0.0, 1.0),
                    )
                },
            },
            "mode": "exact",
        }).content)

        # an impossible-evidence error body, from a deterministic copy pair
        rows = ["p,q"] + ["yes,yes"] * 40 + ["no,no"] * 40
        ds2 = client.post("/datasets", content=("\n".join(rows) + "\n").encode()).json()
        job2 = client.post("/models", json={
            "dataset_id": ds2["id"],
            "config": {"bootstraps": 3, "seed": 1, "alpha": 0.0},
        }).json()["job"]
        status2 = wait_done(client, job2)
        save("error_impossible.json", client.post(
            f"/models/{status2['model_id']}/query",
            json={"variable": "p", "evidence": {"p": "yes", "q": "no"}},
        ).content)


def save_model_states(client, model_id) -> str:
    record = client.get(f"/models/{model_id}").json()
    states = next(
        v["states"] for v in record["network"]["variables"]
        if v["name"] == "life_expectancy"
    )
    return json.dumps(states)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        main(tmp)
