"""Talk to the session service over real HTTP.

Trains a small model, starts `fact-crs serve` as a subprocess, then walks
one session through question -> answer -> recommendation -> feedback.
"""

import subprocess
import sys
import tempfile
import time
from pathlib import Path

import httpx

import factcrs as fc

PORT = 8951
BASE = f"http://127.0.0.1:{PORT}"

dataset, _ = fc.generate_synthetic(
    fc.SyntheticSpec(n_users=60, n_items=48, n_attributes=8,
                     n_records=800, depth=3, noise=0.0, seed=7))
config = fc.RunConfig(embedding_dim=16, num_trees=5, max_depth=5, seed=11)
split = fc.split_by_user(dataset, config.seed)
forest = fc.build_forest(dataset, config, users=split.train_users)

with tempfile.TemporaryDirectory() as tmp:
    model_path = Path(tmp) / "model.fcrs"
    fc.save_model(forest, model_path)

    server = subprocess.Popen(
        [sys.executable, "-m", "factcrs.cli", "serve",
         "--model", str(model_path), "--port", str(PORT)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    try:
        # wait until the service answers
        for _ in range(100):
            try:
                info = httpx.get(f"{BASE}/model/info", timeout=1.0).json()
                break
            except httpx.TransportError:
                time.sleep(0.1)
        else:
            raise RuntimeError("server never came up")
        print(f"model: {info['n_items']} items, {info['n_trees']} trees, "
              f"K={info['K']}, T={info['T']}")

        sid = httpx.post(f"{BASE}/sessions", json={"seed": 1}).json()["session_id"]
        print(f"session {sid[:8]}...")

        # answer questions with a fixed script, reject the first list
        script = iter([False, True, True, False, True, False, True, False])
        rejected_once = False
        while True:
            step = httpx.get(f"{BASE}/sessions/{sid}/next").json()
            if step["type"] == "question":
                answer = next(script)
                print(f"  Q: {step['label']}?  ->  {'yes' if answer else 'no'}")
                httpx.post(f"{BASE}/sessions/{sid}/answer",
                           json={"value": "yes" if answer else "no"})
                continue
            items = [e["item_id"] for e in step["items"]]
            print(f"  R (turn {step['turn']}): {items}")
            verdict = "reject" if not rejected_once else "accept"
            rejected_once = True
            reply = httpx.post(f"{BASE}/sessions/{sid}/feedback",
                               json={"value": verdict}).json()
            print(f"  ->  {verdict} (status {reply['status']})")
            if reply["status"] != "active":
                break

        state = httpx.get(f"{BASE}/sessions/{sid}/state").json()
        print(f"final state: {state['status']} after {state['turns_used']} "
              f"turns, {state['excluded_count']} items excluded")
    finally:
        server.terminate()
        server.wait(timeout=10)
