"""HTTP/JSON ask-tell service for browser-driven campaigns.

One JSON document per session in a data directory (atomic rename on write);
per-session mutations are serialised behind an exclusive lock and guarded by
an optimistic-concurrency revision counter.  CORS is wide open and there is
no authentication: this is a local, single-operator tool -- do not expose it
on untrusted networks.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from .mathcore import DomainError
from .stability import PerturbationTooLargeError
from .bench import OBJECTIVES, stability_map
from .gp import predict_batch
from .optimizer import (
    OptConfig,
    new_state,
    recommend,
    state_from_json,
    state_to_json,
    suggest,
    tell,
    trace_to_csv,
)
from .stability import scores_at

PROFILE_POINTS = 201
PROFILE_TAG = 0xA004


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionStore:
    """Directory-backed session records with per-session exclusive guards."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def _path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.json"

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def load(self, session_id: str) -> dict:
        with open(self._path(session_id)) as fh:
            return json.load(fh)

    def save(self, record: dict) -> None:
        path = self._path(record["id"])
        fd, tmp = tempfile.mkstemp(dir=str(self.data_dir), suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(record, fh)
        os.replace(tmp, path)

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.data_dir.glob("*.json"))


def _snapshot(record: dict, state) -> dict:
    rec = None
    if len(state.dataset) > 0:
        rec_x, stable_gain, per_point = recommend(state)
        rec = {
            "x_star": [float(v) for v in rec_x],
            "stable_gain": stable_gain,
            "per_point": per_point,
        }
    return {
        "id": record["id"],
        "revision": record["revision"],
        "created": record["created"],
        "updated": record["updated"],
        "objective": record.get("objective"),
        "config": state.config.to_json(),
        "plan": {
            "params": state.params.to_json(),
            "report": state.report.to_json(),
        },
        "pending": None
        if state.pending is None
        else [float(v) for v in state.pending["x"]],
        "trace": [row.to_json() for row in state.trace],
        "recommendation": rec,
    }


def _profile(state) -> dict | None:
    """Sampled mean/CI/score/acquisition curves for 1-D dashboards."""
    if state.config.dim != 1:
        return None
    lo, hi = state.config.bounds[0]
    xs = np.linspace(lo, hi, PROFILE_POINTS)[:, None]
    means, variances = predict_batch(state.posterior, xs)
    rng = np.random.default_rng(
        [state.config.seed, PROFILE_TAG, len(state.dataset)]
    )
    scores = scores_at(state.posterior, xs, state.params, state.config.n_samples, rng)
    from .optimizer import _acq_values

    values, _ = _acq_values(state, xs, np.random.default_rng(
        [state.config.seed, PROFILE_TAG + 1, len(state.dataset)]
    ))
    return {
        "x": [float(v) for v in xs[:, 0]],
        "mean": [float(v) for v in means],
        "sd": [float(math.sqrt(v)) for v in variances],
        "score": [float(v) for v in scores],
        "acq": [float(v) for v in values],
    }


def create_app(data_dir: str | Path) -> FastAPI:
    app = FastAPI(title="stablebo service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(data_dir)

    def _load_state(session_id: str):
        record = store.load(session_id)
        return record, state_from_json(record["state"])

    @app.exception_handler(DomainError)
    async def _domain_error(_: Request, exc: DomainError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"detail": "malformed JSON body"})
        objective = body.pop("objective", None) if isinstance(body, dict) else None
        if objective is not None and objective not in OBJECTIVES:
            return JSONResponse(
                status_code=400, content={"detail": f"unknown objective {objective!r}"}
            )
        try:
            config = OptConfig.from_json(body)
            state = new_state(config)
        except PerturbationTooLargeError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        session_id = uuid.uuid4().hex[:12]
        record = {
            "id": session_id,
            "revision": 0,
            "created": _now(),
            "updated": _now(),
            "objective": objective,
            "state": state_to_json(state),
        }
        store.save(record)
        return {
            "id": session_id,
            "plan": {"params": state.params.to_json(), "report": state.report.to_json()},
        }

    @app.get("/sessions")
    async def list_sessions():
        out = []
        for session_id in store.list_ids():
            record = store.load(session_id)
            out.append(
                {
                    "id": record["id"],
                    "revision": record["revision"],
                    "created": record["created"],
                    "updated": record["updated"],
                    "observations": len(record["state"]["dataset"]["y"]),
                    "pending": record["state"]["pending"] is not None,
                }
            )
        return out

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        if not store.exists(session_id):
            return JSONResponse(status_code=404, content={"detail": "unknown session"})
        record, state = _load_state(session_id)
        return _snapshot(record, state)

    @app.post("/sessions/{session_id}/suggest")
    async def suggest_next(session_id: str):
        if not store.exists(session_id):
            return JSONResponse(status_code=404, content={"detail": "unknown session"})
        with store.lock(session_id):
            record, state = _load_state(session_id)
            if state.pending is not None:
                return JSONResponse(
                    status_code=409,
                    content={"detail": "a suggestion is already pending"},
                )
            x = suggest(state)
            record["state"] = state_to_json(state)
            record["revision"] += 1
            record["updated"] = _now()
            store.save(record)
            acq = state.pending["acq"]
            score = state.pending["score"]
            return {
                "x": [float(v) for v in x],
                "acq_value": None if math.isnan(acq) else acq,
                "score": None if math.isnan(score) else score,
                "revision": record["revision"],
                "acq_profile": _profile(state),
            }

    @app.post("/sessions/{session_id}/tell")
    async def tell_observation(session_id: str, request: Request):
        if not store.exists(session_id):
            return JSONResponse(status_code=404, content={"detail": "unknown session"})
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"detail": "malformed JSON body"})
        with store.lock(session_id):
            record, state = _load_state(session_id)
            if int(body.get("revision", -1)) != record["revision"]:
                return JSONResponse(
                    status_code=409,
                    content={
                        "detail": "stale revision",
                        "revision": record["revision"],
                    },
                )
            try:
                y = float(body["y"])
                x = [float(v) for v in (body["x"] if isinstance(body["x"], list) else [body["x"]])]
                if not math.isfinite(y):
                    raise DomainError(f"observed value must be finite, got {y}")
                tell(state, x, y)
            except (DomainError, KeyError, TypeError, ValueError) as exc:
                return JSONResponse(status_code=400, content={"detail": str(exc)})
            record["state"] = state_to_json(state)
            record["revision"] += 1
            record["updated"] = _now()
            store.save(record)
            rec_x, stable_gain, per_point = recommend(state)
            return {
                "trace_row": state.trace[-1].to_json(),
                "recommendation": {
                    "x_star": [float(v) for v in rec_x],
                    "stable_gain": stable_gain,
                    "per_point": per_point,
                },
                "revision": record["revision"],
            }

    @app.get("/sessions/{session_id}/map")
    async def session_map(session_id: str, grid: int = 101, mode: str = "gp_score"):
        if not store.exists(session_id):
            return JSONResponse(status_code=404, content={"detail": "unknown session"})
        record, state = _load_state(session_id)
        config = state.config
        if config.dim != 1:
            return JSONResponse(
                status_code=422, content={"detail": "maps require a 1-D session"}
            )
        lo, hi = config.bounds[0]
        xs = np.linspace(lo, hi, grid)
        if mode == "oracle":
            objective = record.get("objective")
            if objective is None:
                return JSONResponse(
                    status_code=422,
                    content={"detail": "oracle mode needs a session with a builtin objective"},
                )
            result = stability_map(OBJECTIVES[objective], xs, config.a, config.b, mode="oracle")
            return {
                "x": [float(v) for v in result["x"]],
                "stable": [bool(v) for v in result["stable"]],
            }
        if mode != "gp_score":
            return JSONResponse(status_code=400, content={"detail": f"unknown mode {mode!r}"})
        rng = np.random.default_rng([config.seed, PROFILE_TAG + 2, len(state.dataset)])
        scores = scores_at(state.posterior, xs[:, None], state.params, config.n_samples, rng)
        return {"x": [float(v) for v in xs], "score": [float(v) for v in scores]}

    @app.get("/sessions/{session_id}/trace.csv")
    async def trace_csv(session_id: str):
        if not store.exists(session_id):
            return JSONResponse(status_code=404, content={"detail": "unknown session"})
        _, state = _load_state(session_id)
        return PlainTextResponse(trace_to_csv(state), media_type="text/csv")

    return app


def main(argv=None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="stablebo-service")
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.data_dir), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
