"""HTTP facade over the engine: the studio frontend's only contact surface.

Synchronous request/response (runs complete in seconds at desk scale) with a
bounded number of concurrently executing runs. Responses carry exactly the
CLI's result payloads.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .config import offline_config_from_dict, online_config_from_dict
from .engine import evaluate_result, offline_result, online_result, track_compare_result
from .errors import (
    InvalidArgumentError,
    NoSolutionError,
    SolverFailureError,
    ValidationError,
)
from .scenario_io import hierarchy_from_dict, scenario_from_dict

MAX_CONCURRENT_RUNS = 4


def create_app(scenario_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="rulepilot service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = Path(scenario_dir or os.environ.get("RULEPILOT_SCENARIO_DIR", "scenarios"))
    gate = threading.Semaphore(MAX_CONCURRENT_RUNS)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/scenarios")
    def list_scenarios():
        if not store.is_dir():
            return {"scenarios": []}
        return {"scenarios": sorted(p.stem for p in store.glob("*.json"))}

    @app.get("/scenarios/{scenario_id}")
    def get_scenario(scenario_id: str):
        path = store / f"{scenario_id}.json"
        if not path.is_file():
            return JSONResponse(status_code=404,
                                content={"error": f"unknown scenario {scenario_id!r}"})
        return json.loads(path.read_text())

    @app.post("/scenarios")
    async def put_scenario(request: Request):
        body = await request.json()
        try:
            scenario = scenario_from_dict(body)
        except ValidationError as exc:
            return _validation_response(exc)
        store.mkdir(parents=True, exist_ok=True)
        path = store / f"{scenario.name}.json"
        path.write_text(json.dumps(body, indent=2))
        return {"stored": scenario.name}

    @app.post("/run")
    async def run(request: Request):
        body = await request.json()
        try:
            payload = _execute(body)
        except ValidationError as exc:
            return _validation_response(exc)
        except InvalidArgumentError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        except NoSolutionError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        except SolverFailureError as exc:
            return JSONResponse(status_code=500, content={"error": str(exc)})
        return payload

    def _execute(body: dict) -> dict:
        if not isinstance(body, dict):
            raise ValidationError("", "request body must be an object")
        mode = body.get("mode")
        if mode not in ("offline", "online", "evaluate", "track-compare"):
            raise ValidationError("/mode", f"unknown mode {mode!r}")

        scenario_data = body.get("scenario")
        if scenario_data is None and "scenario_id" in body:
            path = store / f"{body['scenario_id']}.json"
            if not path.is_file():
                raise ValidationError("/scenario_id",
                                      f"unknown scenario {body['scenario_id']!r}")
            scenario_data = json.loads(path.read_text())
        if scenario_data is None:
            raise ValidationError("/scenario", "missing scenario (inline or by id)")
        scenario = scenario_from_dict(scenario_data)

        with gate:
            if mode == "track-compare":
                return track_compare_result(
                    scenario,
                    offline_config_from_dict(body.get("config", {})),
                    online_config_from_dict(body.get("online_config", {})))

            if "hierarchy" not in body:
                raise ValidationError("/hierarchy", "missing rule hierarchy")
            hierarchy = hierarchy_from_dict(body["hierarchy"])

            if mode == "offline":
                return offline_result(
                    scenario, hierarchy,
                    offline_config_from_dict(body.get("config", {})))
            if mode == "online":
                return online_result(
                    scenario, hierarchy,
                    online_config_from_dict(body.get("config", {})))
            candidate = body.get("candidate")
            if not isinstance(candidate, dict) or "points_m" not in candidate:
                raise ValidationError("/candidate/points_m",
                                      "evaluate mode needs a candidate polyline")
            return evaluate_result(scenario, hierarchy,
                                   offline_config_from_dict(body.get("config", {})),
                                   candidate["points_m"],
                                   candidate.get("target_speed_mps"))

    return app


def _validation_response(exc: ValidationError) -> JSONResponse:
    return JSONResponse(status_code=400,
                        content={"error": exc.detail, "pointer": exc.pointer})


app = create_app()

if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host=os.environ.get("RULEPILOT_HOST", "127.0.0.1"),
                port=int(os.environ.get("RULEPILOT_PORT", "8321")))
