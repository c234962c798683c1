"""HTTP design service: predict/optimize/geometry over a loaded surrogate.

The model is immutable after load; optimization jobs run in a small worker
pool with per-job state, so /predict stays responsive while jobs run.
"""

from __future__ import annotations

import itertools
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import optim, surrogate as sg
from .errors import PlateOptError
from .geometry import (
    MATERIAL_KEYS,
    N_OUTLINE,
    N_THICKNESS,
    PlateParams,
    ReferencePlate,
    realize,
    reference_params,
)

MAX_JOBS = 256


def _parse_params(body: dict) -> PlateParams:
    """Validate a params payload with field-level errors."""
    for key, n in (("p", N_OUTLINE), ("t", N_THICKNESS)):
        v = body.get(key)
        if not isinstance(v, list) or len(v) != n:
            raise _FieldError(key, f"must be a list of {n} numbers")
    m = body.get("m")
    if not isinstance(m, dict) or set(m) != set(MATERIAL_KEYS):
        raise _FieldError("m", f"must be an object with keys {MATERIAL_KEYS}")
    try:
        return PlateParams.from_json_dict(body)
    except (ValueError, TypeError) as exc:
        raise _FieldError("params", str(exc))


class _FieldError(Exception):
    def __init__(self, fieldname: str, message: str):
        self.field = fieldname
        self.message = message
        super().__init__(f"{fieldname}: {message}")


class JobRegistry:
    """Bounded registry of optimization jobs (evict oldest finished)."""

    def __init__(self, workers: int = 2, capacity: int = MAX_JOBS):
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self.capacity = capacity
        self.jobs: OrderedDict[str, dict] = OrderedDict()
        self.lock = threading.Lock()
        self._ids = itertools.count(1)

    def submit(self, fn, *args) -> str | None:
        with self.lock:
            if len(self.jobs) >= self.capacity:
                done = [k for k, j in self.jobs.items()
                        if j["status"] in ("done", "failed")]
                if not done:
                    return None
                self.jobs.pop(done[0])
            job_id = f"job-{next(self._ids)}"
            self.jobs[job_id] = {"status": "queued", "run": None,
                                 "result": None, "error": None}
        self.pool.submit(self._run, job_id, fn, args)
        return job_id

    def _run(self, job_id, fn, args):
        with self.lock:
            self.jobs[job_id]["status"] = "running"
        try:
            fn(job_id, *args)
            with self.lock:
                self.jobs[job_id]["status"] = "done"
        except Exception as exc:  # surfaced via the job record
            with self.lock:
                self.jobs[job_id]["status"] = "failed"
                self.jobs[job_id]["error"] = f"{type(exc).__name__}: {exc}"

    def get(self, job_id) -> dict | None:
        with self.lock:
            return self.jobs.get(job_id)


def create_app(
    model: sg.SurrogateModel | None,
    ref: ReferencePlate,
    workers: int = 2,
) -> FastAPI:
    app = FastAPI(title="plateopt design service")
    registry = JobRegistry(workers=workers)
    app.state.registry = registry

    def no_model():
        return JSONResponse(status_code=409, content={"error": "no model loaded"})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/model")
    def model_info():
        if model is None:
            return no_model()
        return {
            "fit_report": model.fit_report,
            "box_halfwidth": model.box_halfwidth,
            "input_dim": model.input_dim,
            "hidden_width": model.hidden_width,
        }

    @app.post("/predict")
    async def predict_endpoint(body: dict):
        if model is None:
            return no_model()
        try:
            params = _parse_params(body)
        except _FieldError as exc:
            return JSONResponse(
                status_code=400,
                content={"error": "invalid params",
                         "field": exc.field, "message": exc.message},
            )
        freqs = sg.predict(model, params)
        return {
            "freqs_hz": freqs.tolist(),
            "f52": optim.f52(freqs),
            "in_training_box": model.in_training_box(params.to_vector()),
        }

    @app.get("/bounds")
    def bounds():
        x0 = reference_params().to_vector()
        return {
            "halfwidth": optim.BOX_HALFWIDTH,
            "reference": reference_params().to_json_dict(),
            "lo": (x0 * (1 - optim.BOX_HALFWIDTH)).tolist(),
            "hi": (x0 * (1 + optim.BOX_HALFWIDTH)).tolist(),
        }

    @app.post("/optimize")
    async def optimize_endpoint(body: dict):
        if model is None:
            return no_model()
        try:
            spec_d = body.get("spec")
            if not isinstance(spec_d, dict):
                return JSONResponse(status_code=400,
                                    content={"error": "missing spec"})
            if spec_d.get("kind") in ("spectrum_mean_abs", "mean_shift") and \
                    spec_d.get("f_ref") is None:
                spec_d = {**spec_d,
                          "f_ref": sg.predict(model, reference_params()).tolist()}
            spec = optim.LossSpec.from_json_dict(spec_d)
            start = (_parse_params(body["start"]) if body.get("start")
                     else reference_params())
            free = body.get("free", "outline")
            run = optim.make_run(start, free, spec)
        except (_FieldError, ValueError, PlateOptError) as exc:
            return JSONResponse(status_code=400,
                                content={"error": f"bad spec: {exc}"})
        sg.ensure_gated(model)

        def job(job_id, run=run, spec=spec):
            rec = registry.get(job_id)
            rec["run"] = run
            full = run.start.copy()

            def objective(xfree):
                full[run.free_idx] = xfree
                return optim.loss_eval(spec, model.predict_matrix(full[None, :])[0])

            optim.minimize(objective, run)
            run.predicted_freqs = model.predict_matrix(run.best_vector[None, :])[0]
            boundary = realize(run.best_params, ref).boundary
            rec["result"] = {
                "best_loss": run.best_loss,
                "n_evals": run.n_evals,
                "budget": run.budget,
                "status": run.status,
                "best_params": run.best_params.to_json_dict(),
                "predicted_freqs": run.predicted_freqs.tolist(),
                "f52": optim.f52(run.predicted_freqs),
                "boundary": boundary.tolist(),
            }

        job_id = registry.submit(job)
        if job_id is None:
            return JSONResponse(status_code=429,
                                content={"error": "job registry full"})
        return {"job_id": job_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        rec = registry.get(job_id)
        if rec is None:
            return JSONResponse(status_code=404,
                                content={"error": "unknown job"})
        run = rec["run"]
        return {
            "status": rec["status"],
            "error": rec["error"],
            "trace": [] if run is None else [[int(c), float(l)]
                                             for c, l in list(run.trace)],
            "n_evals": 0 if run is None else run.n_evals,
            "result": rec["result"],
        }

    @app.api_route("/geometry", methods=["GET", "POST"])
    async def geometry_endpoint(request_body: dict | None = None,
                                params: str | None = None,
                                density: int = 256,
                                thickness_grid: int = 24):
        try:
            if request_body:
                p = _parse_params(request_body)
            elif params:
                import json as _json

                p = _parse_params(_json.loads(params))
            else:
                p = reference_params()
        except (_FieldError, ValueError) as exc:
            return JSONResponse(status_code=400,
                                content={"error": f"invalid params: {exc}"})
        try:
            geom = realize(p, ref, n_boundary=int(density))
        except PlateOptError as exc:
            return JSONResponse(
                status_code=422,
                content={"error": type(exc).__name__, "message": str(exc)},
            )
        return geom.to_json_dict(thickness_grid=thickness_grid)

    return app
