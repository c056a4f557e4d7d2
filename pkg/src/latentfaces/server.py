"""HTTP/JSON service for the latent explorer.

All heavy artifacts (autoencoder, PCA, enrolled gallery, baselines) are
loaded once at startup and treated as immutable; only bookmarks and sweep
reports are ever written. Request bodies are parsed by hand so malformed
input yields 400 with a uniform {error, message} shape; an oversized
sweep yields 422; missing artifacts yield 503 for every API route.
"""

from __future__ import annotations

import base64
import json
import queue
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import attack
from . import autoencoder as ae
from . import latentpca as lp
from . import manipulate as mp
from . import workspace as wsmod
from .errors import GridTooLargeError, LatentFacesError
from .imaging import read_pgm, preprocess, write_pgm
from .latentpca import LATENT_DIM


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


def _bad_request(message: str) -> ApiError:
    return ApiError(400, "bad_request", message)


class Artifacts:
    """Everything the endpoints read; built once from the workspace."""

    def __init__(self, ws: wsmod.Workspace):
        self.ws = ws
        self.dataset = wsmod.load_dataset_artifacts(ws)
        self.model = wsmod.load_autoencoder(ws)
        self.pca = wsmod.load_pca(ws)
        self.client = wsmod.load_enrolled(ws)
        self.baselines = wsmod.load_baselines(ws)
        latents = ae.encode_many(self.model, [s.image for s in self.dataset])
        self.coords = lp.transform_many(self.pca, latents)
        self.labels = sorted({s.label for s in self.dataset})
        self.coords_by_label = {
            label: np.stack(
                [c for c, s in zip(self.coords, self.dataset) if s.label == label]
            )
            for label in self.labels
        }
        self.class_means = mp.class_mean_coords(self.coords_by_label)
        self.ranges = mp.component_ranges(self.coords)
        if len(self.labels) == 2:
            self.separation = lp.separation(self.coords_by_label).to_dict()
        else:
            self.separation = {
                f"{a}|{b}": rep.to_dict()
                for (a, b), rep in lp.separation_pairwise(self.coords_by_label).items()
            }
        self.sample_index = {s.sample_id: s for s in self.dataset}

    def nearest_label(self, coords: np.ndarray) -> str:
        dists = {
            label: float(np.linalg.norm(coords - mean))
            for label, mean in self.class_means.items()
        }
        return min(sorted(dists), key=dists.get)


class SweepJobs:
    """FIFO, single-worker sweep queue with in-memory status only."""

    def __init__(self, art: Artifacts, gate_k: float = attack.DEFAULT_GATE_K):
        self.art = art
        self.gate_k = gate_k
        self.jobs: dict = {}
        self.queue: queue.Queue = queue.Queue()
        self.lock = threading.Lock()
        self.worker = threading.Thread(target=self._run, daemon=True)
        self.worker.start()

    def submit(self, strategy: attack.SweepStrategy) -> str:
        run_id = attack.run_id_for(strategy.describe())
        with self.lock:
            if run_id in self.jobs and self.jobs[run_id]["status"] in ("queued", "running", "done"):
                return run_id  # identical request: reuse the job
            self.jobs[run_id] = {"status": "queued", "report": None, "error": None}
        self.queue.put((run_id, strategy))
        return run_id

    def status(self, run_id: str) -> dict | None:
        with self.lock:
            job = self.jobs.get(run_id)
            return dict(job) if job else None

    def _run(self):
        while True:
            run_id, strategy = self.queue.get()
            with self.lock:
                self.jobs[run_id]["status"] = "running"
            try:
                report = attack.run_experiment(
                    self.art.dataset,
                    self.art.model,
                    self.art.pca,
                    self.art.client,
                    strategy,
                    self.art.baselines,
                    gate_k=self.gate_k,
                )
                wsmod.save_report(self.art.ws, report)
                with self.lock:
                    self.jobs[run_id]["status"] = "done"
                    self.jobs[run_id]["report"] = report.to_dict()
            except Exception as exc:
                with self.lock:
                    self.jobs[run_id]["status"] = "error"
                    self.jobs[run_id]["error"] = f"{type(exc).__name__}: {exc}"


def _require_coords(body: dict, key: str = "coords") -> np.ndarray:
    if key not in body:
        raise _bad_request(f"missing field {key!r}")
    values = body[key]
    if not isinstance(values, list) or len(values) != LATENT_DIM:
        raise _bad_request(f"{key} must be a list of {LATENT_DIM} numbers")
    try:
        coords = np.asarray([float(v) for v in values], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise _bad_request(f"{key} must be numeric: {exc}")
    if not np.all(np.isfinite(coords)):
        raise _bad_request(f"{key} contains non-finite values")
    return coords


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise _bad_request("body is not valid JSON")
    if not isinstance(body, dict):
        raise _bad_request("body must be a JSON object")
    return body


def create_app(ws: wsmod.Workspace, frontend_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="latentfaces explorer API")
    app.state.load_error = None
    app.state.art = None
    app.state.jobs = None
    bookmarks_lock = threading.Lock()

    try:
        art = Artifacts(ws)
        app.state.art = art
        app.state.jobs = SweepJobs(art)
    except (LatentFacesError, OSError) as exc:
        app.state.load_error = f"workspace artifacts unavailable: {exc}"

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "message": exc.message}
        )

    @app.exception_handler(LatentFacesError)
    async def domain_error_handler(request: Request, exc: LatentFacesError):
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    def art_or_503() -> Artifacts:
        if app.state.art is None:
            raise ApiError(503, "artifacts_missing", app.state.load_error or "not loaded")
        return app.state.art

    def evaluate(coords: np.ndarray, true_label: str | None) -> dict:
        art = art_or_503()
        latent = lp.inverse(art.pca, coords)
        image = ae.decode(art.model, latent)
        results = art.client.compare(image)
        label = true_label or art.nearest_label(coords)
        if label not in art.labels:
            raise _bad_request(f"unknown true_label {label!r}")
        outcome = attack.classify(results, label)
        ok, reasons = attack.quality_gate(
            results[0].confidence,
            results[0].brightness,
            results[0].sharpness,
            art.baselines,
        )
        outcome.quality_pass = ok
        outcome.quality_reasons = reasons
        return {
            "image": base64.b64encode(write_pgm(image)).decode("ascii"),
            "results": [r.to_dict() for r in results],
            "outcome": outcome.to_dict(),
        }

    @app.get("/api/info")
    def info():
        art = art_or_503()
        return {
            "latent_dim": LATENT_DIM,
            "image_side": art.model.input_side,
            "labels": art.labels,
            "component_ranges": [[float(lo), float(hi)] for lo, hi in art.ranges],
            "eigenvalues": [float(v) for v in art.pca.eigenvalues],
            "class_means": {k: [float(x) for x in v] for k, v in art.class_means.items()},
            "separation": art.separation,
        }

    @app.get("/api/baselines")
    def baselines():
        art = art_or_503()
        return art.baselines.to_dict()

    @app.get("/api/samples")
    def samples():
        art = art_or_503()
        return {
            "samples": [
                {"sample_id": s.sample_id, "label": s.label} for s in art.dataset
            ]
        }

    @app.get("/api/samples/{sample_id}")
    def sample(sample_id: str):
        art = art_or_503()
        s = art.sample_index.get(sample_id)
        if s is None:
            raise ApiError(404, "not_found", f"unknown sample {sample_id!r}")
        return {
            "sample_id": s.sample_id,
            "label": s.label,
            "image": base64.b64encode(write_pgm(s.image)).decode("ascii"),
        }

    @app.post("/api/explore")
    async def explore(request: Request):
        body = await _json_body(request)
        coords = _require_coords(body)
        true_label = body.get("true_label")
        return evaluate(coords, true_label)

    @app.post("/api/encode")
    async def encode_endpoint(request: Request):
        art = art_or_503()
        body = await _json_body(request)
        if "image" not in body:
            raise _bad_request("missing field 'image'")
        try:
            raw = base64.b64decode(body["image"], validate=True)
        except Exception:
            raise _bad_request("image must be base64-encoded PGM bytes")
        try:
            img = read_pgm(raw)
        except LatentFacesError as exc:
            raise _bad_request(f"bad PGM payload: {exc}")
        side = art.model.input_side
        if (img.width, img.height) != (side, side):
            img = preprocess(img, side).image
        coords = lp.transform(art.pca, ae.encode(art.model, img))
        return {"coords": [float(v) for v in coords]}

    @app.post("/api/sweep")
    async def submit_sweep(request: Request):
        art = art_or_503()
        body = await _json_body(request)
        if "spec" not in body or not isinstance(body["spec"], dict):
            raise _bad_request("missing sweep 'spec' object")
        base = _require_coords(body, "base_coords")
        try:
            spec = mp.SweepSpec.from_dict(body["spec"])
        except GridTooLargeError as exc:
            raise ApiError(422, "sweep_too_large", str(exc))
        except LatentFacesError as exc:
            raise _bad_request(str(exc))
        label = body.get("true_label") or art.nearest_label(base)
        strategy = attack.SweepStrategy(
            indices=list(spec.component_indices),
            steps=spec.steps_per_index,
            ranges=[(lo, hi) for lo, hi in spec.ranges],
            base_coords=base,
            base_label=label,
        )
        run_id = app.state.jobs.submit(strategy)
        return {"run_id": run_id}

    @app.get("/api/sweep/{run_id}")
    def sweep_status(run_id: str):
        art_or_503()
        job = app.state.jobs.status(run_id)
        if job is None:
            raise ApiError(404, "not_found", f"unknown sweep run {run_id!r}")
        out = {"run_id": run_id, "status": job["status"]}
        if job["status"] == "done":
            out["report"] = job["report"]
        if job["status"] == "error":
            out["message"] = job["error"]
        return out

    @app.get("/api/bookmarks")
    def list_bookmarks():
        art = art_or_503()
        return {"bookmarks": wsmod.load_bookmarks(art.ws)}

    @app.post("/api/bookmarks")
    async def add_bookmark(request: Request):
        art = art_or_503()
        body = await _json_body(request)
        coords = _require_coords(body)
        note = str(body.get("note", ""))
        evaluation = evaluate(coords, body.get("true_label"))
        with bookmarks_lock:
            bookmarks = wsmod.load_bookmarks(art.ws)
            bookmark = {
                "bookmark_id": f"bm-{len(bookmarks) + 1:04d}",
                "coords": [float(v) for v in coords],
                "outcome": evaluation["outcome"],
                "note": note,
                "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            }
            bookmarks.append(bookmark)
            wsmod.save_bookmarks(art.ws, bookmarks)
        return JSONResponse(status_code=201, content=bookmark)

    if frontend_dir is None:
        frontend_dir = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    if frontend_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
