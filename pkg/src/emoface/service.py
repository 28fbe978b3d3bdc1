"""HTTP service exposing the editing dictionary and generation endpoints.

All state (checkpoint, dictionary, face model) is loaded once and shared
read-only across request handlers; generation with deterministic=true is
reproducible byte-for-byte."""

from __future__ import annotations

import base64
import json
import logging
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .facemodel import load_model, vertices_to_f32_bytes, decode_sequence
from .manifold import load_dictionary
from .pipeline import (
    LoadedCheckpoint,
    generate_sequence,
    load_checkpoint,
    resolve_base_embedding,
)

log = logging.getLogger("emoface.service")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def _parse_edits(raw, k: int) -> list[tuple[int, float]]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ApiError(400, "bad_edits", "edits must be a list of {k, alpha} objects")
    edits = []
    for item in raw:
        if not isinstance(item, dict) or "k" not in item or "alpha" not in item:
            raise ApiError(400, "bad_edits", "each edit needs integer k and numeric alpha")
        try:
            direction = int(item["k"])
            alpha = float(item["alpha"])
        except (TypeError, ValueError):
            raise ApiError(400, "bad_edits", "each edit needs integer k and numeric alpha")
        if not 0 <= direction < k:
            raise ApiError(400, "bad_direction", f"direction index {direction} outside [0, {k})")
        if not np.isfinite(alpha):
            raise ApiError(400, "bad_edits", "alpha must be finite")
        edits.append((direction, alpha))
    return edits


def _parse_embedding(raw, d: int) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise ApiError(400, "bad_embedding", "embedding must be a numeric array")
    if arr.shape != (d,):
        raise ApiError(400, "bad_dimension", f"embedding must have dimension {d}")
    if not np.all(np.isfinite(arr)):
        raise ApiError(400, "bad_embedding", "embedding entries must be finite")
    return arr


def create_app(
    checkpoint_path,
    dictionary_path,
    model_path=None,
    metrics_path=None,
    static_dir=None,
) -> FastAPI:
    ckpt: LoadedCheckpoint = load_checkpoint(checkpoint_path)
    dictionary, _clf = load_dictionary(dictionary_path)
    model_path = model_path or Path(checkpoint_path).parent / "model.eetm"
    model = load_model(model_path)
    faces_list = [[int(i) for i in f] for f in model.faces]
    with open(dictionary_path, encoding="utf-8") as fh:
        dictionary_obj = json.load(fh)

    app = FastAPI(title="emoface", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def handle_api_error(_req, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(404)
    async def handle_404(_req, _exc):
        return _error_response(404, "not_found", "unknown resource")

    @app.exception_handler(Exception)
    async def handle_internal(_req, exc: Exception):
        log.exception("request failed")
        return _error_response(500, "internal_error", str(exc))

    async def read_json(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "bad_json", "request body is not valid JSON")
        if not isinstance(body, dict):
            raise ApiError(400, "bad_json", "request body must be a JSON object")
        return body

    @app.get("/api/dictionary")
    async def get_dictionary():
        return dictionary_obj

    @app.get("/api/model/info")
    async def get_model_info():
        return {
            "V": model.V,
            "F": model.F,
            "n_id": model.n_id,
            "n_exp": model.n_exp,
            "n_pose": model.n_pose,
            "d_emotion": ckpt.cfg.synth.d_emotion,
            "d_audio": ckpt.cfg.synth.d_audio,
            "K": len(ckpt.class_names),
            "class_names": ckpt.class_names,
            "class_centroids": [[float(x) for x in row] for row in ckpt.class_centroids],
            "default_frames": ckpt.cfg.synth.frames,
            "fps": ckpt.cfg.fps,
            "diffusion_steps": ckpt.schedule.steps,
        }

    @app.get("/api/metrics")
    async def get_metrics():
        if metrics_path is None or not Path(metrics_path).exists():
            raise ApiError(404, "not_found", "no metrics report available")
        with open(metrics_path, encoding="utf-8") as fh:
            return json.load(fh)

    @app.post("/api/edit")
    async def post_edit(request: Request):
        body = await read_json(request)
        if "embedding" not in body:
            raise ApiError(400, "bad_request", "missing embedding")
        base = _parse_embedding(body["embedding"], dictionary.d)
        edits = _parse_edits(body.get("edits"), dictionary.K)
        from .manifold import apply_edits

        edited = apply_edits(base, edits, dictionary)
        return {"embedding": [float(x) for x in edited]}

    @app.post("/api/generate")
    async def post_generate(request: Request):
        body = await read_json(request)
        label = body.get("label")
        embedding = body.get("embedding")
        if (label is None) == (embedding is None):
            raise ApiError(400, "bad_request", "provide exactly one of label or embedding")
        if label is not None and label not in ckpt.class_names:
            raise ApiError(400, "bad_label", f"unknown label {label!r}")
        if embedding is not None:
            embedding = _parse_embedding(embedding, dictionary.d)
        edits = _parse_edits(body.get("edits"), dictionary.K)
        try:
            frames = int(body.get("frames", ckpt.cfg.synth.frames))
            seed = int(body.get("seed", 0))
        except (TypeError, ValueError):
            raise ApiError(400, "bad_request", "frames and seed must be integers")
        if not 3 <= frames <= 2048:
            raise ApiError(400, "bad_request", "frames must lie in [3, 2048]")
        deterministic = bool(body.get("deterministic", True))

        base = resolve_base_embedding(ckpt, label, embedding)
        params, edited, _ = generate_sequence(
            ckpt, dictionary, base, edits, frames, seed, deterministic
        )
        meshes = decode_sequence(model, params)
        payload = base64.b64encode(vertices_to_f32_bytes(meshes)).decode("ascii")
        return {
            "manifest": {
                "frames": frames,
                "fps": ckpt.cfg.fps,
                "vertex_count": model.V,
                "seed": seed,
                "deterministic": deterministic,
                "label": label,
                "edited_embedding": [float(x) for x in edited],
            },
            "vertices_b64": payload,
            "faces": faces_list,
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="studio")

    return app
