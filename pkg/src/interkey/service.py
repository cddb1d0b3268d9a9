"""HTTP inference service for interactive revision sessions.

The server owns all session state; clients upload an image, receive the
automatic prediction, then post clicks and get all K revised keypoints
back. Coordinates in requests and responses are at the uploaded image's
original scale (origin top-left, x rightward, y downward); the server
converts to and from the model's working resolution internally.
"""

from __future__ import annotations

import base64
import io
import threading
import time
import uuid

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request
from PIL import Image
from pydantic import BaseModel

from interkey.model import CheckpointBundle, load_checkpoint
from interkey.simulate import SessionState, refine, start_session, undo


class ClickRequest(BaseModel):
    keypoint: int
    x: float
    y: float


class CreateSessionRequest(BaseModel):
    image_base64: str


class _Session:
    def __init__(self, state: SessionState, scale: np.ndarray, size: tuple[int, int]):
        self.state = state
        self.scale = scale                  # original px per working px, (sx, sy)
        self.original_size = size           # (W, H)
        self.id = uuid.uuid4().hex
        self.last_used = time.time()
        self.lock = threading.Lock()


def create_app(bundle: CheckpointBundle, session_ttl: float = 3600.0) -> FastAPI:
    app = FastAPI(title="interkey")
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()
    model = bundle.model
    model.eval()
    w, h = bundle.model_cfg.input_size

    def _get(session_id: str) -> _Session:
        with registry_lock:
            now = time.time()
            for sid in [s for s, sess in sessions.items()
                        if now - sess.last_used > session_ttl]:
                del sessions[sid]
            sess = sessions.get(session_id)
        if sess is None:
            raise HTTPException(status_code=404, detail="unknown or expired session")
        sess.last_used = time.time()
        return sess

    def _keypoints_payload(sess: _Session) -> list[list[float]]:
        return (sess.state.keypoints.coords * sess.scale).tolist()

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "k": bundle.model_cfg.k,
            "input_size": list(bundle.model_cfg.input_size),
            "train_steps": bundle.train_steps,
            "dataset": bundle.dataset_meta.get("name"),
            "checkpoint_version": 1,
        }

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/"):
            form = await request.form()
            upload = form.get("image")
            if upload is None:
                raise HTTPException(status_code=400, detail="missing 'image' part")
            raw = await upload.read()
        else:
            body = CreateSessionRequest.model_validate(await request.json())
            try:
                raw = base64.b64decode(body.image_base64)
            except Exception:
                raise HTTPException(status_code=400, detail="invalid base64 payload")
        try:
            img = Image.open(io.BytesIO(raw)).convert("L")
        except Exception:
            raise HTTPException(status_code=400, detail="could not decode image")
        ow, oh = img.size
        arr = np.asarray(img.resize((w, h), Image.BILINEAR), dtype=np.float32) / 255.0
        tensor = torch.from_numpy(arr).unsqueeze(0)
        state = start_session(model, tensor, bundle.codec_cfg)
        sess = _Session(state, scale=np.array([ow / w, oh / h]), size=(ow, oh))
        with registry_lock:
            sessions[sess.id] = sess
        return {
            "session_id": sess.id,
            "k": bundle.model_cfg.k,
            "image_size": [ow, oh],
            "keypoints": _keypoints_payload(sess),
            "step": 0,
        }

    @app.post("/sessions/{session_id}/clicks")
    def apply_click(session_id: str, click: ClickRequest):
        sess = _get(session_id)
        wx, wy = click.x / sess.scale[0], click.y / sess.scale[1]
        with sess.lock:
            try:
                refine(sess.state, (click.keypoint, float(wx), float(wy)), model)
            except ValueError as e:
                raise HTTPException(status_code=422, detail=str(e))
            # Pin at exact original-scale coordinates to avoid rounding drift.
            kps = (sess.state.keypoints.coords * sess.scale)
            kps[click.keypoint] = (click.x, click.y)
            return {
                "session_id": sess.id,
                "keypoints": kps.tolist(),
                "step": sess.state.step,
            }

    @app.post("/sessions/{session_id}/undo")
    def undo_click(session_id: str):
        sess = _get(session_id)
        with sess.lock:
            undone = undo(sess.state)
            return {
                "session_id": sess.id,
                "undone": undone,
                "keypoints": _keypoints_payload(sess),
                "step": sess.state.step,
            }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        sess = _get(session_id)
        return {
            "session_id": sess.id,
            "k": bundle.model_cfg.k,
            "image_size": list(sess.original_size),
            "keypoints": _keypoints_payload(sess),
            "step": sess.state.step,
            "history_length": len(sess.state.history),
            "clicks": [{"keypoint": i, "x": x * sess.scale[0], "y": y * sess.scale[1]}
                       for i, x, y in sess.state.click_log],
        }

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        with registry_lock:
            sessions.pop(session_id, None)
        return {"deleted": session_id}

    return app


def app_from_checkpoint(path: str, session_ttl: float = 3600.0) -> FastAPI:
    return create_app(load_checkpoint(path), session_ttl=session_ttl)
