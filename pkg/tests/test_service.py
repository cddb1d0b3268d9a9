"""HTTP session API tests over an in-process client."""

import base64
import io

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image

from interkey.codec import CodecConfig
from interkey.model import CheckpointBundle, InteractiveKeypointModel, ModelConfig
from interkey.morphology import MorphologyConfig, RelationSets
from interkey.service import create_app

K = 8
SIZE = 32


def png_bytes(size=(64, 64), seed=0):
    rng = np.random.default_rng(seed)
    arr = (rng.random((size[1], size[0])) * 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture(scope="module")
def client():
    torch.manual_seed(0)
    model = InteractiveKeypointModel(ModelConfig(k=K, input_size=(SIZE, SIZE)))
    model.eval()
    bundle = CheckpointBundle(model=model, model_cfg=model.cfg, codec_cfg=CodecConfig(),
                              morph_cfg=MorphologyConfig(), relations=RelationSets(),
                              dataset_meta={"name": "test"}, train_steps=0)
    return TestClient(create_app(bundle))


def create(client, seed=0):
    payload = {"image_base64": base64.b64encode(png_bytes(seed=seed)).decode()}
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 201
    return resp.json()


class TestHealth:
    def test_reports_model_info(self, client):
        data = client.get("/healthz").json()
        assert data["status"] == "ok"
        assert data["k"] == K


class TestCreateSession:
    def test_returns_k_keypoints(self, client):
        data = create(client)
        assert len(data["keypoints"]) == K
        assert data["step"] == 0

    def test_keypoints_within_bounds(self, client):
        data = create(client)
        w, h = data["image_size"]
        for x, y in data["keypoints"]:
            assert 0 <= x <= w and 0 <= y <= h

    def test_duplicate_uploads_get_distinct_sessions(self, client):
        a, b = create(client), create(client)
        assert a["session_id"] != b["session_id"]

    def test_multipart_upload(self, client):
        resp = client.post("/sessions", files={"image": ("a.png", png_bytes(), "image/png")})
        assert resp.status_code == 201
        assert len(resp.json()["keypoints"]) == K

    def test_undecodable_image_rejected(self, client):
        payload = {"image_base64": base64.b64encode(b"not a png").decode()}
        assert client.post("/sessions", json=payload).status_code == 400

    def test_bad_base64_rejected(self, client):
        assert client.post("/sessions", json={"image_base64": "!!!"}).status_code == 400


class TestApplyClick:
    def test_click_pins_keypoint_and_increments_step(self, client):
        sess = create(client)
        resp = client.post(f"/sessions/{sess['session_id']}/clicks",
                           json={"keypoint": 3, "x": 20.0, "y": 30.0})
        data = resp.json()
        assert data["step"] == 1
        assert data["keypoints"][3] == [20.0, 30.0]

    def test_unknown_session_404(self, client):
        resp = client.post("/sessions/nope/clicks", json={"keypoint": 0, "x": 1, "y": 1})
        assert resp.status_code == 404

    def test_invalid_index_422(self, client):
        sess = create(client)
        resp = client.post(f"/sessions/{sess['session_id']}/clicks",
                           json={"keypoint": 99, "x": 1.0, "y": 1.0})
        assert resp.status_code == 422

    def test_click_undo_click_is_deterministic(self, client):
        sess = create(client)
        sid = sess["session_id"]
        body = {"keypoint": 2, "x": 11.0, "y": 13.0}
        first = client.post(f"/sessions/{sid}/clicks", json=body).json()
        client.post(f"/sessions/{sid}/undo")
        second = client.post(f"/sessions/{sid}/clicks", json=body).json()
        assert first["keypoints"] == second["keypoints"]


class TestUndoAndState:
    def test_undo_restores_initial_prediction(self, client):
        sess = create(client)
        sid = sess["session_id"]
        client.post(f"/sessions/{sid}/clicks", json={"keypoint": 1, "x": 5.0, "y": 5.0})
        data = client.post(f"/sessions/{sid}/undo").json()
        assert data["undone"]
        assert data["step"] == 0
        assert np.allclose(data["keypoints"], sess["keypoints"])

    def test_undo_empty_history_flagged(self, client):
        sess = create(client)
        data = client.post(f"/sessions/{sess['session_id']}/undo").json()
        assert data["undone"] is False

    def test_get_session_reports_history(self, client):
        sess = create(client)
        sid = sess["session_id"]
        for i in range(2):
            client.post(f"/sessions/{sid}/clicks",
                        json={"keypoint": i, "x": 6.0 + i, "y": 7.0})
        data = client.get(f"/sessions/{sid}").json()
        assert data["history_length"] == 2
        assert len(data["clicks"]) == 2

    def test_coordinate_roundtrip_within_half_pixel(self, client):
        sess = create(client)
        sid = sess["session_id"]
        client.post(f"/sessions/{sid}/clicks", json={"keypoint": 0, "x": 33.0, "y": 41.0})
        data = client.get(f"/sessions/{sid}").json()
        assert abs(data["keypoints"][0][0] - 33.0) < 0.5
        assert abs(data["keypoints"][0][1] - 41.0) < 0.5


class TestDelete:
    def test_delete_then_404(self, client):
        sess = create(client)
        sid = sess["session_id"]
        client.delete(f"/sessions/{sid}")
        assert client.get(f"/sessions/{sid}").status_code == 404

    def test_delete_idempotent(self, client):
        sess = create(client)
        sid = sess["session_id"]
        assert client.delete(f"/sessions/{sid}").status_code == 200
        assert client.delete(f"/sessions/{sid}").status_code == 200


class TestSessionIsolation:
    def test_interleaved_sessions_match_serial(self, client):
        a1 = create(client, seed=1)
        b1 = create(client, seed=2)
        click = {"keypoint": 4, "x": 10.0, "y": 10.0}
        inter_a = client.post(f"/sessions/{a1['session_id']}/clicks", json=click).json()
        inter_b = client.post(f"/sessions/{b1['session_id']}/clicks", json=click).json()
        a2 = create(client, seed=1)
        serial_a = client.post(f"/sessions/{a2['session_id']}/clicks", json=click).json()
        b2 = create(client, seed=2)
        serial_b = client.post(f"/sessions/{b2['session_id']}/clicks", json=click).json()
        assert inter_a["keypoints"] == serial_a["keypoints"]
        assert inter_b["keypoints"] == serial_b["keypoints"]
