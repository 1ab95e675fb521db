"""Session service over the wire (websocket smoke tests)."""

import pytest

pytest.importorskip("fastapi")

from fastapi.testclient import TestClient

from locoplan.service import SessionEngine, downsample_mask, make_app


@pytest.fixture(scope="module")
def client():
    app = make_app(SessionEngine(), static_dir=None)
    return TestClient(app)


class TestWebsocketProtocol:
    def test_health(self, client):
        r = client.get("/healthz")
        assert r.status_code == 200 and r.json()["ok"]

    def test_session_flow(self, client):
        with client.websocket_connect("/ws") as ws:
            first = ws.receive_json()
            assert first["type"] == "state" and first["step"] == 0

            ws.send_json({"type": "env_action", "action": "e_md"})
            msg = ws.receive_json()
            assert msg["type"] == "state"
            assert msg["step"] == 1
            assert msg["outcome"] == "reached_goal"
            assert len(msg["phase_polyline"]) > 2
            assert msg["margins"] is not None

            # server-side rejection of an inadmissible follow-up
            ws.send_json({"type": "env_action", "action": "e_tc_hc"})
            ws.receive_json()  # hop step
            ws.send_json({"type": "env_action", "action": "e_tc_hc"})
            rejected = ws.receive_json()
            assert rejected["type"] == "rejected"
            assert "S_e-1" in rejected["reason"]

            ws.send_json({"type": "reset"})
            fresh = ws.receive_json()
            assert fresh["step"] == 0


class TestMaskDownsampling:
    def test_caps_resolution(self):
        import numpy as np

        from locoplan.abstraction import UniformGrid

        grid = UniformGrid.from_box((0.0, 4.0, 0.0, 2.0), (0.005, 0.005))
        bits = np.zeros(grid.n_cells, dtype=bool)
        bits[:: grid.nv + 3] = True
        mask = downsample_mask(grid, bits, max_side=200)
        assert mask["nx"] <= 200 and mask["nv"] <= 200
        assert mask["bits_b64"]
