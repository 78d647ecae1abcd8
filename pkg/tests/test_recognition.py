import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import given
from hypothesis import strategies as st

from percept_probe.errors import (AuthRejected, EmptySet, EndpointUnreachable,
                                  InvariantViolation, ParseError, UnknownObject,
                                  ValidationError)
from percept_probe.recognition import (EndpointDescriptor, ObjectLabelSet, PredictionRecord,
                                       fetch_predictions, load_predictions, top5_accuracy,
                                       top5_hit, write_predictions)


def record(labels, image_id="i", platform="p"):
    n = len(labels)
    return PredictionRecord(image_id, platform,
                            tuple((lab, 1.0 - k / (n + 1)) for k, lab in enumerate(labels)))


MUG = ObjectLabelSet("mug", frozenset({"mug"}))


def test_top5_hits():
    assert top5_hit(record(["cup", "bottle", "mug", "table", "hand"]), MUG)
    assert not top5_hit(record(["a", "b", "c", "d", "e", "mug"]), MUG)
    both = ObjectLabelSet("mug", frozenset({"mug", "coffee mug"}))
    assert top5_hit(record(["Coffee Mug "]), both)
    assert top5_hit(record(["x", "mug"]), MUG)


def test_top5_accuracy():
    recs = [record(["mug"], f"i{k}") for k in range(3)] + [record(["cup"], "i3")]
    ids = {f"i{k}": "mug" for k in range(4)}
    assert top5_accuracy(recs, {"mug": MUG}, ids) == 0.75
    assert top5_accuracy(recs[:3], {"mug": MUG}, ids) == 1.0
    with pytest.raises(EmptySet):
        top5_accuracy([], {"mug": MUG}, ids)
    with pytest.raises(UnknownObject):
        top5_accuracy([record(["mug"], "zz")], {"mug": MUG}, ids)


@given(st.lists(st.booleans(), min_size=1, max_size=20))
def test_accuracy_adds_one_hit(hits):
    recs = [record(["mug" if h else "cup"], f"i{k}") for k, h in enumerate(hits)]
    ids = {r.image_id: "mug" for r in recs}
    extra = record(["mug"], "extra")
    ids["extra"] = "mug"
    got = top5_accuracy(recs + [extra], {"mug": MUG}, ids)
    assert got == (sum(hits) + 1) / (len(hits) + 1)


@given(st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6, unique=True),
       st.integers(0, 5))
def test_hit_depends_on_rank_only(confs, pos):
    labels = ["a", "b", "c", "d", "e", "f"]
    labels[pos] = "mug"
    confs = sorted(confs, reverse=True)
    rec = PredictionRecord("i", "p", tuple(zip(labels, confs)))
    squashed = PredictionRecord("i", "p", tuple(zip(labels, [c ** 3 / 2 for c in confs])))
    assert top5_hit(rec, MUG) == top5_hit(squashed, MUG) == (pos < 5)


def test_record_invariants():
    with pytest.raises(ValidationError):
        PredictionRecord("i", "p", ())
    with pytest.raises(ValidationError):
        PredictionRecord("i", "p", (("a", 0.5), ("a", 0.4)))
    with pytest.raises(ValidationError):
        PredictionRecord("i", "p", (("a", 0.4), ("b", 0.5)))
    with pytest.raises(ValidationError):
        ObjectLabelSet("x", frozenset({"  "}))


def _line(labels, image_id="i1"):
    return json.dumps({"image_id": image_id, "platform": "p",
                       "labels": [{"label": a, "confidence": c} for a, c in labels]})


def test_load_predictions(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text(_line([("a", 0.2), ("b", 0.9)]) + "\n\n" + _line([("c", 1.0)], "i2") + "\n")
    recs = load_predictions(path)
    assert [r.image_id for r in recs] == ["i1", "i2"]
    assert recs[0].labels == (("b", 0.9), ("a", 0.2))
    write_predictions(tmp_path / "q.jsonl", recs)
    assert load_predictions(tmp_path / "q.jsonl") == recs


def test_load_predictions_errors(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text(_line([("a", 0.5)]) + "\n" + _line([("a", 1.3)]) + "\n")
    with pytest.raises(InvariantViolation) as info:
        load_predictions(path)
    assert info.value.line == 2
    path.write_text("{oops\n")
    with pytest.raises(ParseError) as info:
        load_predictions(path)
    assert info.value.line == 1
    path.write_text('{"image_id": "x"}\n')
    with pytest.raises(ParseError):
        load_predictions(path)


class _Handler(BaseHTTPRequestHandler):
    calls = []
    status = 200

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        type(self).calls.append((self.path, body, self.headers.get("X-Key")))
        if self.path.endswith("/broken"):
            self.send_response(500)
            self.end_headers()
            return
        self.send_response(type(self).status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        payload = {"labels": [{"label": "widget", "confidence": 0.4},
                              {"label": body.decode(), "confidence": 0.9}]}
        self.wfile.write(json.dumps(payload).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.calls = []
    _Handler.status = 200
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_port}"
    srv.shutdown()
    srv.server_close()


@pytest.fixture
def images(tmp_path):
    out = []
    for name in ("alpha", "beta", "gamma"):
        p = tmp_path / f"{name}.png"
        p.write_bytes(name.encode())
        out.append((name, p))
    return out


def test_fetch_round_trip_and_replay(server, images, tmp_path, monkeypatch):
    monkeypatch.setenv("MOCK_KEY", "s3cret")
    client = EndpointDescriptor(server + "/predict/{image}", platform="mock",
                                auth_header="X-Key", auth_value_env="MOCK_KEY", max_in_flight=2)
    cache = tmp_path / "cache.jsonl"
    recs = fetch_predictions(client, images, cache)
    assert [r.image_id for r in recs] == ["alpha", "beta", "gamma"]
    assert recs[0].labels == (("alpha", 0.9), ("widget", 0.4))
    assert sorted(c[0] for c in _Handler.calls) == [
        "/predict/alpha", "/predict/beta", "/predict/gamma"]
    assert {c[2] for c in _Handler.calls} == {"s3cret"}

    _Handler.calls.clear()
    again = fetch_predictions(client, images, cache)
    assert again == recs
    assert _Handler.calls == []
    assert len(load_predictions(cache)) == 3


def test_fetch_partial_failure_is_skipped(server, images, tmp_path):
    client = EndpointDescriptor(server + "/{image}", platform="mock")
    broken = images + [("broken", images[0][1])]
    recs = fetch_predictions(client, broken, tmp_path / "c.jsonl")
    assert [r.image_id for r in recs] == ["alpha", "beta", "gamma"]


def test_fetch_auth_rejected(server, images, tmp_path):
    _Handler.status = 401
    client = EndpointDescriptor(server + "/{image}", platform="mock")
    with pytest.raises(AuthRejected):
        fetch_predictions(client, images, tmp_path / "c.jsonl")


def test_fetch_unreachable(images, tmp_path):
    client = EndpointDescriptor("http://127.0.0.1:9/{image}", timeout_ms=500)
    with pytest.raises(EndpointUnreachable):
        fetch_predictions(client, images, tmp_path / "c.jsonl")


def test_endpoint_config():
    with pytest.raises(ValidationError):
        EndpointDescriptor("http://host/predict")
    with pytest.raises(ValidationError):
        EndpointDescriptor.from_config({"url_template": "http://h/{image}", "token": "x"})
