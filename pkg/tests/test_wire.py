"""Wire protocol: server dispatch, both transports, and a scripted fake
backend exercising out-of-order responses and error frames."""

import json
import sys
import threading

import numpy as np
import pytest

from mlmeval.errors import (
    BackendConnectionError,
    BackendError,
    ContractViolation,
    SequenceTooLongError,
    WireProtocolError,
)
from mlmeval.scorer import rpc
from mlmeval.scorer.toy import MASK, EchoBackend, UnigramBackend
from mlmeval.scorer.wire import HttpTransport, StdioTransport, WireBackend

# Child script speaking the protocol over stdio against the unigram toy,
# built on the same deterministic fixture corpus as the test process.
SERVER_SCRIPT = """
import sys
from mlmeval.fixtures import fixture_treebank
from mlmeval.scorer.rpc import serve_stdio
from mlmeval.scorer.toy import UnigramBackend
backend = UnigramBackend(list(fixture_treebank().sentences()))
serve_stdio(backend)
"""

# Fake backend for conformance testing: holds each request back until two are
# queued, then answers them newest-first, so replies are always out of order.
# Requests whose params carry {"fail": code} get an error frame instead.
FAKE_SCRIPT = """
import json, sys

pending = []

def reply(req):
    params = req.get("params", {})
    if "fail" in params:
        code = params["fail"]
        message = params.get("message", "scripted failure")
        return {"id": req["id"], "error": {"code": code, "message": message}}
    if req["method"] == "model_info":
        return {"id": req["id"], "result": {
            "hidden_size": 4, "vocab_size": 10, "max_seq_len": 16,
            "mask_id": 2, "cls_id": 0, "sep_id": 1, "unk_id": 3,
            "lowercases": False}}
    if req["method"] == "detokenize":
        return {"id": req["id"], "result": {"text": "x" + str(req["id"])}}
    return {"id": req["id"], "error": {"code": -32601, "message": "unknown"}}

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    pending.append(json.loads(line))
    if len(pending) >= 2:
        for req in reversed(pending):
            sys.stdout.write(json.dumps(reply(req)) + "\\n")
        sys.stdout.flush()
        pending = []
"""


def _mask_first(backend):
    sentence_words = ["the", "cat", "sees", "the", "door"]
    ids, _ = backend.tokenize(sentence_words)
    masked = list(ids)
    masked[1] = backend.model_info().mask_id
    return ids, masked


class TestDispatch:
    @pytest.fixture()
    def backend(self, corpus):
        return UnigramBackend(corpus)

    def test_model_info_round_trip(self, backend):
        response = rpc.dispatch(backend, {"id": 1, "method": "model_info", "params": {}})
        info = backend.model_info()
        assert response["id"] == 1
        assert response["result"]["vocab_size"] == info.vocab_size
        assert response["result"]["mask_id"] == info.mask_id

    def test_tokenize_round_trip(self, backend):
        response = rpc.dispatch(
            backend, {"id": 2, "method": "tokenize", "params": {"words": ["the", "cat"]}}
        )
        ids, alignment = backend.tokenize(["the", "cat"])
        assert response["result"]["ids"] == ids
        assert response["result"]["spans"] == [list(s) for s in alignment.spans]

    def test_score_masked_round_trip(self, backend):
        _, masked = _mask_first(backend)
        response = rpc.dispatch(backend, {
            "id": 3, "method": "score_masked",
            "params": {"ids": masked, "positions": [1], "k": 3},
        })
        direct = backend.score_masked(masked, [1], 3)
        assert response["result"]["topk"] == [[1, [[i, s] for i, s in direct[1]]]]

    def test_embed_round_trip(self, backend):
        ids, _ = backend.tokenize(["the"])
        response = rpc.dispatch(
            backend, {"id": 4, "method": "embed", "params": {"ids": ids, "positions": [1]}}
        )
        direct = backend.embed(ids, [1])[0]
        np.testing.assert_allclose(response["result"]["vectors"][0], direct)

    def test_detokenize_round_trip(self, backend):
        ids, _ = backend.tokenize(["the", "cat"])
        response = rpc.dispatch(
            backend, {"id": 5, "method": "detokenize", "params": {"ids": ids[1:-1]}}
        )
        assert response["result"]["text"] == "the cat"

    def test_unknown_method(self, backend):
        response = rpc.dispatch(backend, {"id": 6, "method": "nope", "params": {}})
        assert response["error"]["code"] == rpc.CODE_UNKNOWN_METHOD
        assert response["id"] == 6

    def test_missing_id_is_parse_error(self, backend):
        response = rpc.dispatch(backend, {"method": "model_info", "params": {}})
        assert response["error"]["code"] == rpc.CODE_PARSE

    def test_missing_param_is_invalid_params(self, backend):
        response = rpc.dispatch(backend, {"id": 7, "method": "tokenize", "params": {}})
        assert response["error"]["code"] == rpc.CODE_INVALID_PARAMS

    def test_non_object_params_is_invalid_params(self, backend):
        response = rpc.dispatch(backend, {"id": 8, "method": "tokenize", "params": [1]})
        assert response["error"]["code"] == rpc.CODE_INVALID_PARAMS

    def test_contract_violation_mapped(self, backend):
        ids, _ = backend.tokenize(["the"])
        response = rpc.dispatch(backend, {
            "id": 9, "method": "score_masked",
            "params": {"ids": ids, "positions": [1], "k": 1},  # position not masked
        })
        assert response["error"]["code"] == rpc.CODE_CONTRACT

    def test_overflow_mapped_with_lengths(self, corpus):
        backend = UnigramBackend(corpus, max_seq_len=4)
        response = rpc.dispatch(backend, {
            "id": 10, "method": "tokenize",
            "params": {"words": ["the", "cat", "sees"]},
        })
        assert response["error"]["code"] == rpc.CODE_OVERFLOW
        assert "required=5 limit=4" in response["error"]["message"]

    def test_bad_json_line(self, backend):
        response = rpc.handle_line(backend, "{nope")
        assert response["error"]["code"] == rpc.CODE_PARSE
        follow_up = rpc.handle_line(backend, json.dumps(
            {"id": 11, "method": "model_info", "params": {}}
        ))
        assert "result" in follow_up

    def test_blank_line_ignored(self, backend):
        assert rpc.handle_line(backend, "   \n") is None

    def test_internal_error_keeps_serving(self, corpus):
        class Exploding(UnigramBackend):
            def detokenize(self, ids):
                raise RuntimeError("boom")

        backend = Exploding(corpus)
        response = rpc.dispatch(
            backend, {"id": 12, "method": "detokenize", "params": {"ids": []}}
        )
        assert response["error"]["code"] == rpc.CODE_INTERNAL
        assert "boom" in response["error"]["message"]
        ok = rpc.dispatch(backend, {"id": 13, "method": "model_info", "params": {}})
        assert "result" in ok


@pytest.fixture(scope="module")
def remote():
    backend = WireBackend(StdioTransport([sys.executable, "-c", SERVER_SCRIPT]))
    yield backend
    backend.close()


@pytest.fixture(scope="module")
def local(corpus):
    return UnigramBackend(corpus)


@pytest.fixture(scope="module")
def http_endpoint(corpus):
    server, endpoint = rpc.start_http_thread(EchoBackend(corpus))
    yield endpoint
    server.shutdown()
    server.server_close()


class TestStdioTransport:
    def test_model_info_matches_local(self, remote, local):
        assert remote.model_info() == local.model_info()

    def test_tokenize_matches_local(self, remote, local):
        words = ["the", "cat", "sees", "unseenword"]
        remote_ids, remote_alignment = remote.tokenize(words)
        local_ids, local_alignment = local.tokenize(words)
        assert remote_ids == local_ids
        assert remote_alignment == local_alignment

    def test_score_masked_matches_local(self, remote, local):
        _, masked = _mask_first(local)
        assert remote.score_masked(masked, [1], 5) == local.score_masked(masked, [1], 5)

    def test_embed_matches_local(self, remote, local):
        ids, _ = local.tokenize(["the", "cat"])
        for r, l in zip(remote.embed(ids, [1, 2]), local.embed(ids, [1, 2])):
            np.testing.assert_allclose(r, l)

    def test_detokenize_matches_local(self, remote, local):
        ids, _ = local.tokenize(["the", "cat"])
        assert remote.detokenize(ids[1:-1]) == "the cat"

    def test_overflow_propagates(self, remote):
        with pytest.raises(SequenceTooLongError) as excinfo:
            remote.tokenize(["the"] * 4000)
        assert excinfo.value.required == 4002
        assert excinfo.value.limit == 512

    def test_contract_error_propagates(self, remote, local):
        ids, _ = local.tokenize(["the"])
        with pytest.raises(ContractViolation):
            remote.score_masked(ids, [1], 1)  # position not masked

    def test_concurrent_callers(self, remote, local):
        words = [["the", "cat"], ["the", "door"], ["a", "bird"], ["the", "cloud"]]
        results = {}
        errors = []

        def worker(index):
            try:
                results[index] = remote.tokenize(words[index])
            except Exception as exc:  # surfaced below
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(len(words))]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for i, w in enumerate(words):
            assert results[i] == local.tokenize(w)

    def test_missing_command_raises_connection_error(self):
        with pytest.raises(BackendConnectionError):
            StdioTransport(["/nonexistent/backend-binary"])

    def test_dead_server_raises_connection_error(self):
        transport = StdioTransport([sys.executable, "-c", "pass"], timeout=10)
        backend = WireBackend(transport)
        with pytest.raises(BackendConnectionError):
            backend.model_info()
        backend.close()


class TestHttpTransport:
    def test_endpoint_path_appended(self):
        transport = HttpTransport("http://127.0.0.1:1")
        assert transport.endpoint.endswith(rpc.RPC_PATH)
        transport.close()

    def test_round_trip(self, http_endpoint, corpus):
        echo = EchoBackend(corpus)
        backend = WireBackend(HttpTransport(http_endpoint))
        assert backend.model_info() == echo.model_info()
        ids, alignment = echo.tokenize(corpus[0].forms)
        assert backend.tokenize(corpus[0].forms) == (ids, alignment)
        p = alignment.all_positions()[0]
        masked = list(ids)
        masked[p] = MASK
        assert backend.score_masked(masked, [p], 1)[p][0] == (ids[p], 0.0)
        backend.close()

    def test_unreachable_endpoint(self):
        backend = WireBackend(HttpTransport("http://127.0.0.1:9", timeout=0.5))
        with pytest.raises(BackendConnectionError):
            backend.model_info()
        backend.close()


class TestScriptedFakeServer:
    """Criterion: out-of-order responses and error frames must not confuse
    the client."""

    @pytest.fixture()
    def fake(self):
        backend = WireBackend(StdioTransport([sys.executable, "-c", FAKE_SCRIPT]))
        yield backend
        backend.close()

    def test_out_of_order_responses_matched_by_id(self, fake):
        results = {}

        def worker(name):
            results[name] = fake._call("detokenize", {"ids": []})

        threads = [threading.Thread(target=worker, args=(n,)) for n in ("a", "b")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        texts = {results["a"]["text"], results["b"]["text"]}
        assert texts == {"x1", "x2"}  # each caller got its own id's answer

    @pytest.mark.parametrize("code, exception", [
        (rpc.CODE_PARSE, WireProtocolError),
        (rpc.CODE_UNKNOWN_METHOD, WireProtocolError),
        (rpc.CODE_INVALID_PARAMS, WireProtocolError),
        (rpc.CODE_CONTRACT, ContractViolation),
        (rpc.CODE_INTERNAL, BackendError),
        (99, BackendError),
    ])
    def test_error_frames_raise_mapped_exceptions(self, fake, code, exception):
        errors = {}

        def worker(slot, params):
            try:
                fake._call("detokenize", params)
                errors[slot] = None
            except Exception as exc:
                errors[slot] = exc

        threads = [
            threading.Thread(target=worker, args=("fail", {"fail": code})),
            threading.Thread(target=worker, args=("ok", {})),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert isinstance(errors["fail"], exception)
        assert errors["ok"] is None  # the healthy request still succeeded

    def test_overflow_error_frame_restores_lengths(self, fake):
        caught = {}

        def worker(slot, params):
            try:
                fake._call("detokenize", params)
                caught[slot] = None
            except Exception as exc:
                caught[slot] = exc

        threads = [
            threading.Thread(target=worker, args=(
                "fail", {"fail": rpc.CODE_OVERFLOW, "message": "required=700 limit=512"}
            )),
            threading.Thread(target=worker, args=("ok", {})),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        exc = caught["fail"]
        assert isinstance(exc, SequenceTooLongError)
        assert exc.required == 700
        assert exc.limit == 512


class TestWireBackendFrameChecks:
    class _ScriptedTransport:
        def __init__(self, responses):
            self.responses = list(responses)

        def call(self, request):
            response = self.responses.pop(0)
            return response(request) if callable(response) else response

        def close(self):
            pass

    def test_mismatched_id_rejected(self):
        backend = WireBackend(self._ScriptedTransport([{"id": 999, "result": {}}]))
        with pytest.raises(WireProtocolError):
            backend.detokenize([])

    def test_result_and_error_both_missing(self):
        backend = WireBackend(self._ScriptedTransport([lambda req: {"id": req["id"]}]))
        with pytest.raises(WireProtocolError):
            backend.detokenize([])

    def test_non_object_response_rejected(self):
        backend = WireBackend(self._ScriptedTransport([lambda req: [1, 2]]))
        with pytest.raises(WireProtocolError):
            backend.detokenize([])
