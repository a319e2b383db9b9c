"""Line-delimited JSON request/response machinery for backend processes.

One frame per line, UTF-8, over a child process's standard streams or HTTP
POST to ``/v1/rpc``:

  request:   {"id": <int>, "method": <name>, "params": {...}}
  response:  {"id": <int>, "result": {...}}
         or  {"id": <int>, "error": {"code": <int>, "message": <str>}}

Methods and their params/results (vectors and id lists are JSON number
arrays; scores are log-probabilities):

  model_info    {}                                   -> {"hidden_size", "vocab_size",
                                                         "max_seq_len", "mask_id", "cls_id",
                                                         "sep_id", "unk_id", "lowercases"}
  tokenize      {"words": [str, ...]}                -> {"ids": [...], "spans": [[s, e], ...]}
  score_masked  {"ids": [...], "positions": [...],
                 "k": int}                           -> {"topk": [[pos, [[id, score], ...]], ...]}
  embed         {"ids": [...], "positions": [...]}   -> {"vectors": [[...], ...]}
  detokenize    {"ids": [...]}                       -> {"text": str}

Responses may arrive out of order; the ``id`` field performs matching.
Overflow errors carry the needed length in the message as
``required=<n> limit=<m>``.
"""

from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, TextIO

from mlmeval.errors import ContractViolation, SequenceTooLongError
from mlmeval.scorer.backend import Backend

RPC_PATH = "/v1/rpc"

CODE_PARSE = -32700
CODE_UNKNOWN_METHOD = -32601
CODE_INVALID_PARAMS = -32602
CODE_CONTRACT = 1
CODE_OVERFLOW = 2
CODE_INTERNAL = 3

METHODS = ("model_info", "tokenize", "score_masked", "embed", "detokenize")


def _error(request_id: Any, code: int, message: str) -> dict:
    return {"id": request_id, "error": {"code": code, "message": message}}


def _call(backend: Backend, method: str, params: dict) -> dict:
    if method == "model_info":
        info = backend.model_info()
        return {
            "hidden_size": info.hidden_size,
            "vocab_size": info.vocab_size,
            "max_seq_len": info.max_seq_len,
            "mask_id": info.mask_id,
            "cls_id": info.cls_id,
            "sep_id": info.sep_id,
            "unk_id": info.unk_id,
            "lowercases": info.lowercases,
        }
    if method == "tokenize":
        ids, alignment = backend.tokenize(list(params["words"]))
        return {"ids": list(ids), "spans": [list(s) for s in alignment.spans]}
    if method == "score_masked":
        topk = backend.score_masked(
            list(params["ids"]), list(params["positions"]), int(params["k"])
        )
        return {"topk": [[p, [[i, s] for i, s in cands]] for p, cands in topk.items()]}
    if method == "embed":
        vectors = backend.embed(list(params["ids"]), list(params["positions"]))
        return {"vectors": [[float(x) for x in v] for v in vectors]}
    if method == "detokenize":
        return {"text": backend.detokenize(list(params["ids"]))}
    raise KeyError(method)


def dispatch(backend: Backend, request: dict) -> dict:
    """One request dict -> one response dict; never raises."""
    request_id = request.get("id") if isinstance(request, dict) else None
    if not isinstance(request, dict) or not isinstance(request_id, int):
        return _error(request_id, CODE_PARSE, "request must be an object with integer id")
    method = request.get("method")
    if method not in METHODS:
        return _error(request_id, CODE_UNKNOWN_METHOD, f"unknown method {method!r}")
    params = request.get("params", {})
    if not isinstance(params, dict):
        return _error(request_id, CODE_INVALID_PARAMS, "params must be an object")
    try:
        return {"id": request_id, "result": _call(backend, method, params)}
    except SequenceTooLongError as exc:
        return _error(request_id, CODE_OVERFLOW, str(exc))
    except ContractViolation as exc:
        return _error(request_id, CODE_CONTRACT, str(exc))
    except (KeyError, TypeError, ValueError) as exc:
        return _error(request_id, CODE_INVALID_PARAMS, f"bad params: {exc}")
    except Exception as exc:  # keep the server alive on any backend fault
        return _error(request_id, CODE_INTERNAL, f"{type(exc).__name__}: {exc}")


def handle_line(backend: Backend, line: str) -> dict | None:
    """Parse one frame and dispatch it; blank lines are ignored."""
    line = line.strip()
    if not line:
        return None
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return _error(None, CODE_PARSE, f"bad JSON frame: {exc}")
    return dispatch(backend, request)


def serve_stdio(backend: Backend, stdin: TextIO | None = None,
                stdout: TextIO | None = None) -> None:
    """Answer frames from stdin on stdout until EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        response = handle_line(backend, line)
        if response is None:
            continue
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


class _RpcHandler(BaseHTTPRequestHandler):
    backend: Backend  # set by make_http_server

    def do_POST(self):
        if self.path != RPC_PATH:
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length).decode("utf-8")
        response = handle_line(self.backend, body)
        if response is None:
            response = _error(None, CODE_PARSE, "empty request body")
        payload = json.dumps(response).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):  # quiet by default
        pass


def make_http_server(backend: Backend, host: str = "127.0.0.1",
                     port: int = 0) -> ThreadingHTTPServer:
    """HTTP server answering the protocol on POST /v1/rpc; caller runs it."""
    handler = type("BoundRpcHandler", (_RpcHandler,), {"backend": backend})
    return ThreadingHTTPServer((host, port), handler)


def serve_http(backend: Backend, host: str = "127.0.0.1", port: int = 8001) -> None:
    server = make_http_server(backend, host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()


def start_http_thread(backend: Backend, host: str = "127.0.0.1") -> tuple[ThreadingHTTPServer, str]:
    """Background HTTP server on an ephemeral port; returns (server, endpoint)."""
    server = make_http_server(backend, host, 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    endpoint = f"http://{host}:{server.server_address[1]}{RPC_PATH}"
    return server, endpoint
