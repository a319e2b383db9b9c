"""Client side of the wire protocol (see rpc.py for the frame format).

StdioTransport speaks newline-delimited JSON with a child process and
multiplexes: a background reader delivers responses by id, so concurrent
callers and out-of-order replies are fine. HttpTransport POSTs one frame per
call to the ``/v1/rpc`` endpoint.
"""

from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
import threading
from itertools import count

import numpy as np
import requests

from mlmeval.errors import (
    BackendConnectionError,
    BackendError,
    ContractViolation,
    SequenceTooLongError,
    WireProtocolError,
)
from mlmeval.scorer import rpc
from mlmeval.scorer.backend import (
    Alignment,
    Backend,
    ModelInfo,
    TopK,
    check_masked_request,
    check_positions,
    check_words,
)

logger = logging.getLogger(__name__)

_OVERFLOW_RE = re.compile(r"required=(\d+) limit=(\d+)")


def _raise_for_error(error: dict) -> None:
    code = error.get("code")
    message = error.get("message", "")
    if code == rpc.CODE_OVERFLOW:
        m = _OVERFLOW_RE.search(message)
        if m:
            raise SequenceTooLongError(required=int(m.group(1)), limit=int(m.group(2)))
        raise SequenceTooLongError(required=-1, limit=-1)
    if code == rpc.CODE_CONTRACT:
        raise ContractViolation(message)
    if code in (rpc.CODE_PARSE, rpc.CODE_UNKNOWN_METHOD, rpc.CODE_INVALID_PARAMS):
        raise WireProtocolError(message, code=code)
    raise BackendError(f"backend error {code}: {message}")


class StdioTransport:
    """Runs a backend as a child process and matches responses by id."""

    def __init__(self, command: list[str] | str, timeout: float = 120.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise BackendConnectionError(f"cannot start backend {command!r}: {exc}") from exc
        self._send_lock = threading.Lock()
        self._cond = threading.Condition()
        self._responses: dict[int, dict] = {}
        self._closed = False
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                frame = json.loads(line)
            except json.JSONDecodeError:
                logger.warning("dropping unparseable frame from backend: %r", line[:200])
                continue
            frame_id = frame.get("id") if isinstance(frame, dict) else None
            if not isinstance(frame_id, int):
                logger.warning("dropping frame without integer id: %r", line[:200])
                continue
            with self._cond:
                self._responses[frame_id] = frame
                self._cond.notify_all()
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def call(self, request: dict) -> dict:
        request_id = request["id"]
        try:
            with self._send_lock:
                assert self._proc.stdin is not None
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise BackendConnectionError(f"backend process went away: {exc}") from exc
        with self._cond:
            ok = self._cond.wait_for(
                lambda: request_id in self._responses or self._closed,
                timeout=self.timeout,
            )
            if request_id in self._responses:
                return self._responses.pop(request_id)
            if not ok:
                raise BackendConnectionError(f"timeout waiting for response {request_id}")
            raise BackendConnectionError("backend closed its output stream")

    def close(self) -> None:
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._reader.join(timeout=5)


class HttpTransport:
    """One POST per request against the single-endpoint HTTP flavor."""

    def __init__(self, endpoint: str, timeout: float = 120.0):
        if not endpoint.rstrip("/").endswith(rpc.RPC_PATH.strip("/")):
            endpoint = endpoint.rstrip("/") + rpc.RPC_PATH
        self.endpoint = endpoint
        self.timeout = timeout
        self._session = requests.Session()

    def call(self, request: dict) -> dict:
        try:
            response = self._session.post(self.endpoint, json=request, timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except requests.RequestException as exc:
            raise BackendConnectionError(f"backend unreachable at {self.endpoint}: {exc}") from exc

    def close(self) -> None:
        self._session.close()


class WireBackend(Backend):
    """Backend implementation backed by a wire-protocol peer."""

    def __init__(self, transport):
        self._transport = transport
        self._ids = count(1)
        self._id_lock = threading.Lock()
        self._info: ModelInfo | None = None

    def _call(self, method: str, params: dict) -> dict:
        with self._id_lock:
            request_id = next(self._ids)
        response = self._transport.call({"id": request_id, "method": method, "params": params})
        if not isinstance(response, dict):
            raise WireProtocolError(f"response is not an object: {response!r}")
        if response.get("id") != request_id:
            raise WireProtocolError(
                f"response id {response.get('id')!r} does not match request id {request_id}"
            )
        if "error" in response:
            _raise_for_error(response["error"])
        if "result" not in response:
            raise WireProtocolError("response carries neither result nor error")
        return response["result"]

    def model_info(self) -> ModelInfo:
        if self._info is None:
            result = self._call("model_info", {})
            self._info = ModelInfo(
                hidden_size=int(result["hidden_size"]),
                vocab_size=int(result["vocab_size"]),
                max_seq_len=int(result["max_seq_len"]),
                mask_id=int(result["mask_id"]),
                cls_id=int(result["cls_id"]),
                sep_id=int(result["sep_id"]),
                unk_id=int(result["unk_id"]),
                lowercases=bool(result["lowercases"]),
            )
        return self._info

    def tokenize(self, words: list[str]) -> tuple[list[int], Alignment]:
        check_words(words)
        result = self._call("tokenize", {"words": list(words)})
        ids = [int(i) for i in result["ids"]]
        spans = tuple((int(s), int(e)) for s, e in result["spans"])
        return ids, Alignment(spans=spans)

    def score_masked(self, ids: list[int], positions: list[int], k: int) -> TopK:
        check_masked_request(ids, positions, k, self.model_info().mask_id)
        result = self._call(
            "score_masked", {"ids": list(ids), "positions": list(positions), "k": int(k)}
        )
        topk: TopK = {}
        for position, candidates in result["topk"]:
            topk[int(position)] = [(int(i), float(s)) for i, s in candidates]
        return topk

    def embed(self, ids: list[int], positions: list[int]) -> list[np.ndarray]:
        check_positions(ids, positions)
        result = self._call("embed", {"ids": list(ids), "positions": list(positions)})
        return [np.asarray(v, dtype=float) for v in result["vectors"]]

    def detokenize(self, ids: list[int]) -> str:
        result = self._call("detokenize", {"ids": list(ids)})
        return str(result["text"])

    def close(self) -> None:
        self._transport.close()
