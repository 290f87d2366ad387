"""JSON-RPC 2.0 wire layer: newline-delimited UTF-8 messages over stdio
or TCP, with the tool-server method surface (initialize, ping,
tools/list, tools/call).

One client is served at a time and requests are handled strictly in
arrival order; a tool call runs to completion before the next message is
read.
"""

from __future__ import annotations

import json
import socket
import sys
import threading
from dataclasses import dataclass, field
from typing import Any

from . import PROTOCOL_REVISION, SERVER_NAME, __version__
from .errors import (
    INVALID_PARAMS,
    INVALID_REQUEST,
    METHOD_NOT_FOUND,
    PARSE_ERROR,
    ToolError,
)
from .registry import Registry

_ABSENT = object()


@dataclass(frozen=True)
class RpcError:
    code: int
    message: str
    data: Any = None

    def to_dict(self) -> dict:
        payload = {"code": self.code, "message": self.message}
        if self.data is not None:
            payload["data"] = self.data
        return payload


@dataclass(frozen=True)
class RpcRequest:
    method: str
    id: int | str | None = None
    params: Any = None
    is_notification: bool = False

    def encode(self) -> str:
        payload: dict = {"jsonrpc": "2.0", "method": self.method}
        if not self.is_notification:
            payload["id"] = self.id
        if self.params is not None:
            payload["params"] = self.params
        return json.dumps(payload)


@dataclass(frozen=True)
class RpcResponse:
    id: int | str | None
    result: Any = _ABSENT
    error: RpcError | None = None

    def __post_init__(self):
        has_result = self.result is not _ABSENT
        if has_result == (self.error is not None):
            raise ValueError("response carries exactly one of result/error")

    def encode(self) -> str:
        payload: dict = {"jsonrpc": "2.0", "id": self.id}
        if self.error is not None:
            payload["error"] = self.error.to_dict()
        else:
            payload["result"] = self.result
        return json.dumps(payload)


def decode_request(text: str) -> RpcRequest:
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("request must be a JSON object")
    method = obj.get("method")
    if not isinstance(method, str) or not method:
        raise ValueError("method must be a non-empty string")
    return RpcRequest(method=method, id=obj.get("id"), params=obj.get("params"),
                      is_notification="id" not in obj)


def decode_response(text: str) -> RpcResponse:
    obj = json.loads(text)
    if "error" in obj:
        err = obj["error"]
        return RpcResponse(id=obj.get("id"),
                           error=RpcError(code=err["code"], message=err["message"],
                                          data=err.get("data")))
    return RpcResponse(id=obj.get("id"), result=obj["result"])


def _error_response(rid, code: int, message: str, data=None) -> str:
    return RpcResponse(id=rid, error=RpcError(code=code, message=message,
                                              data=data)).encode()


def handle_request(registry: Registry, raw: bytes | str) -> str | None:
    """Map one wire message to at most one response line.

    Requests with an id always produce exactly one response; notifications
    produce none. Malformed input maps to the standard error codes.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError:
            return _error_response(None, PARSE_ERROR, "message is not valid UTF-8")
    if not raw.strip():
        return None
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        return _error_response(None, PARSE_ERROR, f"parse error: {exc}")

    if isinstance(obj, list):
        return _error_response(None, INVALID_REQUEST, "batch requests are not supported")
    if not isinstance(obj, dict):
        return _error_response(None, INVALID_REQUEST, "request must be a JSON object")

    rid = obj.get("id")
    is_notification = "id" not in obj
    if rid is not None and not isinstance(rid, (int, str)):
        return _error_response(None, INVALID_REQUEST, "id must be an integer or string")
    if "jsonrpc" in obj and obj["jsonrpc"] != "2.0":
        return _error_response(rid, INVALID_REQUEST, "jsonrpc must be '2.0'")
    method = obj.get("method")
    if not isinstance(method, str) or not method:
        return _error_response(rid, INVALID_REQUEST, "method must be a non-empty string")
    params = obj.get("params")
    if params is not None and not isinstance(params, (dict, list)):
        return _error_response(rid, INVALID_REQUEST, "params must be structured")

    try:
        result = _dispatch(registry, method, params)
    except ToolError as err:
        if is_notification:
            return None
        return _error_response(rid, err.code, err.message, err.data)
    if is_notification:
        return None
    return RpcResponse(id=rid, result=result).encode()


def _dispatch(registry: Registry, method: str, params) -> dict:
    if method == "initialize":
        return {
            "protocolVersion": PROTOCOL_REVISION,
            "serverInfo": {"name": SERVER_NAME, "version": __version__},
            "capabilities": {"tools": {}},
        }
    if method == "ping":
        return {}
    if method == "tools/list":
        return {"tools": [t.to_dict() for t in registry.list_tools()]}
    if method == "tools/call":
        if not isinstance(params, dict) or not isinstance(params.get("name"), str):
            raise ToolError("tools/call needs params {name, arguments}",
                            code=INVALID_PARAMS, param="name")
        arguments = params.get("arguments") or {}
        if not isinstance(arguments, dict):
            raise ToolError("arguments must be an object", code=INVALID_PARAMS,
                            param="arguments")
        return registry.call_tool(params["name"], arguments)
    raise ToolError(f"unknown method {method!r}", code=METHOD_NOT_FOUND)


# ---------------------------------------------------------------------------
# transports

def serve_stdio(registry: Registry, stdin=None, stdout=None) -> int:
    """Serve newline-delimited messages until the input stream closes."""
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer
    for line in stdin:
        response = handle_request(registry, line)
        if response is not None:
            stdout.write(response.encode("utf-8") + b"\n")
            stdout.flush()
    return 0


@dataclass
class TcpServerHandle:
    host: str
    port: int
    _sock: socket.socket = field(repr=False, default=None)
    _stop: threading.Event = field(repr=False, default_factory=threading.Event)

    def stop(self) -> None:
        self._stop.set()

    def close(self) -> None:
        self.stop()
        self._sock.close()


def serve_tcp(registry: Registry, host: str = "127.0.0.1", port: int = 0,
              ) -> TcpServerHandle:
    """Bind a TCP listener; port 0 picks an ephemeral port.

    Call ``serve_forever`` (possibly from a thread) to accept clients one
    at a time.
    """
    try:
        sock = socket.create_server((host, port))
    except OSError as exc:
        raise ToolError(f"cannot bind {host}:{port}: {exc}") from exc
    sock.settimeout(0.2)
    return TcpServerHandle(host=host, port=sock.getsockname()[1], _sock=sock)


def serve_forever(registry: Registry, handle: TcpServerHandle) -> None:
    while not handle._stop.is_set():
        try:
            conn, _ = handle._sock.accept()
        except socket.timeout:
            continue
        except OSError:
            break
        with conn:
            reader = conn.makefile("rb")
            for line in reader:
                response = handle_request(registry, line)
                if response is not None:
                    try:
                        conn.sendall(response.encode("utf-8") + b"\n")
                    except OSError:
                        break
                if handle._stop.is_set():
                    break
