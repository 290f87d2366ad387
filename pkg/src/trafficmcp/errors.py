"""Error codes shared by the wire protocol and the tool layer."""

from __future__ import annotations

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
TOOL_FAILED = -32000
TOOL_NOT_IMPORTED = -32001
UNKNOWN_MODULE = -32002


class ToolError(Exception):
    """Structured tool failure carrying a JSON-RPC error code and payload.

    ``data`` is serialized into the error object's ``data`` field and always
    carries a boolean ``retryable`` hint so callers (and the workflow retry
    loop) can decide whether retrying makes sense.
    """

    def __init__(self, message: str, code: int = TOOL_FAILED, retryable: bool = False, **data):
        super().__init__(message)
        self.code = code
        self.message = message
        self.data = dict(data)
        self.data.setdefault("retryable", retryable)


def invalid_params(message: str, **data) -> ToolError:
    return ToolError(message, code=INVALID_PARAMS, **data)
