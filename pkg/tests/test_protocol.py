import json
import socket
import subprocess
import sys
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trafficmcp import PROTOCOL_REVISION
from trafficmcp.registry import Registry
from trafficmcp.server import (
    RpcError,
    RpcRequest,
    RpcResponse,
    decode_request,
    decode_response,
    handle_request,
    serve_forever,
    serve_tcp,
)


@pytest.fixture
def registry(tmp_path):
    return Registry(workspace=tmp_path)


def send(registry, payload) -> dict | None:
    raw = payload if isinstance(payload, (str, bytes)) else json.dumps(payload)
    response = handle_request(registry, raw)
    return None if response is None else json.loads(response)


class TestMethodSurface:
    def test_ping(self, registry):
        resp = send(registry, {"jsonrpc": "2.0", "id": 1, "method": "ping"})
        assert resp == {"jsonrpc": "2.0", "id": 1, "result": {}}

    def test_initialize_handshake(self, registry):
        resp = send(registry, {"jsonrpc": "2.0", "id": 1, "method": "initialize"})
        result = resp["result"]
        assert result["protocolVersion"] == PROTOCOL_REVISION
        assert result["serverInfo"]["name"] == "trafficmcp"
        assert "tools" in result["capabilities"]

    def test_unknown_method(self, registry):
        resp = send(registry, {"jsonrpc": "2.0", "id": 2, "method": "nosuch"})
        assert resp["error"]["code"] == -32601
        assert resp["id"] == 2

    def test_parse_error(self, registry):
        resp = send(registry, "not json")
        assert resp["error"]["code"] == -32700
        assert resp["id"] is None

    def test_batch_rejected(self, registry):
        resp = send(registry, [{"jsonrpc": "2.0", "id": 1, "method": "ping"}])
        assert resp["error"]["code"] == -32600

    def test_tools_list(self, registry):
        resp = send(registry, {"jsonrpc": "2.0", "id": 3, "method": "tools/list"})
        names = [t["name"] for t in resp["result"]["tools"]]
        assert names == ["get_module_description", "import_module",
                         "workflow_sim_eval", "workflow_signal_opt"]
        schema = resp["result"]["tools"][1]
        assert schema["parameters"] == [{"name": "names", "type": "array",
                                         "required": True}]

    def test_invalid_params_code(self, registry):
        resp = send(registry, {"jsonrpc": "2.0", "id": 4, "method": "tools/call",
                               "params": {"name": "import_module",
                                          "arguments": {"names": "network"}}})
        assert resp["error"]["code"] == -32602

    def test_string_ids_echoed(self, registry):
        resp = send(registry, {"jsonrpc": "2.0", "id": "abc", "method": "ping"})
        assert resp["id"] == "abc"

    def test_notification_gets_no_response(self, registry):
        assert send(registry, {"jsonrpc": "2.0", "method": "ping"}) is None

    def test_wrong_jsonrpc_version(self, registry):
        resp = send(registry, {"jsonrpc": "1.0", "id": 1, "method": "ping"})
        assert resp["error"]["code"] == -32600


class TestResponseInvariants:
    @given(st.one_of(
        st.fixed_dictionaries({"id": st.integers(), "method": st.sampled_from(
            ["ping", "initialize", "tools/list", "bogus", ""])}),
        st.fixed_dictionaries({
            "id": st.one_of(st.integers(), st.text(max_size=5)),
            "method": st.text(max_size=8),
            "params": st.one_of(st.none(), st.dictionaries(st.text(max_size=3),
                                                           st.integers(), max_size=2)),
        }),
    ))
    def test_exactly_one_of_result_error(self, payload):
        registry = Registry(workspace="unused-ws")
        resp = send(registry, {"jsonrpc": "2.0", **payload})
        assert resp is not None
        assert ("result" in resp) != ("error" in resp)
        assert resp["id"] == payload["id"]

    @given(st.text(max_size=40))
    def test_garbage_never_crashes(self, text):
        registry = Registry(workspace="unused-ws")
        response = handle_request(registry, text)
        if text.strip():
            assert json.loads(response)["error"]["code"] in (-32700, -32600)


json_values = st.recursive(
    st.one_of(st.none(), st.booleans(), st.integers(-10, 10),
              st.text(max_size=6)),
    lambda children: st.one_of(
        st.lists(children, max_size=3),
        st.dictionaries(st.text(max_size=4), children, max_size=3)),
    max_leaves=8)


class TestRoundtrip:
    @given(method=st.text(min_size=1, max_size=10),
           rid=st.one_of(st.integers(), st.text(max_size=6)),
           params=st.one_of(st.none(), st.dictionaries(st.text(max_size=4),
                                                       json_values, max_size=3)))
    def test_request_roundtrip(self, method, rid, params):
        req = RpcRequest(method=method, id=rid, params=params)
        assert decode_request(req.encode()) == req

    @given(rid=st.one_of(st.none(), st.integers(), st.text(max_size=6)),
           result=json_values)
    def test_result_response_roundtrip(self, rid, result):
        resp = RpcResponse(id=rid, result=result)
        assert decode_response(resp.encode()) == resp

    @given(rid=st.integers(), code=st.sampled_from([-32700, -32600, -32601, -32602,
                                                    -32000, -32001, -32002]),
           message=st.text(max_size=10), data=json_values)
    def test_error_response_roundtrip(self, rid, code, message, data):
        resp = RpcResponse(id=rid, error=RpcError(code=code, message=message,
                                                  data=data))
        assert decode_response(resp.encode()) == resp

    def test_response_must_pick_one(self):
        with pytest.raises(ValueError):
            RpcResponse(id=1)


class TestStdioTransport:
    def run_server(self, lines: str):
        return subprocess.run(
            [sys.executable, "-m", "trafficmcp", "serve"],
            input=lines.encode("utf-8"), capture_output=True, timeout=30)

    def test_ping_and_clean_eof(self):
        proc = self.run_server('{"jsonrpc":"2.0","id":1,"method":"ping"}\n')
        assert proc.returncode == 0
        response = json.loads(proc.stdout.splitlines()[0])
        assert response == {"jsonrpc": "2.0", "id": 1, "result": {}}

    def test_every_id_gets_one_response(self):
        lines = "".join(
            json.dumps({"jsonrpc": "2.0", "id": i, "method": "ping"}) + "\n"
            for i in range(5))
        proc = self.run_server(lines)
        ids = [json.loads(line)["id"] for line in proc.stdout.splitlines()]
        assert ids == [0, 1, 2, 3, 4]

    def test_malformed_line_keeps_serving(self):
        lines = ('garbage\n'
                 '{"jsonrpc":"2.0","id":7,"method":"ping"}\n')
        proc = self.run_server(lines)
        first, second = (json.loads(line) for line in proc.stdout.splitlines())
        assert first["error"]["code"] == -32700
        assert second["id"] == 7


class TestTcpTransport:
    def test_ephemeral_bind_and_roundtrip(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        handle = serve_tcp(registry, "127.0.0.1", 0)
        assert handle.port > 0
        thread = threading.Thread(target=serve_forever, args=(registry, handle),
                                  daemon=True)
        thread.start()
        try:
            with socket.create_connection(("127.0.0.1", handle.port), timeout=5) as sock:
                sock.sendall(b'{"jsonrpc":"2.0","id":9,"method":"ping"}\n')
                line = sock.makefile("rb").readline()
            assert json.loads(line) == {"jsonrpc": "2.0", "id": 9, "result": {}}
        finally:
            handle.close()
            thread.join(timeout=5)
