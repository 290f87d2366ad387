"""Batch command-line client.

Each invocation spawns the server as a child process on stdio (or
attaches to a running TCP server with --connect) and speaks the wire
protocol; ``call`` prints the server's result JSON verbatim so output can
be piped into other tools.

Exit codes: 0 success, 1 tool or workflow failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import subprocess
import sys

from .errors import ToolError
from .registry import Registry
from .server import serve_forever, serve_stdio, serve_tcp


class ProtocolFailure(Exception):
    def __init__(self, error: dict):
        super().__init__(error.get("message", "tool call failed"))
        self.error = error


class StdioClient:
    """Talk to a freshly spawned child server over pipes."""

    def __init__(self, workspace: str | None = None):
        env = dict(os.environ)
        if workspace:
            env["TRAFFICMCP_WORKSPACE"] = workspace
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "trafficmcp", "serve"],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, env=env)
        self._next_id = 0

    def request(self, method: str, params=None) -> dict:
        self._next_id += 1
        payload = {"jsonrpc": "2.0", "id": self._next_id, "method": method}
        if params is not None:
            payload["params"] = params
        self.proc.stdin.write((json.dumps(payload) + "\n").encode("utf-8"))
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise ProtocolFailure({"code": -32000, "message": "server closed the pipe"})
        response = json.loads(line)
        if "error" in response:
            raise ProtocolFailure(response["error"])
        return response["result"]

    def close(self) -> None:
        if self.proc.stdin:
            self.proc.stdin.close()
        self.proc.wait(timeout=10)


class TcpClient:
    def __init__(self, address: str):
        host, _, port = address.rpartition(":")
        self.sock = socket.create_connection((host or "127.0.0.1", int(port)))
        self.reader = self.sock.makefile("rb")
        self._next_id = 0

    def request(self, method: str, params=None) -> dict:
        self._next_id += 1
        payload = {"jsonrpc": "2.0", "id": self._next_id, "method": method}
        if params is not None:
            payload["params"] = params
        self.sock.sendall((json.dumps(payload) + "\n").encode("utf-8"))
        line = self.reader.readline()
        if not line:
            raise ProtocolFailure({"code": -32000, "message": "server closed the connection"})
        response = json.loads(line)
        if "error" in response:
            raise ProtocolFailure(response["error"])
        return response["result"]

    def close(self) -> None:
        self.sock.close()


def _client(args):
    if args.connect:
        address = args.connect
        if address.startswith("tcp://"):
            address = address[len("tcp://"):]
        return TcpClient(address)
    return StdioClient(workspace=args.workspace)


def _session(args):
    client = _client(args)
    client.request("initialize")
    return client


# ---------------------------------------------------------------------------
# subcommands

def cmd_serve(args) -> int:
    registry = Registry(workspace=args.workspace)
    if args.tcp:
        host, _, port = args.tcp.rpartition(":")
        try:
            handle = serve_tcp(registry, host or "127.0.0.1", int(port or 0))
        except ToolError as err:
            print(json.dumps({"code": err.code, "message": err.message}),
                  file=sys.stderr)
            return 1
        print(f"listening on {handle.host}:{handle.port}", file=sys.stderr)
        serve_forever(registry, handle)
        return 0
    return serve_stdio(registry)


def cmd_tools(args) -> int:
    client = _session(args)
    try:
        if args.module:
            catalogue = client.request("tools/call",
                                       {"name": "get_module_description",
                                        "arguments": {}})
            entry = catalogue["modules"].get(args.module)
            if entry is None:
                print(f"unknown module: {args.module}", file=sys.stderr)
                return 1
            print(json.dumps({args.module: entry}, indent=2))
        else:
            tools = client.request("tools/list")["tools"]
            for tool in tools:
                print(tool["name"])
        return 0
    finally:
        client.close()


def cmd_import(args) -> int:
    client = _session(args)
    try:
        result = client.request("tools/call", {
            "name": "import_module", "arguments": {"names": args.names}})
        print(json.dumps(result, indent=2))
        return 0
    except ProtocolFailure as failure:
        print(json.dumps(failure.error), file=sys.stderr)
        return 1
    finally:
        client.close()


def cmd_call(args) -> int:
    try:
        arguments = json.loads(args.json) if args.json else {}
    except json.JSONDecodeError as exc:
        print(f"--json is not valid JSON: {exc}", file=sys.stderr)
        return 2
    if not isinstance(arguments, dict):
        print("--json must encode an object", file=sys.stderr)
        return 2
    client = _session(args)
    try:
        if args.imports:
            client.request("tools/call", {
                "name": "import_module", "arguments": {"names": args.imports}})
        result = client.request("tools/call",
                                {"name": args.tool, "arguments": arguments})
        print(json.dumps(result))
        return 0
    except ProtocolFailure as failure:
        print(json.dumps(failure.error), file=sys.stderr)
        return 1
    finally:
        client.close()


def _workflow(args, tool: str, arguments: dict) -> int:
    client = _session(args)
    try:
        result = client.request("tools/call", {"name": tool, "arguments": arguments})
        artifacts = result.get("artifacts", {})
        for key in ("report_md", "report_json"):
            if key in artifacts:
                print(artifacts[key])
        print(json.dumps({"run_dir": result.get("run_dir"),
                          "best": result.get("best"),
                          "report": result.get("report")}, indent=2))
        return 0
    except ProtocolFailure as failure:
        print(json.dumps(failure.error), file=sys.stderr)
        return 1
    finally:
        client.close()


def cmd_workflow_sim_eval(args) -> int:
    arguments: dict = {"horizon_s": args.horizon}
    if args.grid:
        try:
            rows, cols = (int(v) for v in args.grid.lower().split("x"))
        except ValueError:
            print("--grid must look like 3x3", file=sys.stderr)
            return 2
        arguments["grid"] = {"rows": rows, "cols": cols,
                             "spacing_m": args.spacing, "speed_mps": args.speed}
    if args.network:
        arguments["network"] = os.path.abspath(args.network)
    if args.region:
        arguments["region"] = {"place_name": args.region}
    if args.bbox:
        try:
            arguments["region"] = {"bbox": [float(v) for v in args.bbox.split(",")]}
        except ValueError:
            print("--bbox must be south,west,north,east", file=sys.stderr)
            return 2
    if args.random is not None:
        arguments["random"] = {"count": args.random, "seed": args.seed}
    if args.od:
        arguments["od"] = {"od": os.path.abspath(args.od),
                           "districts": os.path.abspath(args.districts),
                           "seed": args.seed}
    if args.strategies:
        arguments["strategies"] = args.strategies.split(",")
    if args.progression_speed:
        arguments["progression_speed_mps"] = args.progression_speed
    return _workflow(args, "workflow_sim_eval", arguments)


def cmd_workflow_optimize(args) -> int:
    arguments = {
        "network": os.path.abspath(args.network),
        "od": os.path.abspath(args.od),
        "districts": os.path.abspath(args.districts),
        "tls": os.path.abspath(args.tls),
        "k": args.k, "horizon_s": args.horizon, "seed": args.seed,
    }
    if args.progression_speed:
        arguments["progression_speed_mps"] = args.progression_speed
    return _workflow(args, "workflow_signal_opt", arguments)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficmcp",
        description="Batch client for the traffic-simulation tool server")
    parser.add_argument("--connect", metavar="tcp://HOST:PORT",
                        help="attach to a running server instead of spawning one")
    parser.add_argument("--workspace", default=None,
                        help="artifact directory (default: $TRAFFICMCP_WORKSPACE)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the server")
    p.add_argument("--tcp", metavar="HOST:PORT",
                   help="listen on TCP instead of stdio")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("tools", help="list callable tools or one module")
    p.add_argument("--module", help="show this catalogue entry instead")
    p.set_defaults(func=cmd_tools)

    p = sub.add_parser("import", help="import sub-modules")
    p.add_argument("names", nargs="+")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("call", help="call one tool")
    p.add_argument("tool")
    p.add_argument("--json", default="{}", help="arguments as a JSON object")
    p.add_argument("--import", dest="imports", action="append", default=[],
                   metavar="MODULE", help="import a module first (repeatable)")
    p.set_defaults(func=cmd_call)

    p = sub.add_parser("workflow", help="run a predefined workflow")
    wf = p.add_subparsers(dest="workflow", required=True)

    e = wf.add_parser("sim-eval", help="demand, batch simulation, comparison")
    e.add_argument("--grid", help="ROWSxCOLS grid network")
    e.add_argument("--spacing", type=float, default=200.0)
    e.add_argument("--speed", type=float, default=13.9)
    e.add_argument("--network", help="existing network JSON file")
    e.add_argument("--region", help="named region (offline fixture or Overpass area)")
    e.add_argument("--bbox", help="south,west,north,east")
    e.add_argument("--random", type=int, help="random demand vehicle count")
    e.add_argument("--od", help="OD matrix CSV")
    e.add_argument("--districts", help="districts JSON (with --od)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--strategies", help="comma list: fixed,actuated,webster,greenwave")
    e.add_argument("--horizon", type=float, required=True)
    e.add_argument("--progression-speed", type=float, default=None)
    e.set_defaults(func=cmd_workflow_sim_eval)

    o = wf.add_parser("optimize", help="congestion detection and retiming")
    o.add_argument("--network", required=True)
    o.add_argument("--od", required=True)
    o.add_argument("--districts", required=True)
    o.add_argument("--tls", required=True)
    o.add_argument("--k", type=int, default=4)
    o.add_argument("--horizon", type=float, required=True)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--progression-speed", type=float, default=None)
    o.set_defaults(func=cmd_workflow_optimize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
