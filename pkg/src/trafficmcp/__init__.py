"""Traffic-simulation tool server with on-demand module import.

A JSON-RPC 2.0 server exposes themed tool modules (network synthesis,
demand generation, a point-queue simulator, signal timing, metrics) that
stay unloaded until a client imports them, plus two always-available
composite workflows. A batch CLI drives the same protocol.
"""

__version__ = "0.1.0"

SERVER_NAME = "trafficmcp"
PROTOCOL_REVISION = "2024-11-05"
