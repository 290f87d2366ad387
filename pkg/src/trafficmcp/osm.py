"""OpenStreetMap extract download via an Overpass-compatible endpoint.

The HTTP transport is injected so tests and offline runs never touch the
network: OfflineTransport serves recorded documents from a fixture
directory (bundled fixtures by default). Setting TRAFFICMCP_OFFLINE=1
forces offline mode; TRAFFICMCP_OSM_ENDPOINT overrides the live endpoint.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ToolError, invalid_params

DEFAULT_ENDPOINT = "https://overpass-api.de/api/interpreter"

QUERY_TEMPLATE = 'way["highway"]({south},{west},{north},{east}); (._;>;); out body;'
AREA_QUERY_TEMPLATE = ('area[name="{place}"]->.a; way["highway"](area.a); '
                       "(._;>;); out body;")


@dataclass(frozen=True)
class RegionQuery:
    bbox: tuple[float, float, float, float] | None = None  # south, west, north, east
    place_name: str | None = None
    endpoint: str = DEFAULT_ENDPOINT
    timeout_s: float = 30.0

    def __post_init__(self):
        if (self.bbox is None) == (self.place_name is None):
            raise invalid_params("set exactly one of bbox or place_name",
                                 param="bbox")
        if self.bbox is not None:
            south, west, north, east = self.bbox
            if south >= north or west >= east:
                raise invalid_params(
                    "bbox must be ordered (south < north, west < east)",
                    param="bbox")

    @property
    def region_name(self) -> str:
        if self.place_name:
            return re.sub(r"[^a-z0-9]+", "_", self.place_name.lower()).strip("_")
        south, west, north, east = self.bbox
        return f"bbox_{south:.4f}_{west:.4f}_{north:.4f}_{east:.4f}"


class HttpTransport:
    """Live Overpass transport; imports requests lazily so offline runs
    carry no HTTP dependency at runtime."""

    def fetch(self, query: RegionQuery) -> str:
        import requests

        if query.place_name:
            body = AREA_QUERY_TEMPLATE.format(place=query.place_name)
        else:
            south, west, north, east = query.bbox
            body = QUERY_TEMPLATE.format(south=south, west=west, north=north, east=east)
        try:
            response = requests.post(query.endpoint, data={"data": body},
                                     timeout=query.timeout_s)
        except requests.Timeout as exc:
            raise ToolError(f"request to {query.endpoint} timed out",
                            retryable=True) from exc
        except requests.RequestException as exc:
            raise ToolError(f"request to {query.endpoint} failed: {exc}",
                            retryable=True) from exc
        if response.status_code != 200:
            raise ToolError(f"endpoint returned HTTP {response.status_code}",
                            retryable=response.status_code >= 500,
                            status=response.status_code)
        return response.text


class OfflineTransport:
    """Serve recorded extracts: <name>.osm.xml files plus an index.json
    mapping fixture names to their bounding boxes."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)

    def _index(self) -> dict[str, list[float]]:
        index_path = self.fixture_dir / "index.json"
        if not index_path.exists():
            return {}
        return json.loads(index_path.read_text(encoding="utf-8"))

    def fetch(self, query: RegionQuery) -> str:
        name = None
        if query.place_name:
            name = query.region_name
        else:
            for candidate, bbox in sorted(self._index().items()):
                if all(abs(a - b) < 1e-6 for a, b in zip(bbox, query.bbox)):
                    name = candidate
                    break
        path = self.fixture_dir / f"{name}.osm.xml" if name else None
        if path is None or not path.exists():
            raise ToolError(
                f"no offline fixture for region {query.region_name!r} "
                f"in {self.fixture_dir}", retryable=False)
        return path.read_text(encoding="utf-8")


def bundled_fixture_dir() -> Path:
    return Path(resources.files("trafficmcp") / "fixtures")


def default_transport():
    if os.environ.get("TRAFFICMCP_OFFLINE") == "1":
        return OfflineTransport(os.environ.get("TRAFFICMCP_FIXTURES",
                                               bundled_fixture_dir()))
    return HttpTransport()


def osm_download(query: RegionQuery, workspace: str | Path,
                 transport=None) -> tuple[str, Path]:
    """Fetch an extract and persist it as <workspace>/<region>.osm.xml.

    Returns the raw document and the saved path. Empty results (no
    highway ways) fail with a hint to enlarge the bounding box; that
    retry adjustment is applied by the workflow layer, not here.
    """
    if transport is None:
        transport = default_transport()
    document = transport.fetch(query)
    if "<way" not in document:
        raise ToolError(
            f"region {query.region_name!r} contains no highway ways; "
            "try a larger bounding box",
            retryable=False, hint="enlarge_bbox", region=query.region_name)
    workspace = Path(workspace)
    workspace.mkdir(parents=True, exist_ok=True)
    path = workspace / f"{query.region_name}.osm.xml"
    path.write_text(document, encoding="utf-8")
    return document, path
