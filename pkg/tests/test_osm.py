import pytest

from trafficmcp.errors import ToolError
from trafficmcp.network import convert_osm
from trafficmcp.osm import (
    OfflineTransport,
    RegionQuery,
    bundled_fixture_dir,
    osm_download,
)


class CountingTransport:
    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def fetch(self, query):
        self.calls += 1
        return self.inner.fetch(query)


class TimeoutTransport:
    def fetch(self, query):
        raise ToolError("request timed out", retryable=True)


class EmptyTransport:
    def fetch(self, query):
        return "<osm version='0.6'></osm>"


class TestRegionQuery:
    def test_requires_exactly_one_selector(self):
        with pytest.raises(ToolError):
            RegionQuery()
        with pytest.raises(ToolError):
            RegionQuery(bbox=(0, 0, 1, 1), place_name="x")

    def test_disordered_bbox_rejected_before_any_request(self):
        with pytest.raises(ToolError):
            RegionQuery(bbox=(39.91, 116.4, 39.90, 116.41))

    def test_region_name_slug(self):
        q = RegionQuery(place_name="Chaoyang District, Beijing")
        assert q.region_name == "chaoyang_district_beijing"


class TestOfflineDownload:
    def test_bbox_fixture_passthrough(self, tmp_path):
        transport = OfflineTransport(bundled_fixture_dir())
        query = RegionQuery(bbox=(39.899, 116.399, 39.901, 116.405))
        document, path = osm_download(query, tmp_path, transport=transport)
        net = convert_osm(document)
        assert len(net.nodes) == 3
        assert len(net.edges) == 4
        assert path.exists()
        assert path.read_text() == document

    def test_place_name_fixture(self, tmp_path):
        transport = OfflineTransport(bundled_fixture_dir())
        document, path = osm_download(RegionQuery(place_name="riverton"), tmp_path,
                                      transport=transport)
        net = convert_osm(document)
        assert sum(n.signalized for n in net.nodes) == 2
        assert path.name == "riverton.osm.xml"

    def test_unknown_fixture_fails(self, tmp_path):
        transport = OfflineTransport(bundled_fixture_dir())
        with pytest.raises(ToolError):
            osm_download(RegionQuery(place_name="atlantis"), tmp_path,
                         transport=transport)

    def test_offline_mode_uses_only_injected_transport(self, tmp_path):
        transport = CountingTransport(OfflineTransport(bundled_fixture_dir()))
        osm_download(RegionQuery(place_name="riverton"), tmp_path, transport=transport)
        assert transport.calls == 1

    def test_offline_env_selects_fixture_transport(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TRAFFICMCP_OFFLINE", "1")
        document, _ = osm_download(RegionQuery(place_name="grid_small"), tmp_path)
        assert "<way" in document


class TestErrorMapping:
    def test_timeout_is_retryable(self, tmp_path):
        with pytest.raises(ToolError) as err:
            osm_download(RegionQuery(place_name="x"), tmp_path,
                         transport=TimeoutTransport())
        assert err.value.data["retryable"] is True

    def test_empty_result_suggests_larger_bbox(self, tmp_path):
        with pytest.raises(ToolError) as err:
            osm_download(RegionQuery(bbox=(0, 0, 1, 1)), tmp_path,
                         transport=EmptyTransport())
        assert err.value.data["retryable"] is False
        assert err.value.data["hint"] == "enlarge_bbox"

    def test_downloaded_documents_always_parse_or_error(self, tmp_path):
        # every fixture either converts cleanly or raises the converter's
        # structured error; there is no third outcome
        transport = OfflineTransport(bundled_fixture_dir())
        for name in ("grid_small", "riverton"):
            document, _ = osm_download(RegionQuery(place_name=name), tmp_path,
                                       transport=transport)
            try:
                net = convert_osm(document)
                assert net.nodes
            except ToolError as err:
                assert err.code == -32602
