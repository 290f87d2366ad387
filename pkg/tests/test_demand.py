import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_routes, random_network
from trafficmcp.demand import (
    ODCell,
    ODMatrix,
    TripTable,
    Trip,
    od_to_trips,
    random_trips,
    read_od_csv,
    read_routes,
    read_trips,
    route_cost,
    route_trips,
    turn_ratio_routes,
    write_od_csv,
    write_routes,
    write_trips,
)
from trafficmcp.errors import ToolError
from trafficmcp.network import DistrictSet, Edge, Node, RoadNetwork, generate_grid


def triangle():
    nodes = [Node("A", 0, 0), Node("B", 100, 0), Node("C", 200, 0)]
    edges = [
        Edge("ab", "A", "B", 100.0, 10.0),
        Edge("bc", "B", "C", 100.0, 10.0),
        Edge("ac", "A", "C", 250.0, 10.0),
    ]
    return RoadNetwork(nodes=nodes, edges=edges)


class TestRandomTrips:
    def test_deterministic(self, grid3):
        a = random_trips(grid3, 100, 42, 0, 3600)
        b = random_trips(grid3, 100, 42, 0, 3600)
        assert a == b
        assert len(a.trips) == 100

    def test_seed_changes_output(self, grid3):
        assert random_trips(grid3, 50, 1, 0, 3600) != random_trips(grid3, 50, 2, 0, 3600)

    def test_count_zero_rejected(self, grid3):
        with pytest.raises(ToolError):
            random_trips(grid3, 0, 42, 0, 3600)

    def test_rush_hour_scale(self, grid3):
        table = random_trips(grid3, 5000, 7, 0, 3600)
        assert len(table.trips) == 5000
        departs = [t.depart_s for t in table.trips]
        assert departs == sorted(departs)
        assert all(0 <= d < 3600 for d in departs)

    def test_trips_are_routable(self, grid3):
        table = random_trips(grid3, 200, 3, 0, 3600)
        _, failures = route_trips(grid3, table)
        assert failures == []

    def test_disconnected_network_errors(self):
        net = RoadNetwork(
            nodes=[Node("a", 0, 0), Node("b", 1, 0), Node("c", 2, 0), Node("d", 3, 0)],
            edges=[Edge("e1", "a", "b", 10.0, 5.0), Edge("e2", "c", "d", 10.0, 5.0)],
        )
        with pytest.raises(ToolError) as err:
            random_trips(net, 10, 0, 0, 100)
        assert err.value.data["unroutable"]


class TestOdToTrips:
    def districts(self, grid3):
        return DistrictSet(districts={
            "A": ["e_n_0_0_n_0_1", "e_n_0_1_n_0_0"],
            "B": ["e_n_2_1_n_2_2", "e_n_2_2_n_2_1"],
        })

    def test_cell_count_preserved(self, grid3):
        od = ODMatrix(cells=[ODCell("A", "B", 5, 0, 600)])
        table = od_to_trips(od, self.districts(grid3), 1)
        assert len(table.trips) == 5
        assert all(t.from_edge in self.districts(grid3).districts["A"] for t in table.trips)

    def test_zero_cell_contributes_nothing(self, grid3):
        od = ODMatrix(cells=[ODCell("A", "B", 0, 0, 600)])
        assert od_to_trips(od, self.districts(grid3), 1).trips == []

    def test_additivity_and_sorting(self, grid3):
        od = ODMatrix(cells=[ODCell("A", "B", 3, 0, 600), ODCell("B", "A", 4, 0, 600)])
        table = od_to_trips(od, self.districts(grid3), 9)
        assert len(table.trips) == 7
        departs = [t.depart_s for t in table.trips]
        assert departs == sorted(departs)

    def test_unknown_district_named(self, grid3):
        od = ODMatrix(cells=[ODCell("A", "nowhere", 1, 0, 600)])
        with pytest.raises(ToolError) as err:
            od_to_trips(od, self.districts(grid3), 1)
        assert err.value.data["district"] == "nowhere"

    @given(counts=st.lists(st.integers(0, 20), min_size=1, max_size=5))
    def test_total_is_cell_sum(self, counts):
        grid = generate_grid(3, 3, 200.0, 13.9)
        districts = DistrictSet(districts={
            "A": ["e_n_0_0_n_0_1", "e_n_0_1_n_0_0"],
            "B": ["e_n_2_1_n_2_2", "e_n_2_2_n_2_1"],
        })
        od = ODMatrix(cells=[ODCell("A", "B", c, 0, 300) for c in counts])
        assert len(od_to_trips(od, districts, 5).trips) == sum(counts)


class TestRouteTrips:
    def test_triangle_routes_via_middle(self):
        # two-leg path A->B->C costs 20 s, the direct edge 25 s
        net = triangle()
        net.nodes.extend([Node("X", -1, 0), Node("Y", 3, 0)])
        net.edges.extend([Edge("in", "X", "A", 10.0, 10.0),
                          Edge("out", "C", "Y", 10.0, 10.0)])
        net = RoadNetwork(nodes=net.nodes, edges=net.edges)
        plan, failures = route_trips(net, TripTable(trips=[Trip("t0", 0.0, "in", "out")]))
        assert failures == []
        assert plan.routes["t0"] == ["in", "ab", "bc", "out"]
        candidates = brute_force_routes(net, "A", "C")
        assert sorted(route_cost(net, r) for r in candidates) == [20.0, 25.0]

    def test_adjacent_edges_give_two_edge_route(self, grid3):
        table = TripTable(trips=[Trip("t0", 0.0, "e_n_0_0_n_0_1", "e_n_0_1_n_0_2")])
        plan, failures = route_trips(grid3, table)
        assert failures == []
        assert plan.routes["t0"] == ["e_n_0_0_n_0_1", "e_n_0_1_n_0_2"]

    def test_lexicographic_tie_break(self):
        nodes = [Node("s", 0, 0), Node("m1", 1, 0), Node("m2", 1, 1), Node("t", 2, 0)]
        edges = [
            Edge("a1", "s", "m1", 100.0, 10.0),
            Edge("a2", "m1", "t", 100.0, 10.0),
            Edge("b1", "s", "m2", 100.0, 10.0),
            Edge("b2", "m2", "t", 100.0, 10.0),
            Edge("in", "x", "s", 10.0, 10.0),
            Edge("out", "t", "y", 10.0, 10.0),
        ]
        nodes += [Node("x", -1, 0), Node("y", 3, 0)]
        net = RoadNetwork(nodes=nodes, edges=edges)
        plan, _ = route_trips(net, TripTable(trips=[Trip("t0", 0.0, "in", "out")]))
        assert plan.routes["t0"] == ["in", "a1", "a2", "out"]

    def test_unroutable_collected_not_raised(self):
        net = RoadNetwork(
            nodes=[Node("a", 0, 0), Node("b", 1, 0), Node("c", 2, 0), Node("d", 3, 0)],
            edges=[Edge("e1", "a", "b", 10.0, 5.0), Edge("e2", "c", "d", 10.0, 5.0)],
        )
        table = TripTable(trips=[Trip("t0", 0.0, "e1", "e2")])
        plan, failures = route_trips(net, table)
        assert plan.routes == {}
        assert failures[0]["trip"] == "t0"

    def test_route_connectivity_invariant(self, grid3):
        table = random_trips(grid3, 150, 11, 0, 1800)
        plan, _ = route_trips(grid3, table)
        by_id = grid3.edge_by_id
        trips = {t.id: t for t in table.trips}
        for tid, route in plan.routes.items():
            assert route[0] == trips[tid].from_edge
            assert route[-1] == trips[tid].to_edge
            for prev, nxt in zip(route, route[1:]):
                assert by_id[prev].to_node == by_id[nxt].from_node


class TestRoutingOracle:
    def test_matches_brute_force_on_random_networks(self):
        checked = 0
        for seed in range(200):
            net = random_network(seed)
            for trip_seed in range(2):
                edges = sorted(net.edges, key=lambda e: e.id)
                if len(edges) < 2:
                    continue
                a = edges[trip_seed % len(edges)]
                b = edges[(trip_seed + len(edges) // 2) % len(edges)]
                if a.id == b.id:
                    continue
                table = TripTable(trips=[Trip("t", 0.0, a.id, b.id)])
                plan, failures = route_trips(net, table)
                candidates = brute_force_routes(net, a.to_node, b.from_node)
                if not candidates:
                    assert failures, f"router found a path the oracle missed (seed {seed})"
                    continue
                best = min(
                    ([a.id, *mid, b.id] for mid in candidates),
                    key=lambda r: (route_cost(net, r), r),
                )
                assert "t" in plan.routes, f"oracle found a path the router missed (seed {seed})"
                got = plan.routes["t"]
                assert route_cost(net, got) == route_cost(net, best), f"seed {seed}"
                assert got == best, f"tie-break mismatch on seed {seed}"
                checked += 1
        assert checked >= 200


class TestTurnRatioRoutes:
    def corridor(self):
        nodes = [Node(f"p{i}", float(i), 0) for i in range(4)]
        edges = [Edge(f"c{i}", f"p{i}", f"p{i+1}", 100.0, 10.0) for i in range(3)]
        return RoadNetwork(nodes=nodes, edges=edges)

    def test_straight_through(self):
        net = self.corridor()
        ratios = {"c0": {"c1": 1.0}, "c1": {"c2": 1.0}}
        table, plan = turn_ratio_routes(net, ratios, {"c0": 10}, 4, 0, 600)
        assert len(table.trips) == 10
        assert all(r == ["c0", "c1", "c2"] for r in plan.routes.values())

    def test_split_counts_and_reproducibility(self):
        nodes = [Node("s", 0, 0), Node("j", 1, 0), Node("l", 2, 1), Node("r", 2, -1)]
        edges = [
            Edge("in", "s", "j", 100.0, 10.0),
            Edge("left", "j", "l", 100.0, 10.0),
            Edge("right", "j", "r", 100.0, 10.0),
        ]
        net = RoadNetwork(nodes=nodes, edges=edges)
        ratios = {"in": {"left": 0.5, "right": 0.5}}
        table, plan = turn_ratio_routes(net, ratios, {"in": 1000}, 99, 0, 3600)
        lefts = sum(1 for r in plan.routes.values() if r[-1] == "left")
        assert 400 <= lefts <= 600  # binomial bound, p < 1e-9
        table2, plan2 = turn_ratio_routes(net, ratios, {"in": 1000}, 99, 0, 3600)
        assert table == table2 and plan.routes == plan2.routes

    def test_unnormalized_row_rejected(self):
        net = self.corridor()
        with pytest.raises(ToolError) as err:
            turn_ratio_routes(net, {"c0": {"c1": 0.9}}, {"c0": 1}, 0, 0, 60)
        assert err.value.data["edge"] == "c0"


class TestDemandFiles:
    def test_od_csv_roundtrip(self, tmp_path):
        od = ODMatrix(cells=[ODCell("A", "B", 5, 0.0, 600.0), ODCell("B", "A", 2, 0.0, 300.0)])
        path = write_od_csv(od, tmp_path / "od.csv")
        assert path.read_text().splitlines()[0] == "origin,destination,vehicles,begin_s,end_s"
        assert read_od_csv(path) == od

    def test_od_csv_header_required(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c\n")
        with pytest.raises(ToolError):
            read_od_csv(p)

    def test_trips_roundtrip(self, grid3, tmp_path):
        table = random_trips(grid3, 20, 5, 0, 600)
        assert read_trips(write_trips(table, tmp_path / "t.json")) == table

    def test_routes_roundtrip(self, grid3, tmp_path):
        table = random_trips(grid3, 20, 5, 0, 600)
        plan, _ = route_trips(grid3, table)
        assert read_routes(write_routes(plan, tmp_path / "r.json")) == plan
