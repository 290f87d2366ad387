#!/usr/bin/env python3
"""Regenerate the bundled test scenarios.

Two deterministic fixtures feed the test suite and the golden runs:

* scenario3x3 - one signalized junction, 3:1 east-west vs north-south
  demand, deliberately equal-split fixed plan. Used to show Webster
  timing beating the equal split.
* scenario5x5 - nine signalized junctions, skewed OD demand, equal-split
  initial plans. Used by the optimization workflow.

Usage: python scripts/build_scenarios.py [output_root]
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from trafficmcp.demand import ODCell, ODMatrix, write_od_csv
from trafficmcp.network import DistrictSet, generate_grid, write_districts, write_network
from trafficmcp.signals import fixed_plan, write_tls_csv


def build_3x3(root: Path) -> None:
    out = root / "scenario3x3"
    out.mkdir(parents=True, exist_ok=True)
    grid = generate_grid(3, 3, 200.0, 10.0)
    write_network(grid, out / "network.json")

    districts = DistrictSet(districts={
        "west_in": ["e_n_1_0_n_1_1"],
        "east_out": ["e_n_1_1_n_1_2"],
        "north_in": ["e_n_0_1_n_1_1"],
        "south_out": ["e_n_1_1_n_2_1"],
    })
    write_districts(districts, out / "districts.json")

    od = ODMatrix(cells=[
        ODCell("west_in", "east_out", 540, 0.0, 3600.0),
        ODCell("north_in", "south_out", 180, 0.0, 3600.0),
    ])
    write_od_csv(od, out / "od.csv")

    plans = [fixed_plan(grid, j, cycle_s=60, clearance_s=4)
             for j in grid.signalized_nodes()]
    write_tls_csv(plans, out / "tls_equal.csv")


def build_5x5(root: Path) -> None:
    out = root / "scenario5x5"
    out.mkdir(parents=True, exist_ok=True)
    grid = generate_grid(5, 5, 250.0, 12.5)
    write_network(grid, out / "network.json")

    rows = cols = range(1, 4)
    districts = DistrictSet(districts={
        "west_in": [f"e_n_{r}_0_n_{r}_1" for r in rows],
        "east_out": [f"e_n_{r}_3_n_{r}_4" for r in rows],
        "east_in": [f"e_n_{r}_4_n_{r}_3" for r in rows],
        "west_out": [f"e_n_{r}_1_n_{r}_0" for r in rows],
        "north_in": [f"e_n_0_{c}_n_1_{c}" for c in cols],
        "south_out": [f"e_n_3_{c}_n_4_{c}" for c in cols],
        "south_in": [f"e_n_4_{c}_n_3_{c}" for c in cols],
        "north_out": [f"e_n_1_{c}_n_0_{c}" for c in cols],
    })
    write_districts(districts, out / "districts.json")

    od = ODMatrix(cells=[
        ODCell("west_in", "east_out", 1200, 0.0, 3600.0),
        ODCell("east_in", "west_out", 400, 0.0, 3600.0),
        ODCell("north_in", "south_out", 400, 0.0, 3600.0),
        ODCell("south_in", "north_out", 150, 0.0, 3600.0),
    ])
    write_od_csv(od, out / "od.csv")

    plans = [fixed_plan(grid, j, cycle_s=60, clearance_s=4)
             for j in grid.signalized_nodes()]
    write_tls_csv(plans, out / "tls_equal.csv")


def main() -> None:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "tests" / "data")
    build_3x3(root)
    build_5x5(root)
    print(f"scenarios written under {root}")


if __name__ == "__main__":
    main()
