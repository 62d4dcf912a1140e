"""
Running a bundled scenario
==========================

Scenarios are JSON documents. ``run_scenario`` writes the basin CSV, the
Betti profiles, the check results and a summary into one directory; the same
pipeline is available as ``basintopo run <scenario>``.
"""

import tempfile
from pathlib import Path

from basintopo.scenario import Scenario, bundled_scenarios, run_scenario

print("bundled:", bundled_scenarios())
scn = Scenario.load("punctured")
with tempfile.TemporaryDirectory() as tmp:
    rr = run_scenario(scn, tmp)
    print((Path(tmp) / "summary.txt").read_text())
    print(sorted(p.name for p in Path(tmp).iterdir()))
