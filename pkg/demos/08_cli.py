"""Drive the command line front end on a bundled configuration.

Equivalent shell commands::

    frachardy report all --config cube_sp_lt_1 --out out/cube
    frachardy study --config disk_sp_gt_1 --out out/disk-study
"""

import json
import tempfile
from pathlib import Path

from frachardy.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "cube"
    code = main(["report", "all", "--config", "cube_sp_lt_1", "--out", str(out)])
    summary = json.loads((out / "summary.json").read_text())
    print("exit code", code, "| invariants", summary["invariants_ok"], "| trends", summary["trends_ok"])
    for name in summary["reports"]:
        doc = json.loads((out / name).read_text())
        print(f"  {name:22s} trend {doc['trend']}")
    code = main(["study", "--config", "disk_sp_gt_1", "--out", str(Path(tmp) / "study")])
    rows = json.loads((Path(tmp) / "study" / "study.json").read_text())["rows"]
    for r in rows:
        print(f"  {r['quantity']:16s} h={r['h']:5s} value {r['value']:.6g}")
