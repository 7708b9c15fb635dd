"""The command-line workflow: every bundled config, simulate then analyze.

Writes into a temporary directory and prints the summaries.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def mirpairs(*args):
    cmd = [sys.executable, "-m", "mirpairs.cli", *map(str, args)]
    print("$ mirpairs", " ".join(map(str, args)))
    subprocess.run(cmd, check=True)


with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    mirpairs("phasematch", "--config", "reference", "--out", out / "pm")
    mirpairs("retrieve", "--config", "reference", "--out", out / "rt")
    mirpairs("pairs", "simulate", "--config", "pairs_golden", "--out", out / "pairs")
    mirpairs("pairs", "analyze", "--config", "pairs_golden", "--out", out / "pairs")
    mirpairs("hom", "simulate", "--config", "reference", "--out", out / "hom")
    mirpairs("hom", "analyze", "--config", "reference", "--out", out / "hom")
    mirpairs("detector", "--config", "reference", "--out", out / "det")
    for name in ("pm/phasematch.json", "rt/retrieve.json", "pairs/pairs.json", "hom/hom.json", "det/detector.json"):
        doc = json.loads((out / name).read_text())
        doc.pop("points", None)
        doc.pop("spectral", None)
        print(f"\n{name}: {json.dumps(doc, indent=1)}")
