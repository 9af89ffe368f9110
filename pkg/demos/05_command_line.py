"""
Command-line workflow
=====================

The ``relgc`` command covers data generation, training, scoring and export.
This script drives it in a temporary directory with a shortened schedule.
"""
import subprocess
import sys
import tempfile
from pathlib import Path


def relgc(*args):
    cmd = [sys.executable, "-m", "relgc", *map(str, args)]
    print("$ relgc", " ".join(map(str, args)))
    out = subprocess.run(cmd, check=True, capture_output=True, text=True).stdout
    print(out.strip(), "\n")


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "quick.ini").write_text("[train]\nepochs_joint = 30\nepochs = 60\n")

    relgc("gen-synthetic", "--n", 150, "--k", 3, "--seed", 1, "--out", tmp / "sbm")
    relgc("train", "--config", tmp / "quick.ini", "--dataset", tmp / "sbm",
          "--seed", 7, "--out", tmp / "run")
    relgc("eval", "--pred", tmp / "run" / "labels.tsv", "--truth", tmp / "sbm" / "labels.tsv")
    relgc("export-embeddings", "--checkpoint", tmp / "run" / "checkpoint",
          "--out", tmp / "z.tsv")
    print(sorted(p.name for p in (tmp / "run").iterdir()))
