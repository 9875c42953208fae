#!/usr/bin/env python3
"""Run every experiment config in configs/ and write results/.

Usage: python scripts/run_all.py [config ...]
"""
import sys
import time
from pathlib import Path

from membrane_split.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(cfg: Path) -> int:
    cmd = "probes" if "probes" in cfg.stem else "run"
    t0 = time.perf_counter()
    status = main([cmd, str(cfg)])
    print(f"{cfg.name}: exit {status} in {time.perf_counter() - t0:.1f}s", flush=True)
    return status


if __name__ == "__main__":
    configs = [Path(p) for p in sys.argv[1:]] or sorted((ROOT / "configs").glob("*.cfg"))
    statuses = [run(c) for c in configs]
    sys.exit(max(statuses, default=0))
