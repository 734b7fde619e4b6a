#!/usr/bin/env python3
"""Run the standing smoke scenario and print the energy-ledger summary."""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from fracphase.cli import main as cli_main

ROOT = pathlib.Path(__file__).resolve().parents[1]


def run(out: str) -> int:
    return cli_main(["simulate", "--config", str(ROOT / "configs" / "smoke.json"),
                     "--out", out])


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/smoke")
    args = parser.parse_args()
    sys.exit(run(args.out))
