#!/usr/bin/env python3
"""Brute-force verification sweep over a family of small synthetic datasets."""

import argparse
import sys
import tempfile

from blochpaw.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="0,1,2,3,4")
    args = parser.parse_args()

    failures = 0
    for seed in (int(s) for s in args.seeds.split(",")):
        tmp = tempfile.NamedTemporaryFile(suffix=".json", delete=False)
        rc = cli_main(
            ["synth", "--seed", str(seed), "--mesh", "2,1,1", "--n-b", "2",
             "--n-atoms", "1", "--n-waves", "2", "--n-pw", "5", "--profile",
             "physical", "--out", tmp.name]
        )
        rc = rc or cli_main(["verify", "--dataset", tmp.name])
        print(f"seed {seed}: {'ok' if rc == 0 else f'exit {rc}'}")
        failures += bool(rc)
    return 2 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
