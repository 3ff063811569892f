#!/usr/bin/env python3
"""Synthesize a dataset (or take an existing one) and print its resource report.

Examples:
    python scripts/run_estimate.py --dataset my_system.json
    python scripts/run_estimate.py --synth-seed 7 --mesh 2,2,2 --n-b 4
"""

import argparse
import sys
import tempfile

from blochpaw.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", default=None)
    parser.add_argument("--synth-seed", type=int, default=7)
    parser.add_argument("--mesh", default="1,1,1")
    parser.add_argument("--n-b", type=int, default=4)
    parser.add_argument("--n-atoms", type=int, default=2)
    parser.add_argument("--n-waves", type=int, default=2)
    parser.add_argument("--n-pw", type=int, default=16)
    parser.add_argument("--epsilon-qpe", type=float, default=1.0, help="meV")
    args = parser.parse_args()

    dataset = args.dataset
    if dataset is None:
        tmp = tempfile.NamedTemporaryFile(suffix=".json", delete=False)
        dataset = tmp.name
        rc = cli_main(
            [
                "synth", "--seed", str(args.synth_seed), "--mesh", args.mesh,
                "--n-b", str(args.n_b), "--n-atoms", str(args.n_atoms),
                "--n-waves", str(args.n_waves), "--n-pw", str(args.n_pw),
                "--profile", "physical", "--out", dataset,
            ]
        )
        if rc:
            return rc
    return cli_main(["estimate", "--dataset", dataset, "--epsilon-qpe", str(args.epsilon_qpe)])


if __name__ == "__main__":
    sys.exit(main())
