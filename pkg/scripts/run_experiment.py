"""Run a gen -> fit -> compare experiment described by a JSON ExperimentConfig.

    python scripts/run_experiment.py scripts/configs/fixed_theta.json [--out-dir DIR]

The plant path inside the config is resolved relative to the config file.
Prints the comparison report.
"""

import argparse
import json
from pathlib import Path

from pdmd.cli import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out-dir", help="defaults to out/<config stem>")
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    cfg.out_dir = args.out_dir or str(Path("out") / Path(args.config).stem)
    report = cfg.run()
    print(json.dumps({k: v for k, v in report.items() if k != "per_output"}, indent=1))
    if "per_output" in report:
        print(f"worst per-output error: {max(report['per_output']):.4f}")


if __name__ == "__main__":
    main()
