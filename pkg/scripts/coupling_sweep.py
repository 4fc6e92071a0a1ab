"""Sweep the coupling of the fourth spin and report the mitigated spacing profile.

    python scripts/coupling_sweep.py --config configs/coupling_sweep.json
"""

import argparse
import json

from lanczos_mitigation import experiments as ex


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="configs/coupling_sweep.json")
    p.add_argument("--threads", type=int, default=4)
    args = p.parse_args()
    cfg = ex.ExperimentConfig.load(args.config)
    print(json.dumps(ex._jsonable(ex.cmd_sweep(cfg, args.threads)), indent=2))


if __name__ == "__main__":
    main()
