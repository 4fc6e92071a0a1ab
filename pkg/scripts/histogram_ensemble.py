"""Optimise the tetrahedron ansatz, then compare repeated bare and Lanczos estimates.

    python scripts/histogram_ensemble.py --config configs/tetrahedron_noisy.json
"""

import argparse
import json
from dataclasses import replace

from lanczos_mitigation import experiments as ex


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="configs/tetrahedron_noisy.json")
    p.add_argument("--repetitions", type=int, help="override n_repetitions")
    p.add_argument("--threads", type=int, default=4)
    args = p.parse_args()
    cfg = ex.ExperimentConfig.load(args.config)
    if args.repetitions:
        cfg = replace(cfg, n_repetitions=args.repetitions)
    ex.cmd_run_vqe(cfg, args.threads)
    print(json.dumps(ex._jsonable(ex.cmd_histogram(cfg, None, args.threads)), indent=2))


if __name__ == "__main__":
    main()
