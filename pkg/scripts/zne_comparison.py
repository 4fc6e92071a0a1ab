"""Fold-factor scan with bare and Lanczos estimators plus a budget-matched comparison.

Reuses ``theta.json`` from the output directory when present, otherwise
optimises first.

    python scripts/zne_comparison.py --config configs/zne_cz_noise.json
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from lanczos_mitigation import experiments as ex


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="configs/zne_cz_noise.json")
    p.add_argument("--repetitions", type=int, help="override n_repetitions")
    p.add_argument("--threads", type=int, default=4)
    args = p.parse_args()
    cfg = ex.ExperimentConfig.load(args.config)
    if args.repetitions:
        cfg = replace(cfg, n_repetitions=args.repetitions)
    if not (Path(cfg.out_dir) / "theta.json").is_file():
        ex.cmd_run_vqe(cfg, args.threads)
    summary = ex.cmd_zne(cfg, None, args.threads)
    print(json.dumps(ex._jsonable(summary), indent=2))


if __name__ == "__main__":
    main()
