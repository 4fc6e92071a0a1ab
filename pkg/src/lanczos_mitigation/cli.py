"""Command-line entry point: ``lanczos-mitigation <verb> --config PATH``.

Exit codes: 0 success, 2 configuration or parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import experiments as ex
from .pauli import DimensionError, HermiticityError
from .simulator import ConsistencyError, ContractError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("lanczos_mitigation")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lanczos-mitigation", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON (defaults are used when omitted)")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit), overrides the config")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--exact", action="store_true", help="infinite-shot mode")
    common.add_argument("--threads", type=int, default=1, help="worker threads for repetitions")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("run-vqe", parents=[common], help="optimise the ansatz and store theta_opt")
    for verb, text in [("mitigate", "all estimators on the stored optimal circuit"),
                       ("histogram", "repeated bare and Lanczos estimates"),
                       ("zne", "fold-factor scan, extrapolation and budget-matched comparison")]:
        sp = sub.add_parser(verb, parents=[common], help=text)
        sp.add_argument("--theta", help="theta file from run-vqe (default OUT/theta.json)")
    sub.add_parser("sweep", parents=[common], help="parameter sweep with the spacing profile")
    sp = sub.add_parser("scaling", parents=[common], help="Pauli-string counts of H, H^2, H^3")
    sp.add_argument("files", nargs="*", help="Hamiltonian files (default: config scaling_files)")
    return p


def load_config(args) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ex.ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = replace(cfg, seed=args.seed)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.exact:
        cfg = cfg.exact()
    if args.threads < 1:
        raise ex.ConfigError("--threads must be positive")
    return cfg


def dispatch(args, cfg: ex.ExperimentConfig) -> dict:
    t = args.threads
    if args.verb == "run-vqe":
        return ex.cmd_run_vqe(cfg, t)
    if args.verb == "mitigate":
        return ex.cmd_mitigate(cfg, args.theta, t)
    if args.verb == "histogram":
        return ex.cmd_histogram(cfg, args.theta, t)
    if args.verb == "zne":
        return ex.cmd_zne(cfg, args.theta, t)
    if args.verb == "sweep":
        return ex.cmd_sweep(cfg, t)
    return ex.cmd_scaling(cfg, args.files, t)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        result = dispatch(args, cfg)
    except (ex.ConfigError, HermiticityError, DimensionError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConsistencyError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # model files are parsed lazily; their diagnostics surface here
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(ex._jsonable(result), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
