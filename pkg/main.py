#!/usr/bin/env python3
"""
LLB Galerkin simulator - Main Entry Point
Spectral Galerkin studies of the stochastic Landau-Lifshitz-Bloch equation
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from cli.commands import COMMANDS, execute


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llb-galerkin",
        description="Spectral Galerkin simulator for the stochastic LLB equation"
    )
    parser.add_argument('command', help=f"one of: {', '.join(COMMANDS)}")
    parser.add_argument('--config', help="INI configuration file")
    parser.add_argument('--out', help="output directory (run.output_dir)")
    parser.add_argument('--seed', type=int, help="master seed (run.master_seed)")
    parser.add_argument('--paths', type=int, help="number of paths (run.n_paths)")
    parser.add_argument('--override', action='append', default=[], metavar='SECTION.KEY=VALUE',
                        help="configuration override, repeatable")
    parser.add_argument('--threads', type=int, help="worker threads (default: $LLB_THREADS or 1)")
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    overrides = list(args.override)
    if args.out is not None:
        overrides.append(f"run.output_dir={args.out}")
    if args.seed is not None:
        overrides.append(f"run.master_seed={args.seed}")
    if args.paths is not None:
        overrides.append(f"run.n_paths={args.paths}")

    return execute(args.command, args.config, overrides, args.threads)


if __name__ == "__main__":
    sys.exit(main())
