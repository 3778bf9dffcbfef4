import argparse
import configparser
import logging
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from charges.cli import COMMANDS, RunOptions, run

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')


def create_default_config(path):
    logging.info("Creating default config.ini file...")
    dc = configparser.ConfigParser()
    dc['Logging'] = {'level': 'INFO'}
    dc['Batch'] = {'verdict_suffix': '.verdict.json', 'workers': '1', 'summary_csv': ''}
    dc['Sampler'] = {'seed': '12345', 'samples': '100000'}
    dc['Convex'] = {'tolerance': '1/10000', 'check_points': '7'}
    dc['Limits'] = {'max_ground_atoms': '64'}
    with open(path, 'w') as f: dc.write(f)


def load_config(path):
    config = configparser.ConfigParser()
    if not os.path.exists(path):
        create_default_config(path)
    config.read(path)
    return config


def options_from_config(config):
    "RunOptions as configured; flags override them later."
    summary = config.get('Batch', 'summary_csv', fallback='').strip()
    return RunOptions(
        seed=config.getint('Sampler', 'seed', fallback=12345),
        samples=config.getint('Sampler', 'samples', fallback=100000),
        tolerance=Fraction(config.get('Convex', 'tolerance', fallback='1/10000')),
        check_points=config.getint('Convex', 'check_points', fallback=7),
        workers=config.getint('Batch', 'workers', fallback=1),
        suffix=config.get('Batch', 'verdict_suffix', fallback='.verdict.json'),
        summary=Path(summary) if summary else None,
        max_ground_atoms=config.getint('Limits', 'max_ground_atoms', fallback=64),
    )


def build_parser():
    parser = argparse.ArgumentParser(description="Exact solvers for finitely additive measure structures.")
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('inputs', nargs='*', type=Path, help="instance files or directories of *.json instances")
    parser.add_argument('--config', type=Path, help="configuration file (default: config.ini next to main.py)")
    parser.add_argument('--seed', type=int)
    parser.add_argument('--samples', type=int)
    parser.add_argument('--tolerance', type=Fraction, help="reconstruction tolerance for sampled convex input, e.g. 1/10000")
    parser.add_argument('--emit-minimal-ring', action='store_true')
    parser.add_argument('--workers', type=int)
    parser.add_argument('--summary', type=Path, help="write a CSV summary of the batch here")
    parser.add_argument('--verbose', '-v', action='store_true')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    app_dir = os.path.dirname(os.path.abspath(__file__))
    config = load_config(str(args.config) if args.config else os.path.join(app_dir, 'config.ini'))

    level = 'DEBUG' if args.verbose else config.get('Logging', 'level', fallback='INFO')
    logging.getLogger().setLevel(level.upper())

    options = options_from_config(config)
    overrides = {
        'seed': args.seed,
        'samples': args.samples,
        'tolerance': args.tolerance,
        'workers': args.workers,
        'summary': args.summary,
    }
    changes = {k: v for k, v in overrides.items() if v is not None}
    if args.emit_minimal_ring:
        changes['emit_minimal_ring'] = True
    options = replace(options, **changes)

    if args.command != 'selftest' and not args.inputs:
        logging.error(f"Command '{args.command}' needs at least one instance file or directory")
        return 2
    try:
        return run(args.command, args.inputs, options)
    except KeyboardInterrupt:
        logging.info("Interrupted.")
        return 2


if __name__ == "__main__":
    sys.exit(main())
