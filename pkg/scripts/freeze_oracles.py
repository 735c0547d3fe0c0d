"""
Freeze Oracles
==============
This script:
1. Recomputes every regression value the test suite checks
2. Writes them, with their parameters, to data/oracles.json

Run it after a change that is meant to move a value, then review the diff
of data/oracles.json before committing it.

Usage:
    Standalone:
        python scripts/freeze_oracles.py
        python scripts/freeze_oracles.py --scale acceptance --output data/oracles.json

    From parent app:
        from inhomapprox.oracles import OracleRunner
        OracleRunner(path='data/oracles.json').run()
"""
import argparse
import os
import sys

from dotenv import load_dotenv

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from inhomapprox import init_approx_module  # noqa: E402
from inhomapprox.oracles import OracleRunner  # noqa: E402

load_dotenv()


def main():
    parser = argparse.ArgumentParser(description='Recompute and freeze the regression oracles.')
    parser.add_argument('--output', default=os.path.join('data', 'oracles.json'))
    parser.add_argument('--scale', choices=('desk', 'acceptance'), default='desk')
    args = parser.parse_args()

    init_approx_module()
    OracleRunner(path=args.output, scale=args.scale).run()


if __name__ == '__main__':
    main()
