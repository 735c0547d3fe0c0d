"""
Inhomogeneous Approximation Toolkit - Standalone Entry Point
============================================================
Run this to execute one verification subcommand.

    python run.py coverage --gamma sqrt2 --psi c_over_q:1/2:2 --Q 1024

For use from a parent application, see inhomapprox/__init__.py for:
  - init_approx_module()
  - get_module_config()
"""
import sys

from inhomapprox.cli import main

if __name__ == '__main__':
    sys.exit(main())
