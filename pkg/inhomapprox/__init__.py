"""
inhomapprox - Inhomogeneous Approximation Toolkit
=================================================
Exact-arithmetic kernels and desk-scale verifiers for inhomogeneous
Khintchine / Szusz type theorems: approximation sets A_q, intersection
bounds, rotation discrepancy, Liouville-type classification of shifts,
divisor-sum moments and Chung-Erdos lower bounds.

Standalone usage:
    python run.py coverage --config experiment.toml

Library usage:
    from inhomapprox import init_approx_module
    from inhomapprox.realnum import preset
    from inhomapprox.approxfun import ApproxFunction
    from inhomapprox.intervals import build_Aq

    init_approx_module(PRECISION_DIGITS=128)
    gamma = preset('sqrt2')
    psi = ApproxFunction('c_over_q', c='1/2', q0=2)
    A = build_Aq(10, psi, gamma)
"""
from .config import ApproxConfig

__version__ = '1.0.0'


# ─── Module-level state (set during init) ───
_module_config = None


def get_module_config():
    """Get the current module configuration, falling back to defaults."""
    global _module_config
    if _module_config is None:
        _module_config = ApproxConfig()
    return _module_config


def init_approx_module(config=None, **overrides):
    """
    Initialize the library with external configuration.

    Args:
        config: An ApproxConfig instance, or None to use defaults.
        **overrides: Attribute overrides, e.g. PRECISION_DIGITS=128.

    Returns:
        ApproxConfig: The resolved configuration object.
    """
    global _module_config

    _module_config = config if config is not None else ApproxConfig()

    for key, value in overrides.items():
        if not hasattr(_module_config, key):
            raise AttributeError(f"Unknown configuration key: {key}")
        setattr(_module_config, key, value)

    return _module_config
