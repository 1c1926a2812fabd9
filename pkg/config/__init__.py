"""
Configuration package for the LLB Galerkin simulator
"""

from .settings import RunConfig, DEFAULTS, parse_config, load_config, apply_overrides

__all__ = ['RunConfig', 'DEFAULTS', 'parse_config', 'load_config', 'apply_overrides']
