"""
Services package for the LLB Galerkin simulator
"""

__all__ = [
    'spectral_core', 'llb_model', 'integrators', 'diagnostics', 'experiments', 'data_manager'
]
