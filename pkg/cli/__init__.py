"""
Batch front-end for the LLB Galerkin simulator
"""

from .commands import COMMANDS, dispatch, execute

__all__ = ['COMMANDS', 'dispatch', 'execute']
