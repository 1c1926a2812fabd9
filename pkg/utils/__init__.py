"""
Utility modules for the LLB Galerkin simulator
"""

from .errors import LLBError
from .file_operations import FileOperations

__all__ = ['LLBError', 'FileOperations']
