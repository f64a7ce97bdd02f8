"""
Command-line surface for the sparse guarantees package.
"""

from .main import main

__all__ = ["main"]
