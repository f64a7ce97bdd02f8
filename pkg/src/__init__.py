"""
Sparse Guarantees Package
"""

__version__ = "1.0.0"
