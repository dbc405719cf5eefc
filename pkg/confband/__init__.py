"""
confband - conformal prediction regions and bands
"""
__version__ = "0.1.0"
