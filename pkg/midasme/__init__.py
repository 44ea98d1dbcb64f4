"""
midasme - ADL-MIDAS regression with measurement error correction
"""

__version__ = "1.0.0"
