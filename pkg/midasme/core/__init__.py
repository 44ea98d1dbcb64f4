"""
Environment settings, logging and the error hierarchy
"""
