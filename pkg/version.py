"""
Version information for the trajectory metrics toolkit
"""
__version__ = '1.0.0'
