"""
rtxp_sim - deterministic simulation of real-time alarm convergecast :)
"""

__version__ = "0.1.0"
