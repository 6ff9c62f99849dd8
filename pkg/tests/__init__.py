"""
Tests for the rtxp_sim package.
"""
