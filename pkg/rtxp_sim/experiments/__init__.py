"""Experiment definitions, traffic and campaign runner."""
