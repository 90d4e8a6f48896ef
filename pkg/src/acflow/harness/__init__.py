"""Scenario configuration, runs, sweeps and reports."""
