"""Scenario files, runs, refinement studies and property suites."""
