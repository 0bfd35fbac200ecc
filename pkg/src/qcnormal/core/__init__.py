"""Core maths modules, models and verification suites."""
