"""Kac-Rice pivot tests for the global null in penalized regression."""
