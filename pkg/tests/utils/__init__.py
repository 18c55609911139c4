"""
Test utilities package.

Contains helper functions and utilities for testing.
""" 