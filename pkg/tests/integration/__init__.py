"""
Integration tests package.

Contains tests that verify the interaction between different components
and the overall system behavior.
""" 