"""
Shared layer containing common utilities, configurations, and shared code.
This layer is used across all other layers.
""" 