"""Command-line interface of the toolkit."""
from .commands import build_parser, dispatch

__all__ = ["build_parser", "dispatch"]
