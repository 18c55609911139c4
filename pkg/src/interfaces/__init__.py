"""
Interfaces layer: the command-line surface and its JSON documents.
"""
