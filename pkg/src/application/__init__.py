"""
Application layer containing use cases and application services.
This layer orchestrates the flow of data to and from the domain layer.
"""
