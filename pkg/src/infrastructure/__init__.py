"""
Infrastructure layer containing external service implementations and adapters.
This layer implements the interfaces defined in the domain layer.
"""
