"""
Unit tests package.

Contains tests for individual components in isolation:
- Services
- Repositories  
- Domain models
- Utilities
""" 