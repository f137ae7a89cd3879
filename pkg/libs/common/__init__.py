"""Common configuration, logging and validation utilities"""

__version__ = "1.0.0"
