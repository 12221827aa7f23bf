"""modelci: register, convert, profile, and dispatch ML models as services."""

__version__ = "0.1.0"
