"""Fine-grained propaganda detection: span identification and technique classification."""

__version__ = "0.1.0"
