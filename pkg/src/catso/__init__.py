"""Context attentive Thompson sampling with observations."""

__version__ = "0.1.0"
