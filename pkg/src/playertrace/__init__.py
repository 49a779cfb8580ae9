"""Player knowledge tracing from gameplay telemetry."""

__version__ = "0.1.0"
