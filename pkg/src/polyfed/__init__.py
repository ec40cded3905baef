"""polyfed: a self-optimizing multi-model database orchestration engine."""

__version__ = "0.1.0"
