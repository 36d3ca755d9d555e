"""qaforge: deterministic gameplay-log VideoQA dataset generation and verification."""

__version__ = "0.1.0"
