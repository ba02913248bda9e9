"""Custom useful functions and classes for ``spread_market``."""
