# src/__init__.py
# Keep this file free of imports. Do NOT run code at import time.

__version__ = "0.3.0"
