"""HTTP service around the synthesis and analysis stack."""

from .app import create_app

__all__ = ["create_app"]
