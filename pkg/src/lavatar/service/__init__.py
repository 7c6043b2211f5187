"""HTTP/WebSocket service wrapping the avatar toolkit."""

from .app import create_app

__all__ = ["create_app"]
