"""
Help texts for the command-line front-end.
"""

from .help import get_help, topics

__all__ = ["get_help", "topics"]
