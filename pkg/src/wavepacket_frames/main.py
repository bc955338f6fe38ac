#!/usr/bin/env python3
"""
Command-line entry point for the wavepacket frame toolkit.
"""
import asyncio
import sys
from typing import List, Optional

from loguru import logger

from wavepacket_frames.cli.router import dispatch
from wavepacket_frames.config import settings


def configure_logging() -> None:
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if settings.debug_mode else settings.log_level)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for console script."""
    configure_logging()
    return asyncio.run(dispatch(argv))


if __name__ == "__main__":
    sys.exit(main())
