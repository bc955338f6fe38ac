"""
Exit-code contract of the command-line front-end.
"""
import sys
from typing import Any, Dict, Optional

from pydantic import BaseModel

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DEGENERATE = 2
EXIT_INVALID_CERTIFICATE = 3


class CommandResponse(BaseModel):
    """Service result as seen by a subcommand."""
    success: bool
    data: Optional[Dict[str, Any]] = None
    error: Optional[str] = None
    error_type: Optional[str] = None


def exit_code(response: CommandResponse) -> int:
    if response.success:
        return EXIT_OK
    if response.error_type == "DegenerateSystemError":
        return EXIT_DEGENERATE
    return EXIT_FAILURE


def report_failure(response: CommandResponse) -> int:
    """Print the error to stderr and return the matching exit code."""
    print(f"error: {response.error}", file=sys.stderr)
    return exit_code(response)
