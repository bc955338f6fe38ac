"""
Subcommand descriptions, one markdown file per subcommand next to this module.
"""
from functools import lru_cache
from pathlib import Path
from typing import List

HELP_DIR = Path(__file__).parent


def topics() -> List[str]:
    """Subcommands that have a help file."""
    return sorted(path.stem for path in HELP_DIR.glob("*.md"))


@lru_cache(maxsize=None)
def get_help(command: str) -> str:
    """
    Description shown by ``wavepacket-frames <command> --help``.

    Raises:
        FileNotFoundError: no help file for ``command``
    """
    return (HELP_DIR / f"{command}.md").read_text().rstrip() + "\n"
