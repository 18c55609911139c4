"""
Entry point of the `ipgd-lab` command.
"""
import sys
from typing import List, Optional

from src.interfaces.cli.commands import dispatch


def main(argv: Optional[List[str]] = None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
