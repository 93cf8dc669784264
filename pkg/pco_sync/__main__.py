"""Entry point for python -m pco_sync."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
