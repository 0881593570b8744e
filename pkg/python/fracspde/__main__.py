"""
fracspde CLI entry point for python -m fracspde
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
