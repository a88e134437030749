"""
Command-line entry point.

Run: python cli.py run --generation data/samples/generation_nem_24h.csv --prices data/samples/prices_nem_24h.csv
"""

import sys
from core.cli import main

if __name__ == "__main__":
    sys.exit(main())
