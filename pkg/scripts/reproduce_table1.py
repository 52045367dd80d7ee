#!/usr/bin/env python3
"""Full 20-run comparative grid with pinned seeds (several hours on one core)."""
import sys

from hdys.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "--study", "table1-analogue"] + sys.argv[1:]))
