#!/usr/bin/env python3
"""Scale-vs-heterogeneity decomposition runs (Single-50 / 50-50 / Single)."""
import sys

from hdys.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "--study", "table2-analogue"] + sys.argv[1:]))
