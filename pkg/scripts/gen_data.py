#!/usr/bin/env python3
"""Generate the five synthetic domains at desk scale."""
import sys

from hdys.cli import main

if __name__ == "__main__":
    sys.exit(main(["gen-data"] + sys.argv[1:]))
