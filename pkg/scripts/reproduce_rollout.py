#!/usr/bin/env python3
"""Torque-playback table: k in 1..5, 90/120/150 fps, oracle and predicted."""
import sys

from hdys.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "--study", "rollout-table"] + sys.argv[1:]))
