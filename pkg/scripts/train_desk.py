#!/usr/bin/env python3
"""Train the desk preset on all five profiles and print the metric table."""
import sys

from hdys.cli import main

if __name__ == "__main__":
    run = "runs/desk"
    code = main(["train", "--out", run] + sys.argv[1:])
    if code == 0:
        code = main(["eval", "--run", run])
    sys.exit(code)
