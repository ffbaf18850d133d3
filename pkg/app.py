#!/usr/bin/env python3
"""Entrypoint of the tree-based distance-bounding simulator.

    python app.py simulate --protocol tree --adversary preask --n 4 --trials 100000
    python app.py analyze --n 1..12 --m eq-n
    python app.py trace --mode prf --seed 7 --format text

Set LOG_LEVEL to change the verbosity of the structured logs on stderr, and
TREEBOUND_OUTPUT_DIR to write reports to files instead of stdout.
"""
import sys

from commands.parser import main

if __name__ == "__main__":
    sys.exit(main())
