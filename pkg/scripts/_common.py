"""Shared argument handling for the experiment scripts."""

import argparse
import csv
import logging
import sys


def parser(description, seeds=20):
    # band and ripple warnings fire on every replicate of the reference channel
    logging.disable(logging.WARNING)
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--seeds", type=int, default=seeds, help="Monte Carlo replicates")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return p


def emit(rows, path=None):
    """Write a list of dicts as CSV."""
    if not rows:
        return
    f = open(path, "w", newline="") if path else sys.stdout
    try:
        out = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
        out.writeheader()
        for row in rows:
            out.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if path:
            f.close()
