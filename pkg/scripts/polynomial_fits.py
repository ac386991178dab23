#!/usr/bin/env python3
"""Least-squares polynomial fits of the Rapp amplifier over several amplitude ranges."""

import argparse

from _common import emit

from whid import experiments

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out")
    emit(experiments.polynomial_fits(), p.parse_args().out)
