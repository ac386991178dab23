#!/usr/bin/env python3
"""Validation NMSE against Q for least-squares estimates of r on white noise."""

from _common import emit, parser

from whid import experiments

POINTS = [(n, 10.0) for n in (390, 1233, 3900, 12332)] + [(n, 30.0) for n in (390, 1233, 2193, 3900)]

if __name__ == "__main__":
    args = parser(__doc__, seeds=4).parse_args()
    emit(experiments.nmse_vs_q(POINTS, range(args.seeds)), args.out)
