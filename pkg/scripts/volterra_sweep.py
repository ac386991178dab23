#!/usr/bin/env python3
"""Reduced-kernel Volterra NMSE against pilot length, desk-scale filters."""

from _common import emit, parser

from whid import experiments

if __name__ == "__main__":
    p = parser(__doc__, seeds=6)
    p.add_argument("--l1", type=int, default=6)
    p.add_argument("--l2", type=int, default=6)
    p.add_argument("--ratios", type=float, nargs="+", default=[2, 5, 10, 20, 50])
    p.add_argument("--snr", type=float, default=20.0)
    args = p.parse_args()
    emit(experiments.volterra_sweep(args.l1, args.l2, args.ratios, args.snr, range(args.seeds)), args.out)
