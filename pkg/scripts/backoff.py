#!/usr/bin/env python3
"""Step-1 Q against the power back-off of x1 from saturation (Rapp amplifier)."""

from _common import emit, parser

from whid import experiments

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--backoffs", type=float, nargs="+", default=[0, 2, 4, 6, 8, 11, 14, 17, 20])
    p.add_argument("--snr", type=float, default=20.0)
    p.add_argument("--n", type=int, default=8000)
    args = p.parse_args()
    emit(experiments.backoff_sweep(args.backoffs, args.snr, args.n, range(args.seeds)), args.out)
