#!/usr/bin/env python3
"""Step-2 Hammerstein estimate of g with the amplifier input known exactly."""

from _common import emit, parser

from whid import estimator, experiments

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--snr", type=float, nargs="+", default=[0, 10, 20, 30, 40])
    p.add_argument("--first-harmonic", type=int, default=35,
                   help="lowest x2 harmonic; 35 puts x2 inside the 3 dB band of r")
    args = p.parse_args()
    plan = estimator.PilotPlan(x2_first_harmonic=args.first_harmonic)
    rows = []
    for snr in args.snr:
        rows += [{"snr": snr, **r} for r in experiments.step2_known_input(snr, range(args.seeds), plan)]
    emit(rows, args.out)
