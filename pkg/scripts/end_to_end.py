#!/usr/bin/env python3
"""Full three-step identification on the reference channel against the x2 SNR.

Reports per-step Q' figures and validation NMSE' at 5 and 0 dB back-off for
the nonlinear estimate and its linear surrogate.
"""

from _common import emit, parser

from whid import estimator, experiments

if __name__ == "__main__":
    p = parser(__doc__, seeds=6)
    p.add_argument("--snr", type=float, nargs="+", default=[0, 5, 10, 20, 30, 40, 50])
    p.add_argument("--n2", type=int, default=8000)
    p.add_argument("--joint-alpha", action="store_true", help="fit the cubic term when estimating alpha")
    args = p.parse_args()
    plan = estimator.PilotPlan(n2=args.n2, alpha_method="joint" if args.joint_alpha else "projection")
    rows = []
    for snr in args.snr:
        rows += experiments.end_to_end(snr, range(args.seeds), plan=plan)
    emit(rows, args.out)
