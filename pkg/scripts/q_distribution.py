#!/usr/bin/env python3
"""Q of the least-squares r estimate from white-noise pilots, one row per seed."""

from _common import emit, parser

from whid import experiments

if __name__ == "__main__":
    p = parser(__doc__, seeds=100)
    p.add_argument("--n", type=int, default=8000)
    p.add_argument("--snr", type=float, default=20.0)
    args = p.parse_args()
    res = experiments.q_white_noise(args.n, args.snr, range(args.seeds))
    emit([{"seed": s, "q_db": q, "predicted_db": res["predicted"]}
          for s, q in enumerate(res["q"])], args.out)
