"""Optimizer runtime and switch savings against video length and epsilon.

    python3 scripts/solver_scaling.py --lengths 100,200,300,600 --epsilons 0,0.05,0.2,1
"""

import argparse
import time

from hasopt.domain import SessionConfig
from hasopt.optimizer import solve
from hasopt.workload import generate_trace, generate_video, paper_trace_spec, paper_video_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lengths", default="100,200,300,600")
    ap.add_argument("--epsilons", default="0,0.05,0.2,1")
    ap.add_argument("--start", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    trace = generate_trace(paper_trace_spec(duration_s=720))
    print("n    epsilon  W_opt   mean    switches  seconds")
    for n in (int(x) for x in args.lengths.split(",")):
        video = generate_video(paper_video_spec(n, seed=args.seed))
        for eps in (float(x) for x in args.epsilons.split(",")):
            t = time.perf_counter()
            res = solve(video, trace, SessionConfig(trace_start_s=args.start, epsilon=eps))
            dt = time.perf_counter() - t
            print(f"{n:<4} {eps:<8g} {res.w_opt:<7.3f} {res.step2_mean_quality:<7.3f} {res.switches:<9} {dt:.2f}")


if __name__ == "__main__":
    main()
