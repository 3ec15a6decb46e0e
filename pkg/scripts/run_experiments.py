"""Run reproduction experiments (acceptance criteria) and save their outcomes.

    python3 scripts/run_experiments.py                 # all ten
    python3 scripts/run_experiments.py 1 2 9 --out results.json
"""

import argparse
import json

from wfibp.experiments import CRITERIA


def main():
    p = argparse.ArgumentParser(description="run acceptance experiments")
    p.add_argument("criteria", type=int, nargs="*", default=sorted(CRITERIA))
    p.add_argument("--seed", type=int, default=None, help="override each experiment's default seed")
    p.add_argument("--out", default="experiment_results.json")
    a = p.parse_args()
    results = {}
    for c in a.criteria:
        kw = {} if a.seed is None else {"seed": a.seed}
        o = CRITERIA[c](**kw)
        print(o.line(), flush=True)
        results[c] = {"name": o.name, "passed": o.passed, "seconds": o.seconds, "metrics": o.metrics}
        with open(a.out, "w") as f:
            json.dump(results, f, indent=2, default=float)


if __name__ == "__main__":
    main()
