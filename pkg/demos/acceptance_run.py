"""Run the acceptance criteria (all, or the numbers given on the command line).

Run: python3 demos/acceptance_run.py 1 3 7
"""
import sys

from kvcert.acceptance import CRITERIA, run_criterion


def main(argv):
    ks = [int(a) for a in argv] or sorted(CRITERIA)
    results = [run_criterion(k) for k in ks]
    for res in results:
        print(res.summary_line())
        for c in res.checks:
            print(f"    {'ok ' if c.passed else 'BAD'} {c.name}: {c.measured:.3e} (threshold {c.threshold:.3e})")
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
