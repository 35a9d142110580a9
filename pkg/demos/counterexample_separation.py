"""The dyadic-amplitude profile: criterion finite, Lorentz time-norm not.

The profile f(x, t) = A(t) / sqrt((t_inf - t) + |x - x0|^2) switches on
dyadic amplitude bursts A = 2^(m_n) inside intervals accumulating at
t_inf.  Its log-damped weak-norm criterion integral converges (the terms
decay like 1/(n^2 log 2)), yet every Lorentz L^(p,r) time norm of the
weak-norm history diverges: each truncation level adds an O(1) block.
One object separates the two regularity classes.

Run:  python3 demos/counterexample_separation.py [out_dir]
"""

import sys
from pathlib import Path

from wlns import DyadicSchedule, claim1_terms, criterion_vs_lorentz
from wlns.counterexample import write_schedule_csv


def main(out_dir="."):
    schedule = DyadicSchedule(q=6.0)
    print(f"schedule at q = {schedule.q:g}: p = {schedule.p:g}, t_inf = {schedule.t_inf:g}")
    report = claim1_terms(schedule, 5)
    print("\nfirst interval data (times collapse toward t_inf):")
    print(f"{'n':>2} {'t_n':>12} {'width (log2)':>13} {'criterion term':>15}")
    for i, n in enumerate(report.ns):
        lo, _ = schedule.interval(int(n))
        print(
            f"{int(n):>2} {lo:>12.8f} {schedule.width_log2(int(n)):>13.1f} "
            f"{report.terms[i]:>15.3e}"
        )

    sep = criterion_vs_lorentz(schedule, r=2.0, n_terms=640)
    print("\ncriterion partial sums vs L^(p,2) time-norm partials:")
    print(f"{'N':>4} {'criterion':>11} {'time norm':>11}")
    for i, n in enumerate(sep.checkpoints):
        print(f"{int(n):>4} {sep.criterion_partials[i]:>11.6f} {sep.time_norms[i]:>11.3f}")
    print(
        f"\nthe criterion stays below its tail bound {sep.criterion_upper_bound:.6f}"
        " while the time norm grows like N^(1/r) without bound."
    )

    Path(out_dir).mkdir(parents=True, exist_ok=True)
    path = Path(out_dir) / "counterexample_schedule.csv"
    write_schedule_csv(path, schedule, n_terms=40, r=2.0)
    print(f"wrote {path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
