"""Finite-difference check of every layer and of both composed networks."""
from pulsegan.gradsuite import run_suite

results, cpu = run_suite(seeds=3)
by_case = {}
for r in results:
    by_case.setdefault(r.case, []).append(r)
for case, rs in by_case.items():
    worst = max(r.max_rel_error for r in rs)
    print(f"{case:<18} worst relative error {worst:.2e} over {len(rs)} seeds "
          f"({sum(r.checked for r in rs)} probes)")
print(f"{cpu:.1f} s CPU")
