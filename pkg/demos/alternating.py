"""Cyclic I-projections with and without orthogonalized constraints.

Run with ``python3 demos/alternating.py``.  The three-moment instance takes a
few seconds because the plain cycles are slow there, which is the point.
"""
import numpy as np
from scipy import stats

from unmeasure import altmin_accelerated, altmin_cyclic

x6, x9 = np.arange(6.0), np.arange(9.0)
b = stats.binom(8, 0.4)
instances = {
    "die, mean 4.5": (np.full(6, 1 / 6), [(x6 + 1, 4.5)]),
    "two moments": (np.full(6, 1 / 6), [(x6, 2.0), (x6**2, 5.0)]),
    "three moments": (np.full(9, 1 / 9), [(x9, b.moment(1)), (x9**2, b.moment(2)), (x9**3, b.moment(3))]),
}

print(f"{'instance':15s} {'normalized':>11s} {'unnormalized':>13s} {'orthogonal':>11s} {'orth+unnorm':>12s}")
for name, (q, cons) in instances.items():
    runs = [altmin_cyclic(q, cons),
            altmin_cyclic(q, cons, normalized_steps=False, max_cycles=3000),
            altmin_accelerated(q, cons),
            altmin_accelerated(q, cons, normalized_steps=False)]
    cells = [f"{r.cycles_to_tol}{'' if r.converged else '+'}" for r in runs]
    print(f"{name:15s} {cells[0]:>11s} {cells[1]:>13s} {cells[2]:>11s} {cells[3]:>12s}")
print("(cycles to tolerance 1e-10; '+' marks a run stopped at its cycle cap)")

# The dual value climbs monotonically to the divergence of the projection.
tr = altmin_accelerated(*instances["two moments"])
print("\ncycle  dual value        D(P||Q)")
for s in tr.snapshots[:: max(1, len(tr.snapshots) // 6)]:
    print(f"{s.cycle:5d}  {s.dual_value:.12f}  {s.divergence:.12f}")
