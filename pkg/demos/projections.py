"""Information projections that keep or lose mass.

Run with ``python3 demos/projections.py``.
"""
import numpy as np

from unmeasure import REVERSE_KL, ConstraintSet, kkt_report, project, thm7_check, thm8_check

faces = np.arange(1.0, 7.0)
q = np.full(6, 1 / 6)

# A fair die conditioned to average 4.5: the closest law is an exponential tilt.
C = ConstraintSet(6, equalities=((faces, 4.5),), require_probability=True)
r = project(q, C)
print("tilted die:", np.round(r.q_star.weights, 10))
print("KKT residuals:", {k: f"{v:.1e}" for k, v in kkt_report(r, q, C).items()})

# Projecting onto probability measures with KL lands on a probability measure.
print(f"mass after KL projection: {thm7_check(q, C).mass:.15f}")

# Dropping the normalization and using reverse KL, mass leaks away.
g = np.array([1.0, 2.0, 4.0])
q3 = np.array([0.2, 0.3, 0.5])
rep = thm8_check(q3, g, 1.5)
print(f"\nreverse KL onto sum g p <= 1.5 (sum g q = {g @ q3:.2f}):")
print(f"  q* = {np.round(rep.result.q_star.weights, 8)}, mass {rep.result.q_star.total_mass:.6f}")
print(f"  bound met with equality: {rep.equality_active}, mass reduced: {rep.mass_reduced}")

# The same half-space under KL only tilts the law and adds no mass.
r_kl = project(q3, ConstraintSet(3, inequalities=((g, 1.5),)))
r_rk = project(q3, ConstraintSet(3, inequalities=((g, 1.5),)), REVERSE_KL)
print(f"  KL mass {r_kl.q_star.total_mass:.6f} vs reverse KL mass {r_rk.q_star.total_mass:.6f}")
