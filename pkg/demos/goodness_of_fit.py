"""Exact laws of the G statistic against the chi-square approximation.

Run with ``python3 demos/goodness_of_fit.py``.
"""
from unmeasure import classical_qq, g_statistic, intersection_check, mach_zehnder, poisson_qq

# Signed log-likelihood of 15 successes in 20 fair trials.
s = g_statistic(20, 15)
print(f"G_20(15) = {s.g:.11f}, G^2 = {s.g2:.6f}")

# Phi(G_n(k)) always sits inside the cumulative step at k.
bad = sum(len(intersection_check(n).violations) for n in range(1, 31))
print(f"intersection property, n = 1..30: {bad} violations")

# With a fixed number of trials the QQ steps are large; a Poisson number of
# trials smears them out.
c, p = classical_qq(20), poisson_qq(20.0)
print(f"\nlargest step deviation from chi-square(1): fixed n {c.gap:.4f}, Poisson n {p.gap:.4f}")
print(f"Poisson table covers probability {p.total_probability:.15f} (tail {p.tail_mass:.1e})")

# Interferometer counts: blocking a path makes both detectors fire equally.
for scenario, obs in (("blocked", (10, 10)), ("blocked", (16, 4)), ("unblocked", (20, 0))):
    r = mach_zehnder(scenario, 10.0, obs)
    print(f"{scenario:9s} counts {obs}: divergence {r.divergence:.4f}, G {r.g:+.4f}")
