"""A sampled search for violations of ``D(P||Q) >= (E_P f)^2 / 2`` and the
sure-loss or measure dichotomy for payoffs.

Run with ``python3 demos/inequality_and_dutch_book.py``.
"""
import numpy as np

from unmeasure import charlier, decide, epsilon_sweep, inequality_scan, krawtchouk, verify

# f is the standardized degree-one orthogonal polynomial of the base law.
for f in (charlier(1.0), charlier(5.0), krawtchouk(20, 0.25)):
    r = inequality_scan(None, f, epsilon=0.05, samples=100_000, seed=0)
    print(f"{str(r.base):45s} E f^3 {r.moments[2]:.4f}  min slack {r.min_slack:+.2e}  "
          f"sampled {r.sampled_min_slack:.2e}")

s = epsilon_sweep(None, charlier(2.0))
print("sweep:", [(r.epsilon, f"{r.sampled_min_slack:.1e}") for r in s.reports],
      "largest clean window", s.largest_clean_epsilon)

# Payoff rows on two outcomes.
for X in ([[1, -1], [-1, 1]], [[1, -2], [-2, 1]], [[2, -1], [-1, 1]]):
    c = decide(X)
    vec = c.weights if c.weights is not None else c.measure
    print(f"\nX = {X}: {c.branch}, certificate {[str(v) for v in vec]}, margin {c.margin}, "
          f"boundary {c.boundary}, verified {verify(X, c)}")

rng = np.random.default_rng(0)
branches = [decide(rng.uniform(-1, 1, (3, 4))).branch for _ in range(50)]
print(f"\n50 random 3x4 systems: {branches.count('ARBITRAGE')} sure losses, {branches.count('MEASURE')} measures")
