"""Reading a weight vector as the means of independent Poisson counts.

Run with ``python3 demos/poisson_view.py``.  Every number printed here is
recomputed by the test suite.
"""
import numpy as np

from unmeasure import (bernoulli_vector, codelengths_from, kl_extended, kraft_check, maxent_check, poisson_pmf,
                       thin, thin_divergence_identity, thin_law_experiment, total_variation)
from unmeasure.poisson import kl_to_product_poisson

# A measure of mass 2 against one of mass 1 on a single atom.
lam, mu = np.array([2.0]), np.array([1.0])
print(f"D(2 || 1)                 = {kl_extended(lam, mu):.12f}  (2 ln 2 - 1)")
print(f"D(Po(2) || Po(1)) by pmfs = {kl_to_product_poisson(poisson_pmf(2.0), [1.0]):.12f}")

# Conditioning a measure on a set of atoms gives codelengths that meet Kraft.
ell = codelengths_from([1.0, 3.0])
print(f"codelengths of (1, 3): {np.round(ell.lengths, 6)}, Kraft sum {kraft_check(ell).sum:.12f}")

# Thinning keeps each count with probability alpha; Poisson laws are closed under it.
print(f"TV(T_0.4 Po(3), Po(1.2)) = {total_variation(thin(poisson_pmf(3.0), 0.4), poisson_pmf(1.2)):.1e}")

# The thinned sums of a Bernoulli vector approach the product Poisson law.
rows = thin_law_experiment(bernoulli_vector([0.5, 0.5]), [0.5, 0.5], [1, 4, 16, 64, 256])
print("\n   n   D(T_1/n P^*n || Po)    TV")
for r in rows:
    print(f"{r.n:4d}   {r.divergence:.6e}   {r.total_variation:.3e}")

# For Bernoulli vectors the divergence survives thinned convolution unchanged.
rep = thin_divergence_identity([0.2, 0.3, 0.5], [0.5, 0.25, 0.25], [1, 2, 3, 4])
print(f"\nD(P||Q) = {rep.base_divergence:.12f}, Poisson form {rep.poisson_divergence:.12f}")
print("thinned:", {n: round(v, 12) for n, v in rep.thinned.items()})

# Among Bernoulli sums with a given mean the Poisson law has the largest entropy.
m = maxent_check([1.0], [[[0.5]] * 2, [[0.25]] * 4, [[0.1]] * 10])
print(f"\nH(Po(1)) = {m.poisson_entropy:.6f}; Bernoulli sums: {np.round(m.entropies, 6)}")
