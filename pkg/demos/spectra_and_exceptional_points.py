"""
Supermodes of a gain/loss ring
==============================

Build the dynamical matrix of a ring of alternating gain and loss cavities,
diagonalise it, and watch eigenvalues coalesce as the coupling is tuned.
"""

import numpy as np

from cptring import (
    SystemParams,
    analytic_spectrum,
    build_matrix,
    check_cpt_symmetry,
    classify_regime,
    exceptional_points,
    numerical_spectrum,
)

# A six-cavity ring (three gain/loss pairs). Rates are in units of kappa.
params = SystemParams(n_pairs=3, kappa=1.0, coupling_j=0.4)
m = build_matrix(params)
print(np.round(m.entries, 3))

# Shifting every mode by one site and conjugating gives the matrix back.
print("cyclic-shift symmetry holds:", check_cpt_symmetry(m)[0])

# Eigenvalues of -iM come as +/- pairs and are either real or imaginary.
report = numerical_spectrum(m)
for pair in report.eigenpairs:
    print(f"lambda = {pair.value:+.6f}   degeneracy {pair.multiplicity}")
print("regime:", report.regime.value)

# The closed form lambda^2 = kappa^2 - 4 J^2 cos^2(pi k / n) agrees.
print("closed form:", np.round(np.sort_complex(analytic_spectrum(params).values), 6))

###############################################################################
# Exceptional points
# ------------------
# Each family crosses zero at J/kappa = 1 / (2 |cos(pi k / n)|).

eps = exceptional_points(params)
print("exceptional points (J/kappa):", [round(r, 6) for r in eps.j_over_kappa])

for ratio in eps.j_over_kappa:
    at_ep = numerical_spectrum(build_matrix(params.replace(coupling_j=ratio)))
    zero = [p for p in at_ep.eigenpairs if abs(p.value) < 1e-6][0]
    print(f"J/kappa={ratio:.3f}: zero eigenvalue with algebraic multiplicity "
          f"{zero.multiplicity}, eigenvectors {zero.geometric_multiplicity}, defective={at_ep.is_defective}")

###############################################################################
# Sweeping the coupling
# ---------------------
# The regime label changes exactly at the two exceptional points.

for ratio in (0.2, 0.4, 0.5, 0.6, 0.9, 1.0, 1.5, 2.5):
    print(f"J/kappa={ratio:4.2f}  {classify_regime(params.replace(coupling_j=ratio)).value}")

# Rings with an even number of pairs keep a +/-kappa family at any coupling.
eight = SystemParams(4, 1.0, 2.5)
print("eight cavities, J=2.5:", np.round(np.sort_complex(analytic_spectrum(eight).values), 4))
