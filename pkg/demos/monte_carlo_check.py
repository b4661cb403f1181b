"""
Checking the moment equations with stochastic trajectories
==========================================================

Sample the classical Langevin equation whose noise reproduces normal-ordered
moments and compare ensemble photon numbers with the deterministic moments.
"""

import numpy as np

from cptring import (
    DriveSpec,
    SystemParams,
    compare_to_deterministic,
    evolve_moments,
    sample_trajectories,
)

params = SystemParams(3, 1.0, 0.6, DriveSpec(0, 5.0), noise_enabled=True)

# 2000 trajectories keep this demo fast; the acceptance suite uses 10^4.
ens = sample_trajectories(params, t_final=4.0, n_traj=2000, seed=7, dt_out=0.5)
ref = evolve_moments(params, 4.0, 0.5)
report = compare_to_deterministic(ens, ref)

print(" t    site  Monte Carlo            moments")
for k in range(1, len(ens.times)):
    for site in (0, 5):
        print(f"{ens.times[k]:4.1f}  {site}    {ens.photon_numbers[k, site]:10.4g} +/- "
              f"{ens.photon_stderr[k, site]:8.2g}   {ref.photon_numbers()[k, site]:10.4g}")
print(f"max |z| = {report.max_abs_z:.2f}, within 3 SE: {report.fraction_within(3.0):.1%}")

# Same seed, same numbers.
again = sample_trajectories(params, t_final=4.0, n_traj=2000, seed=7, dt_out=0.5)
print("bit-identical rerun:", np.array_equal(ens.photon_numbers, again.photon_numbers))
