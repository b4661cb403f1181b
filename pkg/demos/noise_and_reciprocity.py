"""
Amplification noise breaks reciprocal transport
===============================================

Without noise, light sent from a1 to b3 arrives with exactly the intensity of
light sent from b3 to a1, because exp(-iMt) is a symmetric matrix. Spontaneous
photons from the gain cavities spoil the balance.
"""

import numpy as np

from cptring import DriveSpec, SystemParams, evolve_moments, reciprocity_experiment

drive = DriveSpec(site_index=0, amplitude_e=5.0)

for ratio in (1.2, 0.6, 0.4):
    clean = SystemParams(3, 1.0, ratio, drive)
    noisy = clean.replace(noise_enabled=True)
    r0 = reciprocity_experiment(clean, site_fwd=0, site_bwd=5, t_final=8.0, dt_out=0.01)
    r1 = reciprocity_experiment(noisy, site_fwd=0, site_bwd=5, t_final=8.0, dt_out=0.01)
    rel = np.max(r0.difference / np.maximum(r0.forward, 1.0))
    print(f"J/kappa={ratio}: noiseless max relative difference {rel:.1e}, "
          f"noisy difference at kappa t=8: {r1.difference[-1]:.4g}")

    # Locate where the noise-induced difference overtakes the transported light.
    above = r1.difference > r0.forward
    if above[-1]:
        crossing = r1.times[np.flatnonzero(~above)[-1] + 1]
        print(f"  noise exceeds the transported signal from kappa t = {crossing:.2f}")

###############################################################################
# Spontaneous photons only
# ------------------------
# An isolated gain cavity fills with e^{2 kappa t} - 1 photons, a loss cavity
# stays empty.

decoupled = SystemParams(1, 1.0, 0.0, noise_enabled=True)
state = evolve_moments(decoupled, 1.0, 1.0)[-1]
print("gain cavity at kappa t = 1:", state.corr[0, 0].real, "exact:", np.expm1(2.0))
print("loss cavity at kappa t = 1:", state.corr[1, 1].real)
