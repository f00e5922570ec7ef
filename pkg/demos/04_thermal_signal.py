"""
Thermal signal and its photon statistics
========================================

Speckle intensities give g2 close to 2; the reconstructed distribution is
compared with the geometric law of mean 0.17.

At 15% efficiency the data pin down the mean photon number quickly, but
how that mean divides among one, two and three photons stays uncertain
even at 10**8 pulses.
"""
import numpy as np

from noisetomo import ExperimentPlan, PhotonDistribution, SchemeParams, probe_schedule, reconstruct, simulate_clicks
from noisetomo.simulator import simulate_thermal_intensities

_, g2 = simulate_thermal_intensities(1.0, 10**5, seed=3)
_, g2_coherent = simulate_thermal_intensities(1.0, 10**5, thermal=False)
print(f"g2 thermal {g2:.3f}, coherent {g2_coherent:.3f}")

params = SchemeParams(eta=0.15, transmissivity=0.9, overlap=0.45, signal_cutoff=3)
truth = PhotonDistribution.thermal(0.17, 12)
settings = probe_schedule(params, 600, 200.0, kind="response")

print("truth              ", np.round(truth.probs[:4], 4), f" mean {truth.mean():.4f}")
for pulses in (10**6, 10**8):
    records = simulate_clicks(ExperimentPlan(params, truth, settings, pulses, seed=3))
    est = reconstruct(records, params, "overlap").estimate
    print(f"{pulses:.0e} pulses: estimate {np.round(est.probs, 4)}  mean {est.mean():.4f}"
          f"  TV {est.total_variation(truth):.4f}")
