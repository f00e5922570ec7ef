"""
Reconstructing a heralded single photon
=======================================

150 probe settings, 10**7 pulses each, probe means calibrated from the
blocked-signal counts, then a parametric bootstrap.
"""
import numpy as np

from noisetomo import ExperimentPlan, PhotonDistribution, SchemeParams, probe_schedule, reconstruct, simulate_clicks

params = SchemeParams(eta=0.15, transmissivity=0.9, overlap=0.45, signal_cutoff=3)
truth = PhotonDistribution.from_probs([0.095, 0.905, 0, 0])
settings = probe_schedule(params, 150, 200.0, kind="response")

records = simulate_clicks(ExperimentPlan(params, truth, settings, 10**7, seed=1))
print("first records:")
for r in records[:3]:
    print("  ", r)

result = reconstruct(records, params, "overlap", bootstrap_replicates=200, seed=1)
print("estimate      ", np.round(result.estimate.probs, 4))
print("bootstrap std ", np.round(result.bootstrap_std, 4))
print("condition number", f"{result.condition_number:.3g}")

# worst-fitting settings by standardized residual
z = result.diagnostics["standardized_residuals"]
worst = np.argsort(-np.abs(z))[:3]
print("largest residuals at settings", worst, np.round(z[worst], 2))
