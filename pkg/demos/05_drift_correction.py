"""
Correcting a drifting detector efficiency
=========================================

The efficiency falls by 15% over the run. Signal-only counts of a known
reference state track it setting by setting.
"""
import numpy as np

from noisetomo import (
    ExperimentPlan,
    PhotonDistribution,
    ReconstructionOptions,
    SchemeParams,
    inject_drift,
    probe_schedule,
    reconstruct,
    simulate_clicks,
)

params = SchemeParams(eta=0.15, transmissivity=0.9, overlap=0.45, signal_cutoff=2)
truth = PhotonDistribution.from_probs([0.05, 0.15, 0.80])
reference = PhotonDistribution.from_probs([0.095, 0.905])
settings = probe_schedule(params, 600, 200.0, kind="response")

plan = ExperimentPlan(params, truth, settings, 10**7, seed=1, reference_state=reference)
plan = inject_drift(plan, "linear", 0.15)
records = simulate_clicks(plan)

fixed = reconstruct(records, params, "overlap",
                    options=ReconstructionOptions(drift_correction=True, reference_state=reference))
plain = reconstruct(records, params, "overlap")

eta = fixed.per_setting_eta_used
print("efficiency first/last: true", plan.etas[[0, -1]].round(4), "estimated", eta[[0, -1]].round(4))
print("truth        ", truth.probs)
print("corrected    ", fixed.estimate.probs.round(4))
print("uncorrected  ", plain.estimate.probs.round(4))
