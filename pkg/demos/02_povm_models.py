"""
No-click POVMs for three measurement models
===========================================

Rows are probe settings, columns the signal photon number.
"""
import numpy as np

from noisetomo import SchemeParams, design_matrix, ProbeSetting, conditioning_report
from noisetomo.povm import effective_probe_mean

params = SchemeParams(eta=0.15, transmissivity=0.9, overlap=0.45, signal_cutoff=3)
means = [0.0, 1.0, 10.0, 100.0]
settings = [ProbeSetting(i, m) for i, m in enumerate(means)]

np.set_printoptions(precision=5, suppress=True)
for model in ("simple", "perfect", "overlap"):
    povm = design_matrix(model, params, settings)
    print(model)
    print(povm.elements)

# with partial overlap only part of the probe interferes, and that part saturates
for n in (1, 10, 100, 1e4, 1e6):
    print(f"n = {n:>9g}  interfering mean = {effective_probe_mean(params, ProbeSetting(0, n)):.4f}")

rep = conditioning_report(design_matrix("overlap", params, settings))
print("condition number", f"{rep.condition_number:.3g}", "rank", rep.effective_rank)
