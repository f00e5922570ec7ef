"""
Beam-splitter unitary in the Fock basis
=======================================

The closed combinatorial sum against a matrix exponential, block by block.
"""
import numpy as np

from noisetomo.fock import bs_unitary, bs_unitary_oracle

T = 0.9
u = bs_unitary(T, 12)
o = bs_unitary_oracle(T, 12)

# a single photon is transmitted with probability T
print("|<1,0|U|1,0>|^2 =", u.amplitude(1, 0, 1, 0) ** 2)

# two photons on a balanced splitter never leave through different ports
print("HOM amplitude at T=0.5:", bs_unitary(0.5, 2).amplitude(1, 1, 1, 1))

for s in (2, 6, 12):
    b = u.block(s)
    defect = np.abs(b.T @ b - np.eye(s + 1)).max()
    gap = np.abs(b**2 - o.block(s) ** 2).max()
    print(f"total {s:2d}: unitarity defect {defect:.1e}, oracle gap {gap:.1e}")

# photon-number distribution at the detector port for |2, 3> input
probs = u.block(5)[:, 2] ** 2
print("P(k photons at detector | 2 signal, 3 probe):", np.round(probs, 4))
