"""
Pure dephasing during the transfer
==================================

With every qubit exposed to dephasing at rate gamma, the coherence between
Alice and the travelling qubit decays as exp(-2 gamma t). The routing time
grows linearly with the chain length, so longer chains lose more.
A 20-site chain keeps this demo short.
"""
import math

from qrouter import ChainSpec, ratchet_protocol
from qrouter.experiments import decoherence_sweep, tau_AB

template = ChainSpec.uniform(2, lambda1=100.0, lambda2=59.02, node_index=1)
drive = ratchet_protocol(template, omega=30.0)
res = decoherence_sweep(template, drive, gammas=[0.0, 1e-4, 1e-3], lengths=[20])
tau = tau_AB(*drive.stage_durations, 20)
for g, c, est in zip(res.axes["gamma"], res.C[:, 0], res.estimate[:, 0]):
    print(f"gamma={g:.0e}J  simulated C={c:.4f}  C(0) exp(-2 gamma tau)={est:.4f}  (tau={tau:.1f}/J)")
print(f"closed-form check: exp(-2e-3 * tau) = {math.exp(-2e-3 * tau):.4f}")
