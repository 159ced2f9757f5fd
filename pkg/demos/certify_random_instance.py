"""Estimate the best constant of a small positive instance, certify it, and check the certificate."""
import numpy as np

from factorlab import AtomicMeasureSpace, ExponentProfile, Instance, OperatorMatrix
from factorlab.disentangle import disentangle, verify_certificate
from factorlab.oracle import brute_force_constant

rng = np.random.default_rng(7)
x = AtomicMeasureSpace(rng.uniform(0.5, 2.0, 3))
ops = [OperatorMatrix(x, x, rng.uniform(0, 1, (3, 3)), True) for _ in range(2)]
inst = Instance(x, ops, ExponentProfile.from_theta([0.4, 0.6], [1.5, 2.0], [2.0, 3.0]))

est = brute_force_constant(inst, 10)
print(f"best constant (grid + polish): {est.constant:.10f}")

rep = disentangle(inst, A=est.constant)
print(f"outcome {rep.outcome} at cap {rep.cap:g} after {rep.iterations} rounds")
print("weights:")
print(np.array2string(rep.certificate.phi, precision=6))

check = verify_certificate(inst, rep.certificate)
print(f"geometric floor {check.geometric_floor:.10f}, chain max ratio {check.chain_max_ratio:.6f}, ok={check.ok}")
