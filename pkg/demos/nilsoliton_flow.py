"""Gradient flow on the variety of 4-dimensional brackets.

A filiform bracket written in a skewed basis is not critical; its flow limit
is, and the label recovers the traceless part of the derivation diag(1,2,3,4)
(up to the factor 1/2 of this normalization).

Run: python demos/nilsoliton_flow.py
"""
import numpy as np

from realgit.examples import BracketTensor, heisenberg, nilsoliton_residual

filiform = BracketTensor.from_brackets(4, {(1, 2): {3: 1.0}, (1, 3): {4: 1.0}})
rng = np.random.default_rng(3)
g = rng.normal(size=(4, 4)) + 4 * np.eye(4)
gi = np.linalg.inv(g)
# new bracket g . mu = g mu(g^-1 ., g^-1 .)
moved = BracketTensor.from_full(np.einsum("ai,bj,ijk,ck->abc", gi.T, gi.T, filiform.full(), g))

for name, mu in [("heisenberg (n=3)", heisenberg(3)), ("filiform", filiform), ("filiform, skewed", moved)]:
    rep = nilsoliton_residual(mu)
    spec = np.round(rep.label.spectrum, 6)
    print(f"{name:18s} |grad F|={rep.gradient_norm:.2e} label={spec} jacobi(limit)={rep.limit_jacobi_defect:.1e}")
print("expected filiform label:", (np.arange(1, 5) - 2.5) / 2)
