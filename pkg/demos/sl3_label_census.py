"""Candidate stratum labels for SL_3 acting on 3x3 matrices by conjugation,
compared against labels read off from gradient-flow limits.

Run: python demos/sl3_label_census.py
"""
import numpy as np

from realgit.examples import make_sln_conjugation
from realgit.rep import maximal_torus
from realgit.strata import candidate_labels, stratum_label, stratum_samples

act = make_sln_conjugation(3)
cands = candidate_labels(maximal_torus(act.split), act)
print(f"{len(cands)} candidate labels, {len(cands.unconfirmed)} unconfirmed weight subsets")
for lab, real in zip(cands, cands.realized):
    spec = np.round(lab.spectrum, 4)
    print(f"  spectrum {spec}  norm {lab.norm:.4f}  realized by a matrix: {real}")

rng = np.random.default_rng(1)
hits = np.zeros(len(cands), int)
starts = [rng.normal(size=9) for _ in range(20)]
for lab, real in zip(cands, cands.realized):
    if real and lab.norm > 0:
        starts += stratum_samples(act, lab.beta, 20, rng)
for v in starts:
    lab, fr = stratum_label(v, act)
    idx = cands.find(lab)
    hits[idx] += 1
print("flow census (hits per candidate):", hits.tolist())
# the two candidates of norm sqrt(3/2) are never hit: no matrix has them as its
# moment value, so they do not index strata
