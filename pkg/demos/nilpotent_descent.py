"""Null cone of the conjugation action: a matrix is unstable exactly when it is
nilpotent.  Minimal-vector descent decides this numerically and, for
semisimple input, returns a normal matrix with the same characteristic polynomial.

Run: python demos/nilpotent_descent.py
"""
import numpy as np

from realgit.examples import is_nilpotent_matrix, make_sln_conjugation
from realgit.strata import minimal_vector_descent

rng = np.random.default_rng(7)
act = make_sln_conjugation(3)
g = rng.normal(size=(3, 3)) + 3 * np.eye(3)
gi = np.linalg.inv(g)

jordan = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
semisimple = np.diag([2.0, -0.5, 1.0])
rotation = np.array([[1.0, -2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, -3.0]])

for name, a in [("regular nilpotent", jordan), ("diagonalizable", semisimple), ("complex pair", rotation)]:
    a = g @ a @ gi
    res = minimal_vector_descent(a.ravel(), act)
    line = f"{name:18s} nilpotent={is_nilpotent_matrix(a)!s:5s} descent={res.status:10s} iterations={res.iterations}"
    if res.semistable:
        b = res.vector.reshape(3, 3)
        normal = np.linalg.norm(b @ b.T - b.T @ b) / np.sum(b * b)
        drift = np.abs(np.poly(a) - np.poly(b)).max()
        line += f" |[B,B^t]|/|B|^2={normal:.1e} charpoly drift={drift:.1e}"
    print(line)
