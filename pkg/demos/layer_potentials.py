"""Boundary discretization and the single layer operators.

Discretizes the elliptic hole, assembles V and W* with the log-split Nyström
rule, and watches the jump relation (mu/2 + W* mu equals the exterior
traction) converge as N doubles.

    python demos/layer_potentials.py
"""

import numpy as np

from lamerobin import CurveSpec, ElasticConfig, GreensEvaluator, discretize
from lamerobin.layer_potentials import assemble, jump_relation_check, smooth_test_density

cfg = ElasticConfig(1.0, (1.0, 1.0))
ev = GreensEvaluator(cfg)
curve = CurveSpec.ellipse(0.3, 0.2)

d = discretize(curve, 64, cell=cfg.q_diag)
print(f"ellipse perimeter with 64 nodes: {d.perimeter:.15f}")
print(f"normal at t = 0: {d.normals[0]}, curvature {d.curvature[0]:.4f}")

prev = None
for N in (64, 128, 256):
    pm = assemble(discretize(curve, N, cell=cfg.q_diag), ev)
    err = jump_relation_check(pm, smooth_test_density(pm.disc))
    note = "" if prev is None else f"  (gain {prev / err:.1f}x)"
    print(f"N = {N:3d}: jump relation gap {err:.2e}{note}")
    prev = err

W = pm.disc.weights.repeat(2)[:, None] * pm.V
print(f"weighted V asymmetry at N = 256: {np.max(np.abs(W - W.T)) / np.max(np.abs(W)):.1e}")
