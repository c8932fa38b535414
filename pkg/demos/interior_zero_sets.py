"""Smoothing that preserves values on an interior set.

When the step vanishes on a closed set inside the domain (not just the
boundary), the operator keeps the field's values there.  The composite
family makes this work without losing global differentiability: it adds a
shrinking multiple of a boundary-only step, so every index smooths
everywhere, while the limit pins the interior values.

Run:  python demos/interior_zero_sets.py
"""

import numpy as np

from mollikit import (Domain, MollifierConfig, ScalarField, build_whitney_eta,
                      make_kernel, mollify, mollify_composite, psi_field)

dom = Domain.box([(0.0, 1.0)], 1025)
mid = dom.shape[0] // 2   # the interior point x = 1/2
theta = ~dom.inside_mask.copy()
theta[mid] = True

eta1 = build_whitney_eta(dom, theta, epsilon=0.25)  # vanishes on boundary + 1/2
eta0 = build_whitney_eta(dom, None, epsilon=0.25)   # vanishes on boundary only
kernel = make_kernel("bump", 1, 64)

f = ScalarField.from_function(dom, lambda x: np.sin(2.1 * x + 0.4))
fmid = f.values[mid]
print(f"input value at the pinned point x = 1/2: {fmid:.8f}\n")

print("composite family: step = eta1 + eta0 / n")
for n in (2, 8, 32, 128):
    tf = mollify_composite(f, eta1, eta0, n, kernel)
    print(f"  n = {n:4d}: value at 1/2 = {tf.values[mid]:.8f}"
          f"   |dev| = {abs(tf.values[mid] - fmid):.2e}")

t_lim = mollify(f, MollifierConfig(kernel, eta1))
print(f"  limit (step = eta1): value at 1/2 = {t_lim.values[mid]:.8f}"
      f"   (pinned exactly)")

psi = psi_field(f, eta1, eta0, None, kernel)
print(f"\nstep-variation field at the pinned point: {psi.components[0].values[mid]}"
      " (vanishes there by construction)")
off = dom.inside_mask.copy()
off[mid] = False
t128 = mollify_composite(f, eta1, eta0, 128, kernel)
print(f"max deviation from the limit elsewhere: "
      f"{np.abs(t128.values[off] - t_lim.values[off]).max():.2e}")
