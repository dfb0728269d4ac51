"""
Sphere to ellipsoid in three circle steps
==========================================

Each step squeezes one axis with phi(s) = sqrt(1 - s^2).  The result is
compared with the analytic ellipsoid and with the single p = 3 deformation.
"""

from minkdeform import geometry as G

d = [0.5, 0.8, 0.9]
ref = G.reference_sample(lambda u: G.ellipsoid_points(d, u), 3, 4096)

for mode in ("stepwise", "oneshot"):
    F = G.ellipsoid_pipeline(d, mode)
    s = G.indicatrix_sample(F, 4096)
    print(f"{mode:9s} Hausdorff to the ellipsoid: {G.hausdorff(s, ref):.2e}")

# and back again, with numerically inverted phis
F = G.ellipsoid_pipeline(d)
back = G.ellipsoid_inverse_pipeline(d, F)
print("inverse pipeline, max |F - 1| on the unit sphere:",
      f"{G.level_residual(back, G.reference_sample(lambda u: u, 3, 4096)):.2e}")

# the sphere translated along e1 is a single deformation away too
for c in (0.0, 0.4, 0.8):
    ref2 = G.reference_sample(lambda u: G.shifted_sphere_points([c, 0], u), 2, 2048)
    s2 = G.indicatrix_sample(G.shifted_sphere_norm(c), 2048)
    print(f"shifted by {c}: Hausdorff {G.hausdorff(s2, ref2):.2e}")
