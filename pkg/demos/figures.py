"""
Regenerate the indicatrix figures
=================================

m-root curves deformed by (1 + s)^2, two 3D surfaces over the quartic, and
the shifted circles.  Files land in ./figures.
"""

import sys

from minkdeform import geometry as G

out = sys.argv[1] if len(sys.argv) > 1 else "figures"
for fs in G.build_figures(out):
    worst = max(c.level_error for c in fs.curves)
    print(f"{fs.name:32s} {len(fs.curves):2d} curves  max |F-1| {worst:.1e}  ok={fs.ok}")
    for path in fs.files:
        print("   ", path)
