# Prior-free level-set segmentation of a synthetic two-phase scene.
#
# The contour is the zero level of a field phi that descends an energy with
# four ingredients: a penalty keeping phi close to a signed distance
# function (so no separate re-initialization loop is needed), an
# edge-weighted length term, an edge-weighted area term that pushes the
# front across flat regions, and a piecewise-smooth image fit. This script
# segments a clean disk, prints the progress of the energy, and reports how
# far the final contour is from the true circle.

import numpy as np

from shapeseg import contours, descent, synth
from shapeseg.descent import DescentConfig
from shapeseg.energy import EnergyWeights

# A bright disk (intensity 200) on a dark background (50), no noise.
spec = synth.SceneSpec(width=128, height=128, shape=("disk", 63.5, 63.5, 20.0),
                       fg=200.0, bg=50.0)
image, truth = synth.render(spec)

# Default weights and schedule; the initial contour is a centered circle of
# radius 32, well outside the true disk of radius 20.
state = descent.segment(image, None, EnergyWeights(), DescentConfig())

totals = [b.total for b in state.trace]
print(f"ran {state.iter} iterations; energy {totals[0]:.1f} -> {totals[-1]:.1f}")
drops = sum(1 for a, b in zip(totals, totals[1:]) if b > a + 1e-9 * abs(a))
print(f"energy increases along the trace: {drops} (the descent is monotone)")

# Distance of every extracted contour vertex to the true circle.
cs = contours.extract_contours(state.phi)
verts = np.concatenate([np.asarray(c.vertices) for c in cs])
dist = np.abs(np.hypot(verts[:, 0] - 63.5, verts[:, 1] - 63.5) - 20.0)
print(f"{len(cs)} contour(s), {len(verts)} vertices, "
      f"mean distance to truth {dist.mean():.2f} px (max {dist.max():.2f})")

# The distance penalty keeps phi a near-SDF everywhere away from the front,
# which is what makes re-initialization unnecessary during the run.
from shapeseg import field

m = field.grad_magnitude(state.phi)
far = np.abs(state.phi) > 3.0
frac = np.mean((m[far] >= 0.5) & (m[far] <= 1.5))
print(f"{100 * frac:.1f}% of far-from-front pixels keep |grad phi| near 1")
