"""
Five degradation families on one clean texture
==============================================

Each family is a pure function of the clean image, its parameters and a seed.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from maskdcpt.degrade import DegradationSpec, Family, procedural_texture

clean = procedural_texture(96, seed=7)

# one representative setting per family, mid-range of the default draws
specs = [
    DegradationSpec(Family.HAZE, {"beta": 1.4, "airlight": 0.85}),
    DegradationSpec(Family.RAIN_STREAK, {"streak_density": 0.05, "angle_deg": 95}),
    DegradationSpec(Family.GAUSSIAN_NOISE, {"sigma": 30}),
    DegradationSpec(Family.MOTION_BLUR, {"kernel_length": 9, "angle_deg": 30}),
    DegradationSpec(Family.LOW_LIGHT, {"gamma": 2.0, "scale": 0.4, "read_noise_sigma": 2}),
]

fig, axes = plt.subplots(1, 6, figsize=(13, 2.6))
axes[0].imshow(clean)
axes[0].set_title("clean")
for ax, spec in zip(axes[1:], specs):
    lq = spec.apply(clean)
    # same spec (including its seed), same output
    assert np.array_equal(lq, spec.apply(clean))
    ax.imshow(np.clip(lq, 0, 1))
    ax.set_title(spec.family.abbrev)
for ax in axes:
    ax.axis("off")
fig.tight_layout()
fig.savefig("degradations.png")
print("wrote degradations.png")
