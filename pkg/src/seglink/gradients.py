"""Central-difference derivatives along the four principal orientations.

The kernels are applied by true convolution with the kernel rows read top to
bottom as decreasing ``y`` (arrays are ``a[y, x]`` with ``y`` up).  Each plane
then reduces to the difference of two pixels:

* ``d0[y, x]   = I[y-1, x]   - I[y+1, x]``
* ``d45[y, x]  = I[y-1, x+1] - I[y+1, x-1]``
* ``d90[y, x]  = I[y, x+1]   - I[y, x-1]``
* ``d135[y, x] = I[y+1, x+1] - I[y-1, x-1]``

The one-pixel border is left undefined (NaN).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KERNELS", "KERNEL_AXES", "GradientStack", "directional_derivatives"]

KERNELS = {
    0: np.array([[0, 1, 0], [0, 0, 0], [0, -1, 0]]),
    45: np.array([[1, 0, 0], [0, 0, 0], [0, 0, -1]]),
    90: np.array([[0, 0, 0], [1, 0, -1], [0, 0, 0]]),
    135: np.array([[0, 0, -1], [0, 0, 0], [1, 0, 0]]),
}

# Plane value is I(p + g) - I(p - g) for these (dx, dy) axes.
KERNEL_AXES = {0: (0, -1), 45: (1, -1), 90: (1, 0), 135: (1, 1)}


@dataclass(frozen=True, eq=False)
class GradientStack:
    planes: dict

    def __getitem__(self, quadrant: int) -> np.ndarray:
        return self.planes[quadrant]


def _pair_difference(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.full(img.shape, np.nan)
    h, w = img.shape
    core = (slice(1, h - 1), slice(1, w - 1))
    plus = img[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
    minus = img[1 - dy:h - 1 - dy, 1 - dx:w - 1 - dx]
    out[core] = plus - minus
    return out


def directional_derivatives(image: np.ndarray) -> GradientStack:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 3:
        raise ValueError("need a 2-D image of at least 3x3 pixels")
    planes = {q: _pair_difference(img, *axis) for q, axis in KERNEL_AXES.items()}
    for plane in planes.values():
        plane.setflags(write=False)
    return GradientStack(planes)
