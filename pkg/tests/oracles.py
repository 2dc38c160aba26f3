"""Independent reference computations used by the tests.

The flood-fill oracle does not trace anything.  It samples sign(f - t) on a
square grid over the disk B_R and labels the connected sign regions.  For a
regular value the curve pieces in the disk are disjoint embedded arcs and
circles, so

* every piece adds one region: b0 = regions - 1,
* every circle encloses exactly one region that does not reach the rim: s
  is the number of regions that stay away from the rim; the remaining
  pieces are arcs.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from bifurcurve.polymap import PolynomialMap

_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = ndimage.generate_binary_structure(2, 2)


def flood_fill_counts(fmap: PolynomialMap, t: float, radius: float, n: int = 512) -> dict:
    """(s, l, b0) of {f = t} inside the disk of the given radius, from region labels."""
    if fmap.domain_dim != 2:
        raise ValueError("the flood-fill oracle is for plane curves")
    xs = np.linspace(-radius, radius, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    vals = fmap.packed.values_batch(P)[:, 0].reshape(n, n) - t
    disk = X**2 + Y**2 <= radius**2
    # pixels of the disk that touch its complement form the rim
    rim = disk & ~ndimage.binary_erosion(disk, structure=_FOUR, border_value=0)
    regions = 0
    interior = 0
    # 8-connectivity on one sign and 4 on the other keeps digital Jordan separation
    for mask, st in ((disk & (vals > 0), _EIGHT), (disk & (vals <= 0), _FOUR)):
        lab, k = ndimage.label(mask, structure=st)
        if k == 0:
            continue
        touches = np.zeros(k + 1, dtype=bool)
        touches[np.unique(lab[rim])] = True
        regions += k
        interior += int(np.count_nonzero(~touches[1:]))
    b0 = regions - 1
    return {"s": interior, "l": b0 - interior, "b0": b0}


def grid_marching_crossings(fmap: PolynomialMap, t: float, polyline: np.ndarray) -> int:
    """Sign changes of f - t along a polyline (brute-force intersection count)."""
    v = fmap.packed.values_batch(np.asarray(polyline, dtype=np.float64))[:, 0] - t
    s = np.sign(v)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
