"""Front-quality indicators: the generational-distance family and exact
hypervolume in two or three dimensions.

All indicators treat point sets in minimisation sense. The "+" variants
replace the Euclidean distance by the dominance-aware distance
d+(a, z) = ||max(a - z, 0)||, where ``a`` is always the point drawn from the
approximation set: only the components where the approximation is worse than
the reference point count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_sets(p, p_star):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    p_star = np.atleast_2d(np.asarray(p_star, dtype=float))
    if p.size == 0 or p_star.size == 0:
        raise ValueError("point sets must be non-empty")
    if p.shape[1] != p_star.shape[1]:
        raise ValueError("point sets must share a dimension")
    return p, p_star


def _min_distances(from_set, to_set, plus, approx_is_from):
    """Min distance from each row of ``from_set`` into ``to_set``.

    For the "+" variants the approximation-side point supplies the positive
    part: d+(approx, truth) = ||max(approx - truth, 0)||.
    """
    diff = from_set[:, None, :] - to_set[None, :, :]
    if plus:
        diff = np.maximum(diff, 0.0) if approx_is_from \
            else np.maximum(-diff, 0.0)
    return np.linalg.norm(diff, axis=2).min(axis=1)


def gd_family(p, p_star, exponent=2, plus=False, inverted=False):
    """GD / GD+ / IGD / IGD+ as a power mean of set-to-set distances.

    value = ((1/|S|) * sum d^p)^(1/p) where S iterates the approximation set
    ``p`` (or the truth set ``p_star`` when ``inverted``), and d is the
    minimum (plain or dominance-aware) distance into the other set.
    """
    p, p_star = _check_sets(p, p_star)
    if inverted:
        dists = _min_distances(p_star, p, plus, approx_is_from=False)
    else:
        dists = _min_distances(p, p_star, plus, approx_is_from=True)
    return float(np.mean(dists ** exponent) ** (1.0 / exponent))


def _nondominated(points):
    keep = []
    for i in range(len(points)):
        dominated = False
        for j in range(len(points)):
            if i != j and np.all(points[j] <= points[i]) \
                    and np.any(points[j] < points[i]):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return points[keep]


def _hypervolume_2d(points, reference):
    """Sweep over the non-dominated set sorted by the first objective."""
    pts = _nondominated(points)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    volume = 0.0
    prev_y = reference[1]
    for x, y in pts:
        volume += (reference[0] - x) * (prev_y - y)
        prev_y = y
    return volume


def hypervolume(points, reference):
    """Exact dominated hypervolume against ``reference`` (2-D or 3-D).

    Every point must weakly dominate the reference (componentwise <=,
    minimisation sense). 3-D volumes are computed by slicing along the third
    objective and summing 2-D sweeps.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    reference = np.asarray(reference, dtype=float)
    if points.size == 0:
        raise ValueError("point set must be non-empty")
    dim = points.shape[1]
    if dim not in (2, 3):
        raise ValueError("hypervolume supports 2-D and 3-D fronts")
    if reference.shape != (dim,):
        raise ValueError("reference dimension mismatch")
    if np.any(points > reference):
        raise ValueError("every point must dominate the reference point")
    if dim == 2:
        return float(_hypervolume_2d(points, reference))

    pts = _nondominated(points)
    levels = np.unique(pts[:, 2])
    volume = 0.0
    for k, z in enumerate(levels):
        depth = (levels[k + 1] if k + 1 < len(levels) else reference[2]) - z
        if depth <= 0:
            continue
        active = pts[pts[:, 2] <= z][:, :2]
        volume += _hypervolume_2d(active, reference[:2]) * depth
    return float(volume)


@dataclass
class IndicatorReport:
    """The five front-quality indicators plus how they were computed."""

    gd: float
    gd_plus: float
    igd: float
    igd_plus: float
    hypervolume: float
    reference: tuple
    exponent: int = 2

    def to_dict(self):
        return {
            "gd": self.gd, "gd_plus": self.gd_plus,
            "igd": self.igd, "igd_plus": self.igd_plus,
            "hypervolume": self.hypervolume,
            "reference": list(self.reference),
            "exponent": self.exponent,
        }


def indicator_report(approx, truth, reference, exponent=2):
    """All indicators of an approximation front against a reference front."""
    approx = np.atleast_2d(np.asarray(approx, dtype=float))
    ref = tuple(float(r) for r in reference)
    hv_points = approx[np.all(approx <= np.asarray(ref), axis=1)]
    hv = hypervolume(hv_points, np.asarray(ref)) if len(hv_points) else 0.0
    return IndicatorReport(
        gd=gd_family(approx, truth, exponent=exponent),
        gd_plus=gd_family(approx, truth, exponent=exponent, plus=True),
        igd=gd_family(approx, truth, exponent=exponent, inverted=True),
        igd_plus=gd_family(approx, truth, exponent=exponent, plus=True,
                           inverted=True),
        hypervolume=hv,
        reference=ref,
        exponent=exponent,
    )
