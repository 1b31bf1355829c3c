"""Quadrature rules on triangles and edges.

Triangle rules are the symmetric Dunavant rules, stored in orbit form and
expanded to barycentric points on import. Weights are normalised to sum to
one, so ``area * sum(w * g(x_q))`` integrates ``g`` over a triangle.
"""
from dataclasses import dataclass

import numpy as np

__all__ = ["TriQuadRule", "EdgeQuadRule", "tri_rule", "edge_rule"]


@dataclass(frozen=True)
class TriQuadRule:
    """Barycentric points ``(npts, 3)`` and weights summing to one."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@dataclass(frozen=True)
class EdgeQuadRule:
    """Gauss-Legendre points in ``[0, 1]`` and weights summing to one."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


# (weight,) centroid; (weight, a) for (a, a, 1-2a); (weight, a, b) for all
# permutations of (a, b, 1-a-b).
_ORBITS = {
    2: ([], [(1 / 3, 1 / 6)], []),
    4: (
        [],
        [
            (0.2233815896780114657, 0.44594849091596488632),
            (0.10995174365532186764, 0.09157621350977074346),
        ],
        [],
    ),
    6: (
        [],
        [
            (0.11678627572637936603, 0.24928674517091042129),
            (0.050844906370206816921, 0.06308901449150222834),
        ],
        [(0.082851075618373575194, 0.053145049844816947353, 0.31035245103378440542)],
    ),
    10: (
        [0.090817990382753580095],
        [
            (0.036725957756466704717, 0.48557763338365737737),
            (0.045321059435527934783, 0.1094815754850370548),
        ],
        [
            (0.072757916845420108604, 0.14170721941487995476, 0.30793983876412095017),
            (0.028327242531057484837, 0.025003534762686386074, 0.24667256063990269392),
            (0.0094216669637328234599, 0.0095408154002994575802, 0.066803251012200265774),
        ],
    ),
}


def _expand(centroid, s21, s111):
    points, weights = [], []
    for w in centroid:
        points.append((1 / 3, 1 / 3, 1 / 3))
        weights.append(w)
    for w, a in s21:
        b = 1.0 - 2.0 * a
        for p in ((a, a, b), (a, b, a), (b, a, a)):
            points.append(p)
            weights.append(w)
    for w, a, b in s111:
        c = 1.0 - a - b
        for p in ((a, b, c), (b, a, c), (a, c, b), (c, a, b), (b, c, a), (c, b, a)):
            points.append(p)
            weights.append(w)
    return np.array(points), np.array(weights)


_TRI_RULES = {}
for _deg, _orb in _ORBITS.items():
    _p, _w = _expand(*_orb)
    _p.setflags(write=False)
    _w.setflags(write=False)
    _TRI_RULES[_deg] = TriQuadRule(_p, _w, _deg)


def tri_rule(degree: int) -> TriQuadRule:
    """Symmetric triangle rule exact for total degree ``<= degree``.

    Supported degrees are 2, 4, 6 and 10.
    """
    try:
        return _TRI_RULES[degree]
    except KeyError:
        raise ValueError(
            f"unsupported triangle rule degree {degree}; choose from {sorted(_TRI_RULES)}"
        ) from None


def edge_rule(npoints: int) -> EdgeQuadRule:
    """Gauss-Legendre rule on [0, 1], exact up to degree ``2*npoints - 1``."""
    if not 1 <= npoints <= 6:
        raise ValueError(f"unsupported edge rule size {npoints}; need 1..6")
    x, w = np.polynomial.legendre.leggauss(npoints)
    return EdgeQuadRule(0.5 * (x + 1.0), 0.5 * w, 2 * npoints - 1)
