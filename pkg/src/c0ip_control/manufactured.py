"""Benchmark cases with known solutions on the unit square.

Exact fields are finite cosine series ``sum c cos(kx pi x) cos(ky pi y)``;
sin^2 and sin^4 factors are expanded with the power-reduction identities
so every derivative has the closed form

    d^a/dx^a d^b/dy^b cos(kx pi x) cos(ky pi y)
        = (kx pi)^a (ky pi)^b cos(kx pi x + a pi/2) cos(ky pi y + b pi/2).
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fe_space import P2Space
from .quadrature import tri_rule

__all__ = ["CosineField", "ManufacturedCase", "example1", "constant_case", "get_case",
           "hessian_identity_check", "CASES"]

# 1D expansions as {k: coefficient} for cos(k pi t)
_ONE = {0: 1.0}
_COS1 = {1: 1.0}
_SIN2 = {0: 0.5, 2: -0.5}
_SIN4 = {0: 3 / 8, 2: -0.5, 4: 1 / 8}


class CosineField:
    """Smooth field on the plane, ``terms`` are ``(coef, kx, ky)`` triples."""

    def __init__(self, terms):
        terms = [(float(c), kx, ky) for c, kx, ky in terms if c != 0.0]
        if any(int(k) != k or k < 0 for _, kx, ky in terms for k in (kx, ky)):
            raise ValueError("wavenumbers must be nonnegative integers")
        self.terms = tuple((c, int(kx), int(ky)) for c, kx, ky in terms)

    @classmethod
    def product(cls, fx: dict, fy: dict, scale: float = 1.0) -> "CosineField":
        return cls([(scale * cx * cy, kx, ky) for kx, cx in fx.items() for ky, cy in fy.items()])

    def __add__(self, other: "CosineField") -> "CosineField":
        return CosineField(self.terms + other.terms)

    def __neg__(self) -> "CosineField":
        return CosineField([(-c, kx, ky) for c, kx, ky in self.terms])

    def __sub__(self, other: "CosineField") -> "CosineField":
        return self + (-other)

    def derivative(self, x, y, a: int, b: int):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for c, kx, ky in self.terms:
            wx, wy = kx * np.pi, ky * np.pi
            coef = c * wx**a * wy**b
            if coef != 0.0:
                out += coef * np.cos(wx * x + a * np.pi / 2) * np.cos(wy * y + b * np.pi / 2)
        return out

    def __call__(self, x, y):
        return self.derivative(x, y, 0, 0)

    value = __call__

    def grad(self, x, y):
        return self.derivative(x, y, 1, 0), self.derivative(x, y, 0, 1)

    def hessian(self, x, y):
        """``(d_xx, d_xy, d_yy)``."""
        return self.derivative(x, y, 2, 0), self.derivative(x, y, 1, 1), self.derivative(x, y, 0, 2)

    def laplacian(self, x, y):
        return self.derivative(x, y, 2, 0) + self.derivative(x, y, 0, 2)

    def bilaplacian(self, x, y):
        return (self.derivative(x, y, 4, 0) + 2.0 * self.derivative(x, y, 2, 2)
                + self.derivative(x, y, 0, 4))

    def bilaplacian_field(self) -> "CosineField":
        return CosineField([(c * (np.pi**2 * (kx * kx + ky * ky)) ** 2, kx, ky) for c, kx, ky in self.terms])


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact optimal state ``u``, adjoint ``phi``, control ``q`` plus data.

    ``f = bilaplacian(u)``, ``u_d = u - bilaplacian(phi)`` and the shift
    control ``p_d`` enter the discrete system; ``alpha`` weights the control
    cost.
    """

    name: str
    alpha: float
    exact_u: CosineField
    exact_phi: CosineField
    exact_q: CosineField
    f: Callable
    u_d: Callable
    p_d: Callable

    def with_alpha(self, alpha: float) -> "ManufacturedCase":
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return ManufacturedCase(self.name, float(alpha), self.exact_u, self.exact_phi,
                                self.exact_q, self.f, self.u_d, self.p_d)

    @property
    def exact(self) -> dict:
        return {"u": self.exact_u, "phi": self.exact_phi, "q": self.exact_q}


def example1() -> ManufacturedCase:
    """u = sin^2(pi x) sin^2(pi y) + cos(pi x) cos(pi y), phi = sin^4 sin^4, q = p_d = cos cos."""
    q = CosineField.product(_COS1, _COS1)
    u = CosineField.product(_SIN2, _SIN2) + q
    phi = CosineField.product(_SIN4, _SIN4)
    f = u.bilaplacian_field()
    u_d = u - phi.bilaplacian_field()
    # with p_d = q the alpha terms cancel, so any alpha > 0 keeps this solution
    return ManufacturedCase("example1", 1.0, u, phi, q, f, u_d, q)


def constant_case(c: float = 1.0) -> ManufacturedCase:
    const = CosineField([(c, 0, 0)])
    zero = CosineField([])
    return ManufacturedCase("constant", 1.0, const, zero, const, zero, const, const)


CASES = {"example1": example1, "constant": constant_case}


def get_case(name: str) -> ManufacturedCase:
    try:
        return CASES[name]()
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None


def hessian_identity_check(p: CosineField, r: CosineField, space: P2Space, degree: int = 10):
    """Return ``(int Lap p Lap r, int D^2 p : D^2 r)`` over the mesh domain."""
    rule = tri_rule(degree)
    pts = space.physical_points(rule.points)
    x, y = pts[..., 0], pts[..., 1]
    wa = space.area[:, None] * rule.weights[None, :]
    lap = np.sum(wa * p.laplacian(x, y) * r.laplacian(x, y))
    pxx, pxy, pyy = p.hessian(x, y)
    rxx, rxy, ryy = r.hessian(x, y)
    hess = np.sum(wa * (pxx * rxx + 2.0 * pxy * rxy + pyy * ryy))
    return float(lap), float(hess)
