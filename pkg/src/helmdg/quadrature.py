"""Quadrature rules on the reference triangle and the reference edge.

The reference triangle is T = {(x, y) : x >= 0, y >= 0, x + y <= 1}, the
reference edge is the unit interval [0, 1].  Triangle rules are built as
collapsed (Duffy) tensor products of a Gauss-Legendre rule in the first
direction and a Gauss-Jacobi (1, 0) rule in the second, which keeps all
weights positive at arbitrary order.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class TriangleRule:
    """Points and positive weights integrating exactly up to `degree`."""

    degree: int
    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,), sums to 1/2

    @property
    def n(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class EdgeRule:
    """Gauss-Legendre rule on [0, 1], exact up to `degree`."""

    degree: int
    points: np.ndarray  # (n,)
    weights: np.ndarray  # (n,), sums to 1

    @property
    def n(self) -> int:
        return self.weights.size


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> EdgeRule:
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    n = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    return EdgeRule(degree, 0.5 * (x + 1.0), 0.5 * w)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Collapsed product rule; exactness verified against monomial integrals."""
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    n = degree // 2 + 1
    # xi-direction: plain Gauss-Legendre on [0, 1]
    x1, w1 = np.polynomial.legendre.leggauss(n)
    x1 = 0.5 * (x1 + 1.0)
    w1 = 0.5 * w1
    # eta-direction: Gauss-Jacobi with weight (1 - eta) mapped from (1-t)/2 on [-1, 1]
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    eta = 0.5 * (xj + 1.0)
    weta = 0.25 * wj  # includes the (1 - eta) factor of the Duffy Jacobian
    X, E = np.meshgrid(x1, eta, indexing="ij")
    W = np.outer(w1, weta)
    pts = np.column_stack([(X * (1.0 - E)).ravel(), E.ravel()])
    return TriangleRule(degree, pts, W.ravel())


def monomial_integral_triangle(a: int, b: int) -> float:
    """Exact value of the integral of x^a y^b over the reference triangle."""
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)
