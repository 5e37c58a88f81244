"""Benchmark problem definitions and initial hp-discretization rules."""

import math
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, build_structured_mesh
from .solver import DGParams, ProblemData
from .special import bessel_j, hankel1


@dataclass
class ExactSolution:
    u: object  # u(pts (n,2)) -> complex (n,)
    grad: object  # grad(pts (n,2)) -> complex (n,2)


@dataclass
class BenchmarkCase:
    name: str
    domain: object  # rectangle tuple or "lshape"
    k: float
    data: ProblemData
    exact: ExactSolution = None
    eps_fn: object = None
    c_res: float = 2.0
    force_even_y: bool = False
    flux_degree_boost: object = None  # (mesh, node) -> extra RT degree

    def params(self, alpha=10.0, beta=1.0, gamma=0.25) -> DGParams:
        return DGParams(k=self.k, alpha=alpha, beta=beta, gamma=gamma, eps_fn=self.eps_fn)


def _impedance_g(exact: ExactSolution, k: float, eps_fn=None):
    def g(pts, n):
        kt = k if eps_fn is None else k * np.sqrt(np.asarray(eps_fn(pts), dtype=float))
        return np.asarray(exact.grad(pts)) @ n - 1j * kt * np.asarray(exact.u(pts))

    return g


def square_hankel(k: float = 20.0) -> BenchmarkCase:
    """Smooth cylindrical wave on the unit square; source point outside."""
    center = np.array([-0.25, 0.0])

    def u(pts):
        r = np.linalg.norm(pts - center, axis=1)
        return hankel1(0, k * r)

    def grad(pts):
        d = pts - center
        r = np.linalg.norm(d, axis=1)
        return (-k * hankel1(1, k * r) / r)[:, None] * d

    exact = ExactSolution(u, grad)
    data = ProblemData(f=None, g=_impedance_g(exact, k))
    return BenchmarkCase("square_hankel", (0.0, 0.0, 1.0, 1.0), k, data, exact, c_res=2.0)


def lshape_bessel(k: float = 20.0, corner_quad_bump: int = 16, corner_flux_boost: int = 3) -> BenchmarkCase:
    """Singular Bessel mode on the L-shaped domain; gradient blows up at 0."""
    nu = 2.0 / 3.0

    def angle(pts):
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        return np.where(phi < 0, phi + 2.0 * np.pi, phi)

    def u(pts):
        r = np.linalg.norm(pts, axis=1)
        return bessel_j(nu, k * r) * np.sin(nu * angle(pts)) + 0j

    def grad(pts):
        r = np.linalg.norm(pts, axis=1)
        phi = angle(pts)
        jv = bessel_j(nu, k * r)
        djv = bessel_j(nu - 1.0, k * r) - (nu / (k * r)) * jv
        dr = k * djv * np.sin(nu * phi)
        dphi_over_r = nu * jv * np.cos(nu * phi) / r
        cos, sin = np.cos(phi), np.sin(phi)
        gx = dr * cos - dphi_over_r * sin
        gy = dr * sin + dphi_over_r * cos
        return np.stack([gx, gy], axis=1) + 0j

    exact = ExactSolution(u, grad)

    def edge_bump(mesh: Mesh, e: int) -> int:
        uv = mesh.edges[e]
        near = np.linalg.norm(mesh.nodes[uv], axis=1) < 1e-12
        return corner_quad_bump if np.any(near) else 0

    def flux_boost(mesh: Mesh, z: int) -> int:
        return corner_flux_boost if np.linalg.norm(mesh.nodes[z]) < 1e-12 else 0

    data = ProblemData(f=None, g=_impedance_g(exact, k), edge_order_bump=edge_bump)
    return BenchmarkCase(
        "lshape_bessel", "lshape", k, data, exact, c_res=2.0, flux_degree_boost=flux_boost
    )


def reflection_solution(theta_deg: float, n1: float, n2: float, k: float) -> ExactSolution:
    """Plane wave hitting the interface y = 0 from below at angle theta.

    Below the critical angle the transmitted wavenumber K3 turns imaginary
    (total internal reflection with |R| = 1); above it the wave refracts.
    """
    theta = math.radians(theta_deg)
    K1 = k * n1 * math.cos(theta)
    K2 = k * n1 * math.sin(theta)
    K3 = k * np.sqrt(complex(n2 * n2 - n1 * n1 * math.cos(theta) ** 2))
    R = -(K3 - K2) / (K3 + K2)

    def u(pts):
        x, y = pts[:, 0], pts[:, 1]
        upper = (1.0 + R) * np.exp(1j * (K1 * x + K3 * y))
        lower = np.exp(1j * (K1 * x + K2 * y)) + R * np.exp(1j * (K1 * x - K2 * y))
        return np.where(y >= 0, upper, lower)

    def grad(pts):
        x, y = pts[:, 0], pts[:, 1]
        eu = (1.0 + R) * np.exp(1j * (K1 * x + K3 * y))
        el = np.exp(1j * (K1 * x + K2 * y))
        er = R * np.exp(1j * (K1 * x - K2 * y))
        gx = np.where(y >= 0, 1j * K1 * eu, 1j * K1 * (el + er))
        gy = np.where(y >= 0, 1j * K3 * eu, 1j * K2 * (el - er))
        return np.stack([gx, gy], axis=1)

    return ExactSolution(u, grad)


def reflect_refract(k: float = 20.0, theta_deg: float = 29.0, n1: float = 2.0, n2: float = 1.0) -> BenchmarkCase:
    """Internal reflection (theta < 60 deg) or refraction benchmark."""
    exact = reflection_solution(theta_deg, n1, n2, k)

    def eps_fn(pts):
        return np.where(pts[:, 1] < 0, n1 * n1, n2 * n2)

    data = ProblemData(f=None, g=_impedance_g(exact, k, eps_fn))
    return BenchmarkCase(
        f"reflect_refract",
        (-1.0, -1.0, 1.0, 1.0),
        k,
        data,
        exact,
        eps_fn=eps_fn,
        c_res=0.5,
        force_even_y=True,
    )


def gaussian_beam_data(k: float, angle_deg: float = 40.0, w0: float = None, origin=(2.0, 2.0)):
    """Impedance datum g = grad(v).n - i k v of the fundamental paraxial mode.

    The beam axis passes through `origin` in the direction `angle_deg`; z is
    the signed axial coordinate, r the transverse distance, and the Gouy
    phase enters through phi0(z) = atan(z / z_R).
    """
    if w0 is None:
        w0 = 8.0 * math.pi / k
    lam = 2.0 * math.pi / k
    zR = math.pi * w0 * w0 / lam
    a = math.radians(angle_deg)
    d = np.array([math.cos(a), math.sin(a)])
    m = np.array([-math.sin(a), math.cos(a)])
    origin = np.asarray(origin, dtype=float)

    def beam(pts):
        rel = pts - origin
        z = rel @ d
        r = rel @ m
        tau = z / zR
        w = w0 * np.sqrt(1.0 + tau * tau)
        inv_R = z / (z * z + zR * zR)
        phi0 = np.arctan(tau)
        v = (w0 / w) * np.exp(-(r * r) / (w * w)) * np.exp(
            -1j * (k * z + math.pi * r * r * inv_R / lam - phi0)
        )
        wp = w0 * tau / (zR * np.sqrt(1.0 + tau * tau))
        dinv_R = (zR * zR - z * z) / (z * z + zR * zR) ** 2
        dphi0 = (1.0 / zR) / (1.0 + tau * tau)
        dv_dz = v * (
            -wp / w
            + 2.0 * r * r * wp / w**3
            - 1j * (k + math.pi * r * r * dinv_R / lam - dphi0)
        )
        dv_dr = v * (-2.0 * r / (w * w) - 2j * math.pi * r * inv_R / lam)
        gv = dv_dz[:, None] * d[None, :] + dv_dr[:, None] * m[None, :]
        return v, gv

    def g(pts, n):
        v, gv = beam(pts)
        return gv @ n - 1j * k * v

    g.beam = beam
    g.w0 = w0
    g.rayleigh = zR
    return g


def gauss_beam(k: float = 20.0, angle_deg: float = 40.0) -> BenchmarkCase:
    g = gaussian_beam_data(k, angle_deg)
    data = ProblemData(f=None, g=g)
    return BenchmarkCase("gauss_beam", (0.0, 0.0, 4.0, 4.0), k, data, exact=None, c_res=2.0)


BENCHMARKS = {
    "square_hankel": square_hankel,
    "lshape_bessel": lshape_bessel,
    "reflect_refract": reflect_refract,
    "gauss_beam": gauss_beam,
}


def make_benchmark(name: str, k: float, **kwargs) -> BenchmarkCase:
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    return BENCHMARKS[name](k=k, **kwargs)


def initial_degree(k: float) -> int:
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    return max(1, math.ceil(math.log(k)))


def initial_discretization(
    case: BenchmarkCase,
    c_res: float = None,
    under_resolved: bool = False,
    degree: int = None,
):
    """Initial mesh and uniform degree: p = ceil(ln k), k h / p <= C_res."""
    if c_res is None:
        c_res = case.c_res
    if c_res <= 0:
        raise ValueError("C_res must be positive")
    if under_resolved:
        p = 1
        cell = 0.25
    else:
        p = initial_degree(case.k) if degree is None else int(degree)
        if p < 1:
            raise ValueError("polynomial degree must be >= 1")
        h_max = c_res * p / case.k  # bound on the element diameter
        cell = h_max / math.sqrt(2.0)
    mesh = build_structured_mesh(case.domain, cell, force_even_y=case.force_even_y)
    degrees = np.full(mesh.n_tris, p, dtype=int)
    return mesh, degrees
