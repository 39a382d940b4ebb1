"""Exact constructors for product submanifolds, pseudo-flats, and the
diagonal Cartan subgroup, together with their closed-form geometry.

A product submanifold embeds H^{n_1} x ... x H^{n_k} into H^{p,q} as
(x_1,...,x_k) -> sum_i alpha_i x_i with sum alpha_i^2 = 1 and k <= q+1.
Pseudo-flats are the all-1-factor case; they coincide with orbits of the
Cartan subgroup a(u) = diag(e^{u_1},...,e^{u_p},1,...,1,e^{-u_p},...,e^{-u_1})
through the points x_{mu,theta}, expressed in the cartan basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charts import (
    ChartBlock,
    ImmersionChart,
    SeparableMap,
    assembled_chart,
    hyperbolic_factor,
)
from .immersion import covariant_derivative_II, fundamental_data
from .linalg import (
    CARTAN,
    STANDARD,
    AmbientVector,
    QuadraticSpace,
    cartan_to_standard_matrix,
)
from .rng import Lcg


@dataclass(frozen=True)
class ProductSpec:
    """Factor dimensions n_i and weights alpha_i of a product submanifold."""

    n: tuple[int, ...]
    alpha: tuple[float, ...]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        alpha = tuple(float(a) for a in self.alpha)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "alpha", alpha)
        if len(n) != len(alpha) or not n:
            raise ValueError("need matching nonempty factor and weight lists")
        if any(v < 1 for v in n):
            raise ValueError("factor dimensions must be positive")
        if any(a <= 0 for a in alpha):
            raise ValueError("weights must be positive")
        if abs(sum(a * a for a in alpha) - 1.0) > 1e-12:
            raise ValueError("weights must satisfy sum alpha_i^2 = 1")

    @property
    def k(self) -> int:
        return len(self.n)

    @property
    def p(self) -> int:
        return sum(self.n)


def maximal_weights(n) -> tuple[float, ...]:
    """alpha_i = sqrt(n_i / p); the unique weights with vanishing mean curvature."""
    n = tuple(int(v) for v in n)
    p = sum(n)
    return tuple(math.sqrt(v / p) for v in n)


def maximal_product_spec(n) -> ProductSpec:
    return ProductSpec(tuple(int(v) for v in n), maximal_weights(n))


def _factor_domain(ni: int) -> list[list[float]]:
    if ni == 1:
        return [[-0.9, 0.9]]
    dom = [[0.25, 1.05]]                     # geodesic radius
    dom += [[0.45, np.pi - 0.45]] * (ni - 2)  # polar angles
    dom += [[0.3, 1.9]]                      # last angle
    return dom


def _product_blocks(spec: ProductSpec, q: int):
    p = spec.p
    blocks = []
    domain = []
    srow = 0
    pstart = 0
    for i, (ni, a) in enumerate(zip(spec.n, spec.alpha)):
        rows = tuple(range(srow, srow + ni)) + (p + i,)
        blocks.append(ChartBlock(a, hyperbolic_factor(ni), pstart, rows))
        domain += _factor_domain(ni)
        srow += ni
        pstart += ni
    return blocks, domain


def product_chart(spec: ProductSpec, q: int, validate: bool = True) -> ImmersionChart:
    """Chart of the product submanifold in H^{p,q} (standard basis).

    Each factor H^{n_i} carries geodesic polar coordinates about a base
    point; parameters are concatenated factor blocks, and the image is
    sum_i alpha_i x_i(u_i) placed in orthogonal ambient blocks.
    """
    if spec.k > q + 1:
        raise ValueError(f"need k <= q+1 factors, got k={spec.k}, q={q}")
    space = QuadraticSpace(spec.p, q)
    blocks, domain = _product_blocks(spec, q)
    label = "x".join(f"H^{ni}" for ni in spec.n)
    return assembled_chart(space, domain, blocks,
                           label=f"product {label}", validate=validate)


def product_factor_points(spec: ProductSpec, q: int, u) -> list[np.ndarray]:
    """Unscaled factor points x_i(u) as ambient vectors, Q(x_i, x_i) = -1."""
    space = QuadraticSpace(spec.p, q)
    u = np.asarray(u, dtype=float)
    blocks, _ = _product_blocks(spec, q)
    points = []
    for b in blocks:
        jet = b.factor.jet(u[b.param_start:b.param_start + b.factor.nvars], order=1)
        x = np.zeros(space.dim)
        x[list(b.ambient_rows)] = jet.pos
        points.append(x)
    return points


def product_mean_curvature(spec: ProductSpec, points: list[np.ndarray]) -> np.ndarray:
    """H = sum_i (n_i/alpha_i - p alpha_i) x_i at the given factor points."""
    p = spec.p
    h = np.zeros_like(points[0])
    for ni, a, x in zip(spec.n, spec.alpha, points):
        h += (ni / a - p * a) * x
    return h


def product_II_closed_form(spec: ProductSpec, points: list[np.ndarray], i: int) -> np.ndarray:
    """II(X_i, X_i) for any unit tangent X_i to factor i (totally umbilical).

    Equals (1/alpha_i)(sum_{j != i} alpha_j^2) x_i - sum_{j != i} alpha_j x_j;
    mixed-factor values II(X_i, X_j) vanish for i != j.
    """
    a = spec.alpha
    s = sum(aj * aj for j, aj in enumerate(a) if j != i)
    out = (s / a[i]) * points[i]
    for j, (aj, xj) in enumerate(zip(a, points)):
        if j != i:
            out = out - aj * xj
    return out


@dataclass(frozen=True)
class PseudoFlatSpec:
    """Pseudo-flat orbit data: dimensions, timelike direction mu, angle theta."""

    p: int
    q: int
    mu: tuple[float, ...] = ()
    theta: float = 0.0

    def __post_init__(self):
        if self.p > self.q + 1:
            raise ValueError("pseudo-flats need p <= q+1")
        mu = tuple(float(m) for m in self.mu)
        object.__setattr__(self, "mu", mu)
        extra = self.q + 1 - self.p
        if extra == 0:
            if mu:
                raise ValueError("mu must be empty when q+1 == p")
            if self.theta != 0.0:
                raise ValueError("theta must vanish when q+1 == p (no timelike "
                                 "direction to rotate into)")
        else:
            if len(mu) != extra:
                raise ValueError(f"mu must have length q+1-p = {extra}")
            if abs(sum(m * m for m in mu) - 1.0) > 1e-12:
                raise ValueError("mu must be a unit vector")
        if not (0.0 <= self.theta < np.pi / 2):
            raise ValueError("theta is restricted to [0, pi/2); the chart "
                             "degenerates as cos(theta) -> 0")


def pseudoflat_base_point(spec: PseudoFlatSpec, basis_mode: str = STANDARD) -> AmbientVector:
    """x_{mu,theta} = cos(theta) sum_i (v_i + v_{-i}) + sin(theta) sum_j mu_j w_j."""
    p, q = spec.p, spec.q
    space_c = QuadraticSpace(p, q, CARTAN)
    coords = np.zeros(space_c.dim)
    coords[:p] = np.cos(spec.theta)
    coords[q + 1:] = np.cos(spec.theta)
    for j, m in enumerate(spec.mu):
        coords[p + j] = np.sin(spec.theta) * m
    if basis_mode == CARTAN:
        return AmbientVector(coords, space_c)
    t = cartan_to_standard_matrix(p, q)
    return AmbientVector(t @ coords, QuadraticSpace(p, q, STANDARD))


def pseudoflat_chart(spec: PseudoFlatSpec, halfwidth: float = 1.4,
                     validate: bool = True) -> ImmersionChart:
    """Orbit chart u -> a(u) x_{mu,theta}, converted to the standard basis.

    At theta = 0 the image is the maximal pseudo-flat bounded by the null
    polyhedron; the induced metric is the flat (cos^2 theta / p) delta_ij
    for every theta.
    """
    p, q = spec.p, spec.q
    space_c = QuadraticSpace(p, q, CARTAN)
    dim = space_c.dim
    ct, st = np.cos(spec.theta), np.sin(spec.theta)
    comps: list[list[tuple[float, tuple[str, ...]]]] = []
    one = ["one"] * p
    for row in range(dim):
        if row < p:
            codes = one.copy(); codes[row] = "exp"
            comps.append([(ct, tuple(codes))])
        elif row < q + 1:
            j = row - p
            m = spec.mu[j] if spec.mu else 0.0
            comps.append([(st * m, tuple(one))])
        else:
            i = dim - 1 - row            # v_{-(i+1)} sits at mirrored column
            codes = one.copy(); codes[i] = "nexp"
            comps.append([(ct, tuple(codes))])
    factor = SeparableMap(p, dim, comps)
    block = ChartBlock(1.0, factor, 0, tuple(range(dim)))
    t = cartan_to_standard_matrix(p, q)
    space = QuadraticSpace(p, q, STANDARD)
    domain = [[-halfwidth, halfwidth]] * p
    label = f"pseudoflat theta={spec.theta:g}"
    return assembled_chart(space, domain, [block], transform=t,
                           label=label, validate=validate)


def pseudoflat_mean_curvature(spec: PseudoFlatSpec,
                              basis_mode: str = STANDARD) -> AmbientVector:
    """Closed-form mean curvature at the base point x_{mu,theta}.

    H = (p sin^2(theta)/cos(theta)) sum_i (v_i + v_{-i})
        - p sin(theta) sum_j mu_j w_j,
    which is Q-orthogonal to the orbit and to the position; its norm is
    p |tan(theta)|.
    """
    p, q = spec.p, spec.q
    space_c = QuadraticSpace(p, q, CARTAN)
    coords = np.zeros(space_c.dim)
    coeff = p * np.sin(spec.theta) ** 2 / np.cos(spec.theta)
    coords[:p] = coeff
    coords[q + 1:] = coeff
    for j, m in enumerate(spec.mu):
        coords[p + j] = -p * np.sin(spec.theta) * m
    if basis_mode == CARTAN:
        return AmbientVector(coords, space_c)
    t = cartan_to_standard_matrix(p, q)
    return AmbientVector(t @ coords, QuadraticSpace(p, q, STANDARD))


@dataclass(frozen=True)
class CartanElement:
    """a(u) = diag(e^{u_1},...,e^{u_p}, 1,...,1, e^{-u_p},...,e^{-u_1})."""

    u: tuple[float, ...]

    def matrix(self, p: int, q: int, basis_mode: str = CARTAN) -> np.ndarray:
        if len(self.u) != p:
            raise ValueError("Cartan parameter length must equal p")
        diag = np.ones(p + q + 1)
        diag[:p] = np.exp(self.u)
        diag[q + 1:] = np.exp(-np.asarray(self.u)[::-1])
        m = np.diag(diag)
        if basis_mode == CARTAN:
            return m
        t = cartan_to_standard_matrix(p, q)
        return t @ m @ np.linalg.inv(t)


def parallel_flat_certificate(spec: ProductSpec, q: int, npoints: int = 5,
                              seed: int = 0) -> dict[str, float]:
    """Numerical certificate that a product chart has parallel II and flat
    normal bundle: max ||nabla II|| and max ||[H^a, H^b]|| over a sample.
    """
    chart = product_chart(spec, q)
    rng = Lcg(seed)
    lo, hi = chart.domain[:, 0], chart.domain[:, 1]
    max_grad = 0.0
    max_comm = 0.0
    for _ in range(npoints):
        frac = np.array(rng.uniforms(chart.p, 0.15, 0.85))
        u = lo + frac * (hi - lo)
        fd = fundamental_data(chart, u)
        dii = covariant_derivative_II(chart, u, fd)
        max_grad = max(max_grad, math.sqrt(dii.norm_sq()))
        h = fd.h
        for a in range(fd.q):
            for b in range(a + 1, fd.q):
                comm = h[a] @ h[b] - h[b] @ h[a]
                max_comm = max(max_comm, float(np.linalg.norm(comm)))
    return {"max_grad_II": max_grad, "max_commutator": max_comm}


def chart_from_spec(doc: dict) -> ImmersionChart:
    """Charts from JSON specs of kind "product" or "pseudoflat"."""
    kind = doc.get("kind")
    if kind == "product":
        n = tuple(int(v) for v in doc["n"])
        alpha = doc.get("alpha", "maximal")
        if alpha == "maximal":
            alpha = maximal_weights(n)
        else:
            alpha = tuple(float(a) for a in alpha)
        return product_chart(ProductSpec(n, alpha), int(doc["q"]))
    if kind == "pseudoflat":
        spec = PseudoFlatSpec(int(doc["p"]), int(doc["q"]),
                              tuple(float(m) for m in doc.get("mu", ())),
                              float(doc.get("theta", 0.0)))
        return pseudoflat_chart(spec)
    raise ValueError(f"unknown chart kind {kind!r}")
