"""The quadric {Q(x) = -1}, its geodesics, ideal boundary rays, and the
null polyhedron spanned by the cartan basis vertices."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    CARTAN,
    AmbientVector,
    QuadraticSpace,
    causal_type,
    q_inner,
)
from .rng import Lcg

QUADRIC_TOL = 1e-9


@dataclass(frozen=True)
class QuadricPoint:
    """A point of the quadric; Q(vec, vec) must equal -1 to 1e-9."""

    vec: AmbientVector

    def __post_init__(self):
        qv = q_inner(self.vec, self.vec)
        if abs(qv + 1.0) >= QUADRIC_TOL:
            raise ValueError(f"point is off the quadric: Q(x,x) = {qv!r}")

    @property
    def space(self) -> QuadraticSpace:
        return self.vec.space

    @property
    def coords(self) -> np.ndarray:
        return self.vec.coords


def normalize_to_quadric(space: QuadraticSpace, coords: np.ndarray) -> QuadricPoint:
    qv = space.inner(coords, coords)
    if qv >= 0:
        raise ValueError("cannot project a non-timelike vector to the quadric")
    return QuadricPoint(AmbientVector(coords / np.sqrt(-qv), space))


@dataclass(frozen=True)
class BoundaryRay:
    """Ideal point: a null direction, canonically scaled.

    The representative is divided by the absolute value of its
    largest-|coordinate| entry, so that entry becomes +-1 and two rays are
    equal iff their reps coincide.  Only positive rescaling is allowed:
    a ray and its negative are distinct (antipodal) ideal points.
    """

    rep: AmbientVector

    def __post_init__(self):
        c = self.rep.coords
        if causal_type(self.rep) != "lightlike":
            raise ValueError("boundary ray representative must be lightlike")
        i = int(np.argmax(np.abs(c)))
        scaled = c / abs(c[i])
        object.__setattr__(self, "rep", AmbientVector(scaled, self.rep.space))

    @property
    def space(self) -> QuadraticSpace:
        return self.rep.space


@dataclass(frozen=True)
class Polyhedron:
    """The null polyhedron with vertices v_{+-1}..v_{+-p} (cartan basis)."""

    p: int
    q: int
    vertices: tuple[BoundaryRay, ...] = field(init=False)

    def __post_init__(self):
        space = QuadraticSpace(self.p, self.q, CARTAN)
        rays = []
        for col in list(range(self.p)) + list(range(self.q + 1, space.dim)):
            e = np.zeros(space.dim)
            e[col] = 1.0
            rays.append(BoundaryRay(AmbientVector(e, space)))
        object.__setattr__(self, "vertices", tuple(rays))

    @property
    def space(self) -> QuadraticSpace:
        return self.vertices[0].space

    def to_json(self) -> str:
        return polyhedron_to_json(self)


def geodesic(x: QuadricPoint, X: AmbientVector, t: float) -> QuadricPoint:
    """cosh(t) x + sinh(t) X for a unit spacelike tangent X at x."""
    qxX = q_inner(x.vec, X)
    qXX = q_inner(X, X)
    if abs(qxX) > 1e-8:
        raise ValueError(f"X is not tangent at x: Q(x, X) = {qxX!r}")
    if abs(qXX - 1.0) > 1e-8:
        raise ValueError(f"X is not a unit spacelike vector: Q(X, X) = {qXX!r}")
    coords = np.cosh(t) * x.coords + np.sinh(t) * X.coords
    return normalize_to_quadric(x.space, coords)


def geodesic_tangent(x: QuadricPoint, X: AmbientVector, t: float) -> AmbientVector:
    """Parallel transport of X along its own geodesic from x."""
    return AmbientVector(np.sinh(t) * x.coords + np.cosh(t) * X.coords, x.space)


@dataclass(frozen=True)
class TangentProjector:
    """Q-orthogonal projection onto x^perp, the tangent space at x."""

    x: QuadricPoint
    matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        c = self.x.coords
        g = self.x.space.gram
        m = np.eye(self.x.space.dim) + np.outer(c, g @ c)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, v: AmbientVector) -> AmbientVector:
        return AmbientVector(self.matrix @ v.coords, v.space)


def tangent_projector(x: QuadricPoint) -> TangentProjector:
    return TangentProjector(x)


def gram_triple_test(a: BoundaryRay, b: BoundaryRay, c: BoundaryRay) -> float:
    """2 <x,y><x,z><y,z> = Gram determinant of three null representatives."""
    qxy = q_inner(a.rep, b.rep)
    qxz = q_inner(a.rep, c.rep)
    qyz = q_inner(b.rep, c.rep)
    return 2.0 * qxy * qxz * qyz


def sample_polyhedron(poly: Polyhedron, n: int, seed: int = 0) -> list[BoundaryRay]:
    """n rays on the polyhedron faces, [sum_i t_i v_{eps(i)}] with t >= 0.

    Draws are taken from the package LCG, so a (poly, n, seed) triple
    always yields the same rays.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = Lcg(seed)
    p = poly.p
    plus = poly.vertices[:p]
    minus = poly.vertices[p:]
    rays = []
    for _ in range(n):
        signs = [rng.choice_sign() for _ in range(p)]
        weights = np.array(rng.uniforms(p, 0.05, 1.0))
        weights /= weights.sum()
        rep = np.zeros(poly.space.dim)
        for i, (s, t) in enumerate(zip(signs, weights)):
            v = plus[i] if s > 0 else minus[p - 1 - i]
            rep += t * v.rep.coords
        rays.append(BoundaryRay(AmbientVector(rep, poly.space)))
    return rays


def polyhedron_to_json(poly: Polyhedron) -> str:
    doc = {
        "p": poly.p,
        "q": poly.q,
        "vertices": [list(v.rep.coords) for v in poly.vertices],
    }
    return json.dumps(doc, sort_keys=True)


def rays_to_json(rays: list[BoundaryRay], p: int, q: int) -> str:
    doc = {"p": p, "q": q, "vertices": [list(r.rep.coords) for r in rays]}
    return json.dumps(doc, sort_keys=True)


def rays_from_json(text: str, basis_mode: str = CARTAN) -> tuple[list[BoundaryRay], int, int]:
    doc = json.loads(text)
    p, q = int(doc["p"]), int(doc["q"])
    space = QuadraticSpace(p, q, basis_mode)
    rays = [BoundaryRay(AmbientVector(np.array(v, dtype=float), space))
            for v in doc["vertices"]]
    return rays, p, q
