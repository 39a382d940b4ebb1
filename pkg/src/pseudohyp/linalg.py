"""Indefinite linear algebra for the quadratic space R^{p,q+1}.

Two bases are supported: the *standard* basis, in which the bilinear form
is diag(+1 x p, -1 x (q+1)), and the *cartan* basis
(v_1..v_p, w_1..w_{q+1-p}, v_{-p}..v_{-1}) made of p pairs of null
vectors pairing to -1/(2p) plus q+1-p orthonormal timelike vectors.
Everything here is exact linear algebra; tolerances only enter in the
causal classification and the orthonormalization pivots.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

STANDARD = "standard"
CARTAN = "cartan"

ORTHO_PIVOT_TOL = 1e-9
LIGHTLIKE_REL_TOL = 1e-10


class DegenerateSpanError(ValueError):
    """Requested signature not available in the span (pivot below tolerance)."""


def standard_gram(p: int, q: int) -> np.ndarray:
    return np.diag(np.array([1.0] * p + [-1.0] * (q + 1)))


def cartan_gram(p: int, q: int) -> np.ndarray:
    """Block Gram matrix with off-diagonal blocks J_p/(2p) and middle -Id."""
    if p > q + 1:
        raise ValueError(f"cartan basis needs p <= q+1, got p={p}, q={q}")
    n = p + q + 1
    g = np.zeros((n, n))
    jp = np.zeros((p, p))
    jp[np.arange(p), p - 1 - np.arange(p)] = -1.0
    g[:p, q + 1:] = jp / (2.0 * p)
    g[q + 1:, :p] = jp.T / (2.0 * p)
    g[p:q + 1, p:q + 1] = -np.eye(q + 1 - p)
    return g


def cartan_to_standard_matrix(p: int, q: int) -> np.ndarray:
    """Columns are the cartan basis vectors written in standard coordinates.

    v_{+-i} = (+-E_i + E_{p+i}) / (2 sqrt(p)) and w_j = E_{2p+j}, which
    reproduces the cartan Gram matrix exactly.
    """
    if p > q + 1:
        raise ValueError(f"cartan basis needs p <= q+1, got p={p}, q={q}")
    n = p + q + 1
    s = 1.0 / (2.0 * np.sqrt(p))
    t = np.zeros((n, n))
    for i in range(p):
        t[i, i] = s              # v_{i+1}: +E_i ...
        t[p + i, i] = s          # ... + timelike partner
        col = n - 1 - i          # v_{-(i+1)} sits at the mirrored column
        t[i, col] = -s
        t[p + i, col] = s
    for j in range(q + 1 - p):
        t[2 * p + j, p + j] = 1.0
    return t


@dataclass(frozen=True)
class QuadraticSpace:
    """Ambient quadratic space of signature (p, q+1) with a chosen basis."""

    p: int
    q: int
    basis_mode: str = STANDARD

    def __post_init__(self):
        if self.p < 1 or self.q < 0:
            raise ValueError("need p >= 1 and q >= 0")
        if self.basis_mode not in (STANDARD, CARTAN):
            raise ValueError(f"unknown basis_mode {self.basis_mode!r}")
        if self.basis_mode == CARTAN and self.p > self.q + 1:
            raise ValueError("cartan basis requires p <= q+1")

    @property
    def dim(self) -> int:
        return self.p + self.q + 1

    @cached_property
    def gram(self) -> np.ndarray:
        if self.basis_mode == STANDARD:
            g = standard_gram(self.p, self.q)
        else:
            g = cartan_gram(self.p, self.q)
        g.setflags(write=False)
        return g

    def inner(self, x: np.ndarray, y: np.ndarray) -> float:
        """Q(x, y) on raw coordinate arrays, symmetric to the last bit."""
        gx = self.gram @ np.asarray(x, dtype=float)
        gy = self.gram @ np.asarray(y, dtype=float)
        return 0.5 * (float(np.dot(x, gy)) + float(np.dot(y, gx)))

    def vector(self, coords) -> "AmbientVector":
        return AmbientVector(np.asarray(coords, dtype=float), self)


@dataclass(frozen=True)
class AmbientVector:
    coords: np.ndarray
    space: QuadraticSpace

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (self.space.dim,):
            raise ValueError(
                f"coordinate length {c.shape} does not match space dim {self.space.dim}"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)


def _same_space(a: AmbientVector, b: AmbientVector) -> QuadraticSpace:
    if a.space.dim != b.space.dim or a.space.basis_mode != b.space.basis_mode \
            or a.space.p != b.space.p or a.space.q != b.space.q:
        raise ValueError("vectors belong to different quadratic spaces")
    return a.space


def q_inner(a: AmbientVector, b: AmbientVector) -> float:
    """Bilinear form a^T Q b; exactly symmetric in its arguments."""
    space = _same_space(a, b)
    return space.inner(a.coords, b.coords)


def causal_type(v: AmbientVector) -> str:
    """Classify as 'spacelike', 'timelike' or 'lightlike'.

    The lightlike band is |Q(v,v)| < 1e-10 * ||v||^2 (euclidean), so the
    classification is invariant under rescaling of v.
    """
    norm2 = float(np.dot(v.coords, v.coords))
    if norm2 == 0.0:
        raise ValueError("causal type of the zero vector is undefined")
    qv = v.space.inner(v.coords, v.coords)
    if abs(qv) < LIGHTLIKE_REL_TOL * norm2:
        return "lightlike"
    return "spacelike" if qv > 0 else "timelike"


def _sign_flip_needed(v: np.ndarray) -> bool:
    scale = np.max(np.abs(v))
    if scale == 0.0:
        return False
    for x in v:
        if abs(x) > 1e-12 * scale:
            return x < 0
    return False


def pseudo_gs(space: QuadraticSpace, vectors: np.ndarray, n_plus: int, n_minus: int,
              tol: float = ORTHO_PIVOT_TOL):
    """Pseudo-orthonormalize rows of ``vectors``; returns (frame, combo).

    Spacelike directions are produced first, then timelike ones; within a
    phase the pivot is the candidate of largest |Q(v,v)| with the wanted
    sign (ties to the lowest index), and each output vector's sign is fixed
    so its first non-negligible coordinate is positive.  ``combo`` expresses
    the frame rows as combinations of the input rows.
    """
    vecs = np.array(vectors, dtype=float)
    m = vecs.shape[0]
    if n_plus + n_minus > m:
        raise DegenerateSpanError("fewer input vectors than requested frame size")
    combo = np.eye(m)
    alive = list(range(m))
    out_rows: list[np.ndarray] = []
    out_combo: list[np.ndarray] = []
    out_signs: list[float] = []

    for want_sign, count in ((1.0, n_plus), (-1.0, n_minus)):
        for _ in range(count):
            norms = np.array([space.inner(vecs[i], vecs[i]) for i in alive])
            keyed = want_sign * norms
            best = int(np.argmax(keyed))
            if keyed[best] <= tol:
                raise DegenerateSpanError(
                    "degenerate span: no pivot of requested causal sign above tolerance"
                )
            idx = alive.pop(best)
            scale = 1.0 / np.sqrt(abs(norms[best]))
            u = vecs[idx] * scale
            cu = combo[idx] * scale
            if _sign_flip_needed(u):
                u, cu = -u, -cu
            out_rows.append(u)
            out_combo.append(cu)
            out_signs.append(want_sign)
            # modified Gram-Schmidt sweep over the surviving candidates
            for j in alive:
                coef = want_sign * space.inner(vecs[j], u)
                vecs[j] = vecs[j] - coef * u
                combo[j] = combo[j] - coef * cu

    return np.array(out_rows), np.array(out_combo), np.array(out_signs)


def pseudo_orthonormalize(vs: list[AmbientVector], want: tuple[int, int]) -> list[AmbientVector]:
    """Q-orthonormal vectors spanning (part of) span(vs), spacelike first."""
    if not vs:
        raise DegenerateSpanError("empty input")
    space = vs[0].space
    for v in vs[1:]:
        _same_space(vs[0], v)
    rows = np.array([v.coords for v in vs])
    frame, _, _ = pseudo_gs(space, rows, want[0], want[1])
    return [AmbientVector(row, space) for row in frame]


def change_basis(v: AmbientVector, to: str) -> AmbientVector:
    """Re-express v in the requested basis; Q-inner products are preserved."""
    space = v.space
    if to not in (STANDARD, CARTAN):
        raise ValueError(f"unknown basis_mode {to!r}")
    if to == space.basis_mode:
        return v
    if CARTAN in (to, space.basis_mode) and space.p > space.q + 1:
        raise ValueError("cartan basis requires p <= q+1")
    t = cartan_to_standard_matrix(space.p, space.q)
    target = QuadraticSpace(space.p, space.q, to)
    if to == STANDARD:
        return AmbientVector(t @ v.coords, target)
    return AmbientVector(np.linalg.solve(t, v.coords), target)
