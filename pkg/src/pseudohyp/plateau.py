"""Discrete Plateau solver: mean-curvature flow of a vertex mesh
constrained to the quadric, with fixed boundary.

The solver is desk scale and two-dimensional (p = 2, q in {1, 2}).
Mean curvature at a vertex comes from a weighted quadratic fit of the
log-mapped neighborhood over a fitted spacelike tangent plane; all
per-vertex fits are batched, vertices move along their estimated mean
curvature vector simultaneously (Jacobi style) and are renormalized onto
the quadric, with step backtracking when max ||H|| fails to decrease.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import CARTAN, STANDARD, AmbientVector, QuadraticSpace, change_basis
from .products import CartanElement, PseudoFlatSpec, pseudoflat_base_point
from .rng import Lcg
from .spaceform import BoundaryRay, QuadricPoint


class SolverError(RuntimeError):
    pass


class MeshFoldError(SolverError):
    """A fit neighborhood contains a causally related vertex pair."""


class ConvergenceError(SolverError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class SolverConfig:
    step: float = 0.05
    tol_H: float = 1e-3
    max_iters: int = 4000
    truncation_radius: float = 3.0
    fit_ring: int = 2
    target_spacing: float = 0.12
    smoothing: float = 0.6    # tangential centroid pull per step (0 = off)

    def __post_init__(self):
        if self.step <= 0 or self.tol_H <= 0 or self.truncation_radius <= 0:
            raise ValueError("step, tol_H and truncation_radius must be positive")


@dataclass(frozen=True)
class Mesh:
    """Vertex mesh on the quadric with a fixed boundary ring."""

    space: QuadraticSpace
    vertices: np.ndarray          # (nv, dim)
    neighbors: tuple[tuple[int, ...], ...]
    boundary_mask: np.ndarray     # (nv,) bool
    param_hint: np.ndarray        # (nv, 2)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def interior_indices(self) -> np.ndarray:
        return np.nonzero(~self.boundary_mask)[0]

    def edge_array(self) -> np.ndarray:
        edges = [(v, w) for v, nbrs in enumerate(self.neighbors)
                 for w in nbrs if w > v]
        return np.array(edges, dtype=int)

    def replace_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(self.space, vertices, self.neighbors, self.boundary_mask,
                    self.param_hint)

    def validate(self):
        g = self.space.gram
        qx = np.einsum("va,ab,vb->v", self.vertices, g, self.vertices)
        if np.max(np.abs(qx + 1.0)) > 1e-8:
            raise SolverError("mesh vertex off the quadric")
        for v, nbrs in enumerate(self.neighbors):
            if not self.boundary_mask[v] and len(nbrs) < 3:
                raise SolverError(f"interior vertex {v} has fewer than 3 neighbors")
        if not _edges_spacelike(self, self.edge_array()):
            raise SolverError("mesh contains a non-spacelike edge")


def _edges_spacelike(mesh: Mesh, edges: np.ndarray, margin: float = 1e-12) -> bool:
    g = mesh.space.gram
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    q = np.einsum("ea,ab,eb->e", a, g, b)
    return bool(np.all(q < -1.0 - margin))


def _renormalize(space: QuadraticSpace, coords: np.ndarray) -> np.ndarray:
    g = space.gram
    qn = -np.einsum("va,ab,vb->v", coords, g, coords)
    if np.any(qn <= 0):
        raise SolverError("flow produced a non-timelike position vector")
    return coords / np.sqrt(qn)[:, None]


# ---------------------------------------------------------------------------
# boundary data

def geodesic_circle_loop(q: int, radius: float, n: int) -> np.ndarray:
    """Round circle of the given radius inside the totally geodesic H^2."""
    space = QuadraticSpace(2, q)
    pts = np.zeros((n, space.dim))
    phis = 2 * np.pi * np.arange(n) / n
    pts[:, 0] = np.sinh(radius) * np.cos(phis)
    pts[:, 1] = np.sinh(radius) * np.sin(phis)
    pts[:, -1] = np.cosh(radius)
    return pts


def cartan_orbit_loop(q: int, radius: float, n: int,
                      mu: tuple[float, ...] | None = None,
                      theta: float = 0.0) -> np.ndarray:
    """Circle of intrinsic radius `radius` on the orbit Sigma_{mu,theta} (p=2).

    The orbit metric is (cos^2(theta)/p) Id in the Cartan parameters, so
    the circle is |u| = sqrt(p) radius / cos(theta).  For theta = 0 this
    samples the exact maximal surface spanned by the null polyhedron,
    making it the canonical radius-R truncation of that Plateau problem.
    """
    p = 2
    extra = q + 1 - p
    if mu is None:
        mu = (1.0,) + (0.0,) * (extra - 1) if extra else ()
    spec = PseudoFlatSpec(p, q, mu, theta)
    base = pseudoflat_base_point(spec, CARTAN).coords
    scale = math.sqrt(p) * radius / math.cos(theta)
    space_c = QuadraticSpace(p, q, CARTAN)
    pts = np.zeros((n, space_c.dim))
    for k in range(n):
        psi = 2 * np.pi * k / n
        u = scale * np.array([np.cos(psi), np.sin(psi)])
        pts[k] = CartanElement(tuple(u)).matrix(p, q, CARTAN) @ base
    return np.stack([change_basis(AmbientVector(row, space_c), STANDARD).coords
                     for row in pts])


def polyhedron_zigzag(alpha: np.ndarray) -> np.ndarray:
    """Ein-torus graph of the p=2 null polyhedron: triangle wave of
    amplitude pi/2 and period pi in the spacelike angle."""
    a = np.mod(alpha, np.pi)
    return np.where(a <= np.pi / 2, a, np.pi - a)


def polyhedron_boundary_rays(q: int, n: int, jitter: float = 0.0,
                             seed: int = 0, radius: float = 3.0) -> list[BoundaryRay]:
    """Ideal boundary samples of the p=2 polyhedron, optionally jittered.

    Jittering shrinks the zigzag graph toward its mean and adds a smooth
    seeded wobble; the perturbed loop keeps Lipschitz constant < 1, hence
    stays strictly acausal and bounds a spacelike surface.  Samples are
    spaced so the radius-`radius` truncated loop is uniform in arc length
    (the truncation stretches unevenly around the zigzag corners).
    """
    space = QuadraticSpace(2, q)
    rng = Lcg(seed)
    phase = rng.uniform(0.0, 2 * np.pi)

    def beta_of(alpha: np.ndarray) -> np.ndarray:
        if jitter <= 0.0:
            return polyhedron_zigzag(alpha)
        # jittered graph: corners rounded by a moving average of width 6j
        # (max displacement ~3j/2, i.e. ~5% of the pi/2 amplitude at j=0.05),
        # shrunk toward the mean and wobbled; Lipschitz constant stays < 1
        h = 3.0 * jitter
        a = np.mod(alpha, np.pi)
        peak = np.abs(a - np.pi / 2)
        valley = np.minimum(a, np.pi - a)
        betas = polyhedron_zigzag(alpha)
        betas = np.where(peak < h, np.pi / 2 - (h * h + peak ** 2) / (2 * h), betas)
        betas = np.where(valley < h, (h * h + valley ** 2) / (2 * h), betas)
        lam = 0.8 * jitter
        wob = 0.3 * jitter
        return ((1.0 - lam) * betas + lam * (np.pi / 4)
                + wob * np.sin(2 * alpha + phase))

    def rays_at(alpha: np.ndarray) -> list[BoundaryRay]:
        out = []
        for a, b in zip(alpha, beta_of(alpha)):
            rep = np.zeros(space.dim)
            rep[0], rep[1] = np.cos(a), np.sin(a)
            rep[2], rep[3] = np.cos(b), np.sin(b)
            out.append(BoundaryRay(AmbientVector(rep, space)))
        return out

    # equalize arc length of the truncated loop
    fine = 2 * np.pi * np.arange(6 * n) / (6 * n)
    loop = truncate_rays(rays_at(fine), radius)
    g = space.gram
    chord = np.einsum("ea,ab,eb->e", loop, g, np.roll(loop, -1, axis=0))
    seg = np.arccosh(np.maximum(-chord, 1.0))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    targets = total * np.arange(n) / n
    alphas = np.interp(targets, cum, np.concatenate([fine, [2 * np.pi]]))
    return rays_at(alphas)


def truncate_rays(rays: list[BoundaryRay], radius: float,
                  center: np.ndarray | None = None) -> np.ndarray:
    """Finite boundary loop: walk distance `radius` from a central point
    along the geodesics asymptotic to each ideal ray."""
    space = rays[0].space
    g = space.gram
    reps = np.stack([r.rep.coords for r in rays])
    _check_antipodal(reps)
    if center is None:
        m = reps.mean(axis=0)
        qm = m @ g @ m
        if qm >= -1e-12:
            raise SolverError("boundary rays are not spacelike-spannable "
                              "(their mean is not timelike)")
        center = m / np.sqrt(-qm)
    pts = np.zeros_like(reps)
    for k, r in enumerate(reps):
        qrx = r @ g @ center
        if abs(qrx) < 1e-12:
            raise SolverError("boundary ray is orthogonal to the center")
        x_dir = -r / qrx - center
        pts[k] = np.cosh(radius) * center + np.sinh(radius) * x_dir
    return _renormalize(space, pts)


def _check_antipodal(reps: np.ndarray):
    unit = reps / np.linalg.norm(reps, axis=1)[:, None]
    cos = unit @ unit.T
    n = reps.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            if cos[i, j] < -1.0 + 1e-9:
                raise SolverError(
                    f"boundary contains an antipodal ray pair ({i}, {j})")


# ---------------------------------------------------------------------------
# disk topology

def _disk_rings(n_rings: int, s_bound: int) -> list[int]:
    sizes = [max(8, int(round(s_bound * r / n_rings))) for r in range(1, n_rings)]
    sizes.append(s_bound)
    return sizes


def _disk_adjacency(ring_sizes: list[int]):
    """Neighbor sets for a polar disk: center, rings, staggered links."""
    ring_start = [0, 1]
    for size in ring_sizes[:-1]:
        ring_start.append(ring_start[-1] + size)
    nv = ring_start[-1] + ring_sizes[-1]
    nbrs: list[set[int]] = [set() for _ in range(nv)]

    def connect(a, b):
        nbrs[a].add(b)
        nbrs[b].add(a)

    for k in range(ring_sizes[0]):
        connect(0, 1 + k)
    n_rings = len(ring_sizes)
    for r in range(1, n_rings + 1):
        size = ring_sizes[r - 1]
        start = ring_start[r]
        for k in range(size):
            connect(start + k, start + (k + 1) % size)
        if r < n_rings:
            nxt_size = ring_sizes[r]
            nxt_start = ring_start[r + 1]
            offset = 0.5 * (r % 2)
            nxt_offset = 0.5 * ((r + 1) % 2) if r + 1 < n_rings else 0.0
            for k in range(size):
                frac = (k + offset) / size
                jf = frac * nxt_size - nxt_offset
                j0 = int(np.floor(jf)) % nxt_size
                connect(start + k, nxt_start + j0)
                connect(start + k, nxt_start + (j0 + 1) % nxt_size)
    return nbrs, ring_start


def _ring_angles(size: int, r: int, n_rings: int) -> np.ndarray:
    offset = 0.5 * (r % 2) if r < n_rings else 0.0
    return 2 * np.pi * (np.arange(size) + offset) / size


def seed_mesh(boundary, config: SolverConfig) -> Mesh:
    """Disk mesh spanning a boundary loop.

    ``boundary`` is a list of BoundaryRay (truncated at
    config.truncation_radius), a list of QuadricPoint, or an ordered
    (S, dim) loop array.  Interior vertices fill the geodesic cone from
    the normalized mean of the loop on rings of roughly uniform spacing;
    every edge must come out spacelike.
    """
    if isinstance(boundary, (list, tuple)) and boundary and isinstance(boundary[0], BoundaryRay):
        space = boundary[0].space
        if space.basis_mode != STANDARD:
            boundary = [BoundaryRay(change_basis(r.rep, STANDARD)) for r in boundary]
            space = boundary[0].space
        loop = truncate_rays(boundary, config.truncation_radius)
    elif isinstance(boundary, (list, tuple)) and boundary and isinstance(boundary[0], QuadricPoint):
        space = boundary[0].space
        loop = np.stack([b.coords for b in boundary])
    else:
        loop = np.asarray(boundary, dtype=float)
        space = QuadraticSpace(2, loop.shape[1] - 3)
    if space.p != 2:
        raise SolverError("the mesh solver is limited to p = 2")
    g = space.gram
    s_bound = loop.shape[0]

    m = loop.mean(axis=0)
    qm = m @ g @ m
    if qm >= -1e-12:
        raise SolverError("boundary loop is not spacelike-spannable")
    x0 = m / np.sqrt(-qm)
    qxb = loop @ g @ x0
    if np.any(qxb > -1.0 - 1e-12):
        raise SolverError("boundary point not spacelike-separated from the center")
    rho = np.arccosh(-qxb)
    xdir = (loop + qxb[:, None] * x0[None, :]) / np.sinh(rho)[:, None]

    spacing = max(config.target_spacing, 1e-3)
    n_rings = max(3, int(round(float(np.median(rho)) / spacing)))
    ring_sizes = _disk_rings(n_rings, s_bound)
    nbrs, ring_start = _disk_adjacency(ring_sizes)

    verts = [x0.copy()]
    params = [np.zeros(2)]
    for r, size in enumerate(ring_sizes, start=1):
        t = r / n_rings
        if r == n_rings:
            for k in range(size):
                verts.append(loop[k])
                phi = 2 * np.pi * k / size
                params.append(rho[k] * np.array([np.cos(phi), np.sin(phi)]))
            continue
        for phi in _ring_angles(size, r, n_rings):
            frac = phi / (2 * np.pi) * s_bound
            i0 = int(np.floor(frac)) % s_bound
            c = frac - np.floor(frac)
            i1 = (i0 + 1) % s_bound
            rr = (1 - c) * rho[i0] + c * rho[i1]
            xd = (1 - c) * xdir[i0] + c * xdir[i1]
            xd = xd / np.sqrt(xd @ g @ xd)
            verts.append(np.cosh(t * rr) * x0 + np.sinh(t * rr) * xd)
            params.append(t * rr * np.array([np.cos(phi), np.sin(phi)]))

    vertices = _renormalize(space, np.stack(verts))
    boundary_mask = np.zeros(vertices.shape[0], dtype=bool)
    boundary_mask[ring_start[-1]:] = True
    mesh = Mesh(space, vertices, tuple(tuple(sorted(s)) for s in nbrs),
                boundary_mask, np.stack(params))
    mesh = _umbrella_warmup(mesh)
    mesh.validate()
    return mesh


def _umbrella_warmup(mesh: Mesh, passes: int = 30, lam: float = 0.5) -> Mesh:
    """Relax the cone seed by umbrella averaging of interior vertices.

    The geodesic cone can be sharply creased where the boundary loop is
    wiggly; averaging passes (with the blend halved whenever a pass would
    break a spacelike edge) make the seed fit-safe without touching the
    boundary.
    """
    interior = mesh.interior_indices()
    edges = mesh.edge_array()
    nbr_list = [list(mesh.neighbors[v]) for v in interior]
    for _ in range(passes):
        centroid = np.stack([mesh.vertices[nbr].mean(axis=0) for nbr in nbr_list])
        step = lam
        while step > 0.02:
            newv = mesh.vertices.copy()
            newv[interior] = (1 - step) * newv[interior] + step * centroid
            newv = _renormalize(mesh.space, newv)
            newv[mesh.boundary_mask] = mesh.vertices[mesh.boundary_mask]
            trial = mesh.replace_vertices(newv)
            if _edges_spacelike(trial, edges):
                mesh = trial
                break
            step *= 0.5
        else:
            return mesh
    return mesh


def sample_chart_grid_mesh(chart, halfwidth: float, spacing: float) -> Mesh:
    """Mesh sampling a chart on a square parameter lattice (8-connected).

    Interior stencils are point-symmetric, which makes the quadratic-fit
    estimators high-order accurate away from the edge band; preferred for
    validating the estimators against exact surfaces.
    """
    m = int(round(halfwidth / spacing))
    n_side = 2 * m + 1
    c = chart.center()
    verts = []
    params = []
    for i in range(n_side):
        for j in range(n_side):
            uu = c + spacing * np.array([i - m, j - m])
            verts.append(chart.position(uu))
            params.append(uu)

    def vid(i, j):
        return i * n_side + j

    nbrs: list[set[int]] = [set() for _ in range(n_side * n_side)]
    for i in range(n_side):
        for j in range(n_side):
            for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
                i2, j2 = i + di, j + dj
                if 0 <= i2 < n_side and 0 <= j2 < n_side:
                    nbrs[vid(i, j)].add(vid(i2, j2))
                    nbrs[vid(i2, j2)].add(vid(i, j))
    boundary_mask = np.zeros(n_side * n_side, dtype=bool)
    for i in range(n_side):
        for j in range(n_side):
            if i in (0, n_side - 1) or j in (0, n_side - 1):
                boundary_mask[vid(i, j)] = True
    mesh = Mesh(chart.space, _renormalize(chart.space, np.stack(verts)),
                tuple(tuple(sorted(s)) for s in nbrs), boundary_mask,
                np.stack(params))
    mesh.validate()
    return mesh


def sample_chart_mesh(chart, radius: float, spacing: float) -> Mesh:
    """Mesh sampling a chart over a parameter disk about its center;
    same ring topology as the solver meshes."""
    center = chart.center()
    n_rings = max(3, int(round(radius / spacing)))
    s_bound = max(12, int(round(2 * np.pi * n_rings)))
    ring_sizes = _disk_rings(n_rings, s_bound)
    nbrs, ring_start = _disk_adjacency(ring_sizes)
    verts = [chart.position(center)]
    params = [center.copy()]
    for r, size in enumerate(ring_sizes, start=1):
        t = r / n_rings
        for phi in _ring_angles(size, r, n_rings):
            uu = center + t * radius * np.array([np.cos(phi), np.sin(phi)])
            verts.append(chart.position(uu))
            params.append(uu)
    vertices = _renormalize(chart.space, np.stack(verts))
    boundary_mask = np.zeros(vertices.shape[0], dtype=bool)
    boundary_mask[ring_start[-1]:] = True
    mesh = Mesh(chart.space, vertices, tuple(tuple(sorted(s)) for s in nbrs),
                boundary_mask, np.stack(params))
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# batched vertex fits

def _fit_neighborhoods(mesh: Mesh, fit_ring: int):
    """Padded BFS balls of radius fit_ring (pad entries repeat the vertex
    itself: a (0, 0) sample is exactly neutral in the quadratic fit)."""
    balls = []
    for v in range(mesh.n_vertices):
        seen = {v}
        frontier = [v]
        for _ in range(fit_ring):
            nxt = []
            for w in frontier:
                for u in mesh.neighbors[w]:
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
            frontier = nxt
        seen.remove(v)
        balls.append(sorted(seen))
    mmax = max(len(b) for b in balls)
    idx = np.empty((mesh.n_vertices, mmax), dtype=int)
    mask = np.zeros((mesh.n_vertices, mmax), dtype=bool)
    for v, b in enumerate(balls):
        idx[v, :len(b)] = b
        idx[v, len(b):] = v
        mask[v, :len(b)] = True
    return idx, mask


def _sign_fix_rows(rows: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(rows), axis=1, keepdims=True)
    first = np.argmax(np.abs(rows) > 1e-12 * np.maximum(scale, 1e-300), axis=1)
    vals = rows[np.arange(rows.shape[0]), first]
    return rows * np.where(vals < 0, -1.0, 1.0)[:, None]


@dataclass(frozen=True)
class FitData:
    """Batched per-vertex fits at the interior vertices."""

    interior: np.ndarray      # (ni,) vertex indices
    tangent: np.ndarray       # (ni, 2, dim) Q-orthonormal spacelike frames
    ii_vec: np.ndarray        # (ni, 2, 2, dim) normal-valued II estimates
    mean: np.ndarray          # (nv, dim) mean curvature vectors (0 on boundary)
    drift: np.ndarray         # (nv, dim) tangential centroid pull (0 on boundary)
    healthy: np.ndarray       # (nv,) False where no spacelike fit was possible
    wrinkled: np.ndarray      # (nv,) True where fitted Scal leaves [-2, 0] badly

    def n_unhealthy(self) -> int:
        return int(np.count_nonzero(~self.healthy))

    def n_issues(self) -> int:
        return int(np.count_nonzero(~self.healthy | self.wrinkled))


def _gs_pair(g: np.ndarray, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Batched 2-vector spacelike Gram-Schmidt, largest Q-norm first."""
    q11 = np.einsum("va,ab,vb->v", c1, g, c1)
    q22 = np.einsum("va,ab,vb->v", c2, g, c2)
    swap = q22 > q11
    a = np.where(swap[:, None], c2, c1)
    b = np.where(swap[:, None], c1, c2)
    qa = np.einsum("va,ab,vb->v", a, g, a)
    if np.any(qa <= 1e-10):
        raise SolverError("tangent-plane fit produced a non-spacelike direction")
    t1 = a / np.sqrt(qa)[:, None]
    b = b - np.einsum("va,ab,vb->v", b, g, t1)[:, None] * t1
    qb = np.einsum("va,ab,vb->v", b, g, b)
    if np.any(qb <= 1e-10):
        raise SolverError("tangent-plane fit degenerated at a vertex")
    t2 = b / np.sqrt(qb)[:, None]
    return np.stack([_sign_fix_rows(t1), _sign_fix_rows(t2)], axis=1)


def _spacelike_plane(g: np.ndarray, cands: np.ndarray, salience: np.ndarray):
    """Batched pivoted selection of a spacelike 2-frame from candidate rows.

    ``cands`` is (ni, k, d) with per-candidate data ``salience`` (PCA
    eigenvalues).  Each of the two rounds picks the remaining candidate
    maximizing salience * Q-norm, so a nearly null principal direction
    (steep, almost lightlike patches) cannot poison the frame, while
    spacelike noise directions are kept out by their tiny salience.

    Returns (frame, healthy); rows whose span contains no usable
    spacelike 2-plane get an arbitrary placeholder frame and healthy=False.
    """
    ni, k, d = cands.shape
    work = cands.copy()
    used = np.zeros((ni, k), dtype=bool)
    frame = np.zeros((ni, 2, d))
    frame[:, 0, 0] = 1.0
    frame[:, 1, min(1, d - 1)] = 1.0
    healthy = np.ones(ni, dtype=bool)
    sal = np.maximum(salience, 0.0)
    rows = np.arange(ni)
    for round_ in range(2):
        norms = np.einsum("vka,ab,vkb->vk", work, g, work)
        ok = (norms > 1e-10) & ~used
        score = np.where(ok, sal * np.maximum(norms, 0.0), -np.inf)
        pick = np.argmax(score, axis=1)
        good = ok[rows, pick] & healthy
        healthy &= ok[rows, pick]
        denom = np.where(good, np.sqrt(np.maximum(norms[rows, pick], 1e-300)), 1.0)
        t = work[rows, pick] / denom[:, None]
        t = np.where(good[:, None], _sign_fix_rows(t), frame[:, round_])
        frame[:, round_] = t
        used[rows, pick] |= good
        proj = np.einsum("vka,ab,vb->vk", work, g, t)
        work = work - np.where(good[:, None, None], proj[..., None] * t[:, None, :], 0.0)
    return frame, healthy


def _batched_fit(mesh: Mesh, idx: np.ndarray, mask: np.ndarray,
                 need_ii: bool = False, degree: int = 2,
                 keep: int | None = None, frame_iters: int = 0,
                 lenient: bool = False) -> FitData:
    """Quadratic-or-higher graph fits at all interior vertices at once.

    ``keep`` trims each ball to its nearest members (None keeps all);
    ``frame_iters`` re-absorbs the fitted linear terms into the tangent
    frame, which removes the tilt bias of the principal-direction guess.
    The flow uses the fast (degree 2, untrimmed) variant; curvature
    reports use degree 4 with trimming and frame iteration.

    In ``lenient`` mode, vertices whose neighborhood folds causally or
    spans no spacelike 2-plane are flagged unhealthy (zero mean curvature,
    umbrella drift) instead of raising; the flow uses this to heal bad
    regions of a rough seed.
    """
    space = mesh.space
    g = space.gram
    interior = mesh.interior_indices()
    x = mesh.vertices[interior]                     # (ni, d)
    nb = mesh.vertices[idx[interior]]               # (ni, m, d)
    live = mask[interior]

    qvw = np.einsum("vma,ab,vb->vm", nb, g, x)
    folded = np.any((qvw > -1.0 + 1e-12) & live, axis=1)
    if np.any(folded) and not lenient:
        raise MeshFoldError("fit neighborhood contains a causally related pair")
    arg = np.maximum(-qvw, 1.0)
    dist = np.arccosh(arg)
    small = dist < 1e-12
    scale = np.where(small, 1.0, dist / np.where(small, 1.0, np.sinh(dist)))
    if keep is not None:
        order = np.argsort(np.where(live, dist, np.inf), axis=1)
        trimmed = np.zeros_like(live)
        trimmed[np.arange(live.shape[0])[:, None], order[:, :keep]] = True
        live = live & trimmed
    fit_live = live & ~folded[:, None]
    z = (nb + qvw[..., None] * x[:, None, :]) * scale[..., None]
    z = np.where(fit_live[..., None], z, 0.0)

    m2 = np.einsum("vma,vmb->vab", z, z)
    eigval, eigvec = np.linalg.eigh(m2)
    cand = np.transpose(eigvec[:, :, ::-1], (0, 2, 1))  # rows by salience
    tangent, healthy = _spacelike_plane(g, cand, eigval[:, ::-1])
    healthy &= ~folded
    if not lenient and not np.all(healthy):
        raise SolverError("tangent-plane fit degenerated at a vertex")

    gaussian_weights = keep is None
    for it in range(frame_iters + 1):
        xi = np.einsum("vma,ab,vib->vmi", z, g, tangent)
        resid = z - np.einsum("vmi,via->vma", xi, tangent)
        xin = np.linalg.norm(xi, axis=2)
        sig = np.maximum(np.nanmedian(np.where(fit_live, xin, np.nan), axis=1), 1e-12)
        sig = np.where(np.isfinite(sig), sig, 1.0)
        if gaussian_weights:
            wgt = np.where(fit_live, np.exp(-0.5 * (xin / sig[:, None]) ** 2), 0.0)
        else:
            wgt = fit_live.astype(float)
        # columns are built on sigma-scaled coordinates for conditioning
        x1 = xi[:, :, 0] / sig[:, None]
        x2 = xi[:, :, 1] / sig[:, None]
        cols = [x1, x2, 0.5 * x1 ** 2, x1 * x2, 0.5 * x2 ** 2]
        for deg in range(3, degree + 1):
            for k in range(deg + 1):
                cols.append(x1 ** (deg - k) * x2 ** k)
        phi = np.stack(cols, axis=2)
        aw = phi * wgt[..., None]
        ata = np.einsum("vmi,vmj->vij", aw, phi)
        atb = np.einsum("vmi,vma->via", aw, resid)
        ata[~healthy] = np.eye(phi.shape[2])
        atb[~healthy] = 0.0
        try:
            coef = np.linalg.solve(ata, atb)        # (ni, ncols, d)
        except np.linalg.LinAlgError as exc:
            raise SolverError("rank-deficient neighborhood fit") from exc
        if it < frame_iters:
            upd = _gs_pair(g, tangent[:, 0] + coef[:, 0] / sig[:, None],
                           tangent[:, 1] + coef[:, 1] / sig[:, None])
            tangent = np.where(healthy[:, None, None], upd, tangent)

    # re-project coefficient vectors onto the normal space at each vertex
    def normalize_coef(c):
        qcx = np.einsum("va,ab,vb->v", c, g, x)
        c = c + qcx[:, None] * x
        ct = np.einsum("va,ab,vib->vi", c, g, tangent)
        return c - np.einsum("vi,via->va", ct, tangent)

    s2 = (sig ** 2)[:, None]
    h11 = normalize_coef(coef[:, 2]) / s2
    h12 = normalize_coef(coef[:, 3]) / s2
    h22 = normalize_coef(coef[:, 4]) / s2
    mean = np.zeros_like(mesh.vertices)
    mean[interior] = np.where(healthy[:, None], h11 + h22, 0.0)
    # tangential centroid pull: mean log vector projected onto the plane,
    # capped at half the local fit scale so smoothing can never fold the mesh
    nlive = np.maximum(fit_live.sum(axis=1), 1)
    xibar = np.einsum("vmi,vm->vi", xi, fit_live.astype(float)) / nlive[:, None]
    norm = np.linalg.norm(xibar, axis=1)
    cap = 0.5 * sig
    factor = np.where(norm > cap, cap / np.maximum(norm, 1e-300), 1.0)
    # a maximal surface in H^{2,q} has Scal in [-2, 0]; fits far outside
    # that window flag spurious discrete wrinkles (H-free but curved)
    qpair = lambda u, v: np.einsum("va,ab,vb->v", u, g, v)
    scal_fit = 2.0 * (-1.0 + qpair(h11, h22) - qpair(h12, h12))
    wrinkled_i = healthy & ((scal_fit > 0.25) | (scal_fit < -2.25))

    pull = np.einsum("vi,via->va", xibar * factor[:, None], tangent)
    # unhealthy or wrinkled vertices fall back to a damped ambient umbrella
    nall = np.maximum(live.sum(axis=1), 1)
    centroid = np.einsum("vma,vm->va", nb, live.astype(float)) / nall[:, None]
    pull = np.where((healthy & ~wrinkled_i)[:, None], pull, 0.5 * (centroid - x))
    drift = np.zeros_like(mesh.vertices)
    drift[interior] = pull
    healthy_full = np.ones(mesh.n_vertices, dtype=bool)
    healthy_full[interior] = healthy
    wrinkled_full = np.zeros(mesh.n_vertices, dtype=bool)
    wrinkled_full[interior] = wrinkled_i
    ii_vec = None
    if need_ii:
        ii_vec = np.empty((interior.size, 2, 2, space.dim))
        ii_vec[:, 0, 0] = np.where(healthy[:, None], h11, np.nan)
        ii_vec[:, 0, 1] = ii_vec[:, 1, 0] = np.where(healthy[:, None], h12, np.nan)
        ii_vec[:, 1, 1] = np.where(healthy[:, None], h22, np.nan)
    return FitData(interior, tangent, ii_vec, mean, drift, healthy_full, wrinkled_full)


def _max_h_norm(space: QuadraticSpace, fit_or_mean, interior: np.ndarray) -> float:
    mean = fit_or_mean.mean if isinstance(fit_or_mean, FitData) else fit_or_mean
    g = space.gram
    sq = -np.einsum("va,ab,vb->v", mean[interior], g, mean[interior])
    return float(np.sqrt(np.max(np.maximum(sq, 0.0)))) if interior.size else 0.0


def estimate_H(mesh: Mesh, v: int, fit_ring: int = 2) -> np.ndarray:
    """Mean curvature vector at an interior vertex from the local
    quadratic fit (fit_ring-deep neighborhood)."""
    if mesh.boundary_mask[v]:
        raise ValueError("mean curvature is only estimated at interior vertices")
    idx, mask = _fit_neighborhoods(mesh, fit_ring)
    fit = _batched_fit(mesh, idx, mask)
    return fit.mean[v]


def full_support_mask(mesh: Mesh, fit_ring: int) -> np.ndarray:
    """Interior vertices whose fit ball contains no boundary vertex."""
    idx, mask = _fit_neighborhoods(mesh, fit_ring)
    touches = np.any(mesh.boundary_mask[idx] & mask, axis=1)
    return ~mesh.boundary_mask & ~touches


# ---------------------------------------------------------------------------
# flow

def flow_step(mesh: Mesh, config: SolverConfig, _state: dict | None = None) -> Mesh:
    """One accepted mean-curvature-flow step (x <- normalize(x + tau H)).

    All interior updates come from the same snapshot; if the step would
    increase max ||H|| (while above tol_H) or break a spacelike edge, tau
    is halved and the step retried; tau below 1e-12 is an error.
    """
    state = _state if _state is not None else {}
    if "idx" not in state:
        state["idx"], state["mask"] = _fit_neighborhoods(mesh, config.fit_ring)
        state["edges"] = mesh.edge_array()
    if "smooth_mask" not in state:
        # smoothing is off only right next to the fixed boundary
        adjacent = np.zeros(mesh.n_vertices, dtype=bool)
        for v in np.nonzero(mesh.boundary_mask)[0]:
            adjacent[list(mesh.neighbors[v])] = True
        state["smooth_mask"] = ~mesh.boundary_mask & ~adjacent
    interior = mesh.interior_indices()
    if "fit" not in state:
        state["fit"] = _batched_fit(mesh, state["idx"], state["mask"], lenient=True)
    fit = state["fit"]
    h_now = _max_h_norm(mesh.space, fit, interior)
    issues_now = fit.n_issues()

    # the umbrella pull on unhealthy/wrinkled vertices always applies
    needs_heal = ~fit.healthy | fit.wrinkled
    drift = np.where(state["smooth_mask"][:, None] | needs_heal[:, None],
                     fit.drift, 0.0)
    tau = state.get("tau", config.step)
    while True:
        if tau < 1e-12:
            raise SolverError("flow step collapsed below 1e-12")
        smooth = config.smoothing * min(1.0, tau / config.step)
        trial = mesh.vertices.copy()
        trial[interior] = (trial[interior] + tau * fit.mean[interior]
                           + smooth * drift[interior])
        trial = _renormalize(mesh.space, trial)
        trial[mesh.boundary_mask] = mesh.vertices[mesh.boundary_mask]
        new_mesh = mesh.replace_vertices(trial)
        if not _edges_spacelike(new_mesh, state["edges"]):
            tau *= 0.5
            continue
        new_fit = _batched_fit(new_mesh, state["idx"], state["mask"], lenient=True)
        h_new = _max_h_norm(mesh.space, new_fit, interior)
        issues_new = new_fit.n_issues()
        # from a clean mesh, reject steps that break it or raise max ||H||
        # while above tolerance; during healing only the edge check gates
        if issues_now == 0 and issues_new > 0:
            tau *= 0.5
            continue
        if issues_now == 0 and h_new > h_now and h_new > config.tol_H:
            tau *= 0.5
            continue
        state["tau"] = min(config.step, 1.3 * tau)
        state["fit"] = new_fit
        state["residual"] = h_new
        return new_mesh


@dataclass(frozen=True)
class SolveResult:
    mesh: Mesh
    residual_H: float
    history: tuple[float, ...]
    scal: np.ndarray
    ii_sq: np.ndarray
    ric_max: np.ndarray
    h_norm: np.ndarray
    full_support: np.ndarray
    summary: dict

    def to_json(self) -> str:
        return json.dumps(self.summary, sort_keys=True)

    def csv_rows(self) -> list[dict]:
        rows = []
        for v in np.nonzero(self.full_support)[0]:
            rows.append({
                "vertex": int(v),
                "param_u": float(self.mesh.param_hint[v, 0]),
                "param_v": float(self.mesh.param_hint[v, 1]),
                "scal": float(self.scal[v]),
                "ii_sq": float(self.ii_sq[v]),
                "ric_max": float(self.ric_max[v]),
                "h_norm": float(self.h_norm[v]),
            })
        return rows


def analyze_mesh(mesh: Mesh, fit_ring: int = 3, degree: int = 4,
                 keep: int = 18, frame_iters: int = 2):
    """Per-vertex curvature estimates (Scal, ||II||^2, max Ric eigenvalue,
    ||H||); NaN on boundary vertices.

    Reporting defaults to a quartic fit over ring-3 balls trimmed to the
    18 nearest members, with two tangent-frame refinements; this pushes
    the truncation and tilt biases of the curvature estimates well below
    the acceptance windows, while the flow itself uses the cheaper
    quadratic fit.
    """
    idx, mask = _fit_neighborhoods(mesh, fit_ring)
    fit = _batched_fit(mesh, idx, mask, need_ii=True, degree=degree,
                       keep=keep, frame_iters=frame_iters, lenient=True)
    g = mesh.space.gram
    nv = mesh.n_vertices
    scal = np.full(nv, np.nan)
    ii_sq = np.full(nv, np.nan)
    ric_max = np.full(nv, np.nan)
    h_norm = np.full(nv, np.nan)
    ii = fit.ii_vec
    qii = np.einsum("vija,ab,vklb->vijkl", ii, g, ii)
    # p = 2: sec = -1 + Q(II_00, II_11) - Q(II_01, II_01); Ric = sec I
    sec = -1.0 + qii[:, 0, 0, 1, 1] - qii[:, 0, 1, 0, 1]
    scal[fit.interior] = 2.0 * sec
    ii_sq[fit.interior] = -(qii[:, 0, 0, 0, 0] + 2 * qii[:, 0, 1, 0, 1]
                            + qii[:, 1, 1, 1, 1])
    ric_max[fit.interior] = sec
    hsq = -np.einsum("va,ab,vb->v", fit.mean[fit.interior], g, fit.mean[fit.interior])
    h_norm[fit.interior] = np.sqrt(np.maximum(hsq, 0.0))
    return scal, ii_sq, ric_max, h_norm


def scalar_laplacian(mesh: Mesh, values: np.ndarray, fit_ring: int = 2) -> np.ndarray:
    """Laplace-Beltrami estimate of a vertex scalar field at interior
    vertices, from quadratic fits in the fitted tangent coordinates."""
    idx, mask = _fit_neighborhoods(mesh, fit_ring)
    fit = _batched_fit(mesh, idx, mask)
    space = mesh.space
    g = space.gram
    interior = fit.interior
    x = mesh.vertices[interior]
    nb = mesh.vertices[idx[interior]]
    qvw = np.einsum("vma,ab,vb->vm", nb, g, x)
    dist = np.arccosh(np.maximum(-qvw, 1.0))
    small = dist < 1e-12
    scale = np.where(small, 1.0, dist / np.where(small, 1.0, np.sinh(dist)))
    z = (nb + qvw[..., None] * x[:, None, :]) * scale[..., None]
    xi = np.einsum("vma,ab,vib->vmi", z, g, fit.tangent)
    live = mask[interior]
    phi = np.stack([
        np.ones_like(xi[:, :, 0]), xi[:, :, 0], xi[:, :, 1],
        0.5 * xi[:, :, 0] ** 2, xi[:, :, 0] * xi[:, :, 1], 0.5 * xi[:, :, 1] ** 2,
    ], axis=2)
    xin = np.linalg.norm(xi, axis=2)
    sig = np.nanmedian(np.where(live, xin, np.nan), axis=1)
    wgt = np.where(live, np.exp(-0.5 * (xin / np.maximum(sig, 1e-12)[:, None]) ** 2), 0.0)
    rhs = values[idx[interior]] - values[interior][:, None]
    aw = phi * wgt[..., None]
    coef = np.linalg.solve(np.einsum("vmi,vmj->vij", aw, phi),
                           np.einsum("vmi,vm->vi", aw, rhs))
    out = np.full(mesh.n_vertices, np.nan)
    out[interior] = coef[:, 3] + coef[:, 5]
    return out


def solve(boundary, config: SolverConfig | None = None) -> SolveResult:
    """Flow to a maximal mesh; returns the mesh plus a curvature summary.

    Raises ConvergenceError when tol_H is not reached within max_iters,
    and SolverError when a converged solution violates the curvature
    bounds Scal <= 1e-2 or ||II||^2 <= p min{p-1,q} + 5e-2 on the bulk.
    """
    config = config or SolverConfig()
    mesh = seed_mesh(boundary, config)
    state: dict = {}
    state["idx"], state["mask"] = _fit_neighborhoods(mesh, config.fit_ring)
    state["edges"] = mesh.edge_array()
    interior = mesh.interior_indices()
    state["fit"] = _batched_fit(mesh, state["idx"], state["mask"], lenient=True)
    residual = _max_h_norm(mesh.space, state["fit"], interior)
    history = [residual]
    it = 0
    while residual > config.tol_H or state["fit"].n_issues() > 0:
        if it >= config.max_iters:
            raise ConvergenceError(
                f"no convergence in {config.max_iters} iterations "
                f"(residual {residual:.3e}, "
                f"{state['fit'].n_issues()} unhealthy/wrinkled vertices)", history)
        mesh = flow_step(mesh, config, state)
        residual = state["residual"]
        history.append(residual)
        it += 1

    report_ring = config.fit_ring + 1
    scal, ii_sq, ric_max, h_norm = analyze_mesh(mesh, report_ring, degree=4)
    support = full_support_mask(mesh, report_ring)
    q = mesh.space.q
    ii_bound = 2 * min(1, q) + 5e-2
    summary = {
        "iterations": it,
        "residual_H": residual,
        "n_vertices": mesh.n_vertices,
        "scal_min": float(np.nanmin(scal[support])) if support.any() else None,
        "scal_max": float(np.nanmax(scal[support])) if support.any() else None,
        "ii_sq_max": float(np.nanmax(ii_sq[support])) if support.any() else None,
        "ric_max": float(np.nanmax(ric_max[support])) if support.any() else None,
    }
    result = SolveResult(mesh, residual, tuple(history), scal, ii_sq,
                         ric_max, h_norm, support, summary)
    if support.any():
        if summary["scal_max"] > 1e-2:
            raise SolverError(
                f"converged mesh violates Scal <= 1e-2: {summary['scal_max']}")
        if summary["ii_sq_max"] > ii_bound:
            raise SolverError(
                f"converged mesh violates the II bound: {summary['ii_sq_max']}")
    return result
