"""Parametric chart machinery: order-3 jets, exact closed-form factor maps,
analytic graph charts, and finite-difference jets.

A chart is a map u -> R^{p,q+1} landing on the quadric, carried together
with its derivatives up to third order.  Closed-form charts evaluate the
derivatives exactly; finite-difference charts build them from central
stencils of the (renormalized) position map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import AmbientVector, QuadraticSpace
from .rng import Lcg


@dataclass(frozen=True)
class Jet3:
    """Position and partial derivatives; d2/d3 are index-symmetric."""

    pos: np.ndarray          # (n,)
    d1: np.ndarray           # (p, n)
    d2: np.ndarray           # (p, p, n)
    d3: np.ndarray | None    # (p, p, p, n) or None when order < 3


class ImmersionChart:
    """Spacelike p-dimensional patch with order-3 jets.

    Parameters
    ----------
    space : ambient quadratic space (standard basis for all shipped charts)
    domain : (p, 2) array of per-parameter [lo, hi]
    jet_fn : callable (u, order) -> Jet3
    jet_mode : "closed_form" or "finite_difference"
    """

    def __init__(self, space: QuadraticSpace, domain, jet_fn,
                 jet_mode: str = "closed_form", label: str = "",
                 validate: bool = True):
        self.space = space
        self.domain = np.array(domain, dtype=float).reshape(-1, 2)
        if self.domain.shape[0] != space.p:
            raise ValueError("chart parameter count must equal the spacelike dimension p")
        self._jet_fn = jet_fn
        self.jet_mode = jet_mode
        self.label = label
        if validate:
            self._validate()

    @property
    def p(self) -> int:
        return int(self.domain.shape[0])

    def contains(self, u, margin: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.domain[:, 0] + margin)
                    and np.all(u <= self.domain[:, 1] - margin))

    def jet(self, u, order: int = 3) -> Jet3:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.p,):
            raise ValueError(f"parameter point must have shape ({self.p},)")
        return self._jet_fn(u, order)

    def position(self, u) -> np.ndarray:
        return self.jet(u, order=1).pos

    def center(self) -> np.ndarray:
        return 0.5 * (self.domain[:, 0] + self.domain[:, 1])

    def _validate(self):
        pts = [self.center()]
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        if self.p <= 4:
            for mask in range(2 ** self.p):
                frac = np.array([(0.9 if (mask >> i) & 1 else 0.1) for i in range(self.p)])
                pts.append(lo + frac * (hi - lo))
        g = self.space.gram
        for u in pts:
            j = self.jet(u, order=1)
            qx = float(j.pos @ g @ j.pos)
            if abs(qx + 1.0) > 1e-8:
                raise ValueError(f"chart leaves the quadric at u={u}: Q(x,x)={qx!r}")
            gt = j.d1 @ g @ j.d1.T
            eigs = np.linalg.eigvalsh(0.5 * (gt + gt.T))
            if eigs[0] <= 1e-8:
                raise ValueError(f"chart is not spacelike at u={u}: min metric eig {eigs[0]!r}")
            if eigs[-1] / eigs[0] > 1e8:
                raise ValueError(f"chart metric too ill-conditioned at u={u}")


# ---------------------------------------------------------------------------
# separable closed-form maps (products of 1-variable analytic factors)

def _family_table(name: str, x: float) -> tuple[float, ...]:
    if name == "sin":
        s, c = np.sin(x), np.cos(x)
        return (s, c, -s, -c)
    if name == "cos":
        s, c = np.sin(x), np.cos(x)
        return (c, -s, -c, s)
    if name == "sinh":
        s, c = np.sinh(x), np.cosh(x)
        return (s, c, s, c)
    if name == "cosh":
        s, c = np.sinh(x), np.cosh(x)
        return (c, s, c, s)
    if name == "exp":
        e = np.exp(x)
        return (e, e, e, e)
    if name == "nexp":
        e = np.exp(-x)
        return (e, -e, e, -e)
    if name == "one":
        return (1.0, 0.0, 0.0, 0.0)
    raise ValueError(f"unknown factor family {name!r}")


class SeparableMap:
    """Components are sums of coeff * prod_v f_v(x_v) with trig/hyp factors.

    ``terms[c]`` is a list of (coeff, codes) where ``codes`` names a factor
    family per variable ("one" for absent).  Derivatives of any order are
    exact table lookups.
    """

    def __init__(self, nvars: int, ncomps: int,
                 terms: list[list[tuple[float, tuple[str, ...]]]]):
        self.nvars = nvars
        self.ncomps = ncomps
        self.terms = terms

    def jet(self, x: np.ndarray, order: int = 3) -> Jet3:
        nv, nc = self.nvars, self.ncomps
        tables: list[dict[str, tuple[float, ...]]] = []
        for v in range(nv):
            fams = {codes[v] for comp in self.terms for (_, codes) in comp}
            tables.append({f: _family_table(f, x[v]) for f in fams})

        def term_value(coeff, codes, orders):
            val = coeff
            for v in range(nv):
                val *= tables[v][codes[v]][orders[v]]
            return val

        pos = np.zeros(nc)
        d1 = np.zeros((nv, nc))
        d2 = np.zeros((nv, nv, nc))
        d3 = np.zeros((nv, nv, nv, nc)) if order >= 3 else None
        base = [0] * nv
        for c in range(nc):
            for coeff, codes in self.terms[c]:
                pos[c] += term_value(coeff, codes, base)
                for i in range(nv):
                    oi = base.copy(); oi[i] += 1
                    d1[i, c] += term_value(coeff, codes, oi)
                    for j in range(i, nv):
                        oij = oi.copy(); oij[j] += 1
                        vij = term_value(coeff, codes, oij)
                        d2[i, j, c] += vij
                        if j > i:
                            d2[j, i, c] += vij
                        if order >= 3:
                            for k in range(j, nv):
                                oijk = oij.copy(); oijk[k] += 1
                                vv = term_value(coeff, codes, oijk)
                                for a, b, d in {(i, j, k), (i, k, j), (j, i, k),
                                                (j, k, i), (k, i, j), (k, j, i)}:
                                    d3[a, b, d, c] += vv
        return Jet3(pos, d1, d2, d3)


def hyperbolic_factor(n: int) -> SeparableMap:
    """H^n in R^{n,1}: geodesic polar map (r, phi_1..phi_{n-1}).

    Components are (n spacelike, 1 timelike): sinh(r) * omega(phi) and
    cosh(r), with omega the usual spherical product of sines/cosines.
    For n = 1 the single parameter is arclength: (sinh t, cosh t).
    """
    if n == 1:
        terms = [[(1.0, ("sinh",))], [(1.0, ("cosh",))]]
        return SeparableMap(1, 2, terms)
    nv = n
    comps = []
    for j in range(n):
        codes = ["one"] * nv
        codes[0] = "sinh"
        if j < n - 1:
            for m in range(j):
                codes[1 + m] = "sin"
            codes[1 + j] = "cos"
        else:
            for m in range(n - 1):
                codes[1 + m] = "sin"
        comps.append([(1.0, tuple(codes))])
    comps.append([(1.0, tuple(["cosh"] + ["one"] * (nv - 1)))])
    return SeparableMap(nv, n + 1, comps)


@dataclass(frozen=True)
class ChartBlock:
    """One factor of an assembled chart: coeff * factor placed into ambient rows."""

    coeff: float
    factor: SeparableMap
    param_start: int
    ambient_rows: tuple[int, ...]


def assembled_chart(space: QuadraticSpace, domain, blocks: list[ChartBlock],
                    const: np.ndarray | None = None, label: str = "",
                    transform: np.ndarray | None = None,
                    validate: bool = True) -> ImmersionChart:
    """Chart u -> const + sum_i coeff_i * embed_i(factor_i(u_block_i)).

    Cross-block derivatives vanish, so jets assemble block by block.  An
    optional constant linear ``transform`` is applied last (used to move
    cartan-basis charts into standard coordinates).
    """
    n = space.dim
    p = np.array(domain, dtype=float).reshape(-1, 2).shape[0]
    base = np.zeros(n) if const is None else np.array(const, dtype=float)

    def jet_fn(u, order=3):
        pos = base.copy()
        d1 = np.zeros((p, n))
        d2 = np.zeros((p, p, n))
        d3 = np.zeros((p, p, p, n)) if order >= 3 else None
        for b in blocks:
            nv = b.factor.nvars
            sl = slice(b.param_start, b.param_start + nv)
            rows = list(b.ambient_rows)
            fj = b.factor.jet(u[sl], order)
            pos[rows] += b.coeff * fj.pos
            d1[sl, rows] += b.coeff * fj.d1
            d2[sl, sl, rows] += b.coeff * fj.d2
            if order >= 3:
                d3[sl, sl, sl, rows] += b.coeff * fj.d3
        if transform is not None:
            pos = transform @ pos
            d1 = d1 @ transform.T
            d2 = d2 @ transform.T
            if d3 is not None:
                d3 = d3 @ transform.T
        return Jet3(pos, d1, d2, d3)

    return ImmersionChart(space, domain, jet_fn, "closed_form", label, validate)


# ---------------------------------------------------------------------------
# analytic graph charts over the totally geodesic H^p

@dataclass(frozen=True)
class TrigTable:
    """psi(u) = sum_m amp_m cos(freq_m . u + phase_m), one per timelike slot."""

    amps: np.ndarray     # (q, M)
    freqs: np.ndarray    # (q, M, p)
    phases: np.ndarray   # (q, M)


def _trig_jet(table: TrigTable, u: np.ndarray, order: int):
    qdim, nterms = table.amps.shape
    p = u.shape[0]
    val = np.zeros(qdim)
    d1 = np.zeros((qdim, p))
    d2 = np.zeros((qdim, p, p))
    d3 = np.zeros((qdim, p, p, p)) if order >= 3 else None
    for a in range(qdim):
        for m in range(nterms):
            k = table.freqs[a, m]
            th = float(k @ u + table.phases[a, m])
            amp = table.amps[a, m]
            s, c = np.sin(th), np.cos(th)
            val[a] += amp * c
            d1[a] += -amp * s * k
            d2[a] += -amp * c * np.multiply.outer(k, k)
            if order >= 3:
                d3[a] += amp * s * np.multiply.outer(np.multiply.outer(k, k), k)
    return val, d1, d2, d3


def graph_chart(p: int, q: int, table: TrigTable, halfwidth: float = 0.45,
                label: str = "graph", validate: bool = True) -> ImmersionChart:
    """Graph F(u) = (u, psi(u), w(u)) with w = sqrt(1 + |u|^2 - |psi|^2).

    With psi = 0 this is the totally geodesic H^p; nonzero psi bends the
    patch into the first q timelike directions while staying exactly on
    the quadric.
    """
    space = QuadraticSpace(p, q)
    n = space.dim
    domain = np.array([[-halfwidth, halfwidth]] * p)

    def jet_fn(u, order=3):
        psi, dpsi, d2psi, d3psi = _trig_jet(table, u, order)
        # G = 1 + |u|^2 - |psi|^2 and its derivatives
        G = 1.0 + float(u @ u) - float(psi @ psi)
        dG = 2.0 * u - 2.0 * np.einsum("a,ai->i", psi, dpsi)
        d2G = 2.0 * np.eye(p) - 2.0 * (np.einsum("ai,aj->ij", dpsi, dpsi)
                                       + np.einsum("a,aij->ij", psi, d2psi))
        w = np.sqrt(G)
        dw = dG / (2.0 * w)
        d2w = d2G / (2.0 * w) - np.multiply.outer(dG, dG) / (4.0 * w ** 3)
        pos = np.zeros(n)
        pos[:p] = u
        pos[p:p + q] = psi
        pos[-1] = w
        d1 = np.zeros((p, n))
        d1[:, :p] = np.eye(p)
        d1[:, p:p + q] = dpsi.T
        d1[:, -1] = dw
        d2 = np.zeros((p, p, n))
        d2[:, :, p:p + q] = np.moveaxis(d2psi, 0, -1)
        d2[:, :, -1] = d2w
        d3 = None
        if order >= 3:
            d3G = -2.0 * (np.einsum("a,aijk->ijk", psi, d3psi)
                          + np.einsum("ai,ajk->ijk", dpsi, d2psi)
                          + np.einsum("aj,aik->ijk", dpsi, d2psi)
                          + np.einsum("ak,aij->ijk", dpsi, d2psi))
            sym = (np.einsum("i,jk->ijk", dG, d2G)
                   + np.einsum("j,ik->ijk", dG, d2G)
                   + np.einsum("k,ij->ijk", dG, d2G))
            d3w = (d3G / (2.0 * w) - sym / (4.0 * w ** 3)
                   + 3.0 * np.einsum("i,j,k->ijk", dG, dG, dG) / (8.0 * w ** 5))
            d3 = np.zeros((p, p, p, n))
            d3[:, :, :, p:p + q] = np.moveaxis(d3psi, 0, -1)
            d3[:, :, :, -1] = d3w
        return Jet3(pos, d1, d2, d3)

    return ImmersionChart(space, domain, jet_fn, "closed_form", label, validate)


def totally_geodesic_chart(p: int, q: int, halfwidth: float = 0.8) -> ImmersionChart:
    table = TrigTable(np.zeros((q, 1)), np.zeros((q, 1, p)), np.zeros((q, 1)))
    return graph_chart(p, q, table, halfwidth, label=f"totally-geodesic H^{p}")


def random_graph_chart(p: int, q: int, seed: int, amplitude: float = 0.15,
                       nterms: int = 3, halfwidth: float = 0.45) -> ImmersionChart:
    """Seeded analytic spacelike chart; amplitudes are rescaled so the
    gradient bound sum_a |dpsi_a| <= 0.55 keeps the patch safely spacelike."""
    rng = Lcg(seed)
    amps = np.zeros((q, nterms))
    freqs = np.zeros((q, nterms, p))
    phases = np.zeros((q, nterms))
    for a in range(q):
        for m in range(nterms):
            amps[a, m] = amplitude * rng.uniform(0.3, 1.0) * rng.choice_sign()
            k = np.array([rng.uniform(-2.0, 2.0) for _ in range(p)])
            if np.linalg.norm(k) < 0.3:
                k[rng.randint(0, p - 1)] += 1.0
            freqs[a, m] = k
            phases[a, m] = rng.uniform(0.0, 2.0 * np.pi)
    grad_bound = np.sqrt(np.sum(
        np.square([np.sum(np.abs(amps[a]) * np.linalg.norm(freqs[a], axis=1))
                   for a in range(q)])))
    cap = 0.55
    if grad_bound > cap:
        amps *= cap / grad_bound
    table = TrigTable(amps, freqs, phases)
    return graph_chart(p, q, table, halfwidth, label=f"random-graph seed={seed}")


# ---------------------------------------------------------------------------
# finite-difference jets

def fd_chart(space: QuadraticSpace, domain, position_fn: Callable[[np.ndarray], np.ndarray],
             h: float = 1e-4, h3: float | None = None, richardson: bool = False,
             label: str = "fd", validate: bool = True) -> ImmersionChart:
    """Chart whose jets come from central differences of ``position_fn``.

    Positions are renormalized onto the quadric before differencing.  The
    third-order stencils use their own step ``h3`` (default 1e-3): at the
    1e-4 step that is optimal for second derivatives, a direct third
    difference is dominated by round-off.
    """
    if h3 is None:
        h3 = max(h, 1e-3)
    g = space.gram

    def pos(u):
        x = np.asarray(position_fn(u), dtype=float)
        return x / np.sqrt(-float(x @ g @ x))

    def stencil_jet(u, order, h1, h3_step):
        p = u.shape[0]

        def off(pairs, step):
            o = np.zeros(p)
            for idx, mult in pairs:
                o[idx] += mult * step
            return o

        cache: dict[tuple, np.ndarray] = {}

        def ev(pairs):
            key = tuple(sorted(pairs))
            if key not in cache:
                cache[key] = pos(u + off(pairs, h1))
            return cache[key]

        f0 = ev([])
        n = f0.shape[0]
        d1 = np.zeros((p, n))
        d2 = np.zeros((p, p, n))
        for i in range(p):
            fp = ev([(i, 1)])
            fm = ev([(i, -1)])
            d1[i] = (fp - fm) / (2 * h1)
            d2[i, i] = (fp - 2 * f0 + fm) / h1 ** 2
            for j in range(i + 1, p):
                fpp = ev([(i, 1), (j, 1)])
                fpm = ev([(i, 1), (j, -1)])
                fmp = ev([(i, -1), (j, 1)])
                fmm = ev([(i, -1), (j, -1)])
                d2[i, j] = d2[j, i] = (fpp - fpm - fmp + fmm) / (4 * h1 ** 2)
        d3 = None
        if order >= 3:
            d3 = np.zeros((p, p, p, n))
            cache3: dict[tuple, np.ndarray] = {}

            def ev3(pairs):
                key = tuple(sorted(pairs))
                if key not in cache3:
                    cache3[key] = pos(u + off(pairs, h3_step))
                return cache3[key]

            for i in range(p):
                v = (ev3([(i, 2)]) - 2 * ev3([(i, 1)]) + 2 * ev3([(i, -1)])
                     - ev3([(i, -2)])) / (2 * h3_step ** 3)
                d3[i, i, i] = v
                for j in range(p):
                    if j == i:
                        continue
                    v = (ev3([(i, 1), (j, 1)]) - 2 * ev3([(j, 1)]) + ev3([(i, -1), (j, 1)])
                         - ev3([(i, 1), (j, -1)]) + 2 * ev3([(j, -1)])
                         - ev3([(i, -1), (j, -1)])) / (2 * h3_step ** 3)
                    d3[i, i, j] = d3[i, j, i] = d3[j, i, i] = v
                for j in range(i + 1, p):
                    for k in range(j + 1, p):
                        v = np.zeros(n)
                        for si in (1, -1):
                            for sj in (1, -1):
                                for sk in (1, -1):
                                    v += si * sj * sk * ev3([(i, si), (j, sj), (k, sk)])
                        v /= 8 * h3_step ** 3
                        for perm in {(i, j, k), (i, k, j), (j, i, k),
                                     (j, k, i), (k, i, j), (k, j, i)}:
                            d3[perm] = v
        return Jet3(f0, d1, d2, d3)

    def jet_fn(u, order=3):
        if not richardson:
            return stencil_jet(u, order, h, h3)
        ja = stencil_jet(u, order, h, h3)
        jb = stencil_jet(u, order, h / 2, h3 / 2)
        rich = lambda a, b: (4.0 * b - a) / 3.0 if a is not None else None
        return Jet3(ja.pos, rich(ja.d1, jb.d1), rich(ja.d2, jb.d2),
                    rich(ja.d3, jb.d3) if order >= 3 else None)

    return ImmersionChart(space, domain, jet_fn, "finite_difference", label, validate)


def with_fd_jets(chart: ImmersionChart, h: float = 1e-4, h3: float | None = None,
                 richardson: bool = False) -> ImmersionChart:
    """Same image as ``chart`` but with finite-difference jets (for FD tests)."""
    return fd_chart(chart.space, chart.domain, chart.position, h=h, h3=h3,
                    richardson=richardson, label=chart.label + "+fd", validate=False)


def reparametrized_position(chart: ImmersionChart, warp: Callable[[np.ndarray], np.ndarray]):
    """Position map u -> chart(warp(u)); pair with fd_chart for tests."""
    return lambda u: chart.position(warp(u))
