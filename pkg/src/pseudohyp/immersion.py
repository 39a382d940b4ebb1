"""Extraction of fundamental data from a spacelike chart: adapted frames,
second fundamental form, shape operators, mean curvature, covariant
derivative of II, codifferential, and normal curvature.

Conventions
-----------
Frames satisfy Q(e_i, e_i) = +1 on the p tangent vectors and
Q(e_a, e_a) = -1 on the q normal vectors.  Components of II are stored as
h[a, i, j] = -Q(II(e_i, e_j), e_a), so that II(e_i, e_j) = sum_a h[a,i,j] e_a
and ||II||^2 = sum h^2.  The covariant derivative tensor uses the same
normal-component convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import ImmersionChart, Jet3
from .linalg import AmbientVector, QuadraticSpace, pseudo_gs


@dataclass(frozen=True)
class FundamentalData:
    """Per-point adapted frame and second-order invariants of a chart."""

    space: QuadraticSpace
    u: np.ndarray                # parameter point
    x: np.ndarray                # position on the quadric
    frame: np.ndarray            # (p+q, n); rows are p tangents then q normals
    tangent_combo: np.ndarray    # (p, p): e_i = sum_m combo[i, m] d_m F
    g: np.ndarray                # (p, p) coordinate metric
    h: np.ndarray                # (q, p, p) second fundamental form components
    mean_curvature: np.ndarray   # (n,) ambient vector

    @property
    def p(self) -> int:
        return self.frame.shape[0] - self.h.shape[0]

    @property
    def q(self) -> int:
        return self.h.shape[0]

    @property
    def shape_ops(self) -> np.ndarray:
        """The q symmetric matrices H^a = (h^a_ij)."""
        return self.h

    @property
    def tangent_frame(self) -> np.ndarray:
        return self.frame[:self.p]

    @property
    def normal_frame(self) -> np.ndarray:
        return self.frame[self.p:]

    def ii_norm_sq(self) -> float:
        return float(np.sum(self.h ** 2))

    def h_norm_sq(self) -> float:
        return float(np.sum(np.trace(self.h, axis1=1, axis2=2) ** 2))

    def mean_curvature_vector(self) -> AmbientVector:
        return AmbientVector(self.mean_curvature, self.space)


@dataclass(frozen=True)
class CovariantDerivativeII:
    """(nabla II)^a_{kij} in the adapted frame, plus the Codazzi defect."""

    components: np.ndarray       # (q, p, p, p) indexed [a, k, i, j]
    codazzi_residual: float

    def norm_sq(self) -> float:
        return float(np.sum(self.components ** 2))


# ---------------------------------------------------------------------------
# metric helpers (all exact given the jets)

def _metric_blocks(space: QuadraticSpace, jet: Jet3, order: int = 0):
    """Coordinate metric with exact first/second coordinate derivatives."""
    gram = space.gram
    g = jet.d1 @ gram @ jet.d1.T
    g = 0.5 * (g + g.T)
    dg = d2g = None
    if order >= 1:
        a = np.einsum("kia,ja->kij", jet.d2 @ gram, jet.d1)
        dg = a + np.transpose(a, (0, 2, 1))
    if order >= 2:
        t1 = np.einsum("lkia,ja->lkij", jet.d3 @ gram, jet.d1)
        t2 = np.einsum("kia,lja->lkij", jet.d2 @ gram, jet.d2)
        d2g = (t1 + np.transpose(t1, (0, 1, 3, 2))
               + t2 + np.transpose(t2, (1, 0, 2, 3)))
    return g, dg, d2g


def _koszul(dg: np.ndarray) -> np.ndarray:
    """K[i, j, l] = (d_i g_jl + d_j g_il - d_l g_ij) / 2."""
    return 0.5 * (dg + np.einsum("jil->ijl", dg) - np.einsum("lij->ijl", dg))


def _christoffels(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    return np.einsum("ml,ijl->mij", ginv, _koszul(dg))


def _coordinate_ii(gram, jet: Jet3, ginv: np.ndarray, x: np.ndarray) -> np.ndarray:
    """II(d_i, d_j) as ambient vectors (p, p, n)."""
    qx2 = jet.d2 @ (gram @ x)
    qf2f = np.einsum("ija,ma->ijm", jet.d2 @ gram, jet.d1)
    tang = np.einsum("ijm,ml,la->ija", qf2f, ginv, jet.d1)
    return jet.d2 + qx2[:, :, None] * x[None, None, :] - tang


def _coordinate_dii(gram, jet: Jet3, ginv, dg, x) -> np.ndarray:
    """d_k II(d_i, d_j) before normal projection, shape (p, p, p, n)."""
    dginv = -np.einsum("ma,kab,bl->kml", ginv, dg, ginv)
    qx2 = jet.d2 @ (gram @ x)
    qx3 = jet.d3 @ (gram @ x)
    qf2f = np.einsum("ija,ma->ijm", jet.d2 @ gram, jet.d1)
    qf3f = np.einsum("kija,ma->kijm", jet.d3 @ gram, jet.d1)
    qf2f2 = np.einsum("ija,kma->ijkm", jet.d2 @ gram, jet.d2)
    xpart = (qx3[:, :, :, None] * x[None, None, None, :]
             + np.einsum("ijk,a->kija", qf2f, x)
             + np.einsum("ij,ka->kija", qx2, jet.d1))
    tpart = (np.einsum("kml,ijm,la->kija", dginv, qf2f, jet.d1)
             + np.einsum("ml,kijm,la->kija", ginv, qf3f, jet.d1)
             + np.einsum("ml,ijkm,la->kija", ginv, qf2f2, jet.d1)
             + np.einsum("ml,ijm,kla->kija", ginv, qf2f, jet.d2))
    return jet.d3 + xpart - tpart


def _project_normal(gram, jet: Jet3, ginv, x, field: np.ndarray) -> np.ndarray:
    """Project an (..., n) ambient field onto the normal bundle at u."""
    qx = field @ (gram @ x)
    qt = np.einsum("...a,ma->...m", field @ gram, jet.d1)
    return (field + qx[..., None] * x
            - np.einsum("...m,ml,la->...a", qt, ginv, jet.d1))


# ---------------------------------------------------------------------------
# public operations

def fundamental_data(chart: ImmersionChart, u) -> FundamentalData:
    """Adapted frame, II components, shape operators and mean curvature.

    The tangent frame pseudo-orthonormalizes the coordinate derivatives;
    the normal frame completes it from the ambient standard basis,
    projected onto the orthocomplement of (x, tangent space).  Both follow
    the deterministic pivoting rules of :func:`pseudohyp.linalg.pseudo_gs`.
    """
    u = np.asarray(u, dtype=float)
    space = chart.space
    p, q = space.p, space.q
    jet = chart.jet(u, order=2)
    gram = space.gram
    x = jet.pos / np.sqrt(-float(jet.pos @ gram @ jet.pos))

    g, _, _ = _metric_blocks(space, jet, order=0)
    eigs = np.linalg.eigvalsh(g)
    if eigs[0] <= 1e-8:
        raise ValueError(f"degenerate tangent Gram at u={u}: min eig {eigs[0]!r}")
    if eigs[-1] / eigs[0] > 1e8:
        raise ValueError(f"tangent metric condition number exceeds 1e8 at u={u}")

    tangent, combo, _ = pseudo_gs(space, jet.d1, p, 0)

    pool = np.eye(space.dim)
    pool = pool + np.outer(pool @ gram @ x, x)
    pool = pool - (pool @ gram @ tangent.T) @ tangent
    try:
        normal, _, _ = pseudo_gs(space, pool, 0, q)
    except ValueError as exc:
        raise ValueError(f"normal frame completion failed at u={u}: {exc}") from exc

    frame = np.vstack([tangent, normal])
    qf2n = np.einsum("ija,ba->ijb", jet.d2 @ gram, normal)
    h = -np.einsum("im,jn,mnb->bij", combo, combo, qf2n)
    h = 0.5 * (h + np.transpose(h, (0, 2, 1)))
    mean = np.einsum("b,ba->a", np.trace(h, axis1=1, axis2=2), normal)
    return FundamentalData(space, u.copy(), x, frame, combo, g, h, mean)


def covariant_derivative_II(chart: ImmersionChart, u,
                            fd: FundamentalData | None = None) -> CovariantDerivativeII:
    """Covariant derivative of II as a normal-valued 3-tensor.

    Metric derivatives and the derivative of the coordinate II come from
    the order-3 jets, so on closed-form charts the only error is round-off.
    The reported Codazzi residual is max |(nabla II)^a_kij - (nabla II)^a_ikj|.
    """
    u = np.asarray(u, dtype=float)
    space = chart.space
    jet = chart.jet(u, order=3)
    if jet.d3 is None:
        raise ValueError("covariant_derivative_II needs order-3 jets")
    gram = space.gram
    if fd is None:
        fd = fundamental_data(chart, u)
    x = fd.x
    g, dg, _ = _metric_blocks(space, jet, order=1)
    ginv = np.linalg.inv(g)
    gamma = _christoffels(ginv, dg)
    ii = _coordinate_ii(gram, jet, ginv, x)
    d_ii = _coordinate_dii(gram, jet, ginv, dg, x)
    d_ii = _project_normal(gram, jet, ginv, x, d_ii)

    t = (d_ii - np.einsum("mki,mja->kija", gamma, ii)
         - np.einsum("mkj,ima->kija", gamma, ii))

    e = fd.tangent_combo
    tf = np.einsum("kc,im,jn,cmna->kija", e, e, e, t)
    comps = -np.einsum("kija,ba->bkij", tf @ gram, fd.normal_frame)
    codazzi = float(np.max(np.abs(comps - np.transpose(comps, (0, 2, 1, 3)))))
    return CovariantDerivativeII(comps, codazzi)


def codifferential_A(chart: ImmersionChart, u,
                     dii: CovariantDerivativeII | None = None) -> np.ndarray:
    """Codifferential of the shape 1-form; array (p, q).

    Entry [i, a] is the e_a-coefficient of -sum_k (nabla II)(e_k, e_k, e_i).
    It vanishes on maximal charts and equals minus the normal gradient of
    the mean curvature in general.
    """
    if dii is None:
        dii = covariant_derivative_II(chart, u)
    return -np.einsum("bkki->ib", dii.components)


def normal_gradient_H(chart: ImmersionChart, u) -> np.ndarray:
    """Frame components (p, q) of the normal covariant gradient of H.

    Entry [i, a] is the e_a-coefficient of nabla^N_{e_i} H, computed from
    the coordinate mean-curvature field independently of codifferential_A.
    """
    u = np.asarray(u, dtype=float)
    space = chart.space
    jet = chart.jet(u, order=3)
    gram = space.gram
    fd = fundamental_data(chart, u)
    g, dg, _ = _metric_blocks(space, jet, order=1)
    ginv = np.linalg.inv(g)
    dginv = -np.einsum("ma,kab,bl->kml", ginv, dg, ginv)
    ii = _coordinate_ii(gram, jet, ginv, fd.x)
    d_ii = _coordinate_dii(gram, jet, ginv, dg, fd.x)
    dh = (np.einsum("kij,ija->ka", dginv, ii)
          + np.einsum("ij,kija->ka", ginv, d_ii))
    dh = _project_normal(gram, jet, ginv, fd.x, dh)
    dhf = fd.tangent_combo @ dh
    return -np.einsum("ia,ba->ib", dhf @ gram, fd.normal_frame)


def normal_curvature(chart: ImmersionChart, u,
                     fd: FundamentalData | None = None) -> np.ndarray:
    """Normal curvature via shape-operator commutators.

    Returns r[k, i, a, b] = g_N(R^N(e_k, e_i) e_a, e_b) = -[H^a, H^b]_{ki};
    the array vanishes exactly when all shape operators commute.
    """
    if fd is None:
        fd = fundamental_data(chart, u)
    h = fd.h
    comm = np.einsum("aij,bjk->abik", h, h) - np.einsum("bij,ajk->abik", h, h)
    return -np.transpose(comm, (2, 3, 0, 1))


def normal_curvature_from_shape_ops(h: np.ndarray) -> np.ndarray:
    """Same contraction on raw shape-operator stacks (q, p, p)."""
    comm = np.einsum("aij,bjk->abik", h, h) - np.einsum("bij,ajk->abik", h, h)
    return -np.transpose(comm, (2, 3, 0, 1))


def normal_curvature_geometric(chart: ImmersionChart, u,
                               fd: FundamentalData | None = None) -> np.ndarray:
    """Normal curvature from the projector field: P [dP, dP] P.

    Works entirely from the normal-bundle projector, so it is independent
    of II and serves as the geometric side of the Ricci-equation check.
    """
    u = np.asarray(u, dtype=float)
    space = chart.space
    jet = chart.jet(u, order=2)
    gram = space.gram
    if fd is None:
        fd = fundamental_data(chart, u)
    x = fd.x
    g, dg, _ = _metric_blocks(space, jet, order=1)
    ginv = np.linalg.inv(g)
    dginv = -np.einsum("ma,kab,bl->kml", ginv, dg, ginv)
    n = space.dim
    d1g = jet.d1 @ gram
    proj = (np.eye(n) + np.outer(x, gram @ x)
            - np.einsum("ml,la,mb->ab", ginv, jet.d1, d1g))
    dproj = (np.einsum("ka,b->kab", jet.d1, gram @ x)
             + np.einsum("a,kb->kab", x, d1g)
             - np.einsum("kml,la,mb->kab", dginv, jet.d1, d1g)
             - np.einsum("ml,kla,mb->kab", ginv, jet.d2, d1g)
             - np.einsum("ml,la,kmb->kab", ginv, jet.d1, jet.d2 @ gram))
    bracket = (np.einsum("kab,ibc->kiac", dproj, dproj)
               - np.einsum("iab,kbc->kiac", dproj, dproj))
    curv = np.einsum("ab,kibc,cd->kiad", proj, bracket, proj)
    e = fd.tangent_combo
    curv_f = np.einsum("kc,id,cdab->kiab", e, e, curv)
    act = np.einsum("kiab,nb->kina", curv_f, fd.normal_frame)
    return np.einsum("kina,ab,mb->kinm", act, gram, fd.normal_frame)


def intrinsic_curvature(chart: ImmersionChart, u,
                        fd: FundamentalData | None = None) -> np.ndarray:
    """Curvature of the induced metric from Christoffel derivatives.

    Returns R[k, i, j, l] = g(R(e_k, e_i) e_j, e_l) in the adapted frame.
    This path never looks at the second fundamental form, which makes it
    the independent side of the Gauss-equation residual.
    """
    u = np.asarray(u, dtype=float)
    space = chart.space
    jet = chart.jet(u, order=3)
    if fd is None:
        fd = fundamental_data(chart, u)
    g, dg, d2g = _metric_blocks(space, jet, order=2)
    ginv = np.linalg.inv(g)
    gamma = _christoffels(ginv, dg)
    dginv = -np.einsum("ma,kab,bl->kml", ginv, dg, ginv)
    kos = _koszul(dg)
    dkos = 0.5 * (d2g + np.einsum("kjil->kijl", d2g) - np.einsum("klij->kijl", d2g))
    dgamma = (np.einsum("kml,ijl->kmij", dginv, kos)
              + np.einsum("ml,kijl->kmij", ginv, dkos))
    rup = (np.einsum("klij->kijl", dgamma) - np.einsum("ilkj->kijl", dgamma)
           + np.einsum("mij,lkm->kijl", gamma, gamma)
           - np.einsum("mkj,lim->kijl", gamma, gamma))
    lowered = np.einsum("kijm,ml->kijl", rup, g)
    e = fd.tangent_combo
    return np.einsum("ka,ib,jc,ld,abcd->kijl", e, e, e, e, lowered)


def gauss_assembled_curvature(h: np.ndarray, c: float) -> np.ndarray:
    """R[k,i,j,l] assembled from II via the ambient constant curvature c."""
    p = h.shape[1]
    delta = np.eye(p)
    return (c * (np.einsum("ij,kl->kijl", delta, delta)
                 - np.einsum("kj,il->kijl", delta, delta))
            - np.einsum("akl,aij->kijl", h, h)
            + np.einsum("akj,ail->kijl", h, h))


def fundamental_residuals(chart: ImmersionChart, u, c: float = -1.0) -> dict[str, float]:
    """Gauss, Codazzi and Ricci compatibility residuals at a point.

    Gauss compares intrinsic curvature with the II-assembled tensor,
    Codazzi is the symmetry defect of (nabla II), and Ricci compares the
    projector-field normal curvature with the commutator formula.
    """
    fd = fundamental_data(chart, u)
    dii = covariant_derivative_II(chart, u, fd)
    r_int = intrinsic_curvature(chart, u, fd)
    r_gauss = gauss_assembled_curvature(fd.h, c)
    rn_geo = normal_curvature_geometric(chart, u, fd)
    rn_alg = normal_curvature(chart, u, fd)
    return {
        "gauss": float(np.max(np.abs(r_int - r_gauss))),
        "codazzi": dii.codazzi_residual,
        "ricci": float(np.max(np.abs(rn_geo - rn_alg))),
    }


def chart_from_spec(doc: dict) -> ImmersionChart:
    """Build a chart from a parsed JSON spec.

    Kinds: "graph" (trig coefficient tables for the analytic graph family),
    "product" and "pseudoflat" (routed to the products module).
    """
    kind = doc.get("kind")
    if kind == "graph":
        from .charts import TrigTable, graph_chart
        table = TrigTable(np.array(doc["amps"], dtype=float),
                          np.array(doc["freqs"], dtype=float),
                          np.array(doc["phases"], dtype=float))
        return graph_chart(int(doc["p"]), int(doc["q"]), table,
                           float(doc.get("halfwidth", 0.45)))
    if kind in ("product", "pseudoflat"):
        from . import products
        return products.chart_from_spec(doc)
    raise ValueError(f"unknown chart kind {kind!r}")
