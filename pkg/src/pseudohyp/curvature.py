"""Intrinsic curvature of a spacelike chart assembled from its fundamental
data, the trace identity, and the sharp curvature bounds."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .immersion import FundamentalData, gauss_assembled_curvature

MAXIMALITY_TOL_CLOSED_FORM = 1e-5
MAXIMALITY_TOL_SOLVER = 1e-2


@dataclass(frozen=True)
class CurvatureReport:
    """Curvature tensor, contractions, and residual diagnostics.

    ``R[k,i,j,l]`` stores <R(e_k,e_i)e_j, e_l> in the adapted frame, so
    sec(e_i,e_j) = R[i,j,j,i] and Ric(e_i,e_j) = sum_k R[i,k,k,j].
    ``gauss_residual`` is filled only when an independent intrinsic tensor
    was supplied for comparison.
    """

    R: np.ndarray
    sec: np.ndarray
    ric: np.ndarray
    scal: float
    trace_residual: float
    gauss_residual: float | None = None

    @property
    def p(self) -> int:
        return self.R.shape[0]

    def ric_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of Ric, sorted descending."""
        return np.sort(np.linalg.eigvalsh(self.ric))[::-1]

    def to_json(self) -> str:
        doc = {
            "R": self.R.tolist(),
            "sec": self.sec.tolist(),
            "ric": self.ric.tolist(),
            "scal": self.scal,
            "trace_residual": self.trace_residual,
            "gauss_residual": self.gauss_residual,
        }
        return json.dumps(doc, sort_keys=True)

    def csv_row(self) -> dict:
        lam = self.ric_eigenvalues()
        return {
            "scal": self.scal,
            "ric_max": float(lam[0]),
            "trace_residual": self.trace_residual,
        }


def curvature_from_II(fd: FundamentalData, c: float = -1.0,
                      intrinsic_R: np.ndarray | None = None) -> CurvatureReport:
    """Assemble the curvature tensor from the Gauss equation.

    sec(u,v) = c + g_N(II(u,u), II(v,v)) - g_N(II(u,v), II(u,v)) extended
    to the full tensor; Ric and Scal follow by contraction.  When
    ``intrinsic_R`` (an independently computed frame tensor) is given, the
    max component difference is reported as the Gauss residual.
    """
    h = fd.h
    p = fd.p
    r = gauss_assembled_curvature(h, c)
    sec = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if i != j:
                sec[i, j] = r[i, j, j, i]
    ric = np.einsum("ikkj->ij", r)
    ric = 0.5 * (ric + ric.T)
    scal = float(np.trace(ric))
    trace_residual = abs(scal + p * (p - 1) + fd.h_norm_sq() - fd.ii_norm_sq())
    gauss_residual = None
    if intrinsic_R is not None:
        gauss_residual = float(np.max(np.abs(intrinsic_R - r)))
    return CurvatureReport(r, sec, ric, scal, trace_residual, gauss_residual)


def trace_identity_residual(fd: FundamentalData, report: CurvatureReport) -> float:
    """|Scal + p(p-1) + ||H||^2 - ||II||^2| for a chart in H^{p,q}."""
    p = fd.p
    return abs(report.scal + p * (p - 1) + fd.h_norm_sq() - fd.ii_norm_sq())


@dataclass(frozen=True)
class BoundCheck:
    """Signed margins against the sharp maximal-submanifold bounds."""

    scal_margin: float
    ii_margin: float
    ric_max: float
    h_norm: float
    maximal: bool

    def as_dict(self) -> dict:
        return {
            "scal_margin": self.scal_margin,
            "ii_margin": self.ii_margin,
            "ric_max": self.ric_max,
            "h_norm": self.h_norm,
            "maximal": self.maximal,
        }


def bound_check(report: CurvatureReport, fd: FundamentalData, p: int, q: int,
                h_tol: float = MAXIMALITY_TOL_CLOSED_FORM) -> BoundCheck:
    """Margins of Scal <= p min{0, q-p+1} and ||II||^2 <= p min{p-1, q}.

    Both margins are reported signed (negative = bound violated) together
    with the top Ricci eigenvalue.  A warning, not an error, is emitted
    when the chart is not maximal to tolerance, since the bounds are only
    asserted for maximal submanifolds.
    """
    h_norm = np.sqrt(fd.h_norm_sq())
    maximal = h_norm < h_tol
    if not maximal:
        warnings.warn(
            f"bound_check on a non-maximal chart (||H|| = {h_norm:.3e} >= {h_tol:.1e}); "
            "margins reported but the bounds are not asserted",
            stacklevel=2,
        )
    scal_margin = p * min(0, q - p + 1) - report.scal
    ii_margin = p * min(p - 1, q) - fd.ii_norm_sq()
    ric_max = float(report.ric_eigenvalues()[0])
    return BoundCheck(scal_margin, ii_margin, ric_max, float(h_norm), maximal)
