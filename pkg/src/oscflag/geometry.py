"""Pointwise invariants of an immersion: frames, fundamental forms, normal flag.

The osculating flag is built from exact jet derivatives: the order-k
osculating space is the span of all partials of order <= k, and the k-th
normal space is the complement of consecutive flag stages.  Higher
fundamental forms are normal-flag projections of raw partials, which agrees
with the iterated normal-connection definition for 1-regular immersions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import subspaces as sub
from .errors import (CapabilityError, DataError, DomainError, FrameError,
                     NotImmersionError, ParameterError, RegularityError)
from .jets import DerivativeTensor, Jet, VectorJet, variables

EINSUM_LETTERS = "abcdefgh"


@dataclass(frozen=True)
class Box:
    """Axis-aligned chart-coordinate domain."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo.flags.writeable = False
        self.hi.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo + margin) and np.all(x <= self.hi - margin))

    def sample(self, rng: np.random.Generator, margin: float = 0.0) -> np.ndarray:
        return rng.uniform(self.lo + margin, self.hi - margin)


def box(lo, hi) -> Box:
    return Box(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))


class ImmersionChart:
    """An analytic chart map evaluated through jet arithmetic.

    ``fn`` receives one variable jet per chart coordinate and must return the
    list of ambient component jets; it is composed of jet primitives only, so
    every evaluation yields exact partial derivatives up to ``max_order``.
    """

    def __init__(self, name: str, intrinsic_dim: int, ambient_dim: int,
                 domain: Box, fn: Callable[[list[Jet]], list[Jet]],
                 max_order: int):
        self.name = name
        self.intrinsic_dim = intrinsic_dim
        self.ambient_dim = ambient_dim
        self.domain = domain
        self.fn = fn
        self.max_order = max_order
        self._cache: dict[tuple[bytes, int], VectorJet] = {}

    def eval(self, x, order: int) -> VectorJet:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DataError(f"chart {self.name}: non-finite evaluation point")
        if order > self.max_order:
            raise CapabilityError(
                f"chart {self.name} declares analytic order {self.max_order}, "
                f"order {order} requested")
        if not self.domain.contains(x):
            raise DomainError(f"chart {self.name}: point {x} outside domain")
        key = (x.tobytes(), order)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        vjet = VectorJet(self.fn(variables(x, order)))
        if vjet.ambient_dim != self.ambient_dim:
            raise DataError(f"chart {self.name} returned wrong ambient dim")
        if len(self._cache) > 512:
            self._cache.clear()
        self._cache[key] = vjet
        return vjet

    def position(self, x) -> np.ndarray:
        return np.array([c.value for c in self.eval(x, 0).components])


def eval_jet(chart: ImmersionChart, x, order: int) -> DerivativeTensor:
    """All ambient partial derivatives of the chart at x, to the given order."""
    return DerivativeTensor(chart.eval(x, order))


def _gram_schmidt_rows(rows: np.ndarray, rel_tol: float = 1e-10):
    """Orthonormalize rows in index order; returns (Q, C) with Q = C @ rows."""
    m, _ = rows.shape
    scale = float(np.max(np.linalg.norm(rows, axis=1)))
    q = np.zeros_like(rows)
    coeff = np.eye(m)
    for i in range(m):
        v = rows[i].copy()
        c = np.zeros(m)
        c[i] = 1.0
        for j in range(i):
            r = float(v @ q[j])
            v -= r * q[j]
            c -= r * coeff[j]
        nrm = float(np.linalg.norm(v))
        if nrm <= rel_tol * scale:
            raise NotImmersionError(
                f"row {i} numerically dependent during orthonormalization")
        q[i] = v / nrm
        coeff[i] = c / nrm
    return q, coeff


def projection_frame(space: sub.Subspace, reference: np.ndarray | None = None,
                     pivots: tuple[int, ...] | None = None,
                     min_residual: float = 0.1):
    """Orthonormal frame of a subspace by pivoted projection of a reference basis.

    Projects the reference vectors onto the subspace and orthonormalizes.
    When ``pivots`` is None the pivot order is chosen greedily by largest
    residual (deterministic); passing a pivot order back in reuses the same
    selection at nearby points, which keeps frames varying smoothly across a
    finite-difference stencil.
    """
    k = space.dim
    if reference is None:
        reference = np.eye(space.ambient_dim)
    projected = space.project(reference)
    frame = np.zeros((k, space.ambient_dim))
    if k == 0:
        return frame, ()
    if pivots is None:
        chosen: list[int] = []
        work = projected.copy()
        for i in range(k):
            norms = np.linalg.norm(work, axis=1)
            pick = int(np.argmax(norms))
            if norms[pick] < min_residual:
                raise FrameError(
                    f"reference basis degenerate at pivot {i} "
                    f"(residual {norms[pick]:.3e})")
            frame[i] = work[pick] / norms[pick]
            work -= np.outer(work @ frame[i], frame[i])
            chosen.append(pick)
        return frame, tuple(chosen)
    for i, pick in enumerate(pivots):
        v = projected[pick].copy()
        for j in range(i):
            v -= (v @ frame[j]) * frame[j]
        nrm = float(np.linalg.norm(v))
        if nrm < min_residual:
            raise FrameError(
                f"pivot {pick} lost rank across stencil (residual {nrm:.3e})")
        frame[i] = v / nrm
    return frame, tuple(pivots)


@dataclass(frozen=True)
class PointGeometry:
    """Every pointwise invariant of an immersion at one chart point."""

    chart: ImmersionChart = field(repr=False)
    x: np.ndarray
    tangent: sub.Subspace
    frame: np.ndarray            # (n, N) distinguished orthonormal tangent frame
    frame_in_chart: np.ndarray   # C with frame = C @ (first derivatives)
    metric: np.ndarray           # Gram matrix of coordinate fields
    normal_space: sub.Subspace
    alpha: np.ndarray            # (n, n, N) second fundamental form on the frame
    higher_forms: list[np.ndarray] = field(repr=False)
    normal_flag: list[sub.Subspace]
    osculating_dims: list[int]
    derivs: DerivativeTensor = field(repr=False)
    tol: float = sub.DEFAULT_RANK_TOL

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[1]

    @property
    def first_normal(self) -> sub.Subspace:
        if not self.normal_flag:
            return sub.trivial(self.ambient_dim, self.tol)
        return self.normal_flag[0]

    def first_normal_complement(self) -> sub.Subspace:
        """Orthogonal complement of the first normal space inside the normal space."""
        return sub.complement_within(self.first_normal, self.normal_space)

    def chart_direction(self, frame_coords) -> np.ndarray:
        """Chart-coordinate velocity realizing a tangent vector given on the frame."""
        return np.asarray(frame_coords, dtype=float) @ self.frame_in_chart

    def frame_to_ambient(self, frame_coords) -> np.ndarray:
        return np.asarray(frame_coords, dtype=float) @ self.frame

    def tangent_coords(self, ambient_vec) -> np.ndarray:
        return self.frame @ np.asarray(ambient_vec, dtype=float)

    def alpha_of(self, xv, yv) -> np.ndarray:
        """alpha evaluated on two tangent vectors in frame coordinates."""
        return np.einsum("a,b,abN->N", np.asarray(xv, float),
                         np.asarray(yv, float), self.alpha)

    def shape_operator(self, normal_vec) -> np.ndarray:
        """Matrix of A_nu on the orthonormal frame, from the pairing with alpha."""
        return self.alpha @ np.asarray(normal_vec, dtype=float)


def _flag_dims(ordered_values: list[np.ndarray], n: int, tol: float) -> list[int]:
    dims = []
    stacked = None
    for vals in ordered_values:
        stacked = vals if stacked is None else np.vstack([stacked, vals])
        dims.append(sub.span_of(stacked, tol).dim)
    return dims


def point_geometry(chart: ImmersionChart, x, max_normal_order: int = 1,
                   tol: float = sub.DEFAULT_RANK_TOL) -> PointGeometry:
    """Tangent frame, metric, fundamental forms and normal flag at one point.

    Raises NotImmersionError when the Jacobian drops rank, and
    RegularityError when any flag rank is ambiguous across the tolerance
    band (tol/10, tol*10): such points must be rejected and resampled.
    """
    if chart.max_order < max_normal_order + 1:
        raise CapabilityError(
            f"chart order {chart.max_order} cannot supply normal order "
            f"{max_normal_order}")
    derivs = eval_jet(chart, x, max_normal_order + 1)
    n, big_n = chart.intrinsic_dim, chart.ambient_dim

    d1 = derivs.tensor(1)
    svals = np.linalg.svd(d1, compute_uv=False)
    if svals[-1] <= tol * svals[0]:
        raise NotImmersionError(
            f"chart {chart.name}: Jacobian rank < {n} at {np.asarray(x)}")
    frame, coeff = _gram_schmidt_rows(d1)
    metric = d1 @ d1.T
    tangent = sub.Subspace(big_n, frame, tol)
    normal_space = sub.kernel_of(frame, tol)

    # Osculating flag with rank-stability audit across the tolerance band.
    order_values = [d1]
    for k in range(2, max_normal_order + 2):
        order_values.append(derivs.partials_of_order(k)[1])
    dims = _flag_dims(order_values, n, tol)
    for band_tol in (tol / 10.0, tol * 10.0):
        band_dims = _flag_dims(order_values, n, band_tol)
        if band_dims != dims:
            level = next(i for i, (a, b) in enumerate(zip(dims, band_dims))
                         if a != b)
            raise RegularityError(
                f"ambiguous rank of normal stage {level} across tolerance band "
                f"({band_dims[level]} vs {dims[level]})", level=level)

    osculating = [tangent]
    normal_flag: list[sub.Subspace] = []
    stacked = d1
    for k in range(2, max_normal_order + 2):
        stacked = np.vstack([stacked, order_values[k - 1]])
        nxt = sub.span_of(stacked, tol)
        stage = sub.complement_within(osculating[-1], nxt)
        if stage.dim == 0:
            break
        osculating.append(nxt)
        normal_flag.append(stage)

    # Second fundamental form: normal projection of second derivatives,
    # expressed on the orthonormal tangent frame.
    t2 = derivs.tensor(2)
    alpha_chart = t2 - np.einsum("ijN,nN,nM->ijM", t2, frame, frame)
    alpha = np.einsum("ai,bj,ijN->abN", coeff, coeff, alpha_chart)

    higher: list[np.ndarray] = []
    for ell in range(3, len(normal_flag) + 2):
        stage = normal_flag[ell - 2]
        t_ell = derivs.tensor(ell)
        proj = np.einsum("...N,kN,kM->...M", t_ell, stage.basis, stage.basis)
        letters = EINSUM_LETTERS[:ell]
        spec = ",".join(f"{o}{i}" for o, i in zip(letters, "ijklmnop")) \
            + f",{'ijklmnop'[:ell]}N->{letters}N"
        higher.append(np.einsum(spec, *([coeff] * ell), proj))

    return PointGeometry(
        chart=chart, x=np.asarray(x, dtype=float), tangent=tangent,
        frame=frame, frame_in_chart=coeff, metric=metric,
        normal_space=normal_space, alpha=alpha, higher_forms=higher,
        normal_flag=normal_flag,
        osculating_dims=[s.dim for s in osculating], derivs=derivs, tol=tol)


def flattened_alpha_restricted(geom: PointGeometry,
                               normal_sub: sub.Subspace) -> np.ndarray:
    """Matrix of X -> alpha_U(X, .) on the frame, for U a normal subspace."""
    if normal_sub.dim == 0:
        return np.zeros((1, geom.n))
    restricted = np.einsum("abN,jN->abj", geom.alpha, normal_sub.basis)
    return restricted.transpose(1, 2, 0).reshape(-1, geom.n)


def relative_nullity(geom: PointGeometry,
                     tol: float | None = None) -> tuple[sub.Subspace, int]:
    """Common kernel of all shape operators, in tangent-frame coordinates."""
    tol = geom.tol if tol is None else tol
    mat = geom.alpha.transpose(1, 2, 0).reshape(-1, geom.n)
    kernel = sub.kernel_of(mat, tol)
    return kernel, kernel.dim


def _nullity_for(a_n1: np.ndarray, u_rows: np.ndarray, tol: float) -> int:
    restricted = np.einsum("ji,abi->abj", u_rows, a_n1)
    mat = restricted.transpose(1, 2, 0).reshape(-1, restricted.shape[0])
    return sub.kernel_of(mat, tol).dim


def s_nullity(geom: PointGeometry, s: int, restarts: int = 32,
              seed: int | np.random.Generator = 0,
              tol: float | None = None,
              hints: list[sub.Subspace] | None = None) -> int:
    """Certified lower bound for the s-nullity.

    Maximizes the kernel dimension of alpha projected to an s-plane inside
    the first normal space, over seeded random starts plus an alternating
    refinement that grows a candidate kernel and re-fits the plane.  Any
    plane found witnesses its kernel dimension, so the result is a lower
    bound; for s equal to the first normal rank it is the relative nullity
    exactly.
    """
    tol = geom.tol if tol is None else tol
    p = geom.first_normal.dim
    if not 1 <= s <= p:
        raise ParameterError(f"s={s} outside 1..{p}")
    if s == p:
        return relative_nullity(geom, tol)[1]
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    n1 = geom.first_normal
    a_n1 = np.einsum("abN,iN->abi", geom.alpha, n1.basis)
    n = geom.n

    def refined(u_rows: np.ndarray) -> int:
        best = _nullity_for(a_n1, u_rows, tol)
        current = u_rows
        for _ in range(4):
            restricted = np.einsum("ji,abi->abj", current, a_n1)
            mat = restricted.transpose(1, 2, 0).reshape(-1, n)
            _, _, vt = np.linalg.svd(mat)
            target = min(best + 1, n)
            cand_kernel = vt[n - target:]
            vals = np.einsum("ka,abi->kbi", cand_kernel, a_n1).reshape(-1, p)
            gram = vals.T @ vals
            evals, evecs = np.linalg.eigh(gram)
            u_new = evecs[:, :s].T
            got = _nullity_for(a_n1, u_new, tol)
            if got > best:
                best, current = got, u_new
            else:
                break
        return best

    candidates: list[np.ndarray] = []
    for hint in hints or []:
        rows = hint.basis @ n1.basis.T
        q = sub.span_of(rows, tol, ambient_dim=p)
        if q.dim == s:
            candidates.append(q.basis)
    eye = np.eye(p)
    candidates.append(eye[:s])
    candidates.append(eye[p - s:])
    for _ in range(max(restarts, 1)):
        q, _ = np.linalg.qr(rng.standard_normal((p, s)))
        candidates.append(q.T)

    return max(refined(u) for u in candidates)


def ricci(geom: PointGeometry, xv) -> float:
    """Ricci curvature Ric(X, X) of the induced metric via the Gauss equation.

    X is given in frame coordinates and must be a unit vector; non-unit input
    is normalized with a warning.
    """
    xv = np.asarray(xv, dtype=float)
    nrm = float(np.linalg.norm(xv))
    if nrm == 0.0:
        raise ParameterError("ricci of the zero vector")
    if abs(nrm - 1.0) > 1e-8:
        warnings.warn("ricci: non-unit tangent vector was normalized",
                      stacklevel=2)
        xv = xv / nrm
    a_xx = np.einsum("a,b,abN->N", xv, xv, geom.alpha)
    a_xi = np.einsum("a,aiN->iN", xv, geom.alpha)
    trace_term = float(np.einsum("N,iiN->", a_xx, geom.alpha))
    return trace_term - float(np.sum(a_xi * a_xi))


def sectional_curvature(geom: PointGeometry, xv, yv) -> float:
    """Sectional curvature of the plane spanned by two frame-coordinate vectors."""
    xv = np.asarray(xv, dtype=float)
    yv = np.asarray(yv, dtype=float)
    a_xx = geom.alpha_of(xv, xv)
    a_yy = geom.alpha_of(yv, yv)
    a_xy = geom.alpha_of(xv, yv)
    numer = float(a_xx @ a_yy - a_xy @ a_xy)
    denom = float((xv @ xv) * (yv @ yv) - (xv @ yv) ** 2)
    if denom <= 1e-12:
        raise ParameterError("sectional curvature of a degenerate plane")
    return numer / denom
