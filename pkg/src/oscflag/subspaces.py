"""Rank-revealing subspace numerics: spans, complements, angles, kernels.

Every subspace is stored as an orthonormal row basis together with the
relative singular-value threshold that determined its dimension, so every
rank decision made downstream is auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContainmentError, DataError, ParameterError, ShapeError

DEFAULT_RANK_TOL = 1e-8


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of R^ambient_dim with an orthonormal row basis."""

    ambient_dim: int
    basis: np.ndarray  # shape (dim, ambient_dim), orthonormal rows
    tol_used: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        if self.basis.size and self.basis.shape[1] != self.ambient_dim:
            raise ShapeError("basis width differs from ambient dimension")
        self.basis.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def project(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.ambient_dim:
            raise ShapeError(
                f"vector of length {v.shape[-1]} in R^{self.ambient_dim}")
        if self.dim == 0:
            return np.zeros_like(v)
        return (v @ self.basis.T) @ self.basis

    def reject(self, v: np.ndarray) -> np.ndarray:
        """Component of v orthogonal to the subspace."""
        return np.asarray(v, dtype=float) - self.project(v)

    def contains(self, other: Subspace, tol: float = 1e-8) -> bool:
        return containment_residual(other, self) < tol


def trivial(ambient_dim: int, tol: float = DEFAULT_RANK_TOL) -> Subspace:
    return Subspace(ambient_dim, np.zeros((0, ambient_dim)), tol)


def full(ambient_dim: int, tol: float = DEFAULT_RANK_TOL) -> Subspace:
    return Subspace(ambient_dim, np.eye(ambient_dim), tol)


def span_of(vectors, tol: float = DEFAULT_RANK_TOL,
            ambient_dim: int | None = None) -> Subspace:
    """Numerically detected span of a family of ambient vectors.

    Singular values below ``tol`` times the largest are treated as zero.
    An empty family yields the zero subspace (ambient_dim must then be given).
    """
    if not 0.0 < tol < 1.0:
        raise ParameterError("rank tolerance must lie in (0, 1)")
    rows = np.atleast_2d(np.asarray(vectors, dtype=float))
    if rows.size == 0:
        if ambient_dim is None:
            raise ShapeError("empty input needs an explicit ambient_dim")
        return trivial(ambient_dim, tol)
    if not np.all(np.isfinite(rows)):
        raise DataError("span_of received non-finite input")
    _, svals, vt = np.linalg.svd(rows, full_matrices=False)
    if svals.size == 0 or svals[0] == 0.0:
        return trivial(rows.shape[1], tol)
    rank = int(np.sum(svals > tol * svals[0]))
    return Subspace(rows.shape[1], vt[:rank].copy(), tol)


def project(space: Subspace, v: np.ndarray) -> np.ndarray:
    return space.project(v)


def containment_residual(inner: Subspace, outer: Subspace) -> float:
    """Worst norm of an inner basis vector's component outside ``outer``."""
    if inner.ambient_dim != outer.ambient_dim:
        raise ShapeError("containment check across different ambient spaces")
    if inner.dim == 0:
        return 0.0
    rejected = inner.basis - outer.project(inner.basis)
    return float(np.max(np.linalg.norm(rejected, axis=1)))


def complement_within(inner: Subspace, outer: Subspace,
                      tol: float = 1e-8) -> Subspace:
    """Orthogonal complement of ``inner`` inside ``outer``.

    Requires inner to be contained in outer up to the containment tolerance;
    the result has dimension dim(outer) - dim(inner) by construction.
    """
    residual = containment_residual(inner, outer)
    if residual >= tol:
        raise ContainmentError(
            f"subspace not contained (worst residual {residual:.3e})", residual)
    k = outer.dim - inner.dim
    if k == 0:
        return trivial(outer.ambient_dim, outer.tol_used)
    rejected = outer.basis - inner.project(outer.basis)
    _, svals, vt = np.linalg.svd(rejected, full_matrices=False)
    return Subspace(outer.ambient_dim, vt[:k].copy(), outer.tol_used)


def direct_sum(a: Subspace, b: Subspace,
               tol: float = DEFAULT_RANK_TOL) -> Subspace:
    if a.dim == 0:
        return b
    if b.dim == 0:
        return a
    return span_of(np.vstack([a.basis, b.basis]), tol)


def principal_angles(a: Subspace, b: Subspace) -> np.ndarray:
    """Canonical angles between two subspaces, nondecreasing, in [0, pi/2].

    Cosine/sine hybrid: large angles come from the SVD of the basis overlap,
    small ones from the SVD of the projection residual, which resolves them
    at rounding level instead of the square-root-of-eps limit of arccos.
    All angles below ~1e-6 together with equal dimensions certifies equality
    at the accuracy of the underlying data.
    """
    if a.ambient_dim != b.ambient_dim:
        raise ShapeError("principal angles across different ambient spaces")
    if a.dim > b.dim:
        a, b = b, a
    k = a.dim
    if k == 0:
        return np.zeros(0)
    cosines = np.clip(np.linalg.svd(a.basis @ b.basis.T,
                                    compute_uv=False), 0.0, 1.0)
    # singular values of the rejected basis are the sines of the same angles
    rejected = a.basis - (a.basis @ b.basis.T) @ b.basis
    sines = np.clip(np.sort(np.linalg.svd(rejected, compute_uv=False)),
                    0.0, 1.0)
    angles = np.where(cosines ** 2 >= 0.5, np.arcsin(sines),
                      np.arccos(cosines))
    return np.sort(angles)[:k]


def subspaces_equal(a: Subspace, b: Subspace, angle_tol: float = 1e-6) -> bool:
    if a.dim != b.dim:
        return False
    if a.dim == 0:
        return True
    return float(np.max(principal_angles(a, b))) < angle_tol


def smallest_angle_between(a: Subspace, b: Subspace) -> float:
    """Smallest principal angle; pi/2 when either space is trivial."""
    if min(a.dim, b.dim) == 0:
        return np.pi / 2
    return float(principal_angles(a, b)[0])


def intersection(a: Subspace, b: Subspace,
                 angle_tol: float = 1e-8) -> Subspace:
    """Numerical intersection: principal directions at angle below tol.

    Implemented through the principal-angle decomposition rather than a
    stacked-projector nullspace, which stays well conditioned for
    near-degenerate pairs.
    """
    if a.ambient_dim != b.ambient_dim:
        raise ShapeError("intersection across different ambient spaces")
    if min(a.dim, b.dim) == 0:
        return trivial(a.ambient_dim, a.tol_used)
    # sine-accurate angles decide the count; the cosine SVD (ordered by
    # decreasing cosine = increasing angle) supplies the directions
    count = int(np.sum(principal_angles(a, b) < angle_tol))
    if count == 0:
        return trivial(a.ambient_dim, a.tol_used)
    u, _, _ = np.linalg.svd(a.basis @ b.basis.T)
    return Subspace(a.ambient_dim, u[:, :count].T @ a.basis, a.tol_used)


def kernel_of(matrix, tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """Right null space of a matrix on orthonormal bases, at relative tol."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    n = matrix.shape[1]
    if matrix.shape[0] == 0 or not np.any(matrix):
        return full(n, tol)
    _, svals, vt = np.linalg.svd(matrix)
    rank = int(np.sum(svals > tol * svals[0]))
    return Subspace(n, vt[rank:].copy(), tol)


@dataclass(frozen=True)
class BilinearForm:
    """A bilinear form V x U -> W stored as a value table on chosen bases."""

    values: np.ndarray  # shape (dim V, dim U, dim W)

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ShapeError("bilinear form table must be a 3-tensor")
        self.values.flags.writeable = False

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    def left_contract(self, z: np.ndarray) -> np.ndarray:
        """The map beta_Z = beta(Z, .) as a (dim U, dim W) matrix."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.values.shape[0],):
            raise ShapeError("left vector length differs from dim V")
        return np.tensordot(z, self.values, axes=(0, 0))

    def rank_of(self, z: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
        svals = np.linalg.svd(self.left_contract(z), compute_uv=False)
        if svals.size == 0 or svals[0] == 0.0:
            return 0
        return int(np.sum(svals > tol * svals[0]))


@dataclass(frozen=True)
class RegularElement:
    """A left vector attaining the sampled maximal rank of beta_Z."""

    z: np.ndarray
    rank: int
    trials_used: int


def regular_element(form: BilinearForm, trials: int = 64,
                    seed: int | np.random.Generator = 0,
                    tol: float = DEFAULT_RANK_TOL) -> RegularElement:
    """Search for a regular element by seeded sampling plus local refinement.

    Regular elements form an open dense subset of V, so unit-sphere sampling
    attains the maximal rank with overwhelming probability; a few shrinking
    perturbation rounds around the best sample guard against unlucky draws.
    The best vector found is always returned together with its rank.
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    dim_v = form.dims[0]
    max_possible = min(form.dims[1], form.dims[2])

    best_z = np.zeros(dim_v)
    best_z[0] = 1.0
    best_rank = form.rank_of(best_z, tol)
    used = 1
    for _ in range(trials):
        z = rng.standard_normal(dim_v)
        z /= np.linalg.norm(z)
        used += 1
        r = form.rank_of(z, tol)
        if r > best_rank:
            best_rank, best_z = r, z
        if best_rank == max_possible:
            break
    if best_rank < max_possible:
        for scale in (0.3, 0.1, 0.03):
            for _ in range(8):
                z = best_z + scale * rng.standard_normal(dim_v)
                z /= np.linalg.norm(z)
                used += 1
                r = form.rank_of(z, tol)
                if r > best_rank:
                    best_rank, best_z = r, z
    return RegularElement(best_z, best_rank, used)


def moore_check(form: BilinearForm, z: np.ndarray,
                tol: float = DEFAULT_RANK_TOL) -> float:
    """Residual of the regular-element image property at Z.

    Returns the largest norm, over basis vectors v of V and u of ker beta_Z,
    of the component of beta(v, u) outside the image beta_Z(U).  For a
    regular Z this must vanish.
    """
    bz = form.left_contract(np.asarray(z, dtype=float))
    image = span_of(bz, tol, ambient_dim=form.dims[2])
    kernel = kernel_of(bz.T, tol)  # right kernel: vectors u with beta_Z u = 0
    if kernel.dim == 0:
        return 0.0
    worst = 0.0
    for v in np.eye(form.dims[0]):
        bv = form.left_contract(v)  # (dim U, dim W)
        vals = kernel.basis @ bv    # beta(v, u) for u in kernel basis
        worst = max(worst, float(np.max(np.linalg.norm(
            image.reject(vals), axis=1), initial=0.0)))
    return worst
