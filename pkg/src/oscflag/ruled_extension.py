"""Ruled extensions from a normal splitting.

Given an orthogonal splitting of the normal bundle into L and P with P
parallel along the kernel distribution D of alpha_P, the derivative span
Gamma of P-sections along E singles out an affine bundle Lambda inside
E + L; translating the base immersion along Lambda yields a ruled extension
whose rulings are D + Lambda and whose normal bundle keeps P constant along
the rulings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import subspaces as sub
from .errors import (DegenerateExtensionError, NumericalRankError,
                     ParameterError)
from .geometry import (ImmersionChart, PointGeometry, point_geometry,
                       projection_frame, flattened_alpha_restricted)
from .nonparallel import nonparallel_data, phi_pairing


def default_splitting_rule(geom: PointGeometry) -> sub.Subspace:
    """L = orthogonal complement of the nonparallelism span inside the first
    normal space (the splitting used by the trichotomy analysis)."""
    nd = nonparallel_data(geom, phi_pairing(geom))
    return sub.complement_within(nd.S, geom.first_normal)


@dataclass(frozen=True)
class PointSplit:
    """The splitting and its derived distributions at one point."""

    geom: PointGeometry = field(repr=False)
    L: sub.Subspace     # ambient
    P: sub.Subspace     # ambient
    D: sub.Subspace     # tangent-frame coordinates
    E: sub.Subspace     # tangent-frame coordinates

    @property
    def ell(self) -> int:
        return self.L.dim

    @property
    def d(self) -> int:
        return self.D.dim

    def d_ambient(self) -> sub.Subspace:
        return sub.Subspace(self.geom.ambient_dim,
                            self.D.basis @ self.geom.frame, self.D.tol_used)

    def e_ambient(self) -> sub.Subspace:
        return sub.Subspace(self.geom.ambient_dim,
                            self.E.basis @ self.geom.frame, self.E.tol_used)


class SplittingSpec:
    """A rule assigning the normal subbundle L at every point of a chart."""

    def __init__(self, chart: ImmersionChart,
                 rule: Callable[[PointGeometry], sub.Subspace] | None = None,
                 max_normal_order: int = 2,
                 tol: float = sub.DEFAULT_RANK_TOL,
                 reference: np.ndarray | None = None,
                 name: str = "default"):
        self.chart = chart
        self.rule = rule or default_splitting_rule
        self.max_normal_order = max_normal_order
        self.tol = tol
        self.reference = reference
        self.name = name

    def at(self, x, geom: PointGeometry | None = None) -> PointSplit:
        if geom is None:
            geom = point_geometry(self.chart, x, self.max_normal_order,
                                  self.tol)
        l_space = self.rule(geom)
        n, big_n = geom.n, geom.ambient_dim
        codim = big_n - n
        if not 0 < l_space.dim < codim:
            raise ParameterError(
                f"splitting needs 0 < rank L < {codim}, got {l_space.dim}")
        residual = sub.containment_residual(l_space, geom.normal_space)
        if residual > 1e-8:
            raise ParameterError(
                f"L is not a normal subspace (residual {residual:.3e})")
        p_space = sub.complement_within(l_space, geom.normal_space)
        d_space = sub.kernel_of(
            flattened_alpha_restricted(geom, p_space), self.tol)
        if d_space.dim == 0:
            raise NumericalRankError(
                "alpha restricted to P has trivial kernel (d = 0)")
        e_space = sub.complement_within(d_space, sub.full(n, self.tol))
        return PointSplit(geom=geom, L=l_space, P=p_space, D=d_space,
                          E=e_space)


@dataclass(frozen=True)
class GammaData:
    split: PointSplit = field(repr=False)
    values: np.ndarray          # (#E basis * #P frame, N) ambient gamma values
    Gamma: sub.Subspace         # ambient
    k: int


def gamma_tensor(spec: SplittingSpec, x, h: float = 1e-3,
                 split: PointSplit | None = None) -> GammaData:
    """Span of the E+L components of ambient derivatives of P-sections.

    The tangential part is a shape-operator contraction (exact); the
    L-component of the normal-connection term is a central difference of a
    pivot-stable P-frame.  The dimension k is checked against the band
    n - d <= k <= n - d + ell.
    """
    if split is None:
        split = spec.at(x)
    geom = split.geom
    p_frame, pivots = projection_frame(split.P, spec.reference)

    sides = {}
    for sgn in (+1.0, -1.0):
        per_dir = []
        for y_coords in split.E.basis:
            w = y_coords @ geom.frame_in_chart
            split_y = spec.at(geom.x + sgn * h * w)
            frame_y, _ = projection_frame(split_y.P, spec.reference,
                                          pivots=pivots)
            per_dir.append(frame_y)
        sides[sgn] = per_dir

    values = []
    e_amb = split.e_ambient()
    for idx, y_coords in enumerate(split.E.basis):
        d_frame = (sides[+1.0][idx] - sides[-1.0][idx]) / (2.0 * h)
        for m in range(p_frame.shape[0]):
            shape_term = geom.shape_operator(p_frame[m]) @ y_coords
            tangential = e_amb.project(shape_term @ geom.frame)
            normal_l = split.L.project(d_frame[m])
            values.append(-tangential + normal_l)
    values = np.array(values) if values else np.zeros((0, geom.ambient_dim))
    gamma = sub.span_of(values, spec.tol, ambient_dim=geom.ambient_dim)
    k = gamma.dim
    n, d, ell = geom.n, split.d, split.ell
    if not n - d <= k <= n - d + ell:
        raise NumericalRankError(
            f"dim Gamma = {k} outside the band [{n - d}, {n - d + ell}]")
    return GammaData(split=split, values=values, Gamma=gamma, k=k)


@dataclass(frozen=True)
class LambdaData:
    Lambda: sub.Subspace        # ambient
    Delta: sub.Subspace         # ambient
    r: int
    lemma_par_angle: float      # smallest angle between Lambda and the tangent


def lambda_delta(spec: SplittingSpec, x, gamma: GammaData) -> LambdaData:
    """Complement Lambda of Gamma inside E + L, and the ruling bundle Delta.

    The smallest principal angle between Lambda and the tangent space is
    returned as a diagnostic: the splitting lemma predicts it is bounded away
    from zero, and a violation falsifies the implementation rather than the
    construction.
    """
    split = gamma.split
    geom = split.geom
    e_plus_l = sub.direct_sum(split.e_ambient(), split.L, spec.tol)
    lam = sub.complement_within(gamma.Gamma, e_plus_l)
    r = lam.dim
    delta = sub.direct_sum(split.d_ambient(), lam, spec.tol)
    angle = sub.smallest_angle_between(lam, geom.tangent) if r else np.pi / 2
    return LambdaData(Lambda=lam, Delta=delta, r=r, lemma_par_angle=angle)


class RuledExtension:
    """The evaluatable extension on base x admissible translation box.

    eval(x, lam) translates the base immersion by the Lambda-frame combination
    at x; it is affine in lam by construction, and the zero section reproduces
    the base chart exactly.
    """

    def __init__(self, spec: SplittingSpec, base_point: np.ndarray,
                 pivots: tuple[int, ...], r: int, lambda_radius: float,
                 fd_step: float = 1e-3):
        self.spec = spec
        self.chart = spec.chart
        self.base_point = np.asarray(base_point, dtype=float)
        self.pivots = pivots
        self.r = r
        self.lambda_radius = lambda_radius
        self.fd_step = fd_step
        self._frames: dict[bytes, tuple[PointSplit, GammaData, LambdaData,
                                        np.ndarray]] = {}

    @property
    def trivial(self) -> bool:
        return self.r == 0

    @property
    def total_dim(self) -> int:
        return self.chart.intrinsic_dim + self.r

    def data_at(self, x):
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        hit = self._frames.get(key)
        if hit is not None:
            return hit
        split = self.spec.at(x)
        gamma = gamma_tensor(self.spec, x, self.fd_step, split=split)
        lam = lambda_delta(self.spec, x, gamma)
        if lam.r != self.r:
            raise NumericalRankError(
                f"rank of Lambda changed from {self.r} to {lam.r} at {x}")
        if self.r:
            frame, _ = projection_frame(lam.Lambda, self.spec.reference,
                                        pivots=self.pivots)
        else:
            frame = np.zeros((0, self.chart.ambient_dim))
        record = (split, gamma, lam, frame)
        if len(self._frames) > 4096:
            self._frames.clear()
        self._frames[key] = record
        return record

    def lambda_frame(self, x) -> np.ndarray:
        return self.data_at(x)[3]

    def eval(self, x, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.r,):
            raise ParameterError(f"lambda coordinates must have length {self.r}")
        base = self.chart.position(x)
        if self.r == 0:
            return base
        return base + lam @ self.lambda_frame(x)

    def jacobian(self, x, lam, h: float | None = None) -> np.ndarray:
        """Rows: d eval / d(base coords) by central differences, then the
        exact Lambda-frame rows."""
        h = self.fd_step if h is None else h
        x = np.asarray(x, dtype=float)
        lam = np.asarray(lam, dtype=float)
        rows = []
        for i in range(self.chart.intrinsic_dim):
            e = np.zeros_like(x)
            e[i] = h
            rows.append((self.eval(x + e, lam) - self.eval(x - e, lam))
                        / (2.0 * h))
        for row in self.lambda_frame(x):
            rows.append(row)
        return np.array(rows)


def build_extension(spec: SplittingSpec, lambda_radius: float,
                    probe_points: list[np.ndarray],
                    fd_step: float = 1e-3,
                    rank_tol: float = 1e-6,
                    min_radius: float = 1e-6) -> RuledExtension:
    """Assemble the extension and shrink the translation box by bisection
    until the Jacobian keeps full rank at every probe point.

    With r = 0 the extension is the base immersion itself, returned as the
    trivial extension.
    """
    if not probe_points:
        raise ParameterError("build_extension needs at least one probe point")
    base = np.asarray(probe_points[0], dtype=float)
    split = spec.at(base)
    gamma = gamma_tensor(spec, base, fd_step, split=split)
    lam = lambda_delta(spec, base, gamma)
    if lam.r == 0:
        return RuledExtension(spec, base, (), 0, 0.0, fd_step)
    _, pivots = projection_frame(lam.Lambda, spec.reference)
    ext = RuledExtension(spec, base, pivots, lam.r, lambda_radius, fd_step)

    def feasible(radius: float) -> bool:
        # eval is affine in the translation coordinates, so the Jacobian
        # along each ray is a linear pencil; a dense sweep of its smallest
        # singular value costs two Jacobian builds per ray and catches rank
        # loss anywhere inside the box, not just at probe shells
        for x in probe_points:
            jac0 = ext.jacobian(x, np.zeros(ext.r))
            floor = np.linalg.svd(jac0, compute_uv=False)[-1]
            for corner in _signed_corners(ext.r):
                jac1 = ext.jacobian(x, radius * corner) - jac0
                for t in np.linspace(0.0, 1.0, 33):
                    svals = np.linalg.svd(jac0 + t * jac1, compute_uv=False)
                    if svals[-1] <= max(rank_tol * svals[0], 0.2 * floor):
                        return False
        return True

    if feasible(lambda_radius):
        return ext
    lo, hi = 0.0, lambda_radius
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if mid < min_radius:
            break
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    if lo < min_radius:
        raise DegenerateExtensionError(
            f"no admissible translation radius above {min_radius}")
    ext.lambda_radius = 0.5 * lo  # stay clear of the rank boundary
    return ext


def _signed_corners(r: int) -> np.ndarray:
    if r == 0:
        return np.zeros((1, 0))
    corners = np.array(np.meshgrid(*([[-1.0, 1.0]] * r))).reshape(r, -1).T
    return corners / np.sqrt(r)


def extension_second_form(ext: RuledExtension, x, lam,
                          h: float = 1e-3) -> dict[str, np.ndarray]:
    """Finite-difference second fundamental form of the extension at (x, lam).

    Richardson-extrapolated central second differences over the base
    coordinates; derivatives involving the translation coordinates reduce to
    first derivatives of the Lambda frame (eval is affine in lam).  Returns
    the tangent rows, the normal-projected form and the raw second
    derivatives, all on coordinate (not orthonormalized) fields.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    n = ext.chart.intrinsic_dim
    r = ext.r
    total = n + r
    big_n = ext.chart.ambient_dim

    def second_base(step: float) -> np.ndarray:
        out = np.zeros((n, n, big_n))
        center = ext.eval(x, lam)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = step
            out[i, i] = (ext.eval(x + ei, lam) - 2.0 * center
                         + ext.eval(x - ei, lam)) / step ** 2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = step
                out[i, j] = (ext.eval(x + ei + ej, lam)
                             - ext.eval(x + ei - ej, lam)
                             - ext.eval(x - ei + ej, lam)
                             + ext.eval(x - ei - ej, lam)) / (4.0 * step ** 2)
                out[j, i] = out[i, j]
        return out

    def frame_derivative(step: float) -> np.ndarray:
        out = np.zeros((n, r, big_n))
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = step
            out[i] = (ext.lambda_frame(x + ei)
                      - ext.lambda_frame(x - ei)) / (2.0 * step)
        return out

    base_h, base_h2 = second_base(h), second_base(h / 2.0)
    second = np.zeros((total, total, big_n))
    second[:n, :n] = (4.0 * base_h2 - base_h) / 3.0
    if r:
        df_h, df_h2 = frame_derivative(h), frame_derivative(h / 2.0)
        mixed = (4.0 * df_h2 - df_h) / 3.0
        second[:n, n:] = mixed
        second[n:, :n] = mixed.transpose(1, 0, 2)
        # second derivatives in the translation coordinates vanish exactly

    jac = ext.jacobian(x, lam, h)
    tangent = sub.span_of(jac, 1e-6, ambient_dim=big_n)
    normal_part = second - np.einsum("ijN,kN,kM->ijM", second,
                                     tangent.basis, tangent.basis)
    return {"jacobian": jac, "tangent": tangent.basis, "alpha": normal_part,
            "raw_second": second}


def integrate_leaf(chart: ImmersionChart, direction_field, x0,
                   arc: float, steps: int = 10) -> np.ndarray:
    """Integrate a chart-coordinate direction field with fixed-step RK4.

    ``direction_field(x)`` must return the chart velocity of the leaf through
    x with a deterministic orientation; returns the end point.
    """
    x = np.asarray(x0, dtype=float).copy()
    dt = arc / steps
    for _ in range(steps):
        k1 = direction_field(x)
        k2 = direction_field(x + 0.5 * dt * k1)
        k3 = direction_field(x + 0.5 * dt * k2)
        k4 = direction_field(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


@dataclass
class ExtensionCheck:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


@dataclass
class ExtensionDiagnostics:
    checks: list[ExtensionCheck]
    details: dict[str, float]

    @property
    def failures(self) -> list[ExtensionCheck]:
        return [c for c in self.checks if not c.passed]


def verify_extension(ext: RuledExtension, samples: list[np.ndarray],
                     tol: float = 1e-5, h: float = 1e-3,
                     seed: int = 0,
                     leaf_arc: float = 0.02) -> ExtensionDiagnostics:
    """Numerical audit of the advertised extension properties.

    At each sampled base point (with a seeded translation coordinate):
    straightness of the translation directions and of the D-leaves, the
    containment of P in the extension's normal spaces, the kernel identity
    for alpha restricted to P, integrability of D, and constancy of P along
    the rulings.
    """
    rng = np.random.default_rng(seed)
    checks: list[ExtensionCheck] = []
    details: dict[str, float] = {}

    roundtrip = 0.0
    affine = 0.0
    leaf_straightness = 0.0
    delta_parallel = 0.0
    p_in_normal = 0.0
    kernel_angle = 0.0
    commutator = 0.0
    p_constancy = 0.0

    for sample_idx, x in enumerate(samples):
        x = np.asarray(x, dtype=float)
        split, _, lam_data, frame = ext.data_at(x)
        geom = split.geom
        lam = rng.uniform(-1.0, 1.0, ext.r) * ext.lambda_radius \
            if ext.r else np.zeros(0)

        fx = ext.chart.position(x)
        roundtrip = max(roundtrip, float(np.linalg.norm(
            ext.eval(x, np.zeros(ext.r)) - fx)))
        if ext.r:
            affine = max(affine, float(np.linalg.norm(
                ext.eval(x, lam) - fx - lam @ frame)))

        delta = lam_data.Delta

        # D-leaf: integrate the kernel distribution and test that the image
        # stays inside the affine subspace spanned by Delta, that Delta and P
        # are parallel along the leaf, and that Lambda stays inside Delta.
        d_dim = split.D.dim

        def d_field(y, _ref=split.D.basis[0] @ geom.frame):
            # follow the projection of a fixed ambient ruling direction onto
            # the current kernel distribution, at unit ambient speed
            split_y = ext.spec.at(y)
            g_y = split_y.geom
            amb = sub.Subspace(g_y.ambient_dim, split_y.D.basis @ g_y.frame)
            proj = amb.project(_ref)
            coords = g_y.tangent_coords(proj)
            return (coords @ g_y.frame_in_chart) / np.linalg.norm(proj)

        if d_dim:
            y_end = integrate_leaf(ext.chart, d_field, x, leaf_arc)
            reach = ext.chart.position(y_end) - fx
            leaf_straightness = max(leaf_straightness, float(
                np.linalg.norm(delta.reject(reach)) / max(np.linalg.norm(reach),
                                                          1e-12)))
            split_end = ext.spec.at(y_end)
            gamma_end = gamma_tensor(ext.spec, y_end, ext.fd_step,
                                     split=split_end)
            lam_end = lambda_delta(ext.spec, y_end, gamma_end)
            if lam_end.Delta.dim == delta.dim:
                delta_parallel = max(delta_parallel, float(np.max(
                    sub.principal_angles(lam_end.Delta, delta), initial=0.0)))
            else:
                delta_parallel = max(delta_parallel, np.pi / 2)
            p_constancy = max(p_constancy, float(np.max(
                sub.principal_angles(split_end.P, split.P), initial=0.0))
                if split_end.P.dim == split.P.dim else np.pi / 2)

        # P inside the normal space of the extension at (x, lam).
        jac = ext.jacobian(x, lam, h)
        t_span = sub.span_of(jac, 1e-6, ambient_dim=ext.chart.ambient_dim)
        p_in_normal = max(p_in_normal, float(np.max(np.linalg.norm(
            t_span.project(split.P.basis), axis=1), initial=0.0)))

        # Delta equals the kernel of alpha restricted to P.
        forms = extension_second_form(ext, x, lam, h)
        alpha_p = np.einsum("ijN,kN->ijk", forms["alpha"], split.P.basis)
        total = ext.total_dim
        mat = alpha_p.transpose(1, 2, 0).reshape(-1, total)
        kern = sub.kernel_of(mat, 1e-4)
        kern_ambient = sub.span_of(kern.basis @ forms["jacobian"], 1e-8,
                                   ambient_dim=ext.chart.ambient_dim)
        if kern_ambient.dim == delta.dim:
            kernel_angle = max(kernel_angle, float(np.max(
                sub.principal_angles(kern_ambient, delta), initial=0.0)))
        else:
            kernel_angle = max(kernel_angle, np.pi / 2)
        details[f"nu_ext_{sample_idx}"] = float(
            sub.kernel_of(forms["alpha"].transpose(1, 2, 0)
                          .reshape(-1, total), 1e-4).dim)

        # Integrability of D: commutators of D-frame fields stay inside D.
        if d_dim >= 2:
            commutator = max(commutator,
                             _commutator_residual(ext.spec, split, h))

    checks.append(ExtensionCheck("roundtrip-zero-section", roundtrip, 1e-12))
    if ext.r:
        checks.append(ExtensionCheck("affine-in-translation", affine, 1e-12))
    checks.append(ExtensionCheck("leaf-straightness", leaf_straightness,
                                 max(tol, 50.0 * leaf_arc ** 2)))
    checks.append(ExtensionCheck("delta-parallel-along-leaf", delta_parallel,
                                 max(tol, 50.0 * leaf_arc ** 2)))
    checks.append(ExtensionCheck("p-inside-extension-normal", p_in_normal,
                                 max(tol, 100.0 * h ** 2)))
    checks.append(ExtensionCheck("delta-is-kernel-of-alpha-p", kernel_angle,
                                 tol))
    checks.append(ExtensionCheck("d-integrability", commutator,
                                 max(tol, 100.0 * h)))
    checks.append(ExtensionCheck("p-constant-along-rulings", p_constancy,
                                 max(tol, 50.0 * leaf_arc ** 2)))
    return ExtensionDiagnostics(checks, details)


def _commutator_residual(spec: SplittingSpec, split: PointSplit,
                         h: float) -> float:
    """Residual of [W_i, W_j] staying inside D, for a pivot-stable D-frame."""
    geom = split.geom
    n = geom.n
    x = geom.x
    _, pivots = projection_frame(split.D)

    def d_frame_chart(y) -> np.ndarray:
        split_y = spec.at(y)
        frame_y, _ = projection_frame(split_y.D, pivots=pivots)
        return frame_y @ split_y.geom.frame_in_chart

    center = d_frame_chart(x)
    jacobians = np.zeros((split.D.dim, n, n))  # field, component, d/dx
    for c in range(n):
        e = np.zeros(n)
        e[c] = h
        jacobians[:, :, c] = (d_frame_chart(x + e) - d_frame_chart(x - e)) \
            / (2.0 * h)

    worst = 0.0
    d_chart_span = sub.span_of(center, 1e-8, ambient_dim=n)
    for i in range(split.D.dim):
        for j in range(i + 1, split.D.dim):
            bracket = jacobians[j] @ center[i] - jacobians[i] @ center[j]
            worst = max(worst, float(np.linalg.norm(
                d_chart_span.reject(bracket))))
    return worst
