"""The catalog of exactly constructed example submanifolds.

Each entry packages an analytic chart (evaluated through jets), the declared
invariants it is expected to satisfy, a point sampler, and any auxiliary
structure needed by the verification checks (base surfaces, transported
frames, splitting exercises).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import subspaces as sub
from .errors import DataError, DegenerateExtensionError, ParameterError
from .geometry import ImmersionChart, box
from .jets import (Jet, compose_series, jet_constant, jet_cos,
                   jet_reciprocal, jet_rsqrt, jet_sin)

# ---------------------------------------------------------------------------
# Complex helpers over pairs of jets


def _cmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _cadd(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _csub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _cconj(a):
    return (a[0], -1.0 * a[1])


def _cscale(a, s):
    """Scale a complex pair by a real jet or float."""
    return (a[0] * s, a[1] * s)


def _herm(vec_a, vec_b):
    """Hermitian inner product sum_j a_j * conj(b_j) of complex jet vectors."""
    acc = None
    for a, b in zip(vec_a, vec_b):
        term = _cmul(a, _cconj(b))
        acc = term if acc is None else _cadd(acc, term)
    return acc


def _habs2(vec):
    """Real jet |vec|^2 for a complex jet vector."""
    acc = None
    for a in vec:
        term = a[0] * a[0] + a[1] * a[1]
        acc = term if acc is None else acc + term
    return acc


# ---------------------------------------------------------------------------
# Catalog data structures


@dataclass(frozen=True)
class Expectation:
    """A declared invariant: a check id, its parameters, and a label."""

    check: str
    params: dict
    description: str


@dataclass(frozen=True)
class SplitExercise:
    """A normal-splitting rule to push through the ruled-extension pipeline."""

    name: str
    rule: Callable  # (geom) -> Subspace, the L choice
    expected: dict  # k, r, and optional n1f_rank / nu_ext / delta_in_nullity
    lambda_radius: float = 0.1


@dataclass
class CatalogEntry:
    name: str
    params: dict
    description: str
    chart: ImmersionChart
    max_normal_order: int
    substantial: bool
    expected: list[Expectation]
    sampler: Callable[[np.random.Generator], np.ndarray]
    ruled: bool = False
    ruling_from: str = "none"  # "D" or "nullity"
    split_exercises: list[SplitExercise] = dc_field(default_factory=list)
    aux: dict = dc_field(default_factory=dict)
    notes: str = ""

    def param_string(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"


# ---------------------------------------------------------------------------
# Calibration charts


def _sphere_chart(n: int) -> ImmersionChart:
    lo, hi = 0.6, math.pi - 0.6

    def fn(vars_: list[Jet]) -> list[Jet]:
        comps = []
        running = None
        for theta in vars_:
            c, s = jet_cos(theta), jet_sin(theta)
            comps.append(c if running is None else running * c)
            running = s if running is None else running * s
        comps.append(running)
        return comps

    return ImmersionChart(f"sphere-{n}", n, n + 1,
                          box([lo] * n, [hi] * n), fn, max_order=8)


def make_calibration(kind: str, n: int = 2, seed: int = 0) -> CatalogEntry:
    """Null-hypothesis charts: unit sphere, affine plane, flat product torus."""
    if kind == "sphere":
        chart = _sphere_chart(n)
        expected = [
            Expectation("first_normal_rank", {"expected": 1},
                        "totally umbilic: rank-one first normal space"),
            Expectation("flag_dims", {"stages": [1], "total": None},
                        "flag stops after the first normal space"),
            Expectation("phi_absent", {},
                        "no complement: not locally substantial beyond the "
                        "first normal space"),
            Expectation("umbilic_sphere", {"tol": 1e-10},
                        "alpha(X, Y) = -<X, Y> times the position normal"),
            Expectation("ricci_constant", {"expected": float(n - 1),
                                           "tol": 1e-9, "count": 50},
                        "constant Ricci curvature n - 1"),
            Expectation("case_label", {"expected": "parallel"},
                        "no nonparallelism data"),
        ]
        return CatalogEntry(
            name="sphere", params={"n": n},
            description="unit sphere, totally umbilic calibration",
            chart=chart, max_normal_order=2, substantial=True,
            expected=expected,
            sampler=lambda rng: chart.domain.sample(rng, margin=0.05))

    if kind == "flat":
        rng = np.random.default_rng(seed)
        big_n = 5
        basis, _ = np.linalg.qr(rng.standard_normal((big_n, 2)))
        shift = rng.standard_normal(big_n)

        def fn(vars_: list[Jet]) -> list[Jet]:
            return [vars_[0] * basis[j, 0] + vars_[1] * basis[j, 1] + shift[j]
                    for j in range(big_n)]

        chart = ImmersionChart("flat-plane", 2, big_n,
                               box([-1.0, -1.0], [1.0, 1.0]), fn, max_order=8)
        expected = [
            Expectation("alpha_zero", {"tol": 1e-12},
                        "totally geodesic: vanishing second fundamental form"),
            Expectation("flag_dims", {"stages": [], "total": None},
                        "empty normal flag"),
            Expectation("nu", {"expected": 2}, "full relative nullity"),
            Expectation("case_label", {"expected": "parallel"},
                        "nothing to be nonparallel"),
        ]
        return CatalogEntry(
            name="flat", params={},
            description="affine plane, totally geodesic calibration",
            chart=chart, max_normal_order=2, substantial=False,
            expected=expected,
            sampler=lambda rng: chart.domain.sample(rng, margin=0.05),
            ruled=True, ruling_from="nullity")

    if kind == "product-torus":
        consts = (0.3, -0.2)

        def fn(vars_: list[Jet]) -> list[Jet]:
            u, v = vars_
            return [jet_cos(u), jet_sin(u), jet_cos(v), jet_sin(v),
                    jet_constant(u.num_vars, u.order, consts[0]),
                    jet_constant(u.num_vars, u.order, consts[1])]

        chart = ImmersionChart("flat-torus-r4-in-r6", 2, 6,
                               box([0.3, 0.3], [5.9, 5.9]), fn, max_order=8)
        expected = [
            Expectation("first_normal_rank", {"expected": 2},
                        "product of two circles"),
            Expectation("phi_zero", {"tol": 1e-9},
                        "parallel first normal bundle: phi vanishes"),
            Expectation("case_label", {"expected": "parallel"},
                        "parallel case"),
            Expectation("sectional_flat", {"tol": 1e-10, "count": 10},
                        "intrinsically flat"),
            Expectation("flag_dims", {"stages": [2], "total": None},
                        "flag stops inside the four-dimensional factor"),
        ]
        return CatalogEntry(
            name="product-torus", params={},
            description="flat torus in a four-space, included in six-space: "
                        "parallel first normal bundle",
            chart=chart, max_normal_order=2, substantial=False,
            expected=expected,
            sampler=lambda rng: chart.domain.sample(rng, margin=0.05))

    raise ParameterError(f"unknown calibration kind {kind!r}")


# ---------------------------------------------------------------------------
# Curve with a parallel normal subbundle


class CurveSystem:
    """A seeded trigonometric curve with parallel-transported normal fields.

    The parallel transport equation for a normal field along the curve keeps
    only the tangential part of the ambient derivative; it is integrated with
    fixed-step RK4 over the window, with a joint re-orthonormalization every
    ``renorm_every`` steps to control drift.  Taylor jets of the fields at
    arbitrary parameters are reconstructed exactly from the ODE by Picard
    iteration in jet space, seeded with the integrated value.
    """

    FREQS = (1, 2, 3)

    def __init__(self, ambient_dim: int, num_fields: int, seed: int,
                 window: tuple[float, float] = (0.0, 1.0),
                 step: float = 1e-3, renorm_every: int = 100):
        self.ambient_dim = ambient_dim
        self.num_fields = num_fields
        self.seed = seed
        self.window = window
        self.step = step
        self.renorm_every = renorm_every
        for attempt in range(16):
            rng = np.random.default_rng(seed + 1000 * attempt)
            scale = 1.0 / math.sqrt(ambient_dim)
            self.cos_coef = rng.normal(size=(ambient_dim, len(self.FREQS)))
            self.sin_coef = rng.normal(size=(ambient_dim, len(self.FREQS)))
            for i, k in enumerate(self.FREQS):
                self.cos_coef[:, i] *= scale / k
                self.sin_coef[:, i] *= scale / k
            if self._generic_enough():
                break
        else:
            raise DataError("could not seed a curve with nonvanishing "
                            "curvature on the window")
        self._init_fields(rng)
        self._integrate_grid()
        self._jet_cache: dict[tuple[float, int], np.ndarray] = {}

    # -- curve evaluation -------------------------------------------------

    def curve_derivative(self, t: float, order: int) -> np.ndarray:
        """Exact derivative of the curve: d^order c / dt^order."""
        out = np.zeros(self.ambient_dim)
        for i, k in enumerate(self.FREQS):
            phase = order * math.pi / 2.0
            kn = float(k) ** order
            out += self.cos_coef[:, i] * kn * math.cos(k * t + phase)
            out += self.sin_coef[:, i] * kn * math.sin(k * t + phase)
        return out

    def curve_taylor(self, t0: float, order: int) -> np.ndarray:
        """Taylor coefficients of the curve components at t0, shape (N, K+1)."""
        cols = [self.curve_derivative(t0, m) / math.factorial(m)
                for m in range(order + 1)]
        return np.column_stack(cols)

    def _generic_enough(self) -> bool:
        ts = np.linspace(*self.window, 101)
        for t in ts:
            d1 = self.curve_derivative(t, 1)
            d2 = self.curve_derivative(t, 2)
            speed = np.linalg.norm(d1)
            if speed < 0.25:
                return False
            normal_part = d2 - (d2 @ d1) / (speed ** 2) * d1
            if np.linalg.norm(normal_part) / speed ** 2 < 0.05:
                return False
        return True

    # -- parallel transport ------------------------------------------------

    def _rhs(self, t: float, fields: np.ndarray) -> np.ndarray:
        d1 = self.curve_derivative(t, 1)
        d2 = self.curve_derivative(t, 2)
        return -np.outer(fields @ d2, d1) / float(d1 @ d1)

    def _renormalize(self, t: float, fields: np.ndarray) -> np.ndarray:
        d1 = self.curve_derivative(t, 1)
        unit = d1 / np.linalg.norm(d1)
        fields = fields - np.outer(fields @ unit, unit)
        gram = fields @ fields.T
        evals, evecs = np.linalg.eigh(gram)
        inv_sqrt = evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T
        return inv_sqrt @ fields

    def _rk4_step(self, t: float, fields: np.ndarray, h: float) -> np.ndarray:
        k1 = self._rhs(t, fields)
        k2 = self._rhs(t + 0.5 * h, fields + 0.5 * h * k1)
        k3 = self._rhs(t + 0.5 * h, fields + 0.5 * h * k2)
        k4 = self._rhs(t + h, fields + h * k3)
        return fields + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def _init_fields(self, rng: np.random.Generator):
        t0 = self.window[0]
        d1 = self.curve_derivative(t0, 1)
        unit = d1 / np.linalg.norm(d1)
        raw = rng.standard_normal((self.num_fields, self.ambient_dim))
        raw -= np.outer(raw @ unit, unit)
        q, _ = np.linalg.qr(raw.T)
        self._fields0 = q.T[:self.num_fields].copy()

    def _integrate_grid(self):
        t0, t1 = self.window
        steps = int(round((t1 - t0) / self.step))
        grid = np.empty((steps + 1, self.num_fields, self.ambient_dim))
        fields = self._fields0.copy()
        grid[0] = fields
        t = t0
        for i in range(1, steps + 1):
            fields = self._rk4_step(t, fields, self.step)
            t = t0 + i * self.step
            if i % self.renorm_every == 0:
                fields = self._renormalize(t, fields)
            grid[i] = fields
        self.grid = grid
        self.grid_steps = steps

    def fields_at(self, t: float) -> np.ndarray:
        """Transported frame at parameter t, shape (num_fields, N)."""
        t0 = self.window[0]
        idx = int(math.floor((t - t0) / self.step + 1e-12))
        idx = max(0, min(idx, self.grid_steps))
        base_t = t0 + idx * self.step
        fields = self.grid[idx]
        remainder = t - base_t
        if abs(remainder) < 1e-15:
            return fields
        substeps = max(1, int(math.ceil(abs(remainder) / self.step - 1e-12)))
        h = remainder / substeps
        tt = base_t
        for _ in range(substeps):
            fields = self._rk4_step(tt, fields, h)
            tt += h
        return fields

    def orthonormality_drift(self) -> float:
        eye = np.eye(self.num_fields)
        worst = 0.0
        for i in range(0, self.grid_steps + 1, 25):
            gram = self.grid[i] @ self.grid[i].T
            worst = max(worst, float(np.max(np.abs(gram - eye))))
        return worst

    def field_taylor(self, t0: float, order: int) -> np.ndarray:
        """Exact Taylor coefficients of the transported fields at t0.

        Picard iteration in single-variable jets: each sweep of
        xi <- xi(t0) + antiderivative(rhs(xi, t)) fixes one more coefficient,
        so order+1 sweeps reproduce the full truncated expansion.  Shape
        (num_fields, N, order+1).
        """
        key = (round(float(t0), 15), order)
        hit = self._jet_cache.get(key)
        if hit is not None:
            return hit
        from .jets import antiderivative, variables

        values = self.fields_at(t0)
        (t_jet,) = variables([t0], order)
        c1 = [compose_series(t_jet, row) for row in
              self.curve_taylor_shifted(t0, order, 1)]
        c2 = [compose_series(t_jet, row) for row in
              self.curve_taylor_shifted(t0, order, 2)]
        speed2 = None
        for comp in c1:
            speed2 = comp * comp if speed2 is None else speed2 + comp * comp
        inv_speed2 = jet_reciprocal(speed2)

        out = np.empty((self.num_fields, self.ambient_dim, order + 1))
        for fidx in range(self.num_fields):
            xi = [jet_constant(1, order, values[fidx, j])
                  for j in range(self.ambient_dim)]
            for _ in range(order + 1):
                pairing = None
                for j in range(self.ambient_dim):
                    term = xi[j] * c2[j]
                    pairing = term if pairing is None else pairing + term
                factor = pairing * inv_speed2 * (-1.0)
                xi = [antiderivative(factor * c1[j], values[fidx, j])
                      for j in range(self.ambient_dim)]
            for j in range(self.ambient_dim):
                out[fidx, j] = xi[j].coeffs
        if len(self._jet_cache) > 256:
            self._jet_cache.clear()
        self._jet_cache[key] = out
        return out

    def curve_taylor_shifted(self, t0: float, order: int,
                             shift: int) -> np.ndarray:
        """Taylor coefficients of the shift-th derivative of the curve."""
        cols = [self.curve_derivative(t0, m + shift) / math.factorial(m)
                for m in range(order + 1)]
        return np.column_stack(cols)


def _curve_chart_fn(system: CurveSystem, n: int):
    def fn(vars_: list[Jet]) -> list[Jet]:
        t_jet = vars_[0]
        s_jets = vars_[1:n]
        order = t_jet.order
        t0 = t_jet.value
        ccoef = system.curve_taylor(t0, order)
        fcoef = system.field_taylor(t0, order)
        comps = []
        for j in range(system.ambient_dim):
            acc = compose_series(t_jet, ccoef[j])
            for i, s_jet in enumerate(s_jets):
                acc = acc + s_jet * compose_series(t_jet, fcoef[i, j])
            comps.append(acc)
        return comps
    return fn


def make_curve_parallel_subbundle(n: int = 3, big_n: int = 8,
                                  seed: int = 11) -> CatalogEntry:
    """Normal-exponential image of a parallel rank-(n-1) normal subbundle
    along a seeded curve with nonvanishing curvature.

    Three extra parallel witness fields are transported alongside the chart
    fields; they stay normal to the image and feed the splitting exercises.
    """
    if not 2 <= n <= big_n - 1:
        raise ParameterError("need 2 <= n <= N - 1")
    witnesses = 3 if big_n - 1 >= (n - 1) + 3 else 0
    system = CurveSystem(big_n, n - 1 + witnesses, seed)

    s_radius = 0.08
    lo = [system.window[0] + 0.05] + [-s_radius] * (n - 1)
    hi = [system.window[1] - 0.05] + [s_radius] * (n - 1)
    chart = ImmersionChart(f"curve-parallel-{n}-{big_n}", n, big_n,
                           box(lo, hi), _curve_chart_fn(system, n),
                           max_order=big_n - 1)

    max_normal_order = big_n - n  # flag exhausts the ambient space
    expected = [
        Expectation("first_normal_rank", {"expected": 1},
                    "curvature spans a single normal direction"),
        Expectation("s_rank", {"expected": 1},
                    "rank-one nonparallel first normal bundle"),
        Expectation("case_label", {"expected": "case-i"},
                    "full nonparallelism rank: nullity case"),
        Expectation("nu", {"expected": n - 1},
                    "relative nullity index n - 1"),
        Expectation("sectional_flat", {"tol": 1e-8, "count": 20},
                    "flat induced metric"),
        Expectation("transport_orthonormality", {"tol": 1e-9},
                    "parallel transport preserves inner products"),
        Expectation("flag_dims", {"stages": None, "total": big_n},
                    "osculating flag exhausts the ambient space"),
    ]

    def sampler(rng: np.random.Generator) -> np.ndarray:
        return chart.domain.sample(rng, margin=0.01)

    def witness_rule(indices: tuple[int, ...], rotate: bool = False):
        def rule(geom) -> sub.Subspace:
            t = float(geom.x[0])
            fields = system.fields_at(t)
            if rotate:
                theta = 3.0 * t
                first = math.cos(theta) * fields[indices[0]] \
                    + math.sin(theta) * fields[indices[1]]
                rows = [first] + [fields[i] for i in indices[2:]]
            else:
                rows = [fields[i] for i in indices]
            return sub.span_of(np.array(rows), 1e-10)
        return rule

    exercises = []
    if witnesses == 3:
        w = n - 1  # first witness index
        exercises = [
            SplitExercise(
                name="parallel-line",
                rule=witness_rule((w,)),
                expected={"k": 1, "r": 1, "n1f_rank": 1, "nu_ext": n,
                          "delta_in_nullity": True},
                lambda_radius=0.08),
            SplitExercise(
                name="rotating-line",
                rule=witness_rule((w, w + 1), rotate=True),
                expected={"k": 2, "r": 0},
                lambda_radius=0.08),
            SplitExercise(
                name="mixed-pair",
                rule=witness_rule((w, w + 1, w + 2), rotate=True),
                expected={"k": 2, "r": 1, "n1f_rank": 1, "nu_ext": n,
                          "script_l_rank": 1},
                lambda_radius=0.08),
        ]

    return CatalogEntry(
        name="curve-parallel", params={"n": n, "N": big_n},
        description="image of a parallel normal subbundle over a curve with "
                    "nonvanishing curvature (rank-one nonparallel case)",
        chart=chart, max_normal_order=max_normal_order, substantial=True,
        expected=expected, sampler=sampler, ruled=True, ruling_from="nullity",
        split_exercises=exercises, aux={"system": system})


# ---------------------------------------------------------------------------
# Holomorphic curve surfaces and their ruled thickenings


def _psi_powers(u: Jet, v: Jet, top: int):
    """Complex powers z^0..z^top for z = u + iv, as jet pairs."""
    one = (jet_constant(u.num_vars, u.order, 1.0),
           jet_constant(u.num_vars, u.order, 0.0))
    powers = [one]
    z = (u, v)
    for _ in range(top):
        powers.append(_cmul(powers[-1], z))
    return powers


def _holo_frame_vectors(u: Jet, v: Jet, m: int):
    """Unit complex frame vectors spanning the flag stages 1..m-1.

    Gram-Schmidt over the complex derivative vectors of the coordinate map;
    entry k of the result spans the k-th normal stage of the base surface.
    """
    top = m + 2
    powers = _psi_powers(u, v, top)
    comps = m + 3

    def derivative_vector(k: int):
        vec = []
        for j in range(1, comps + 1):
            if j >= k:
                e = j - k
                vec.append(_cscale(powers[e], 1.0 / math.factorial(e)))
            else:
                zero = jet_constant(u.num_vars, u.order, 0.0)
                vec.append((zero, zero))
        return vec

    basis = []
    for k in range(1, m + 1):
        w = derivative_vector(k)
        for prev in basis:
            coeff = _cmul(_herm(w, prev), (jet_reciprocal(_habs2(prev)),
                                           jet_constant(u.num_vars, u.order,
                                                        0.0)))
            w = [_csub(wj, _cmul(coeff, pj)) for wj, pj in zip(w, prev)]
        basis.append(w)

    units = []
    for w in basis[1:]:
        inv_norm = jet_rsqrt(_habs2(w))
        units.append([_cscale(wj, inv_norm) for wj in w])
    return units


def _interleave(vec) -> list[Jet]:
    out = []
    for re, im in vec:
        out.append(re)
        out.append(im)
    return out


def make_holomorphic_curve_surface(m: int = 2) -> CatalogEntry:
    """Substantial elliptic surface: the holomorphic monomial curve.

    Minimal by construction (holomorphic), hence elliptic with the rotation
    by a quarter turn as almost complex structure; all normal stages are
    plane bundles and the flag exhausts the ambient space.
    """
    if m < 2:
        raise ParameterError("m must be at least 2")
    comps = m + 3
    big_n = 2 * comps

    def fn(vars_: list[Jet]) -> list[Jet]:
        u, v = vars_[0], vars_[1]
        powers = _psi_powers(u, v, comps)
        psi = [_cscale(powers[j], 1.0 / math.factorial(j))
               for j in range(1, comps + 1)]
        return _interleave(psi)

    chart = ImmersionChart(f"holomorphic-curve-{m}", 2, big_n,
                           box([-0.45, -0.45], [0.45, 0.45]), fn,
                           max_order=m + 5)
    expected = [
        Expectation("flag_dims", {"stages": [2] * (m + 2), "total": big_n},
                    "every normal stage is a plane bundle and the flag "
                    "exhausts the ambient space"),
        Expectation("ellipticity", {"tol": 1e-10, "count": 20},
                    "alpha(Z, Z) + alpha(JZ, JZ) = 0"),
        Expectation("minimality", {"tol": 1e-10},
                    "holomorphic curves are minimal"),
        Expectation("flag_coordinate_planes_at_origin", {"tol": 1e-9},
                    "at the center the stages align with coordinate planes"),
        Expectation("s_rank", {"expected": 2},
                    "fully nonparallel first normal space"),
        Expectation("case_label", {"expected": "out-of-theorem-scope"},
                    "surface dimension equals the nonparallelism rank"),
    ]
    return CatalogEntry(
        name="holomorphic-curve", params={"m": m},
        description="holomorphic monomial curve surface (minimal, elliptic); "
                    "base for the ruled construction",
        chart=chart, max_normal_order=m + 2, substantial=True,
        expected=expected,
        sampler=lambda rng: chart.domain.sample(rng, margin=0.05))


def make_section4_example(m: int = 2, t_radius: float = 0.25,
                          seed: int = 0) -> CatalogEntry:
    """Ruled thickening of the holomorphic curve surface over its lower
    normal stages.

    The chart translates the base surface along an exact orthonormal frame of
    the first m-1 normal stages; sampling stays off the zero section, where
    the first normal rank drops.  Expected invariants: first normal rank 4,
    nonparallelism rank 2 matching stage m+1 of the base, rulings of
    dimension n - 2 that carry nonzero second fundamental form.
    """
    if m < 2:
        raise ParameterError("m must be at least 2")
    n = 2 * m
    comps = m + 3
    big_n = 2 * comps
    verticals = 2 * (m - 1)

    def fn(vars_: list[Jet]) -> list[Jet]:
        u, v = vars_[0], vars_[1]
        ts = vars_[2:2 + verticals]
        powers = _psi_powers(u, v, comps)
        psi = [_cscale(powers[j], 1.0 / math.factorial(j))
               for j in range(1, comps + 1)]
        units = _holo_frame_vectors(u, v, m)
        comps_out = _interleave(psi)
        for a, unit in enumerate(units):
            re_frame = _interleave(unit)
            # multiplication by i swaps and negates the component pair
            im_frame = _interleave([(-1.0 * wj[1], wj[0]) for wj in unit])
            t_re, t_im = ts[2 * a], ts[2 * a + 1]
            comps_out = [c + t_re * fr + t_im * fi for c, fr, fi
                         in zip(comps_out, re_frame, im_frame)]
        return comps_out

    radius = _shrink_radius_for_immersion(fn, m, t_radius)
    lo = [-0.4, -0.4] + [-radius] * verticals
    hi = [0.4, 0.4] + [radius] * verticals
    chart = ImmersionChart(f"section4-ruled-{m}", n, big_n, box(lo, hi), fn,
                           max_order=6)
    t_min = 0.3 * radius

    def sampler(rng: np.random.Generator) -> np.ndarray:
        for _ in range(256):
            x = chart.domain.sample(rng, margin=0.02)
            t_norm = float(np.linalg.norm(x[2:]))
            if t_min <= t_norm:
                return x
        raise DataError("could not sample off the zero section")

    base_entry = make_holomorphic_curve_surface(m)
    expected = [
        Expectation("first_normal_rank", {"expected": 4},
                    "four dimensional first normal bundle"),
        Expectation("s_rank", {"expected": 2}, "nonparallelism rank two"),
        Expectation("d_dim", {"expected": n - 2},
                    "rulings of the minimum dimension n - s"),
        Expectation("case_label", {"expected": "case-iii-a"},
                    "ruled case with full gamma rank"),
        Expectation("s_matches_base_stage", {"stage": m + 1, "tol": 1e-6},
                    "nonparallelism span equals stage m+1 of the base "
                    "surface"),
        Expectation("osculating_identity", {"tol": 1e-6},
                    "tangent plus first normal space matches the base flag "
                    "through stage m+1"),
        Expectation("vertical_alpha_span", {"tol": 1e-6},
                    "mixed second fundamental form spans the expected slice "
                    "of the first normal space"),
        Expectation("rulings_alpha_nonzero", {"tol": 1e-6},
                    "rulings are not in the relative nullity distribution"),
        Expectation("nu_s_violation", {"s": 2},
                    "pointwise nullity bound fails at the nonparallelism "
                    "rank"),
        Expectation("flag_dims", {"stages": [4, 2], "total": big_n},
                    "flag exhausts the ambient space"),
        Expectation("s_constancy", {"ratio": True},
                    "nonparallelism span constant along rulings, with "
                    "second-order shrinking of the discretized drift"),
    ]

    # With this splitting the derivative span factors through the
    # two-dimensional stage m of the base flag, so k = 2 = s exactly and the
    # extension realizes the extreme branch: its rulings lie in the
    # extension's relative nullity and its first normal rank equals k.
    exercises = [SplitExercise(
        name="default",
        rule=None,  # default splitting
        expected={"k": 2, "r": 2, "n1f_rank": 2, "nu_ext": n - 2 + 2,
                  "delta_in_nullity": True},
        lambda_radius=0.08)]

    return CatalogEntry(
        name="section4-ruled", params={"m": m, "t_radius": round(radius, 6)},
        description="ruled thickening of a holomorphic curve surface over "
                    "its lower normal stages: sharp ruled case",
        chart=chart, max_normal_order=3, substantial=True,
        expected=expected, sampler=sampler, ruled=True, ruling_from="D",
        split_exercises=exercises,
        aux={"base_entry": base_entry, "m": m, "t_min": t_min})


def _shrink_radius_for_immersion(fn, m: int, t_radius: float) -> float:
    """Probe the Jacobian at box corners and shrink until it keeps rank."""
    from .jets import DerivativeTensor, VectorJet, variables
    verticals = 2 * (m - 1)
    radius = t_radius
    probes_uv = [(-0.35, 0.2), (0.3, -0.3), (0.0, 0.35), (0.1, 0.1)]
    while radius >= 1e-6:
        ok = True
        for (u0, v0) in probes_uv:
            for corner in (np.ones(verticals), -np.ones(verticals)):
                x = np.array([u0, v0, *(radius / math.sqrt(verticals)
                                        * corner)])
                jac = DerivativeTensor(VectorJet(fn(variables(x, 1)))).tensor(1)
                svals = np.linalg.svd(jac, compute_uv=False)
                if svals[-1] < 1e-3 * svals[0]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return radius
        radius *= 0.7
    raise DegenerateExtensionError(
        "no admissible thickening radius above 1e-6")


# ---------------------------------------------------------------------------
# Product of rank-one nonparallel factors: the s = p block-diagonal case


def make_curve_product(factors: int = 4, seed: int = 23) -> CatalogEntry:
    """Cartesian product of rank-one nonparallel curve charts.

    The nonparallelism data of a product is block diagonal, so the span
    ranks add: with four factors this realizes s = p = 4 with relative
    nullity exactly n - 4, the full-rank case of the trichotomy.
    """
    if not 2 <= factors <= 4:
        raise ParameterError("factors must be between 2 and 4")
    systems = [CurveSystem(4, 1, seed + 17 * i) for i in range(factors)]
    n = 2 * factors
    big_n = 4 * factors

    fns = [_curve_chart_fn(sys_i, 2) for sys_i in systems]

    def fn(vars_: list[Jet]) -> list[Jet]:
        comps: list[Jet] = []
        for i, factor_fn in enumerate(fns):
            comps.extend(factor_fn(vars_[2 * i:2 * i + 2]))
        return comps

    s_radius = 0.08
    lo = ([0.05, -s_radius] * factors)
    hi = ([0.95, s_radius] * factors)
    chart = ImmersionChart(f"curve-product-{factors}", n, big_n,
                           box(lo, hi), fn, max_order=6)
    expected = [
        Expectation("first_normal_rank", {"expected": factors},
                    "one first normal direction per factor"),
        Expectation("s_rank", {"expected": factors},
                    "block-diagonal nonparallelism: ranks add"),
        Expectation("case_label", {"expected": "case-i"},
                    "full nonparallelism rank"),
        Expectation("nu", {"expected": n - factors},
                    "relative nullity n - p"),
        Expectation("d_dim", {"expected": n - factors},
                    "kernel of the restricted form equals the nullity"),
        Expectation("flag_dims", {"stages": [factors, factors],
                                  "total": big_n},
                    "flag exhausts the ambient space"),
    ]
    return CatalogEntry(
        name="curve-product", params={"factors": factors},
        description="product of rank-one nonparallel curve charts: "
                    "realizes the full-rank nullity case",
        chart=chart, max_normal_order=2, substantial=True,
        expected=expected,
        sampler=lambda rng: chart.domain.sample(rng, margin=0.01),
        ruled=True, ruling_from="nullity")


# ---------------------------------------------------------------------------
# Registry


def _build_sphere(params: dict) -> CatalogEntry:
    return make_calibration("sphere", n=int(params.get("n", 2)))


def _build_flat(params: dict) -> CatalogEntry:
    return make_calibration("flat", seed=int(params.get("seed", 0)))


def _build_torus(params: dict) -> CatalogEntry:
    return make_calibration("product-torus")


def _build_curve(params: dict) -> CatalogEntry:
    return make_curve_parallel_subbundle(
        n=int(params.get("n", 3)), big_n=int(params.get("N", 8)),
        seed=int(params.get("seed", 11)))


def _build_holo(params: dict) -> CatalogEntry:
    return make_holomorphic_curve_surface(m=int(params.get("m", 2)))


def _build_section4(params: dict) -> CatalogEntry:
    return make_section4_example(m=int(params.get("m", 2)),
                                 t_radius=float(params.get("t_radius", 0.25)))


def _build_product(params: dict) -> CatalogEntry:
    return make_curve_product(factors=int(params.get("factors", 4)),
                              seed=int(params.get("seed", 23)))


BUILDERS: dict[str, tuple[Callable[[dict], CatalogEntry], str, str]] = {
    "sphere": (_build_sphere, "n=2",
               "unit sphere calibration (umbilic, no complement)"),
    "flat": (_build_flat, "seed=0",
             "affine plane calibration (totally geodesic)"),
    "product-torus": (_build_torus, "",
                      "flat torus with parallel first normal bundle"),
    "curve-parallel": (_build_curve, "n=3, N=8, seed=11",
                       "parallel normal subbundle over a curve "
                       "(rank-one nonparallel, flat)"),
    "holomorphic-curve": (_build_holo, "m=2",
                          "minimal elliptic surface with plane normal "
                          "stages"),
    "section4-ruled": (_build_section4, "m=2, t_radius=0.25",
                       "sharp ruled example: rank-four first normal bundle, "
                       "rank-two nonparallelism constant along rulings"),
    "curve-product": (_build_product, "factors=4, seed=23",
                      "product of rank-one factors: full-rank nullity case"),
}


def entry_names() -> list[str]:
    return sorted(BUILDERS)


def get_entry(name: str, params: dict | None = None) -> CatalogEntry:
    if name not in BUILDERS:
        raise ParameterError(f"unknown catalog entry {name!r}; "
                             f"known: {', '.join(entry_names())}")
    return BUILDERS[name][0](params or {})
