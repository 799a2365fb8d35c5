"""Truncated multivariate Taylor arithmetic (forward jets).

A jet stores the Taylor coefficients (derivative / multi-index factorial) of
a real-analytic function at a point, for every multi-index of total degree
<= K, in a dense graded-lexicographic table.  Sums, products and analytic
primitives (sin, cos, exp, 1/x, sqrt) propagate coefficients exactly, so the
partial derivatives recovered from a jet carry rounding error only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapabilityError, ShapeError, SingularityError


def _monomials(num_vars: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree <= order, graded-lex ordered."""
    out: list[tuple[int, ...]] = []

    def fill(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for e in range(remaining + 1):
            fill(prefix + (e,), remaining - e, slots - 1)

    for degree in range(order + 1):
        fill((), degree, num_vars)
    return out


@dataclass(frozen=True)
class JetSignature:
    """Shared coefficient layout for all jets with given (num_vars, order)."""

    num_vars: int
    order: int
    monomials: list[tuple[int, ...]] = field(repr=False)
    index: dict[tuple[int, ...], int] = field(repr=False)
    degrees: np.ndarray = field(repr=False)
    factorials: np.ndarray = field(repr=False)  # prod of exponent factorials
    mul_table: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.monomials)


@lru_cache(maxsize=None)
def signature(num_vars: int, order: int) -> JetSignature:
    if num_vars < 1 or order < 0:
        raise ShapeError(f"invalid jet signature ({num_vars}, {order})")
    monos = _monomials(num_vars, order)
    index = {m: i for i, m in enumerate(monos)}
    degrees = np.array([sum(m) for m in monos], dtype=np.intp)
    facts = np.array([math.prod(math.factorial(e) for e in m) for m in monos],
                     dtype=np.float64)

    # Degree-filtered product table: only pairs with deg(i)+deg(j) <= order
    # contribute, which keeps the table at C(2n+K, 2n) entries.
    starts = np.searchsorted(degrees, np.arange(order + 2))
    ii: list[int] = []
    jj: list[int] = []
    kk: list[int] = []
    for i, mi in enumerate(monos):
        di = degrees[i]
        for j in range(starts[order - di + 1]):
            mj = monos[j]
            ii.append(i)
            jj.append(j)
            kk.append(index[tuple(a + b for a, b in zip(mi, mj))])
    table = (np.array(ii, dtype=np.intp), np.array(jj, dtype=np.intp),
             np.array(kk, dtype=np.intp))
    return JetSignature(num_vars, order, monos, index, degrees, facts, table)


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor expansion of a scalar function of ``num_vars`` variables."""

    num_vars: int
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        sig = signature(self.num_vars, self.order)
        if self.coeffs.shape != (sig.size,):
            raise ShapeError(
                f"coefficient table has shape {self.coeffs.shape}, "
                f"expected ({sig.size},)")
        self.coeffs.flags.writeable = False

    @property
    def sig(self) -> JetSignature:
        return signature(self.num_vars, self.order)

    def coefficient(self, multi_index: tuple[int, ...]) -> float:
        return float(self.coeffs[self.sig.index[tuple(multi_index)]])

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivative(self, multi_index: tuple[int, ...]) -> float:
        """Partial derivative d^|I| f / du^I at the expansion point."""
        sig = self.sig
        i = sig.index[tuple(multi_index)]
        return float(self.coeffs[i] * sig.factorials[i])

    def _check_same(self, other: Jet):
        if (self.num_vars, self.order) != (other.num_vars, other.order):
            raise ShapeError(
                f"jet signatures differ: ({self.num_vars},{self.order}) vs "
                f"({other.num_vars},{other.order})")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check_same(other)
            return Jet(self.num_vars, self.order, self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += float(other)
        return Jet(self.num_vars, self.order, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.num_vars, self.order, -self.coeffs)

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._check_same(other)
            return Jet(self.num_vars, self.order, self.coeffs - other.coeffs)
        return self + (-float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check_same(other)
            ii, jj, kk = self.sig.mul_table
            out = np.zeros_like(self.coeffs)
            np.add.at(out, kk, self.coeffs[ii] * other.coeffs[jj])
            return Jet(self.num_vars, self.order, out)
        return Jet(self.num_vars, self.order, self.coeffs * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * jet_reciprocal(other)
        return self * (1.0 / float(other))

    def __rtruediv__(self, other):
        return jet_reciprocal(self) * float(other)


def jet_constant(num_vars: int, order: int, value: float) -> Jet:
    c = np.zeros(signature(num_vars, order).size)
    c[0] = value
    return Jet(num_vars, order, c)


def jet_variable(num_vars: int, order: int, var: int, value: float) -> Jet:
    """Jet of the coordinate function u_var at a point where u_var = value."""
    sig = signature(num_vars, order)
    c = np.zeros(sig.size)
    c[0] = value
    if order >= 1:
        unit = tuple(1 if i == var else 0 for i in range(num_vars))
        c[sig.index[unit]] = 1.0
    return Jet(num_vars, order, c)


def variables(x, order: int) -> list[Jet]:
    """Variable jets for an expansion point x, one per coordinate."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    return [jet_variable(n, order, i, x[i]) for i in range(n)]


def compose_series(a: Jet, outer_coeffs: np.ndarray) -> Jet:
    """Evaluate sum_j outer_coeffs[j] * (a - a0)^j by Horner on the nilpotent part.

    With outer_coeffs the Taylor coefficients of g at a's value, this is the
    jet of the composition g(a); every analytic primitive routes through it.
    """
    tilde_c = a.coeffs.copy()
    tilde_c[0] = 0.0
    tilde = Jet(a.num_vars, a.order, tilde_c)
    result = jet_constant(a.num_vars, a.order, float(outer_coeffs[a.order]))
    for j in range(a.order - 1, -1, -1):
        result = result * tilde + float(outer_coeffs[j])
    return result


def jet_sin(a: Jet) -> Jet:
    a0 = a.value
    cyc = [math.sin(a0), math.cos(a0), -math.sin(a0), -math.cos(a0)]
    c = np.array([cyc[j % 4] / math.factorial(j) for j in range(a.order + 1)])
    return compose_series(a, c)


def jet_cos(a: Jet) -> Jet:
    a0 = a.value
    cyc = [math.cos(a0), -math.sin(a0), -math.cos(a0), math.sin(a0)]
    c = np.array([cyc[j % 4] / math.factorial(j) for j in range(a.order + 1)])
    return compose_series(a, c)


def jet_exp(a: Jet) -> Jet:
    e = math.exp(a.value)
    c = np.array([e / math.factorial(j) for j in range(a.order + 1)])
    return compose_series(a, c)


def jet_reciprocal(a: Jet) -> Jet:
    a0 = a.value
    if a0 == 0.0:
        raise SingularityError("reciprocal of a jet with zero constant term")
    c = np.array([(-1.0) ** j / a0 ** (j + 1) for j in range(a.order + 1)])
    return compose_series(a, c)


def jet_sqrt(a: Jet) -> Jet:
    a0 = a.value
    if a0 <= 0.0:
        raise SingularityError("sqrt of a jet with non-positive constant term")
    c = np.empty(a.order + 1)
    c[0] = math.sqrt(a0)
    for j in range(1, a.order + 1):
        # binom(1/2, j) * a0^(1/2 - j)
        binom = math.prod(0.5 - i for i in range(j)) / math.factorial(j)
        c[j] = binom * a0 ** (0.5 - j)
    return compose_series(a, c)


def jet_rsqrt(a: Jet) -> Jet:
    return jet_reciprocal(jet_sqrt(a))


_UNARY = {
    "sin": jet_sin,
    "cos": jet_cos,
    "exp": jet_exp,
    "reciprocal": jet_reciprocal,
    "sqrt": jet_sqrt,
    "rsqrt": jet_rsqrt,
}


def jet_arith(a: Jet, b: Jet | float | None, op: str) -> Jet:
    """Uniform dispatcher over jet arithmetic.

    Binary ops (add, sub, mul) take two jets of equal signature; ``scale``
    takes a jet and a float; the analytic ops ignore ``b``.
    """
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        return a * float(b)
    if op in _UNARY:
        return _UNARY[op](a)
    raise ShapeError(f"unknown jet operation {op!r}")


def antiderivative(a: Jet, constant: float = 0.0) -> Jet:
    """Formal antiderivative of a single-variable jet (degree shifts up by one).

    The top coefficient is discarded by truncation, so Picard iteration with
    this operator fixes one extra coefficient per sweep.
    """
    if a.num_vars != 1:
        raise ShapeError("antiderivative is defined for single-variable jets")
    c = np.zeros_like(a.coeffs)
    c[0] = constant
    degrees = np.arange(1, a.order + 1, dtype=float)
    c[1:] = a.coeffs[:-1] / degrees
    return Jet(1, a.order, c)


@lru_cache(maxsize=None)
def _lift_map(num_vars_in: int, order: int, num_vars_out: int,
              positions: tuple[int, ...]) -> np.ndarray:
    sig_in = signature(num_vars_in, order)
    sig_out = signature(num_vars_out, order)
    idx = np.empty(sig_in.size, dtype=np.intp)
    for i, m in enumerate(sig_in.monomials):
        target = [0] * num_vars_out
        for p, e in zip(positions, m):
            target[p] = e
        idx[i] = sig_out.index[tuple(target)]
    return idx


def lift(a: Jet, num_vars_out: int, positions: tuple[int, ...]) -> Jet:
    """Re-embed a jet into a larger variable set; positions[i] hosts old var i."""
    if len(positions) != a.num_vars or max(positions) >= num_vars_out:
        raise ShapeError("invalid variable placement for lift")
    idx = _lift_map(a.num_vars, a.order, num_vars_out, tuple(positions))
    c = np.zeros(signature(num_vars_out, a.order).size)
    c[idx] = a.coeffs
    return Jet(num_vars_out, a.order, c)


def substitute_affine(a: Jet, matrix, new_point) -> Jet:
    """Push a jet through the reparametrization u = u0 + A (w - w0).

    Returns the jet of the composed function in the w variables at w0, with
    the same truncation order.  Used as the chain-rule oracle: evaluating a
    chart composed with the affine map must match this substitution.
    """
    matrix = np.asarray(matrix, dtype=float)
    new_point = np.asarray(new_point, dtype=float)
    n_w = matrix.shape[1]
    if matrix.shape[0] != a.num_vars:
        raise ShapeError("affine matrix rows must match the jet's variables")
    sig = a.sig
    # Displacement jets: delta_u_i = sum_j A_ij * delta_w_j (zero constant part).
    deltas = []
    for i in range(a.num_vars):
        acc = jet_constant(n_w, a.order, 0.0)
        for j in range(n_w):
            if matrix[i, j] != 0.0:
                acc = acc + matrix[i, j] * (
                    jet_variable(n_w, a.order, j, 0.0))
        deltas.append(acc)
    # Monomial jets built incrementally along the graded order.
    mono_jets: list[Jet | None] = [None] * sig.size
    mono_jets[0] = jet_constant(n_w, a.order, 1.0)
    out = jet_constant(n_w, a.order, 0.0)
    for i, m in enumerate(sig.monomials):
        if i > 0:
            v = next(k for k, e in enumerate(m) if e > 0)
            parent = list(m)
            parent[v] -= 1
            mono_jets[i] = mono_jets[sig.index[tuple(parent)]] * deltas[v]
        if a.coeffs[i] != 0.0:
            out = out + a.coeffs[i] * mono_jets[i]
    return out


class VectorJet:
    """Jet of an ambient-space-valued map: one coefficient table per component."""

    def __init__(self, components: list[Jet]):
        if not components:
            raise ShapeError("vector jet needs at least one component")
        first = components[0]
        for c in components[1:]:
            first._check_same(c)
        self.components = list(components)
        self.num_vars = first.num_vars
        self.order = first.order
        self.coeffs = np.column_stack([c.coeffs for c in components])

    @property
    def ambient_dim(self) -> int:
        return len(self.components)


class DerivativeTensor:
    """All ambient-valued partial derivatives of a chart map at one point."""

    def __init__(self, vjet: VectorJet):
        self._sig = signature(vjet.num_vars, vjet.order)
        self.num_vars = vjet.num_vars
        self.order = vjet.order
        self.ambient_dim = vjet.ambient_dim
        # rows: monomials, cols: ambient components; scaled to derivatives
        self.values = vjet.coeffs * self._sig.factorials[:, None]

    def partial(self, multi_index) -> np.ndarray:
        """d^|I| f / du^I as an ambient vector."""
        key = tuple(int(e) for e in multi_index)
        if sum(key) > self.order:
            raise CapabilityError(
                f"derivative {key} exceeds available order {self.order}")
        return self.values[self._sig.index[key]]

    def partials_of_order(self, degree: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
        """Distinct multi-indices of the given total degree and their values."""
        sig = self._sig
        mask = sig.degrees == degree
        monos = [m for m, d in zip(sig.monomials, sig.degrees) if d == degree]
        return monos, self.values[mask]

    def tensor(self, degree: int) -> np.ndarray:
        """Symmetric derivative tensor of shape (n,)*degree + (N,)."""
        n, big_n = self.num_vars, self.ambient_dim
        out = np.zeros((n,) * degree + (big_n,))
        for idx in np.ndindex(*(n,) * degree):
            mi = [0] * n
            for i in idx:
                mi[i] += 1
            out[idx] = self.partial(tuple(mi))
        return out
