"""Truncated multivariate Taylor-series ("jet") arithmetic over complex coefficients.

A jet stores every partial-derivative coefficient of an analytic function at a
point, up to a fixed total degree.  Arithmetic on jets (ring operations plus
composition with ln/exp/sqrt) is exact through the truncation order, so mixed
partial derivatives read off a jet are exact up to double rounding.  This is
the derivative engine behind the curvature computations: a Kahler potential is
evaluated with holomorphic and antiholomorphic arguments as *independent* jet
variables ("polarization"), which keeps every operation holomorphic and makes
all mixed partials plain Taylor coefficients.

Coefficients are stored densely, indexed by graded-lexicographic rank.  With
the graded ordering, monomials of degree <= k form a prefix of the table, so
truncating a jet to a lower order is a slice and differentiating is an index
remap.  Multiplication, the hot loop, is a precomputed index-triple gather
plus two ``bincount`` reductions.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

MultiIndex = tuple[int, ...]

Scalar = (int, float, complex, np.integer, np.floating, np.complexfloating)


class JetError(Exception):
    """Base class for jet arithmetic failures."""


class DivisionBySingularJet(JetError):
    """Division, reciprocal or sqrt anchored at a zero constant term."""


class LogOfZero(JetError):
    """ln of a jet whose constant term is zero."""


class OrderExceeded(JetError):
    """A derivative of higher total degree than the truncation order was requested."""


# --------------------------------------------------------------------------
# index tables (cached per (num_vars, order))
# --------------------------------------------------------------------------


def jet_size(num_vars: int, order: int) -> int:
    """Number of monomials of total degree <= order in num_vars variables."""
    return math.comb(num_vars + order, order)


def _degree_block(num_vars: int, deg: int):
    if num_vars == 1:
        yield (deg,)
        return
    for first in range(deg, -1, -1):
        for rest in _degree_block(num_vars - 1, deg - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def monomials(num_vars: int, order: int) -> tuple[MultiIndex, ...]:
    """All exponent tuples of total degree <= order, graded order (degree-major)."""
    out: list[MultiIndex] = []
    for deg in range(order + 1):
        out.extend(_degree_block(num_vars, deg))
    return tuple(out)


@lru_cache(maxsize=None)
def _ranks(num_vars: int, order: int) -> dict[MultiIndex, int]:
    return {m: i for i, m in enumerate(monomials(num_vars, order))}


@lru_cache(maxsize=None)
def _mul_table(num_vars: int, order: int):
    """Index triples (i, j, k) with monomial_i * monomial_j = monomial_k."""
    mons = monomials(num_vars, order)
    rank = _ranks(num_vars, order)
    degs = [sum(m) for m in mons]
    ii: list[int] = []
    jj: list[int] = []
    kk: list[int] = []
    for i, mi in enumerate(mons):
        budget = order - degs[i]
        for j, mj in enumerate(mons):
            if degs[j] > budget:
                break  # graded order: degrees are nondecreasing
            ii.append(i)
            jj.append(j)
            kk.append(rank[tuple(a + b for a, b in zip(mi, mj))])
    return (
        np.asarray(ii, dtype=np.int32),
        np.asarray(jj, dtype=np.int32),
        np.asarray(kk, dtype=np.int32),
    )


@lru_cache(maxsize=None)
def _diff_table(num_vars: int, order: int, var: int):
    """Source ranks, destination ranks (in the order-1 table) and exponent factors."""
    mons = monomials(num_vars, order)
    rank = _ranks(num_vars, order)
    src: list[int] = []
    dst: list[int] = []
    fac: list[int] = []
    for i, m in enumerate(mons):
        e = m[var]
        if e:
            tgt = m[:var] + (e - 1,) + m[var + 1 :]
            src.append(i)
            dst.append(rank[tgt])
            fac.append(e)
    return (
        np.asarray(src, dtype=np.int32),
        np.asarray(dst, dtype=np.int32),
        np.asarray(fac, dtype=np.float64),
    )


# --------------------------------------------------------------------------
# the Jet value type
# --------------------------------------------------------------------------


class Jet:
    """Immutable truncated Taylor expansion with complex coefficients.

    ``coeffs[r]`` is the coefficient of the monomial ``monomials(num_vars,
    order)[r]``; the true partial derivative carries an extra factorial, see
    :meth:`mixed_partial`.
    """

    __slots__ = ("num_vars", "order", "coeffs")

    def __init__(self, num_vars: int, order: int, coeffs: np.ndarray | None = None):
        if order < 0:
            raise OrderExceeded("jet order must be >= 0")
        self.num_vars = num_vars
        self.order = order
        size = jet_size(num_vars, order)
        if coeffs is None:
            coeffs = np.zeros(size, dtype=np.complex128)
        else:
            coeffs = np.asarray(coeffs, dtype=np.complex128)
            if coeffs.shape != (size,):
                raise ValueError(f"expected {size} coefficients, got {coeffs.shape}")
        self.coeffs = coeffs

    # -- basic access ------------------------------------------------------

    @property
    def value(self) -> complex:
        """Constant term, i.e. the function value at the expansion point."""
        return complex(self.coeffs[0])

    def coefficient(self, alpha: MultiIndex) -> complex:
        rank = _ranks(self.num_vars, self.order).get(tuple(alpha))
        if rank is None:
            raise OrderExceeded(f"multi-index {alpha} exceeds order {self.order}")
        return complex(self.coeffs[rank])

    def mixed_partial(self, alpha: MultiIndex) -> complex:
        """Exact partial derivative d^alpha f at the expansion point."""
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise OrderExceeded(f"degree {sum(alpha)} exceeds order {self.order}")
        scale = 1
        for e in alpha:
            scale *= math.factorial(e)
        return self.coefficient(alpha) * scale

    def truncated(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderExceeded("cannot extend a jet to a higher order")
        if order == self.order:
            return self
        return Jet(self.num_vars, order, self.coeffs[: jet_size(self.num_vars, order)].copy())

    def derivative(self, var: int) -> "Jet":
        """Partial derivative as a jet of one lower order."""
        if self.order == 0:
            raise OrderExceeded("cannot differentiate an order-0 jet")
        src, dst, fac = _diff_table(self.num_vars, self.order, var)
        out = np.zeros(jet_size(self.num_vars, self.order - 1), dtype=np.complex128)
        out[dst] = self.coeffs[src] * fac
        return Jet(self.num_vars, self.order - 1, out)

    # -- ring operations ---------------------------------------------------

    def _align(self, other: "Jet") -> tuple["Jet", "Jet"]:
        if self.num_vars != other.num_vars:
            raise ValueError("jets over different variable counts")
        order = min(self.order, other.order)
        return self.truncated(order), other.truncated(order)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.num_vars, a.order, a.coeffs + b.coeffs)
        if isinstance(other, Scalar):
            out = self.coeffs.copy()
            out[0] += other
            return Jet(self.num_vars, self.order, out)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.num_vars, self.order, -self.coeffs)

    def __sub__(self, other):
        if isinstance(other, (Jet,) + Scalar):
            return self + (-other if isinstance(other, Jet) else -complex(other))
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            ii, jj, kk = _mul_table(a.num_vars, a.order)
            prod = a.coeffs[ii] * b.coeffs[jj]
            size = jet_size(a.num_vars, a.order)
            out = np.bincount(kk, weights=prod.real, minlength=size) + 1j * np.bincount(
                kk, weights=prod.imag, minlength=size
            )
            return Jet(a.num_vars, a.order, out)
        if isinstance(other, Scalar):
            return Jet(self.num_vars, self.order, self.coeffs * complex(other))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return a * _reciprocal(b)
        if isinstance(other, Scalar):
            return self * (1.0 / complex(other))
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, Scalar):
            return _reciprocal(self) * complex(other)
        return NotImplemented

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)):
            return NotImplemented
        if k < 0:
            return _reciprocal(self) ** (-k)
        result = jet_constant(1.0, self.num_vars, self.order)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def __repr__(self):
        return f"Jet(num_vars={self.num_vars}, order={self.order}, value={self.value})"


def jet_constant(value: complex, num_vars: int, order: int) -> Jet:
    j = Jet(num_vars, order)
    j.coeffs[0] = value
    return j


def jet_variable(value: complex, var: int, num_vars: int, order: int) -> Jet:
    """Jet seeded as the coordinate function ``value + (x_var - value)``."""
    j = jet_constant(value, num_vars, order)
    if order >= 1:
        unit = (0,) * var + (1,) + (0,) * (num_vars - var - 1)
        j.coeffs[_ranks(num_vars, order)[unit]] = 1.0
    return j


def jet_seed(point: Sequence[complex], order: int) -> list[Jet]:
    """One seeded jet per coordinate of ``point``."""
    if order < 0:
        raise OrderExceeded("seed order must be >= 0")
    n = len(point)
    return [jet_variable(point[v], v, n, order) for v in range(n)]


# --------------------------------------------------------------------------
# analytic functions of a jet (univariate series composition)
# --------------------------------------------------------------------------


def _compose(a: Jet, series: Sequence[complex]) -> Jet:
    """Evaluate sum_k series[k] * (a - a0)^k by Horner; series[k] = f^(k)(a0)/k!."""
    shifted = a - a.value
    result = jet_constant(series[a.order], a.num_vars, a.order)
    for k in range(a.order - 1, -1, -1):
        result = result * shifted + series[k]
    return result


def _reciprocal(a: Jet) -> Jet:
    c = a.value
    if c == 0:
        raise DivisionBySingularJet("reciprocal of a jet with zero constant term")
    series = [(-1) ** k / c ** (k + 1) for k in range(a.order + 1)]
    return _compose(a, series)


def jet_ln(a: Jet) -> Jet:
    c = a.value
    if c == 0:
        raise LogOfZero("ln of a jet with zero constant term")
    series = [cmath.log(c)]
    for k in range(1, a.order + 1):
        series.append((-1) ** (k - 1) / (k * c**k))
    return _compose(a, series)


def jet_exp(a: Jet) -> Jet:
    e = cmath.exp(a.value)
    series = [e / math.factorial(k) for k in range(a.order + 1)]
    return _compose(a, series)


def jet_sqrt(a: Jet) -> Jet:
    c = a.value
    if c == 0:
        raise DivisionBySingularJet("sqrt of a jet with zero constant term")
    root = cmath.sqrt(c)
    series = [root]
    coeff = 1.0
    for k in range(1, a.order + 1):
        coeff *= (0.5 - (k - 1)) / k
        series.append(coeff * root / c**k)
    return _compose(a, series)


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    """Named binary operation; ``op`` is one of add/sub/mul/div."""
    table: dict[str, Callable[[Jet, Jet], Jet]] = {
        "add": Jet.__add__,
        "sub": Jet.__sub__,
        "mul": Jet.__mul__,
        "div": Jet.__truediv__,
    }
    if op not in table:
        raise ValueError(f"unknown op {op!r}")
    return table[op](a, b)


def jet_func(a: Jet, f: str, exponent: int | None = None) -> Jet:
    """Named composition; ``f`` is one of ln/exp/sqrt/int-power."""
    if f == "ln":
        return jet_ln(a)
    if f == "exp":
        return jet_exp(a)
    if f == "sqrt":
        return jet_sqrt(a)
    if f == "int-power":
        if exponent is None:
            raise ValueError("int-power requires an exponent")
        return a**exponent
    raise ValueError(f"unknown function {f!r}")


def mixed_partial(j: Jet, alpha: MultiIndex) -> complex:
    return j.mixed_partial(alpha)


# --------------------------------------------------------------------------
# small dense matrices of jets (LU with partial pivoting on constant terms)
# --------------------------------------------------------------------------


def _lu_decompose(rows: list[list[Jet]]) -> tuple[list[list[Jet]], list[int], int]:
    n = len(rows)
    m = [row[:] for row in rows]
    perm = list(range(n))
    sign = 1
    for k in range(n):
        pivot = max(range(k, n), key=lambda i: abs(m[i][k].value))
        if abs(m[pivot][k].value) == 0.0:
            raise DivisionBySingularJet("singular jet matrix")
        if pivot != k:
            m[k], m[pivot] = m[pivot], m[k]
            perm[k], perm[pivot] = perm[pivot], perm[k]
            sign = -sign
        inv_piv = _reciprocal(m[k][k])
        for i in range(k + 1, n):
            factor = m[i][k] * inv_piv
            m[i][k] = factor
            for j in range(k + 1, n):
                m[i][j] = m[i][j] - factor * m[k][j]
    return m, perm, sign


def jet_det(rows: list[list[Jet]]) -> Jet:
    """Determinant of a square matrix of jets."""
    if len(rows) == 1:
        return rows[0][0]
    m, _, sign = _lu_decompose(rows)
    det = m[0][0]
    for k in range(1, len(rows)):
        det = det * m[k][k]
    return det if sign == 1 else -det


def jet_matrix_solve(rows: list[list[Jet]], rhs: list[list[Jet]]) -> list[list[Jet]]:
    """Solve A X = B for matrices of jets; ``rhs`` is a list of B's rows."""
    n = len(rows)
    m, perm, _ = _lu_decompose(rows)
    ncols = len(rhs[0])
    x = [[rhs[perm[i]][c] for c in range(ncols)] for i in range(n)]
    for c in range(ncols):
        for i in range(1, n):
            acc = x[i][c]
            for j in range(i):
                acc = acc - m[i][j] * x[j][c]
            x[i][c] = acc
        for i in range(n - 1, -1, -1):
            acc = x[i][c]
            for j in range(i + 1, n):
                acc = acc - m[i][j] * x[j][c]
            x[i][c] = acc / m[i][i]
    return x


# --------------------------------------------------------------------------
# polarized potentials
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarizedPotential:
    """A Kahler potential with independent holomorphic/antiholomorphic arguments.

    ``fn`` receives ``num_holo`` jets for the holomorphic coordinates Z followed
    by ``num_holo`` jets for their independent conjugate copies W, and returns
    the potential as a jet.  Evaluating with W equal to the complex conjugate
    of Z recovers the real potential (the reality check below).
    """

    num_holo: int
    fn: Callable[[Sequence[Jet], Sequence[Jet]], Jet]
    label: str = ""

    def jet_at(
        self,
        point: Sequence[complex],
        order: int,
        anti_point: Sequence[complex] | None = None,
    ) -> Jet:
        n = self.num_holo
        if len(point) != n:
            raise ValueError(f"expected {n} coordinates, got {len(point)}")
        if anti_point is None:
            anti_point = [complex(p).conjugate() for p in point]
        seeds = jet_seed(list(point) + list(anti_point), order)
        return self.fn(seeds[:n], seeds[n:])

    def value_at(self, point: Sequence[complex]) -> complex:
        return self.jet_at(point, 0).value

    def reality_residual(self, point: Sequence[complex]) -> float:
        """|imag part| of the potential at a conjugate-paired numeric point."""
        v = self.value_at(point)
        return abs(v.imag)
