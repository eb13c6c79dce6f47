"""Brute-force curvature oracle for polarized Kahler potentials.

Everything here is derived directly from a potential by jet arithmetic: the
metric tensor is the complex Hessian, the Ricci tensor is minus the complex
Hessian of ln det of the metric, the scalar curvature and |Ric|^2 are traces
against the inverse metric, the curvature tensor components come from third
and fourth partials, and the Laplacian of the scalar curvature is obtained by
running the whole scalar-curvature pipeline in jet arithmetic with two orders
of derivative headroom.  No closed-form formula from any other module enters;
this is the independent reference that the closed forms are tested against.

Tolerances for the built-in consistency checks (Hermiticity, curvature
symmetries, reality of invariants) are fixed module constants: a failure
signals a bug, not a tuning problem, so they are deliberately not
configurable per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet, PolarizedPotential, jet_det, jet_ln, jet_matrix_solve

DEFAULT_ORDER = 6

HERMITICITY_RTOL = 1e-10
INVERSE_RTOL = 1e-10
DET_REALITY_RTOL = 1e-10
REALITY_RTOL = 1e-9
SYMMETRY_RTOL = 1e-8
MIN_EIGENVALUE = 1e-6


class OracleError(Exception):
    pass


class NotPositiveDefinite(OracleError):
    """Metric tensor fails the positive-definiteness floor at this point."""


class SingularMatrix(OracleError):
    pass


class RealityViolation(OracleError):
    """A quantity that must be real carries too large an imaginary residue."""


class SymmetryViolation(OracleError):
    """A curvature symmetry fails beyond tolerance.

    Carries both contraction values when the full and diagonal-shortcut
    |R|^2 evaluations disagree, rather than silently preferring one.
    """

    def __init__(self, message: str, values: tuple[float, float] | None = None):
        super().__init__(message)
        self.values = values


def _check_real(value: complex, scale: float, what: str) -> float:
    if abs(value.imag) > REALITY_RTOL * max(1.0, scale):
        raise RealityViolation(
            f"{what} has imaginary residue {value.imag:.3e} (scale {scale:.3e})"
        )
    return float(value.real)


@dataclass(frozen=True)
class MetricAtPoint:
    """Complex Hessian of the potential at a point, with inverse and jets."""

    n: int
    T: np.ndarray
    T_inv: np.ndarray
    det_T: float
    T_jets: list  # n x n nested list of Jets with derivative headroom


@dataclass(frozen=True)
class CurvatureInvariants:
    """The local invariant bundle; a1 and a2 are fixed functions of the rest."""

    k: float
    ric_norm2: float
    riem_norm2: float
    lap_k: float
    a1: float
    a2: float

    @classmethod
    def from_parts(cls, k: float, ric_norm2: float, riem_norm2: float, lap_k: float):
        a1 = k / 2.0
        a2 = lap_k / 3.0 + riem_norm2 / 24.0 - ric_norm2 / 6.0 + k * k / 8.0
        return cls(k, ric_norm2, riem_norm2, lap_k, a1, a2)

    def as_dict(self) -> dict[str, float]:
        return {
            "k": self.k,
            "ric_norm2": self.ric_norm2,
            "riem_norm2": self.riem_norm2,
            "lap_k": self.lap_k,
            "a1": self.a1,
            "a2": self.a2,
        }


# BaseInvariants for the fibration formulas is the same bundle evaluated on
# the base manifold; keep one type.
BaseInvariants = CurvatureInvariants

FLAT_BASE = CurvatureInvariants(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


class CurvatureWorkspace:
    """Shared pipeline for all invariants of one potential at one point.

    The potential jet is taken at ``order`` (default 6); each derivative
    consumes one order, so the metric jets keep order-2 headroom after the
    Ricci step, which is exactly what the Laplacian of the scalar curvature
    needs.  All heavy objects are computed lazily and cached.
    """

    def __init__(self, pot: PolarizedPotential, point, order: int = DEFAULT_ORDER):
        self.pot = pot
        self.point = list(point)
        self.n = pot.num_holo
        self.order = order
        self._phi_jet: Jet | None = None
        self._metric: MetricAtPoint | None = None
        self._lndet_jet: Jet | None = None
        self._ric_jets: list | None = None
        self._k_jet: Jet | None = None
        self._riemann: np.ndarray | None = None

    # -- stages ------------------------------------------------------------

    @property
    def phi_jet(self) -> Jet:
        if self._phi_jet is None:
            self._phi_jet = self.pot.jet_at(self.point, self.order)
        return self._phi_jet

    @property
    def metric(self) -> MetricAtPoint:
        if self._metric is not None:
            return self._metric
        n = self.n
        phi = self.phi_jet
        t_jets = [[phi.derivative(i).derivative(n + j) for j in range(n)] for i in range(n)]
        T = np.array([[t_jets[i][j].value for j in range(n)] for i in range(n)])
        scale = max(np.max(np.abs(T)), 1.0)
        if np.max(np.abs(T - T.conj().T)) > HERMITICITY_RTOL * scale:
            raise SymmetryViolation("metric tensor is not Hermitian at this point")
        eigs = np.linalg.eigvalsh((T + T.conj().T) / 2.0)
        if eigs.min() <= MIN_EIGENVALUE:
            raise NotPositiveDefinite(
                f"smallest metric eigenvalue {eigs.min():.3e} below floor {MIN_EIGENVALUE}"
            )
        try:
            T_inv = np.linalg.inv(T)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by eig floor
            raise SingularMatrix(str(exc)) from exc
        if np.max(np.abs(T @ T_inv - np.eye(n))) > INVERSE_RTOL * max(1.0, np.max(np.abs(T))):
            raise SingularMatrix("metric inverse fails the identity check")
        det = complex(np.linalg.det(T))
        if abs(det.imag) > DET_REALITY_RTOL * abs(det):
            raise RealityViolation(f"det T has imaginary residue {det.imag:.3e}")
        if det.real <= 0:
            raise NotPositiveDefinite("det T is not positive")
        self._metric = MetricAtPoint(n, T, T_inv, det.real, t_jets)
        return self._metric

    @property
    def lndet_jet(self) -> Jet:
        if self._lndet_jet is None:
            self._lndet_jet = jet_ln(jet_det(self.metric.T_jets))
        return self._lndet_jet

    @property
    def ric_jets(self) -> list:
        if self._ric_jets is None:
            n = self.n
            lndet = self.lndet_jet
            self._ric_jets = [
                [-(lndet.derivative(i).derivative(n + j)) for j in range(n)]
                for i in range(n)
            ]
        return self._ric_jets

    def ricci(self) -> np.ndarray:
        n = self.n
        return np.array([[self.ric_jets[i][j].value for j in range(n)] for i in range(n)])

    @property
    def k_jet(self) -> Jet:
        """Scalar curvature as a jet with two orders of headroom."""
        if self._k_jet is None:
            headroom = self.ric_jets[0][0].order
            t_small = [[t.truncated(headroom) for t in row] for row in self.metric.T_jets]
            y = jet_matrix_solve(t_small, self.ric_jets)
            acc = y[0][0]
            for i in range(1, self.n):
                acc = acc + y[i][i]
            self._k_jet = acc
        return self._k_jet

    # -- invariants ----------------------------------------------------------

    def scalar_curvature(self) -> float:
        return _check_real(self.k_jet.value, abs(self.k_jet.value), "scalar curvature")

    def ricci_norm2(self) -> float:
        m = self.metric.T_inv @ self.ricci()
        val = complex(np.trace(m @ m))
        return _check_real(val, abs(val), "|Ric|^2")

    def riemann_tensor(self) -> np.ndarray:
        """Components R_{i jbar k lbar} with the symmetry checks applied."""
        if self._riemann is not None:
            return self._riemann
        n = self.n
        phi = self.phi_jet
        mons = np.zeros(2 * n, dtype=int)

        def partial(hol, anti):
            mons[:] = 0
            for h in hol:
                mons[h] += 1
            for a in anti:
                mons[n + a] += 1
            return phi.mixed_partial(tuple(mons))

        d2t = np.empty((n, n, n, n), dtype=complex)  # d_k d_lbar T_{i jbar}
        dt = np.empty((n, n, n), dtype=complex)  # d_k T_{i qbar}
        dbt = np.empty((n, n, n), dtype=complex)  # d_lbar T_{p jbar}
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    dt[k, i, j] = partial((i, k), (j,))
                    dbt[k, i, j] = partial((i,), (j, k))
                    for l in range(n):
                        d2t[i, j, k, l] = partial((i, k), (j, l))
        t_inv = self.metric.T_inv
        # R_{i jbar k lbar} = -d_k d_lbar T_{i jbar}
        #                     + sum_{p,q} (T^-1)_{q p} (d_k T_{i qbar}) (d_lbar T_{p jbar})
        corr = np.einsum("qp,kiq,lpj->ijkl", t_inv, dt, dbt)
        r4 = -d2t + corr
        scale = max(np.max(np.abs(r4)), 1.0)
        checks = [
            ("swap of the two holomorphic slots", np.transpose(r4, (2, 1, 0, 3))),
            ("swap of the two antiholomorphic slots", np.transpose(r4, (0, 3, 2, 1))),
            ("swap of the front and back pairs", np.transpose(r4, (2, 3, 0, 1))),
            ("conjugation symmetry", np.conj(np.transpose(r4, (1, 0, 3, 2)))),
        ]
        for name, other in checks:
            err = np.max(np.abs(r4 - other))
            if err > SYMMETRY_RTOL * scale:
                raise SymmetryViolation(f"curvature symmetry failed ({name}): {err:.3e}")
        self._riemann = r4
        return r4

    def riemann_norm2(self) -> float:
        r4 = self.riemann_tensor()
        t_inv = self.metric.T_inv
        val = complex(
            np.einsum("ja,bi,lc,dk,abcd,ijkl->", t_inv, t_inv, t_inv, t_inv, r4, r4)
        )
        full = _check_real(val, abs(val), "|R|^2")
        if full < -SYMMETRY_RTOL:
            raise SymmetryViolation(f"|R|^2 came out negative: {full:.3e}")
        diag = self._riemann_norm2_diagonal()
        if diag is not None:
            gap = abs(full - diag)
            if gap > SYMMETRY_RTOL * max(1.0, abs(full)):
                raise SymmetryViolation(
                    f"full contraction {full!r} and diagonal-metric shortcut {diag!r} "
                    f"for |R|^2 disagree by {gap:.3e}",
                    values=(full, diag),
                )
        return max(full, 0.0)

    def _riemann_norm2_diagonal(self) -> float | None:
        """Shortcut sum |R_{i jbar k lbar}|^2 / (t_i t_j t_k t_l) at diagonal metrics."""
        T = self.metric.T
        off = T - np.diag(np.diag(T))
        if np.max(np.abs(off)) > 1e-12 * max(1.0, np.max(np.abs(T))):
            return None
        lam = np.real(np.diag(T))
        inv = 1.0 / lam
        r4 = self.riemann_tensor()
        return float(
            np.einsum("i,j,k,l,ijkl->", inv, inv, inv, inv, np.abs(r4) ** 2).real
        )

    def laplacian_scalar(self) -> float:
        n = self.n
        k_jet = self.k_jet
        if k_jet.order < 2:
            raise OracleError("laplacian needs at least order-6 potential jets")
        hess = np.array(
            [
                [k_jet.derivative(p).derivative(n + q).value for q in range(n)]
                for p in range(n)
            ]
        )
        val = complex(np.trace(self.metric.T_inv @ hess))
        return _check_real(val, max(abs(val), abs(k_jet.value)), "laplacian of k")

    def invariants(self) -> CurvatureInvariants:
        return CurvatureInvariants.from_parts(
            self.scalar_curvature(),
            self.ricci_norm2(),
            self.riemann_norm2(),
            self.laplacian_scalar(),
        )


# --------------------------------------------------------------------------
# functional façade
# --------------------------------------------------------------------------


def metric_tensor(pot: PolarizedPotential, point, order: int = 2) -> MetricAtPoint:
    return CurvatureWorkspace(pot, point, order=order).metric


def ricci_tensor(pot: PolarizedPotential, point, order: int = 4) -> np.ndarray:
    return CurvatureWorkspace(pot, point, order=order).ricci()


def scalar_curvature(pot: PolarizedPotential, point, order: int = 4) -> float:
    return CurvatureWorkspace(pot, point, order=order).scalar_curvature()


def ricci_norm2(pot: PolarizedPotential, point, order: int = 4) -> float:
    return CurvatureWorkspace(pot, point, order=order).ricci_norm2()


def riemann_norm2(pot: PolarizedPotential, point, order: int = 4) -> float:
    return CurvatureWorkspace(pot, point, order=order).riemann_norm2()


def laplacian_scalar(pot: PolarizedPotential, point, order: int = DEFAULT_ORDER) -> float:
    return CurvatureWorkspace(pot, point, order=order).laplacian_scalar()


def curvature_invariants(
    pot: PolarizedPotential, point, order: int = DEFAULT_ORDER
) -> CurvatureInvariants:
    return CurvatureWorkspace(pot, point, order=order).invariants()
