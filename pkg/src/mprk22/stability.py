"""Linear stability of MPRK22(alpha) at steady states of linear systems.

The scheme is a nonlinear map ``y -> g(y)``; every steady state ``y*`` of a
conservative linear system is a non-hyperbolic fixed point.  For the
two-species family the Jacobian ``Dg(y*)`` has eigenvalues ``1`` and
``R(dt * lambda)`` with ``lambda = -(a + b)``.  This module provides ``R`` for
the three sign regimes of alpha, the critical arguments ``z*`` of the
conditionally stable regimes, and, for ``alpha < 0``, the Jacobian of the
implicit relations ``Psi(u, v) = 0``, ``Phi(u, v, w) = 0`` that define one step.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Regime
from .errors import DomainError, StepError, ValidationError
from .linalg import solve_dense
from .pds import LinearPDS, TwoSpeciesSystem, column_sum_tolerance

MARGINAL_BAND = 1e-12


def _regime(alpha: float) -> Regime:
    if not math.isfinite(alpha):
        raise DomainError(f"alpha must be finite, got {alpha!r}")
    return Regime.of(alpha)


def stability_function(alpha: float, z: float) -> float:
    """Nontrivial eigenvalue ``R(z)`` of ``Dg(y*)``, ``z = dt * lambda``.

    * ``alpha >= 1/2``: ``(-z^2 - 2 alpha z + 2) / (2 (1 - alpha z)(1 - z))``,
      defined for real ``z`` away from the poles ``1/alpha`` and ``1``;
    * ``0 < alpha < 1/2`` and ``alpha < 0``: rational functions valid for the
      two-species family, defined for ``z <= 0`` only.
    """
    regime = _regime(alpha)
    z = float(z)
    if regime is Regime.NONNEGATIVE_ALL:
        den = 2.0 * (1.0 - alpha * z) * (1.0 - z)
        if den == 0.0:
            raise DomainError(f"R has a pole at z={z!r} for alpha={alpha!r}")
        return (-z * z - 2.0 * alpha * z + 2.0) / den
    if z > 0:
        raise DomainError(f"R is only defined for z <= 0 when alpha < 1/2 (got z={z!r})")
    if regime is Regime.NEGATIVE_B1:
        c1 = 2.0 - 5.0 / (2.0 * alpha) + 1.0 / alpha**2
        c2 = 3.0 / (2.0 * alpha) - 1.0 / alpha**2
        c3 = -1.0 + 1.0 / alpha
        return -(1.0 + c1 * z - c2 * z / (-1.0 + alpha * z)) / (-1.0 + c3 * z)
    a2 = alpha * alpha
    num = -(alpha + 2.0) * z * z - (2.0 * a2 + 2.0) * z - 2.0 * alpha
    den = (2.0 * a2 - 2.0 * alpha) * z * z + (-2.0 * a2 + 2.0 * alpha - 2.0) * z - 2.0 * alpha
    return num / den


def r_limit_negative_alpha(alpha: float) -> float:
    """``lim_{z -> -inf} R(z) = -(alpha + 2) / (2 alpha (alpha - 1))`` for ``alpha < 0``."""
    if not alpha < 0:
        raise DomainError(f"limit formula needs alpha < 0, got {alpha!r}")
    return -(alpha + 2.0) / (2.0 * alpha * (alpha - 1.0))


def z_star(alpha: float) -> float:
    """Critical ``z* < 0`` with ``R(z*) = -1`` in the conditional regimes.

    Stability requires ``z* < dt * lambda < 0``.  Defined for
    ``0 < alpha < 1/2`` and ``-1/2 < alpha < 0``.
    """
    a = float(alpha)
    a2 = a * a
    if 0 < a < 0.5:
        root = math.sqrt(4 * a2 * a2 + 12 * a2 * a - 11 * a2 - 4 * a + 4)
        return (-2 * a2 + 3 * a - 2 - root) / (6 * a2 - 7 * a + 2)
    if -0.5 < a < 0:
        root = math.sqrt(4 * a2 * a2 + 4 * a2 * a - 3 * a2 - 12 * a + 4)
        return (2 * a2 - a + 2 + root) / (2 * a2 - 3 * a - 2)
    raise DomainError(f"alpha={alpha!r} is unconditionally stable or undefined; no finite z*")


class Classification(str, enum.Enum):
    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class StabilityReport:
    r_value: float
    modulus: float
    classification: Classification
    z_star: float | None
    regime: Regime
    z: float


def classify_modulus(modulus: float) -> Classification:
    if abs(modulus - 1.0) <= MARGINAL_BAND:
        return Classification.MARGINAL
    return Classification.STABLE if modulus < 1.0 else Classification.UNSTABLE


def stability_report(alpha: float, z: float) -> StabilityReport:
    regime = _regime(alpha)
    r = stability_function(alpha, z)
    zs = z_star(alpha) if (0 < alpha < 0.5 or -0.5 < alpha < 0) else None
    return StabilityReport(r, abs(r), classify_modulus(abs(r)), zs, regime, float(z))


def classify(alpha: float, dt: float, lam: float) -> StabilityReport:
    """Classify the mode ``lam <= 0`` under MPRK22(alpha) with step ``dt``."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    if lam > 0:
        raise DomainError(f"lambda must be nonpositive, got {lam!r}")
    return stability_report(alpha, dt * lam)


def eigvals_2x2(M: np.ndarray) -> np.ndarray:
    """Eigenvalues of a 2x2 matrix from the characteristic quadratic, ascending."""
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2):
        raise ValidationError(f"expected a 2x2 matrix, got {M.shape}")
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = (0.5 * (M[0, 0] - M[1, 1])) ** 2 + M[0, 1] * M[1, 0]
    if disc < 0:
        s = 1j * math.sqrt(-disc)
        return np.array([0.5 * tr - s, 0.5 * tr + s])
    s = math.sqrt(disc)
    # avoid cancellation in the smaller-magnitude root
    big = 0.5 * tr + math.copysign(s, tr) if tr != 0 else s
    small = det / big if big != 0 else -big
    return np.sort(np.array([big, small]))


# Implicit relations for alpha < 0 and their Jacobians at (y*, y*, y*).


def _check_negative(alpha: float) -> None:
    if not alpha < 0:
        raise DomainError(f"implicit-relation Jacobians are derived for alpha < 0, got {alpha!r}")


def psi_map(A: np.ndarray, u: np.ndarray, v: np.ndarray, dt: float, alpha: float
            ) -> np.ndarray:
    """Stage relation ``Psi(u, v)``; zero when ``v`` is the stage for ``u``."""
    _check_negative(alpha)
    A = np.asarray(A, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = len(u)
    out = np.empty(n)
    for i in range(n):
        s_in = sum(A[j, i] * u[i] * v[j] / u[j] for j in range(n) if j != i)
        s_out = sum(A[i, j] * u[j] * v[i] / u[i] for j in range(n) if j != i)
        out[i] = -v[i] + u[i] - alpha * dt * (s_in - s_out)
    return out


def phi_map(A: np.ndarray, u: np.ndarray, v: np.ndarray, w: np.ndarray, dt: float,
            alpha: float) -> np.ndarray:
    """Update relation ``Phi(u, v, w)``; zero when ``w`` is the next iterate."""
    _check_negative(alpha)
    A = np.asarray(A, dtype=float)
    u, v, w = (np.asarray(x, dtype=float) for x in (u, v, w))
    b1 = 1.0 - 1.0 / (2.0 * alpha)
    b2 = 1.0 / (2.0 * alpha)
    e = 1.0 / alpha
    n = len(u)
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if j == i:
                continue
            acc += b1 * A[i, j] * w[j] * v[j] ** -e * u[j] ** e
            acc -= b2 * A[j, i] * v[i] * w[j] * v[j] ** -e * u[j] ** (e - 1.0)
            acc -= b1 * A[j, i] * w[i] * v[i] ** -e * u[i] ** e
            acc += b2 * A[i, j] * v[j] * w[i] * v[i] ** -e * u[i] ** (e - 1.0)
        out[i] = -w[i] + u[i] + dt * acc
    return out


@dataclass(frozen=True)
class ImplicitJacobians:
    """Partial Jacobians of ``Psi`` and ``Phi`` at ``u = v = w = y*``."""

    du_psi: np.ndarray
    dv_psi: np.ndarray
    du_phi: np.ndarray
    dv_phi: np.ndarray
    dw_phi: np.ndarray

    def __iter__(self):
        return iter((self.du_psi, self.dv_psi, self.du_phi, self.dv_phi, self.dw_phi))


def similarity_transpose(A: np.ndarray, y_star: np.ndarray) -> np.ndarray:
    """``diag(y*) A^T diag(y*)^{-1}``."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y_star, dtype=float)
    return y[:, None] * A.T / y[None, :]


def psi_phi_jacobians(sys: LinearPDS, y_star: np.ndarray, dt: float, alpha: float
                      ) -> ImplicitJacobians:
    _check_negative(alpha)
    A = sys.rate_matrix
    y = np.asarray(y_star, dtype=float)
    if y.shape != (A.shape[0],) or not np.all(y > 0):
        raise ValidationError("y_star must be a strictly positive state of matching size")
    resid = A @ y
    if np.max(np.abs(resid)) > 1e3 * column_sum_tolerance(A) * np.max(y):
        raise ValidationError(f"y_star is not a steady state: |A y*| = {np.max(np.abs(resid)):.3e}")
    C = similarity_transpose(A, y)
    eye = np.eye(A.shape[0])
    a2 = alpha * alpha
    return ImplicitJacobians(
        du_psi=eye + alpha * dt * (A + C),
        dv_psi=-eye - alpha * dt * C,
        du_phi=eye + dt * ((1 / alpha - 1 / (2 * a2)) * A - (-1 / (2 * alpha) + 1 / (2 * a2)) * C),
        dv_phi=dt * ((-1 / (2 * alpha) + 1 / (2 * a2)) * A + 1 / (2 * a2) * C),
        dw_phi=-eye + dt * ((1 - 1 / (2 * alpha)) * A - 1 / (2 * alpha) * C),
    )


def dg_implicit(jacs: ImplicitJacobians) -> np.ndarray:
    """``Dg(y*) = -(Dw Phi)^{-1} (Du Phi - Dv Phi (Dv Psi)^{-1} Du Psi)``."""
    inner = solve_dense(jacs.dv_psi, jacs.du_psi)
    return -solve_dense(jacs.dw_phi, jacs.du_phi - jacs.dv_phi @ inner)


def dg_analytic_2x2(sys: TwoSpeciesSystem, dt: float, alpha: float) -> np.ndarray:
    """Closed-form ``Dg(y*)`` for the two-species family and ``alpha < 0``."""
    _check_negative(alpha)
    if sys.a + sys.b <= 0:
        raise DomainError("a + b must be positive")
    A = sys.rate_matrix
    eye = np.eye(2)
    a2 = alpha * alpha
    right = solve_dense(-eye - alpha * dt * A, eye + 2 * alpha * dt * A)
    bracket = (eye + dt * (3 / (2 * alpha) - 1 / a2) * A
               - dt * (-1 / (2 * alpha) + 1 / a2) * A @ right)
    return -solve_dense(-eye + dt * (1 - 1 / alpha) * A, bracket)


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], point: np.ndarray, h: float = 1e-6
                ) -> np.ndarray:
    """Central-difference Jacobian; column ``j`` is ``(g(x + h e_j) - g(x - h e_j)) / 2h``."""
    x = np.asarray(point, dtype=float)
    n = x.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        try:
            fp = np.asarray(fn(x + e), dtype=float)
            fm = np.asarray(fn(x - e), dtype=float)
        except StepError as exc:
            raise StepError(f"map failed at probe {j} (+/- h={h:g}): {exc}",
                            component=j) from exc
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)
