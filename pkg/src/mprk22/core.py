"""MPRK22(alpha) time stepping for production-destruction systems.

One step solves two linear systems.  The stage ``y2`` satisfies

    y2_i = y_i + a21 dt sum_j ( p_ij(y) y2_g / y_g - d_ij(y) y2_h / y_h )

and the update uses the same pattern with weights ``b1, b2``, evaluation
states ``y, y2`` and denominators ``sigma``.  The indices ``g, h`` come from
:func:`gamma`: a term multiplied by a negative coefficient swaps the species
that supplies its Patankar weight, which keeps every system matrix an
M-matrix with unit column sums.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AssemblyError, DomainError, StepError, ValidationError
from .linalg import solve_dense, solve_mmatrix
from .pds import GeneralPDS

UNDERFLOW_LIMIT = 1e-300


class Regime(enum.Enum):
    """Sign pattern of the Butcher coefficients."""

    NONNEGATIVE_ALL = "nonnegative"      # alpha >= 1/2
    NEGATIVE_B1 = "negative-b1"          # 0 < alpha < 1/2
    NEGATIVE_A21_B2 = "negative-a21-b2"  # alpha < 0

    @classmethod
    def of(cls, alpha: float) -> "Regime":
        if alpha >= 0.5:
            return cls.NONNEGATIVE_ALL
        if alpha > 0:
            return cls.NEGATIVE_B1
        if alpha < 0:
            return cls.NEGATIVE_A21_B2
        raise DomainError("MPRK22 undefined at alpha=0")


@dataclass(frozen=True)
class MPRKParams:
    """Butcher coefficients ``a21 = alpha``, ``b2 = 1/(2 alpha)``, ``b1 = 1 - b2``."""

    alpha: float
    a21: float = field(init=False)
    b1: float = field(init=False)
    b2: float = field(init=False)
    regime: Regime = field(init=False)

    def __post_init__(self):
        alpha = float(self.alpha)
        if not math.isfinite(alpha):
            raise DomainError(f"alpha must be finite, got {self.alpha!r}")
        regime = Regime.of(alpha)
        b2 = 1.0 / (2.0 * alpha)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "a21", alpha)
        object.__setattr__(self, "b2", b2)
        object.__setattr__(self, "b1", 1.0 - b2)
        object.__setattr__(self, "regime", regime)


def gamma(i: int, j: int, theta: float) -> int:
    """Index supplying the Patankar weight: ``i`` if ``theta >= 0`` else ``j``."""
    return i if theta >= 0 else j


def sigma_weights(y_n: np.ndarray, y_stage: np.ndarray, a21: float) -> np.ndarray:
    """Denominators ``y_n**(1 - 1/a21) * y_stage**(1/a21)`` via exp/log."""
    y_n = np.asarray(y_n, dtype=float)
    y_stage = np.asarray(y_stage, dtype=float)
    if not (np.all(y_n > 0) and np.all(y_stage > 0)):
        raise DomainError("sigma weights need strictly positive states")
    e = 1.0 / a21
    with np.errstate(over="ignore", under="ignore"):
        sigma = np.exp((1.0 - e) * np.log(y_n) + e * np.log(y_stage))
    bad = np.flatnonzero(~(np.isfinite(sigma) & (sigma > 0)))
    if bad.size:
        k = int(bad[0])
        raise StepError(f"sigma weight {k} is not a positive finite number ({sigma[k]!r})",
                        component=k)
    return sigma


def assemble_patankar_matrix(pds: GeneralPDS, eval_states: Sequence[np.ndarray],
                             weights: Sequence[float], denom: np.ndarray, dt: float,
                             y_n: np.ndarray | None = None, t: float = 0.0
                             ) -> tuple[np.ndarray, np.ndarray | None]:
    """Build ``M`` such that the implicit relation reads ``M x = y_n``.

    For weight ``theta`` evaluated at state ``e``:

    * ``theta >= 0``: ``M[i, j] -= theta dt p_ij(e) / denom_j`` and
      ``M[i, i] += theta dt d_ij(e) / denom_i``;
    * ``theta < 0``: ``M[i, i] -= theta dt p_ij(e) / denom_i`` and
      ``M[i, j] += theta dt d_ij(e) / denom_j``.

    Returns ``(M, y_n)``; the second item is passed through unchanged.
    """
    denom = np.asarray(denom, dtype=float)
    n = pds.n_species
    M = np.eye(n)
    diag = np.zeros(n)
    for k, (theta, e) in enumerate(zip(weights, eval_states)):
        if theta == 0:
            continue
        P, D = pds.rates(t, np.asarray(e, dtype=float))
        c = theta * dt
        with np.errstate(all="ignore"):
            if theta > 0:
                off = -c * P / denom[None, :]
                dia = c * D / denom[:, None]
            else:
                off = c * D / denom[None, :]
                dia = -c * P / denom[:, None]
        for term in (off, dia):
            bad = np.argwhere(~np.isfinite(term))
            if bad.size:
                i, j = (int(v) for v in bad[0])
                raise AssemblyError(f"non-finite contribution from term ({i}, {j}) "
                                    f"of weight group {k}", provenance=(i, j, k))
        M += off
        diag += dia.sum(axis=1)
    M[np.diag_indices(n)] += diag
    return M, y_n


@dataclass
class StepWorkspace:
    """Intermediate quantities of the most recent step (owned by one caller)."""

    y_stage: np.ndarray | None = None
    sigma: np.ndarray | None = None
    stage_matrix: np.ndarray | None = None
    system_matrix: np.ndarray | None = None
    rhs: np.ndarray | None = None


def _check_state(y: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(~(y >= UNDERFLOW_LIMIT))
    if bad.size:
        k = int(bad[0])
        raise StepError(f"{what} component {k} = {y[k]!r} is not above {UNDERFLOW_LIMIT:g}",
                        component=k)


def mprk22_step(pds: GeneralPDS, y_n: np.ndarray, dt: float, params: MPRKParams,
                t: float = 0.0, workspace: StepWorkspace | None = None) -> np.ndarray:
    """Advance ``y_n`` by one MPRK22(alpha) step of size ``dt``."""
    y_n = np.asarray(y_n, dtype=float)
    if y_n.shape != (pds.n_species,):
        raise ValidationError(f"state has shape {y_n.shape}, expected ({pds.n_species},)")
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    _check_state(y_n, "input")

    M1, _ = assemble_patankar_matrix(pds, [y_n], [params.a21], y_n, dt, t=t)
    solve = solve_mmatrix if pds.conservative else solve_dense
    y2 = solve(M1, y_n)
    _check_state(y2, "stage")

    sigma = sigma_weights(y_n, y2, params.a21)
    M2, _ = assemble_patankar_matrix(pds, [y_n, y2], [params.b1, params.b2], sigma, dt,
                                     t=t)
    y_next = solve(M2, y_n)
    _check_state(y_next, "updated")

    if workspace is not None:
        workspace.y_stage = y2
        workspace.sigma = sigma
        workspace.stage_matrix = M1
        workspace.system_matrix = M2
        workspace.rhs = y_n
    return y_next


@dataclass(frozen=True)
class Trajectory:
    """States ``y[n]`` at times ``t[n] = t0 + n dt``."""

    t: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, n):
        return self.t[n], self.y[n]

    @property
    def mass(self) -> np.ndarray:
        return self.y.sum(axis=1)


def integrate(pds: GeneralPDS, y0: np.ndarray, dt: float, steps: int, params: MPRKParams,
              t0: float = 0.0) -> Trajectory:
    """Apply :func:`mprk22_step` ``steps`` times starting from ``y0``."""
    y0 = np.asarray(y0, dtype=float)
    if steps < 0:
        raise DomainError(f"steps must be nonnegative, got {steps}")
    if not np.all(y0 > 0):
        raise ValidationError("initial state must be strictly positive")
    ys = np.empty((steps + 1, y0.size))
    ys[0] = y0
    y = y0
    for n in range(steps):
        try:
            y = mprk22_step(pds, y, dt, params, t=t0 + n * dt)
        except StepError as exc:
            exc.step = n
            raise
        ys[n + 1] = y
    return Trajectory(t0 + dt * np.arange(steps + 1), ys)
