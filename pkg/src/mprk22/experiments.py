"""Spurious fixed points of MPRK22(alpha) on the symmetric two-species problem.

The test problem is ``y' = [[-a, a], [a, -a]] y`` with
``y(0) = (1/2 + delta, 1/2 - delta)``.  Its exact solution relaxes to
``(1/2, 1/2)`` for every ``delta``; the scheme does so only for initial values
close enough to the steady state when ``alpha < 1/2``.  ``d(alpha, delta)``
is the max-norm distance of the iterate after ``M`` steps from ``(1/2, 1/2)``.

Long runs use a closed-form two-species step (:func:`two_species_run`) that
works on Python floats or on numpy arrays of cells.  It is cross-checked
against :func:`mprk22.core.mprk22_step` in the test suite.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import MPRKParams, integrate
from .errors import DomainError, StepError, ValidationError
from .pds import TwoSpeciesSystem, linear_as_general

STABLE_BELOW = 1e-6
UNSTABLE_ABOVE = 1e-2
STEADY_STATE = np.array([0.5, 0.5])
DEFAULT_STEPS = 10_000
CHUNK = 4096
_FLOOR = 1e-300


def initial_value(delta: float) -> np.ndarray:
    """``(1/2 + delta, 1/2 - delta)`` for ``0 <= delta < 1/2``."""
    if not 0 <= delta < 0.5:
        raise DomainError(f"delta must lie in [0, 0.5), got {delta!r}")
    return np.array([0.5 + delta, 0.5 - delta])


def exact_solution(delta: float, a: float, t):
    """Exact solution at time(s) ``t``; shape ``(2,)`` or ``(len(t), 2)``."""
    decay = delta * np.exp(-2.0 * a * np.asarray(t, dtype=float))
    return np.stack([0.5 + decay, 0.5 - decay], axis=-1)


def test_system(a: float) -> TwoSpeciesSystem:
    return TwoSpeciesSystem(a, a)


test_system.__test__ = False  # keep pytest from collecting this helper


@dataclass(frozen=True)
class ExperimentConfig:
    a: float
    delta: float
    alpha: float
    dt: float = 1.0
    steps: int = DEFAULT_STEPS

    def __post_init__(self):
        initial_value(self.delta)
        MPRKParams(self.alpha)
        if not self.a > 0:
            raise DomainError(f"a must be positive, got {self.a!r}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        if self.steps < 0:
            raise DomainError(f"steps must be nonnegative, got {self.steps!r}")


# closed-form two-species step ----------------------------------------------


def _coefficients(alpha, dt):
    """Sign-split products ``dt * theta`` for ``theta = a21, b1, b2``."""
    b2 = 1.0 / (2.0 * alpha)
    b1 = 1.0 - b2
    out = []
    for theta in (alpha, b1, b2):
        pos = 0.5 * (theta + abs(theta))
        out.append(dt * pos)
        out.append(dt * (theta - pos))
    e = 1.0 / alpha
    return (*out, 1.0 - e, e)


def _solve2(u12, u21, r1, r2):
    # M = [[1 + u21, -u12], [-u21, 1 + u12]] has unit column sums.
    m = r1 + r2
    d = 1.0 + u12 + u21
    return (r1 + u12 * m) / d, (r2 + u21 * m) / d


def _step2(y1, y2, a, b, co):
    sp, sn, p1, n1, p2, n2, e_old, e_new = co
    # p12 = b y2 feeds species 1, p21 = a y1 feeds species 2; d_ij = p_ji.
    q12, q21 = b * y2, a * y1
    s1, s2 = _solve2((sp * q12 - sn * q21) / y2, (sp * q21 - sn * q12) / y1, y1, y2)
    sig1 = y1 ** e_old * s1 ** e_new
    sig2 = y2 ** e_old * s2 ** e_new
    r12, r21 = b * s2, a * s1
    u12 = (p1 * q12 + p2 * r12 - n1 * q21 - n2 * r21) / sig2
    u21 = (p1 * q21 + p2 * r21 - n1 * q12 - n2 * r12) / sig1
    return _solve2(u12, u21, y1, y2)


@dataclass
class KernelResult:
    y: np.ndarray
    failed_step: np.ndarray  # -1 where the run completed


def two_species_run(y0: np.ndarray, a, b, dt, alpha, steps: int) -> KernelResult:
    """Run ``steps`` MPRK22 steps on ``[[-a, b], [a, -b]]`` for a batch of cells.

    ``y0`` has shape ``(..., 2)``; ``a``, ``b``, ``dt`` and ``alpha`` broadcast
    against ``y0[..., 0]``.  Cells whose state leaves ``(1e-300, inf)`` are
    frozen and reported through ``failed_step``.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape == (2,):
        return _run_scalar(y0, float(a), float(b), float(dt), float(alpha), steps)
    y1 = np.array(y0[..., 0], dtype=float)
    y2 = np.array(y0[..., 1], dtype=float)
    shape = np.broadcast_shapes(y1.shape, np.shape(a), np.shape(b), np.shape(dt),
                                np.shape(alpha))
    y1, y2 = np.broadcast_to(y1, shape).copy(), np.broadcast_to(y2, shape).copy()
    a = np.broadcast_to(np.asarray(a, dtype=float), shape)
    b = np.broadcast_to(np.asarray(b, dtype=float), shape)
    co = _coefficients(np.asarray(alpha, dtype=float), np.asarray(dt, dtype=float))
    failed = np.full(shape, -1, dtype=np.int64)
    live = np.ones(shape, dtype=bool)
    with np.errstate(all="ignore"):
        for n in range(steps):
            z1, z2 = _step2(y1, y2, a, b, co)
            ok = (z1 >= _FLOOR) & (z2 >= _FLOOR) & (z1 < np.inf) & (z2 < np.inf)
            if ok.all():
                y1, y2 = z1, z2
                continue
            newly = live & ~ok
            failed[newly] = n
            live &= ok
            y1 = np.where(live, z1, y1)
            y2 = np.where(live, z2, y2)
    return KernelResult(np.stack([y1, y2], axis=-1), failed)


def _run_scalar(y0, a, b, dt, alpha, steps) -> KernelResult:
    co = _coefficients(alpha, dt)
    y1, y2 = float(y0[0]), float(y0[1])
    failed = -1
    for n in range(steps):
        try:
            z1, z2 = _step2(y1, y2, a, b, co)
        except (ZeroDivisionError, OverflowError):
            failed = n
            break
        if not (_FLOOR <= z1 < math.inf and _FLOOR <= z2 < math.inf):
            failed = n
            break
        y1, y2 = z1, z2
    return KernelResult(np.array([y1, y2]), np.array(failed))


# single runs --------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPointResult:
    final_state: np.ndarray
    d: float
    diverged: bool = False
    failed_step: int | None = None


def distance(y: np.ndarray) -> np.ndarray:
    """``||y* - y||_inf`` with ``y* = (1/2, 1/2)``; works on ``(..., 2)`` arrays."""
    return np.max(np.abs(np.asarray(y) - STEADY_STATE), axis=-1)


def run_fixed_point_experiment(cfg: ExperimentConfig, method: str = "kernel"
                               ) -> FixedPointResult:
    """Integrate the test problem for ``cfg.steps`` steps and measure ``d``.

    ``method="generic"`` routes every step through
    :func:`mprk22.core.mprk22_step` instead of the closed-form kernel.
    """
    y0 = initial_value(cfg.delta)
    if method == "kernel":
        res = two_species_run(y0, cfg.a, cfg.a, cfg.dt, cfg.alpha, cfg.steps)
        step = int(res.failed_step)
        y = res.y
    elif method == "generic":
        pds = linear_as_general(test_system(cfg.a).as_linear())
        step = -1
        try:
            y = integrate(pds, y0, cfg.dt, cfg.steps, MPRKParams(cfg.alpha)).y[-1]
        except StepError as exc:
            step, y = exc.step, np.full(2, np.nan)
    else:
        raise ValueError(f"unknown method {method!r}")
    if step >= 0:
        return FixedPointResult(y, math.nan, diverged=True, failed_step=step)
    return FixedPointResult(y, float(distance(y)))


# scans ---------------------------------------------------------------------------


def classify_distance(d: float) -> str:
    """``stable`` (d < 1e-6), ``unstable`` (d > 1e-2), else ``ambiguous``."""
    if not math.isfinite(d):
        return "diverged"
    if d < STABLE_BELOW:
        return "stable"
    if d > UNSTABLE_ABOVE:
        return "unstable"
    return "ambiguous"


def delta_grid(n_samples: int) -> np.ndarray:
    """Cell centres ``(k + 1/2) * 0.5 / n`` of ``n`` equal cells on ``(0, 0.5)``."""
    if n_samples < 2:
        raise DomainError(f"need at least 2 delta samples, got {n_samples}")
    return (np.arange(n_samples) + 0.5) * (0.5 / n_samples)


def alpha_grid(alpha_min: float, alpha_max: float, n_samples: int) -> np.ndarray:
    """``n`` equidistant values on ``(alpha_min, alpha_max]``.

    The left end is open so that a symmetric range with an odd sample count,
    such as ``(-2, 2]`` with 241 samples, never contains ``alpha = 0``.
    """
    if n_samples < 1:
        raise DomainError(f"need at least 1 alpha sample, got {n_samples}")
    if not alpha_max > alpha_min:
        raise DomainError(f"alpha_max must exceed alpha_min ({alpha_min}, {alpha_max})")
    step = (alpha_max - alpha_min) / n_samples
    return alpha_max - step * np.arange(n_samples - 1, -1, -1)


def _check_alpha_axis(alpha_axis: np.ndarray) -> None:
    if np.any(alpha_axis == 0):
        raise DomainError("MPRK22 undefined at alpha=0")
    if not np.all(np.isfinite(alpha_axis)):
        raise DomainError("alpha values must be finite")


@dataclass
class ScanResult:
    """``d`` on an ``alpha x delta`` grid plus the final states of every cell."""

    alpha_axis: np.ndarray
    delta_axis: np.ndarray
    d_values: np.ndarray
    final_states: np.ndarray
    steps_used: int
    failed_step: np.ndarray = field(repr=False)

    @property
    def diverged(self) -> np.ndarray:
        return self.failed_step >= 0

    def classes(self) -> np.ndarray:
        out = np.full(self.d_values.shape, "ambiguous", dtype=object)
        out[self.d_values < STABLE_BELOW] = "stable"
        out[self.d_values > UNSTABLE_ABOVE] = "unstable"
        out[~np.isfinite(self.d_values)] = "diverged"
        return out

    def ambiguous_cells(self) -> list[tuple[float, float, float]]:
        """``(alpha, delta, d)`` of every cell inside the review band."""
        i, j = np.nonzero(self.classes() == "ambiguous")
        return [(float(self.alpha_axis[p]), float(self.delta_axis[q]), float(self.d_values[p, q]))
                for p, q in zip(i, j)]

    def transitions(self, row: int = 0) -> list[tuple[float, float]]:
        """Adjacent ``(delta_stable, delta_unstable)`` pairs along one alpha row."""
        cls = self.classes()[row]
        out = []
        for k in range(len(cls) - 1):
            if cls[k] == "stable" and cls[k + 1] in ("unstable", "diverged"):
                out.append((float(self.delta_axis[k]), float(self.delta_axis[k + 1])))
        return out

    def alpha_star(self, upper: float = -0.5) -> tuple[float, float] | None:
        """Estimate of the left end of the unstable band at ``alpha <= upper``.

        Walking up from the most negative column, returns the midpoint between
        the last all-stable column and the first column with an unstable cell,
        together with the grid spacing as uncertainty.  ``None`` if no column
        with ``alpha <= upper`` has an unstable cell or the first one has no
        stable predecessor.
        """
        order = np.argsort(self.alpha_axis)
        unstable = np.any(self.classes() != "stable", axis=1)
        prev = None
        for p in order:
            alpha = self.alpha_axis[p]
            if alpha > upper:
                break
            if unstable[p]:
                if prev is None:
                    return None
                return 0.5 * (alpha + prev), float(alpha - prev)
            prev = alpha
        return None


def default_threads() -> int:
    env = os.environ.get("MPRK_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _scan_cells(alpha: np.ndarray, delta: np.ndarray, a: float, dt: float, steps: int,
                threads: int | None) -> tuple[np.ndarray, np.ndarray]:
    """Run every ``(alpha_k, delta_k)`` pair; chunks are fixed so output is
    independent of the thread count."""
    y0 = np.stack([0.5 + delta, 0.5 - delta], axis=-1)
    n = len(alpha)
    ys = np.empty((n, 2))
    failed = np.empty(n, dtype=np.int64)
    chunks = [slice(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]

    def work(sl):
        res = two_species_run(y0[sl], a, a, dt, alpha[sl], steps)
        ys[sl] = res.y
        failed[sl] = res.failed_step

    workers = threads or default_threads()
    if workers <= 1 or len(chunks) == 1:
        for sl in chunks:
            work(sl)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, chunks))
    return ys, failed


def scan_alpha_delta(alpha_axis: Sequence[float], delta_axis: Sequence[float], a: float = 200.0,
                     dt: float = 1.0, steps: int = DEFAULT_STEPS, threads: int | None = None
                     ) -> ScanResult:
    """Compute ``d(alpha, delta)`` on the full tensor grid."""
    alpha_axis = np.asarray(alpha_axis, dtype=float)
    delta_axis = np.asarray(delta_axis, dtype=float)
    _check_alpha_axis(alpha_axis)
    if np.any(delta_axis < 0) or np.any(delta_axis >= 0.5):
        raise DomainError("delta samples must lie in [0, 0.5)")
    if not (a > 0 and dt > 0 and steps >= 0):
        raise DomainError("need a > 0, dt > 0 and steps >= 0")
    A, D = np.meshgrid(alpha_axis, delta_axis, indexing="ij")
    ys, failed = _scan_cells(A.ravel(), D.ravel(), a, dt, steps, threads)
    shape = A.shape
    ys = ys.reshape(*shape, 2)
    failed = failed.reshape(shape)
    d = distance(ys)
    d[failed >= 0] = np.nan
    return ScanResult(alpha_axis, delta_axis, d, ys, steps, failed)


def scan_delta(alpha: float, a: float = 20.0, dt: float = 1.0, steps: int = DEFAULT_STEPS,
               n_samples: int = 200, threads: int | None = None) -> ScanResult:
    """``d(alpha, delta)`` over :func:`delta_grid` for a single ``alpha``."""
    MPRKParams(alpha)
    return scan_alpha_delta([alpha], delta_grid(n_samples), a, dt, steps, threads)


# convergence ------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    error: float
    order: float | None
    failed: bool = False


def convergence_order(alpha: float, a: float = 1.0, delta: float = 0.25,
                      dt_list: Sequence[float] = tuple(2.0 ** -k for k in range(3, 11)),
                      T: float = 1.0, method: str = "kernel") -> list[ConvergenceRow]:
    """Max-norm error at ``T`` against the exact solution for each step size.

    The observed order between consecutive rows is
    ``log(e_k / e_{k+1}) / log(dt_k / dt_{k+1})``, which equals
    ``log2(e_k / e_{k+1})`` for halved steps.
    """
    dts = [float(h) for h in dt_list]
    if len(dts) < 3:
        raise ValidationError("need at least 3 step sizes")
    if any(h2 >= h1 for h1, h2 in zip(dts, dts[1:])) or dts[-1] <= 0:
        raise ValidationError("step sizes must be positive and strictly decreasing")
    MPRKParams(alpha)
    y0 = initial_value(delta)
    exact = exact_solution(delta, a, T)
    rows: list[ConvergenceRow] = []
    prev = None
    for h in dts:
        steps = round(T / h)
        if abs(steps * h - T) > 1e-9 * T:
            raise ValidationError(f"T={T} is not a multiple of dt={h}")
        cfg = ExperimentConfig(a, delta, alpha, h, steps)
        if method == "kernel":
            res = two_species_run(y0, a, a, h, alpha, steps)
            y, failed = res.y, int(res.failed_step) >= 0
        else:
            r = run_fixed_point_experiment(cfg, method=method)
            y, failed = r.final_state, r.diverged
        err = math.nan if failed else float(np.max(np.abs(y - exact)))
        order = None
        if prev is not None and math.isfinite(err) and math.isfinite(prev[1]) and err > 0:
            order = math.log(prev[1] / err) / math.log(prev[0] / h)
        rows.append(ConvergenceRow(h, err, order, failed))
        prev = (h, err)
    return rows
