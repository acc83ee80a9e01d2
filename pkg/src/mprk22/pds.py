"""Production-destruction systems.

Two representations are provided:

``GeneralPDS``
    Matrix-valued evaluators ``P(t, y)`` and ``D(t, y)`` with
    ``P[i, j] = p_ij`` and ``D[i, j] = d_ij``.
``LinearPDS``
    A rate matrix ``A`` for ``y' = A y`` with nonnegative off-diagonal
    entries and zero column sums.

``TwoSpeciesSystem`` is the two-dimensional family ``[[-a, b], [a, -b]]``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .errors import DomainError, ValidationError

COLUMN_SUM_TOL = 1e-13

RateFn = Callable[[float, np.ndarray], np.ndarray]


def _offdiag(m: np.ndarray) -> np.ndarray:
    out = np.array(m, dtype=float, copy=True)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True)
class GeneralPDS:
    """Arbitrary production-destruction system.

    Parameters
    ----------
    n_species:
        Number of species ``N``.
    production:
        ``production(t, y)`` returns the ``N x N`` matrix of ``p_ij``.
    destruction:
        ``destruction(t, y)`` returns the ``N x N`` matrix of ``d_ij``.  If
        omitted the system is conservative and ``d_ij = p_ji``.
    conservative:
        Flag that ``d_ij = p_ji`` holds.  Forced to ``True`` when
        ``destruction`` is omitted.

    Diagonal entries returned by the evaluators are ignored.
    """

    n_species: int
    production: RateFn
    destruction: RateFn | None = None
    conservative: bool = False

    def __post_init__(self):
        if int(self.n_species) != self.n_species or self.n_species < 1:
            raise ValidationError(f"n_species must be a positive integer, got {self.n_species!r}")
        if self.destruction is None:
            object.__setattr__(self, "conservative", True)

    def rates(self, t: float, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(P, D)`` at ``(t, y)`` with zeroed diagonals."""
        P = _offdiag(self.production(t, y))
        if self.destruction is None:
            D = P.T.copy()
        else:
            D = _offdiag(self.destruction(t, y))
        n = self.n_species
        if P.shape != (n, n) or D.shape != (n, n):
            raise ValidationError(
                f"rate evaluators must return {n}x{n} matrices, got {P.shape} and {D.shape}")
        return P, D

    def produce(self, t: float, y: np.ndarray, i: int, j: int) -> float:
        if i == j:
            return 0.0
        return float(self.rates(t, y)[0][i, j])

    def destroy(self, t: float, y: np.ndarray, i: int, j: int) -> float:
        if i == j:
            return 0.0
        return float(self.rates(t, y)[1][i, j])

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        """Right-hand side ``sum_j (p_ij - d_ij)``."""
        P, D = self.rates(t, y)
        return P.sum(axis=1) - D.sum(axis=1)


def check_general(pds: GeneralPDS, samples: int = 20, *, seed: int = 0,
                  scale: float = 1.0, rtol: float = 1e-12) -> "ValidationReport":
    """Spot-check nonnegativity and (if flagged) conservativity by sampling.

    States are drawn log-uniformly from ``scale * [1e-3, 1e3]`` and times
    uniformly from ``[0, 10]``.
    """
    rng = np.random.default_rng(seed)
    report = ValidationReport()
    n = pds.n_species
    for _ in range(samples):
        y = scale * 10.0 ** rng.uniform(-3, 3, size=n)
        t = rng.uniform(0.0, 10.0)
        P, D = pds.rates(t, y)
        for name, M in (("production", P), ("destruction", D)):
            bad = np.argwhere(~(M >= 0))
            if bad.size:
                i, j = bad[0]
                report.add(f"{name} nonnegative", (int(i), int(j)), float(M[i, j]))
        if pds.conservative:
            gap = np.abs(D - P.T)
            limit = rtol * np.maximum(np.abs(D), 1.0)
            bad = np.argwhere(gap > limit)
            if bad.size:
                i, j = bad[0]
                report.add("d_ij = p_ji", (int(i), int(j)), float(gap[i, j]))
        if not report.ok:
            break
    return report


@dataclass(frozen=True)
class Violation:
    condition: str
    index: tuple[int, ...]
    value: float

    def __str__(self) -> str:
        # Messages use 1-based indices.
        idx = ", ".join(str(k + 1) for k in self.index)
        if self.condition == "column sum":
            return f"column {idx} sums to {self.value:g}"
        if self.condition == "off-diagonal nonnegative":
            return f"off-diagonal ({idx}) is {self.value:g} < 0"
        if self.condition == "diagonal nonpositive":
            return f"diagonal ({idx}) is {self.value:g} > 0"
        return f"{self.condition} violated at ({idx}): {self.value:g}"


@dataclass
class ValidationReport:
    """Pass/fail result of an invariant check."""

    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)

    def add(self, condition: str, index: tuple[int, ...], value: float) -> None:
        self.violations.append(Violation(condition, index, value))

    def summary(self) -> str:
        if self.ok:
            return "pass"
        return "fail: " + "; ".join(str(v) for v in self.violations)

    def raise_if_failed(self) -> None:
        if not self.ok:
            raise ValidationError(self.summary())


@dataclass(frozen=True, eq=False)
class LinearPDS:
    """Linear system ``y' = A y``; ``rate_matrix`` is stored read-only.

    Construction does not validate; use :func:`validate_linear` or
    :meth:`check`.
    """

    rate_matrix: np.ndarray

    def __post_init__(self):
        A = np.array(self.rate_matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError(f"rate matrix must be square, got shape {A.shape}")
        A.setflags(write=False)
        object.__setattr__(self, "rate_matrix", A)

    @property
    def n_species(self) -> int:
        return self.rate_matrix.shape[0]

    @property
    def offdiag(self) -> np.ndarray:
        """``B = A - diag(A)``."""
        return _offdiag(self.rate_matrix)

    def validate(self) -> "ValidationReport":
        return validate_linear(self)

    def check(self) -> "LinearPDS":
        validate_linear(self).raise_if_failed()
        return self


def column_sum_tolerance(A: np.ndarray) -> float:
    return COLUMN_SUM_TOL * max(1.0, float(np.max(np.abs(A), initial=0.0)))


def validate_linear(sys: LinearPDS) -> ValidationReport:
    """Check positivity (``B >= 0``) and conservativity (``1^T A = 0``)."""
    A = sys.rate_matrix
    report = ValidationReport()
    n = A.shape[0]
    if not np.all(np.isfinite(A)):
        i, j = np.argwhere(~np.isfinite(A))[0]
        report.add("finite", (int(i), int(j)), float(A[i, j]))
        return report
    for i in range(n):
        for j in range(n):
            if i != j and A[i, j] < 0:
                report.add("off-diagonal nonnegative", (i, j), float(A[i, j]))
    tol = column_sum_tolerance(A)
    sums = A.sum(axis=0)
    for j in range(n):
        if abs(sums[j]) > tol:
            report.add("column sum", (j,), float(sums[j]))
    for i in range(n):
        if A[i, i] > 0:
            report.add("diagonal nonpositive", (i, i), float(A[i, i]))
    return report


def linear_as_general(sys: LinearPDS) -> GeneralPDS:
    """Production-destruction form ``p_ij = a_ij y_j``, ``d_ij = p_ji``."""
    sys.check()
    B = sys.offdiag
    B.setflags(write=False)

    def production(t, y):
        return B * np.asarray(y, dtype=float)[None, :]

    return GeneralPDS(sys.n_species, production, conservative=True)


@dataclass(frozen=True)
class TwoSpeciesSystem:
    """``y' = [[-a, b], [a, -b]] y`` with ``a, b >= 0``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a >= 0 and self.b >= 0):
            raise ValidationError(f"rates must be nonnegative, got a={self.a}, b={self.b}")

    @property
    def rate_matrix(self) -> np.ndarray:
        return np.array([[-self.a, self.b], [self.a, -self.b]], dtype=float)

    @property
    def eigenvalue(self) -> float:
        """The nonzero eigenvalue ``-(a + b)``."""
        return -(self.a + self.b)

    def as_linear(self) -> LinearPDS:
        return LinearPDS(self.rate_matrix)


def steady_state_two_species(sys: TwoSpeciesSystem, total_mass: float = 1.0) -> np.ndarray:
    """Steady state ``s (b, a)^T`` scaled to ``total_mass``."""
    if not total_mass > 0:
        raise DomainError(f"total_mass must be positive, got {total_mass}")
    s = sys.a + sys.b
    if s == 0:
        raise DomainError("a = b = 0: every state is steady")
    # normalise first so a subnormal a + b cannot overflow total_mass / s
    return np.array([sys.b / s, sys.a / s], dtype=float) * total_mass


def parse_rate_matrix(text: str, source: str = "<string>") -> LinearPDS:
    """Parse an ``N x N`` CSV matrix (no header, ``#`` comments allowed)."""
    rows: list[list[float]] = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        row = []
        for col, tok in enumerate(line.split(","), start=1):
            try:
                row.append(float(tok))
            except ValueError:
                raise ValidationError(
                    f"{source}:{lineno}: column {col}: cannot parse {tok.strip()!r} as a number"
                ) from None
        if rows and len(row) != len(rows[0]):
            raise ValidationError(
                f"{source}:{lineno}: ragged row with {len(row)} entries, expected {len(rows[0])}")
        rows.append(row)
    if not rows:
        raise ValidationError(f"{source}: empty matrix file")
    if len(rows) != len(rows[0]):
        raise ValidationError(
            f"{source}: non-square matrix with {len(rows)} rows and {len(rows[0])} columns")
    return LinearPDS(np.array(rows, dtype=float))


def load_rate_matrix(path: str | Path) -> LinearPDS:
    path = Path(path)
    return parse_rate_matrix(path.read_text(), source=str(path))
