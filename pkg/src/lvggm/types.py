"""Value types shared across the estimators.

Matrices are symmetrized on ingestion; asymmetry beyond 1e-8 relative to the
entry scale triggers a warning rather than an error. Positive-definiteness
checks use the smallest eigenvalue of a full symmetric eigendecomposition,
not factorization success, so diagnostics are deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

ASYMMETRY_WARN_REL = 1e-8
DEFAULT_PSD_TOL = 1e-8


def symmetrize(M, name="matrix"):
    """Return (M + M.T)/2 as float64, warning on meaningful asymmetry."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 0.0)
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym > ASYMMETRY_WARN_REL * scale:
        warnings.warn(
            f"{name} is asymmetric (max |M - M.T| = {asym:.3e}); symmetrizing",
            stacklevel=3,
        )
    return (M + M.T) / 2.0


def smallest_eigenvalue(M):
    return float(np.linalg.eigvalsh(M)[0])


@dataclass(frozen=True)
class SampleCovariance:
    """A p x p sample covariance together with the sample count it came from.

    ``n`` may be None for population covariances (e.g. an inverted ground-truth
    precision matrix) where no sample count exists; operations that need n,
    such as the threshold-scaling helpers, raise in that case.
    """

    matrix: np.ndarray
    n: int | None = None

    def __post_init__(self):
        M = symmetrize(self.matrix, "covariance")
        w = np.linalg.eigvalsh(M)
        lo, hi = float(w[0]), float(w[-1])
        if lo < -1e-10 * max(1.0, abs(hi)):
            raise ValueError(
                f"covariance is not PSD: smallest eigenvalue {lo:.3e}"
            )
        if self.n is not None and int(self.n) < 1:
            raise ValueError(f"sample count must be positive, got {self.n}")
        object.__setattr__(self, "matrix", M)
        if self.n is not None:
            object.__setattr__(self, "n", int(self.n))

    @property
    def p(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PrecisionDecomposition:
    """Candidate split K = S - L of a precision matrix.

    S is the sparse candidate (conditional graph), L the PSD low-rank
    candidate (effect of marginalized latent variables). Feasibility of the
    pair (L PSD up to tolerance, S - L strictly PD) is checked on demand, not
    at construction: solver intermediates are routinely infeasible.
    """

    S: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        S = symmetrize(self.S, "S")
        L = symmetrize(self.L, "L")
        if S.shape != L.shape:
            raise ValueError(f"S and L shapes differ: {S.shape} vs {L.shape}")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "L", L)

    @property
    def p(self):
        return self.S.shape[0]

    @property
    def K(self):
        return self.S - self.L

    def feasibility(self, floor=0.0, psd_tol=DEFAULT_PSD_TOL):
        """Return (feasible, reason). reason is None when feasible."""
        l_min = smallest_eigenvalue(self.L)
        if l_min < -psd_tol:
            return False, f"L not PSD (smallest eigenvalue {l_min:.3e})"
        k_min = smallest_eigenvalue(self.K)
        if k_min <= floor:
            return False, f"S - L not PD (smallest eigenvalue {k_min:.3e})"
        return True, None

    def is_feasible(self, floor=0.0, psd_tol=DEFAULT_PSD_TOL):
        return self.feasibility(floor, psd_tol)[0]


@dataclass(frozen=True)
class RegularizationParams:
    """Overall penalty strength lam and sparse/low-rank trade-off gamma.

    The penalty applied is lam * (gamma * ||S||_1 + trace(L)), where ||.||_1
    sums |entry| over all p^2 entries, diagonal included and off-diagonal
    pairs counted twice.
    """

    lam: float
    gamma: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 2000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    penalty: float = 1.0
    feasibility_floor: float = 1e-8

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        for name in ("tol_primal", "tol_dual", "penalty", "feasibility_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SolveHistory:
    """Per-iteration trace: merit objective and scaled residuals."""

    objective: np.ndarray
    primal_residual: np.ndarray
    dual_residual: np.ndarray

    def __len__(self):
        return len(self.objective)


@dataclass(frozen=True)
class FitReport:
    decomp: PrecisionDecomposition
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    history: SolveHistory
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ThresholdParams:
    """Thresholds for the two-step estimator, one per stage."""

    t_sparse: float
    t_spectral: float
    sparse_mode: str = "hard"
    spectral_mode: str = "hard"

    def __post_init__(self):
        if self.t_sparse < 0 or self.t_spectral < 0:
            raise ValueError("thresholds must be nonnegative")
        for mode in (self.sparse_mode, self.spectral_mode):
            if mode not in ("hard", "soft"):
                raise ValueError(f"threshold mode must be hard or soft, got {mode!r}")


@dataclass(frozen=True)
class RankConstraint:
    r: int

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"rank cap must be nonnegative, got {self.r}")


@dataclass(frozen=True)
class NormDecomposition:
    """Optimal split underlying the composite sparse/low-rank norm value."""

    value: float
    S: np.ndarray
    L: np.ndarray
    residual: float
    meta: dict = field(default_factory=dict)
