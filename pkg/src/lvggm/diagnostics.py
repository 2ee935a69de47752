"""Recovery metrics, identifiability surrogates, KKT certificates and
gamma-stability summaries.

The identifiability quantities reported here are the two computable
surrogates (subspace coherence of the low-rank column space and the maximum
off-diagonal degree of the sparse component); the exact Fisher-information
conditions they stand in for are out of scope and never claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import _cov_matrix
from .types import PrecisionDecomposition, RegularizationParams, SampleCovariance


@dataclass(frozen=True)
class RecoveryMetrics:
    sign_consistent: bool
    support_errors: tuple  # (false_positives, false_negatives), edges counted once
    rank_correct: bool
    rank_est: int
    rank_true: int
    loss_linf: float
    loss_spectral: float
    loss_frob_total: float


@dataclass(frozen=True)
class SignalLevels:
    theta: float
    sigma_min: float
    notes: str = ""


@dataclass(frozen=True)
class IdentifiabilityReport:
    coherence: float
    max_degree: int
    notes: str = ""


@dataclass(frozen=True)
class KktReport:
    dual_linf: float
    support_slack: float
    dual_spec: float
    lowrank_slack: float

    def max_residual(self):
        return max(self.dual_linf, self.support_slack, self.dual_spec, self.lowrank_slack)

    def as_dict(self):
        return {
            "dual_linf": self.dual_linf,
            "support_slack": self.support_slack,
            "dual_spec": self.dual_spec,
            "lowrank_slack": self.lowrank_slack,
        }


@dataclass(frozen=True)
class GammaInterval:
    gamma_lo: float
    gamma_hi: float
    n_cells: int
    support_size: int
    rank: int
    exact_recovery: bool | None
    ratio: float


@dataclass(frozen=True)
class GammaStabilitySummary:
    intervals: tuple
    recovery_intervals: tuple = ()

    def widest_recovery_ratio(self):
        if not self.recovery_intervals:
            return 0.0
        return max(iv.ratio for iv in self.recovery_intervals)


def _offdiag_signed_support(S, zero_tol):
    """Signed edge set {(i, j, sign)} over the upper triangle."""
    p = S.shape[0]
    out = set()
    for i in range(p):
        for j in range(i + 1, p):
            v = S[i, j]
            if abs(v) > zero_tol:
                out.add((i, j, 1 if v > 0 else -1))
    return out


def _support_rank(L, rank_tol):
    w = np.linalg.eigvalsh(L)
    top = max(float(w[-1]), 1e-12)
    return int(np.sum(w > rank_tol * top))


def recovery_metrics(est, truth, zero_tol=None, rank_tol=1e-6):
    """Compare an estimated decomposition against ground truth.

    Support is read off-diagonal with symmetric pairs counted once; the
    diagonal of a PD matrix is always nonzero and is excluded. Signs are the
    raw signs of the estimate, no rounding. zero_tol defaults to
    1e-6 * max|S*|.
    """
    S_hat, L_hat = est.S, est.L
    S_star, L_star = truth.S_star, truth.L_star
    if S_hat.shape != S_star.shape:
        raise ValueError(
            f"dimension mismatch: estimate is {S_hat.shape}, truth is {S_star.shape}"
        )
    if zero_tol is None:
        zero_tol = 1e-6 * max(float(np.max(np.abs(S_star))), 1e-300)

    est_edges = _offdiag_signed_support(S_hat, zero_tol)
    true_edges = _offdiag_signed_support(S_star, 0.0)
    est_supp = {(i, j) for i, j, _ in est_edges}
    true_supp = {(i, j) for i, j, _ in true_edges}
    fp = len(est_supp - true_supp)
    fn = len(true_supp - est_supp)
    sign_consistent = est_edges == true_edges

    rank_est = _support_rank(L_hat, rank_tol)
    rank_true = _support_rank(L_star, 1e-9)

    return RecoveryMetrics(
        sign_consistent=sign_consistent,
        support_errors=(fp, fn),
        rank_correct=rank_est == rank_true,
        rank_est=rank_est,
        rank_true=rank_true,
        loss_linf=float(np.max(np.abs(S_hat - S_star))),
        loss_spectral=float(np.linalg.norm(L_hat - L_star, 2)),
        loss_frob_total=float(
            np.linalg.norm(S_hat - S_star) + np.linalg.norm(L_hat - L_star)
        ),
    )


def signal_levels(truth):
    """Minimum off-diagonal |entry| of S* and minimum nonzero eigenvalue of L*.

    A diagonal-only sparse component reports theta = +inf (no off-diagonal
    signal to bound); a vanishing low-rank component reports sigma_min = 0.
    """
    S_star, L_star = truth.S_star, truth.L_star
    p = S_star.shape[0]
    off = S_star[~np.eye(p, dtype=bool)]
    nz = np.abs(off[off != 0.0])
    notes = []
    if nz.size == 0:
        theta = math.inf
        notes.append("off-diagonal support of S* is empty; theta is +inf by convention")
    else:
        theta = float(nz.min())
    w = np.linalg.eigvalsh(L_star)
    keep = w[w > 1e-10]
    if keep.size == 0:
        sigma_min = 0.0
        notes.append("no low-rank part (L* = 0)")
    else:
        sigma_min = float(keep.min())
    return SignalLevels(theta=theta, sigma_min=sigma_min, notes="; ".join(notes))


def identifiability_report(truth):
    """Coherence of the column space of L* and max off-diagonal degree of S*.

    coherence = max_i ||P_U e_i||_2 for U the span of eigenvectors of L* with
    eigenvalue above 1e-10; it lies in [sqrt(k/p), 1] for a k-dimensional
    subspace. An empty subspace (L* = 0) reports coherence 0.
    """
    S_star, L_star = truth.S_star, truth.L_star
    p = S_star.shape[0]
    w, V = np.linalg.eigh(L_star)
    U = V[:, w > 1e-10]
    notes = []
    if U.shape[1] == 0:
        coherence = 0.0
        notes.append("L* = 0; coherence 0 by convention (empty subspace)")
    else:
        coherence = float(np.max(np.sqrt(np.sum(U * U, axis=1))))
    off = np.abs(S_star) > 0.0
    np.fill_diagonal(off, False)
    max_degree = int(off.sum(axis=1).max()) if p > 0 else 0
    return IdentifiabilityReport(
        coherence=coherence, max_degree=max_degree, notes="; ".join(notes)
    )


def kkt_report(Sigma, decomp, reg, rank_tol=1e-9):
    """Stationarity residuals of the penalized MLE at a feasible point.

    With G = Sigma - (S - L)^{-1}, first-order optimality requires
    (a) |G_ij| <= lam*gamma everywhere, (b) G_ij = -lam*gamma*sign(S_ij) on
    the support of S, (c) G <= lam*I in the PSD order, and (d) G U = lam*U on
    the range of L. The four residuals below are zero exactly when those
    hold; all are nonnegative.
    """
    if not isinstance(reg, RegularizationParams):
        raise TypeError("reg must be a RegularizationParams")
    feasible, reason = decomp.feasibility()
    if not feasible:
        raise ValueError(f"kkt_report needs a feasible decomposition: {reason}")
    C = _cov_matrix(Sigma)
    K = decomp.K
    w, V = np.linalg.eigh(K)
    K_inv = (V * (1.0 / w)) @ V.T
    G = C - (K_inv + K_inv.T) / 2.0
    lam, gamma = reg.lam, reg.gamma
    lg = lam * gamma

    dual_linf = max(0.0, float(np.max(np.abs(G))) / lg - 1.0) if lg > 0 else 0.0
    support = decomp.S != 0.0
    if support.any() and lg > 0:
        support_slack = float(
            np.max(np.abs(G[support] + lg * np.sign(decomp.S[support])))
        )
    else:
        support_slack = 0.0
    wG = np.linalg.eigvalsh(G)
    dual_spec = max(0.0, float(wG[-1]) / lam - 1.0) if lam > 0 else 0.0
    wL, VL = np.linalg.eigh(decomp.L)
    U = VL[:, wL > rank_tol * max(float(wL[-1]), 1e-300)]
    if U.shape[1] > 0:
        lowrank_slack = float(np.linalg.norm(lam * U - G @ U, 2))
    else:
        lowrank_slack = 0.0
    return KktReport(
        dual_linf=dual_linf,
        support_slack=support_slack,
        dual_spec=dual_spec,
        lowrank_slack=lowrank_slack,
    )


def _fit_pattern(report, zero_tol, rank_tol):
    S = report.decomp.S
    edges = frozenset(_offdiag_signed_support(S, zero_tol))
    rank = _support_rank(report.decomp.L, rank_tol)
    return edges, rank


def gamma_stability(results, truth=None, zero_tol=0.0, rank_tol=1e-6):
    """Maximal contiguous gamma-intervals with constant (sign pattern, rank).

    ``results`` is a sequence of (gamma, FitReport) sorted by gamma, all fits
    sharing the same covariance and lambda. Each interval reports the ratio
    gamma_hi / gamma_lo and, when ground truth is supplied, whether the
    interval achieves exact recovery (sign-consistent support and correct
    rank).
    """
    results = list(results)
    if not results:
        raise ValueError("gamma_stability needs at least one result")
    gammas = [g for g, _ in results]
    if any(g2 <= g1 for g1, g2 in zip(gammas, gammas[1:])):
        raise ValueError("results must be sorted by strictly increasing gamma")

    true_pattern = None
    if truth is not None:
        true_edges = frozenset(_offdiag_signed_support(truth.S_star, 0.0))
        true_rank = _support_rank(truth.L_star, 1e-9)
        true_pattern = (true_edges, true_rank)

    intervals = []
    start = 0
    patterns = [_fit_pattern(rep, zero_tol, rank_tol) for _, rep in results]
    for k in range(1, len(results) + 1):
        if k == len(results) or patterns[k] != patterns[start]:
            edges, rank = patterns[start]
            lo, hi = gammas[start], gammas[k - 1]
            exact = None
            if true_pattern is not None:
                exact = patterns[start] == true_pattern
            intervals.append(
                GammaInterval(
                    gamma_lo=lo,
                    gamma_hi=hi,
                    n_cells=k - start,
                    support_size=len(edges),
                    rank=rank,
                    exact_recovery=exact,
                    ratio=hi / lo,
                )
            )
            start = k
    recovery = tuple(iv for iv in intervals if iv.exact_recovery)
    return GammaStabilitySummary(intervals=tuple(intervals), recovery_intervals=recovery)
