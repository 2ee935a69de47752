"""Alternative estimators: rank-constrained alternating minimization, two-step
thresholding, and the Dantzig-selector-style constrained program.

All three reuse the proximal kernels of the main solver. They differ from the
penalized MLE in what they guarantee: the alternating estimator is nonconvex
(local optima expected, initialization is recorded), the thresholding
estimator is not likelihood-based and makes no feasibility promise on S - L,
and the Dantzig program constrains correlated residuals instead of penalizing
the likelihood.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .gaussian import _cov_matrix, entrywise_l1
from .solver import RHO_ADAPT_ITERS
from .types import (
    FitReport,
    PrecisionDecomposition,
    RankConstraint,
    RegularizationParams,
    SampleCovariance,
    SolveHistory,
    SolverOptions,
    ThresholdParams,
)

_RANK_EIG_TOL = 1e-9


def _as_cov(Sigma):
    if isinstance(Sigma, SampleCovariance):
        return Sigma
    return SampleCovariance(np.asarray(Sigma, dtype=float))


def numeric_rank(L, rel_tol=_RANK_EIG_TOL):
    w = np.linalg.eigvalsh(L)
    top = max(float(w[-1]), 0.0)
    if top <= 0.0:
        return 0
    return int(np.sum(w > rel_tol * top))


# ---------------------------------------------------------------------------
# rank-constrained alternating estimator


def _neg_loglik(K, C):
    w = np.linalg.eigvalsh(K)
    if w[0] <= 0.0:
        return math.inf
    return float(-(np.sum(np.log(w)) - np.sum(K * C)))


def _em_objective(S, L, C, lam):
    return _neg_loglik(S - L, C) + lam * float(np.abs(S).sum())


def _sparse_step(C, lam, L_fixed, S_init, opts):
    """min_S -loglik(S - L_fixed) + lam*||S||_1 via two-block splitting."""
    rho = float(opts.penalty)
    S = S_init.copy()
    U = np.zeros_like(S)
    z_old = S.copy()
    for it in range(1, opts.max_iter + 1):
        R = _kernels.logdet_prox_core(rho * (S - L_fixed - U) - C, rho)
        S = _kernels.soft_threshold(R + L_fixed + U, lam / rho)
        U = U + R - S + L_fixed
        rp = float(np.linalg.norm(R - S + L_fixed))
        rd = rho * float(np.linalg.norm(S - z_old))
        z_old = S.copy()
        scale = max(1.0, float(np.linalg.norm(R)))
        if rp / scale <= opts.tol_primal and rd / scale <= opts.tol_dual:
            break
        if it <= RHO_ADAPT_ITERS:
            if rp > 10.0 * rd and rho * 2.0 <= 1e4:
                rho *= 2.0
                U /= 2.0
            elif rd > 10.0 * rp and rho / 2.0 >= 1e-4:
                rho /= 2.0
                U *= 2.0
    return S


def _rank_project(M, r):
    """Nearest PSD matrix of rank <= r: clip eigenvalues at 0, keep top r."""
    w, V = np.linalg.eigh(M)
    keep = np.maximum(w, 0.0) > 0.0
    if r < len(w):
        keep[: len(w) - r] = False  # eigh sorts ascending
    if not keep.any():
        return np.zeros_like(M)
    Vk = V[:, keep]
    out = (Vk * w[keep]) @ Vk.T
    return (out + out.T) / 2.0


def _lowrank_step(C, S, L, r, floor, max_steps=50):
    """Projected gradient descent on L with hard rank-r truncation.

    Backtracks to preserve both S - L > 0 and descent of the smooth part.
    """
    def smooth(Lm):
        return _neg_loglik(S - Lm, C)

    f_cur = smooth(L)
    for _ in range(max_steps):
        K = S - L
        w, V = np.linalg.eigh(K)
        if w[0] <= 0.0:
            break
        K_inv = (V * (1.0 / w)) @ V.T
        grad = (K_inv + K_inv.T) / 2.0 - C
        t = float(w[0]) ** 2  # inverse of the local curvature bound
        g_norm = float(np.linalg.norm(grad))
        if g_norm * t < 1e-14 * max(1.0, float(np.linalg.norm(L))):
            break
        accepted = False
        for _ in range(40):
            L_try = _rank_project(L - t * grad, r)
            if np.linalg.eigvalsh(S - L_try)[0] > floor:
                f_try = smooth(L_try)
                if f_try <= f_cur + 1e-12:
                    accepted = True
                    break
            t /= 2.0
        if not accepted:
            break
        moved = float(np.linalg.norm(L_try - L))
        L, f_cur = L_try, f_try
        if moved <= 1e-12 * max(1.0, float(np.linalg.norm(L))):
            break
    return L


def fit_em_rank(Sigma, lam, rank, init=None, opts=None, max_outer=100):
    """Alternating minimization under an explicit rank constraint on L.

    The S-step solves the convex sparse fit with L fixed (same splitting
    machinery as the main solver); the L-step is projected gradient with hard
    eigenvalue truncation to rank r. The outer objective
    -loglik(S - L) + lam*||S||_1 is monotone non-increasing; an increase
    beyond 1e-9 aborts with a diagnostic. Local optima are expected: the
    report records which initialization was used.
    """
    Sigma = _as_cov(Sigma)
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if not isinstance(rank, RankConstraint):
        rank = RankConstraint(int(rank))
    opts = opts or SolverOptions()
    C = _cov_matrix(Sigma)
    p = C.shape[0]
    if rank.r > p:
        raise ValueError(f"rank cap {rank.r} exceeds dimension {p}")

    if init is None:
        S = np.diag(1.0 / (np.diag(C) + lam + 1e-300))
        L = np.zeros((p, p))
        init_kind = "default-diagonal"
    else:
        feasible, reason = init.feasibility(floor=0.0)
        if not feasible:
            raise ValueError(f"infeasible initialization: {reason}")
        if numeric_rank(init.L) > rank.r:
            raise ValueError(
                f"initialization has rank {numeric_rank(init.L)} > cap {rank.r}"
            )
        S, L = init.S.copy(), init.L.copy()
        init_kind = "user"

    inner_opts = SolverOptions(
        max_iter=opts.max_iter,
        tol_primal=min(opts.tol_primal, 1e-9),
        tol_dual=min(opts.tol_dual, 1e-9),
        penalty=opts.penalty,
        feasibility_floor=opts.feasibility_floor,
    )

    obj = _em_objective(S, L, C, lam)
    hist = [obj]
    converged = False
    it = 0
    for it in range(1, max_outer + 1):
        S = _sparse_step(C, lam, L, S, inner_opts)
        if rank.r > 0:
            L = _lowrank_step(C, S, L, rank.r, opts.feasibility_floor)
        new_obj = _em_objective(S, L, C, lam)
        hist.append(new_obj)
        if new_obj > obj + 1e-9:
            raise RuntimeError(
                "alternating step increased the objective "
                f"({obj:.12g} -> {new_obj:.12g} at outer iteration {it}); "
                "numerical failure"
            )
        delta = obj - new_obj
        obj = new_obj
        if delta <= opts.tol_primal * max(1.0, abs(obj)):
            converged = True
            break

    decomp = PrecisionDecomposition(S=S, L=L)
    history = SolveHistory(
        objective=np.asarray(hist[1:]),
        primal_residual=np.full(len(hist) - 1, np.nan),
        dual_residual=np.full(len(hist) - 1, np.nan),
    )
    return FitReport(
        decomp=decomp,
        objective=obj,
        iterations=it,
        primal_residual=0.0,
        dual_residual=0.0,
        converged=converged,
        history=history,
        meta={
            "estimator": "em",
            "init": init_kind,
            "rank_cap": rank.r,
            "rank_est": numeric_rank(L),
            "lambda": lam,
            "objective_kind": "neg_loglik + lam*l1",
            "backend": _kernels.active_backend(),
        },
    )


# ---------------------------------------------------------------------------
# two-step thresholding estimator


def threshold_defaults(p, n, c_sparse=1.0, c_spectral=1.0):
    """sqrt(log p / n) and sqrt(p / n) scalings with unit constants."""
    if n is None or n < 1:
        raise ValueError("threshold defaults need a positive sample count")
    return ThresholdParams(
        t_sparse=c_sparse * math.sqrt(math.log(p) / n) if p > 1 else 0.0,
        t_spectral=c_spectral * math.sqrt(p / n),
    )


def _threshold_entries(M, t, mode):
    if mode == "hard":
        return np.where(np.abs(M) > t, M, 0.0)
    return np.sign(M) * np.maximum(np.abs(M) - t, 0.0)


def fit_two_step_threshold(Sigma, thr):
    """Entrywise thresholding of Sigma^{-1}, then PSD spectral thresholding.

    S_hat thresholds the inverse covariance entrywise at t_sparse; L_hat is
    the PSD spectral threshold of (S_hat - Sigma^{-1}) at t_spectral. There
    is no feasibility guarantee on S_hat - L_hat; it is reported, not
    enforced. Requires an invertible covariance (in practice n > p).
    """
    Sigma = _as_cov(Sigma)
    if not isinstance(thr, ThresholdParams):
        raise TypeError("thr must be a ThresholdParams")
    C = _cov_matrix(Sigma)
    w, V = np.linalg.eigh(C)
    if w[0] <= 1e-10 * max(abs(w[-1]), 1e-300):
        raise ValueError(
            "covariance is numerically singular (smallest eigenvalue "
            f"{w[0]:.3e}); the thresholding estimator needs n > p"
        )
    C_inv = (V * (1.0 / w)) @ V.T
    C_inv = (C_inv + C_inv.T) / 2.0

    S_hat = _threshold_entries(C_inv, thr.t_sparse, thr.sparse_mode)
    resid = S_hat - C_inv
    d, Q = np.linalg.eigh(resid)
    if thr.spectral_mode == "hard":
        d = np.where(d > thr.t_spectral, d, 0.0)
    else:
        d = np.maximum(d - thr.t_spectral, 0.0)
    L_hat = (Q * d) @ Q.T
    L_hat = (L_hat + L_hat.T) / 2.0

    decomp = PrecisionDecomposition(S=S_hat, L=L_hat)
    feasible, reason = decomp.feasibility()
    objective = _neg_loglik(S_hat - L_hat, C)
    history = SolveHistory(
        objective=np.asarray([objective]),
        primal_residual=np.asarray([0.0]),
        dual_residual=np.asarray([0.0]),
    )
    return FitReport(
        decomp=decomp,
        objective=objective,
        iterations=1,
        primal_residual=0.0,
        dual_residual=0.0,
        converged=True,
        history=history,
        meta={
            "estimator": "threshold",
            "t_sparse": thr.t_sparse,
            "t_spectral": thr.t_spectral,
            "sparse_mode": thr.sparse_mode,
            "spectral_mode": thr.spectral_mode,
            "feasible": feasible,
            "feasibility_reason": reason,
            "objective_kind": "neg_loglik",
        },
    )


# ---------------------------------------------------------------------------
# Dantzig-selector-style estimator


def fit_dantzig(Sigma, reg, opts=None):
    """minimize gamma*||S||_1 + trace(L) subject to
    ||Sigma(S-L) - I||_inf <= gamma*lam, ||Sigma(S-L) - I||_2 <= lam, L >= 0.

    The residual is formed with S - L (the sign convention of the penalized
    MLE program; see module docs). Solved by the same splitting pattern with
    a consensus variable K = S - L and two residual copies projected onto the
    entrywise and spectral-norm balls; the residual matrix is nonsymmetric,
    so the spectral projection uses a full SVD.
    """
    Sigma = _as_cov(Sigma)
    if not isinstance(reg, RegularizationParams):
        raise TypeError("reg must be a RegularizationParams")
    if reg.lam <= 0:
        raise ValueError("the Dantzig program needs lambda > 0")
    opts = opts or SolverOptions()
    C = _cov_matrix(Sigma)
    p = C.shape[0]
    lam, gamma = reg.lam, reg.gamma
    eye = np.eye(p)

    d_sig, Q = np.linalg.eigh(C)

    # separate penalties for the consensus and residual constraint blocks:
    # the residual block sees Sigma's spectrum squared, so one shared rho
    # stalls badly on ill-conditioned covariances
    rho1 = float(opts.penalty)
    rho2 = float(opts.penalty)
    if d_sig[0] > 1e-10 * max(abs(float(d_sig[-1])), 1e-300):
        # warm start at the feasible inverse-covariance point
        K = (Q * (1.0 / d_sig)) @ Q.T
        K = (K + K.T) / 2.0
        S = K.copy()
    else:
        K = np.zeros((p, p))
        S = np.zeros((p, p))
    L = np.zeros((p, p))
    resid = C @ K - eye
    T1 = np.clip(resid, -gamma * lam, gamma * lam)
    T2 = T1.copy()
    U_k = np.zeros((p, p))
    U1 = np.zeros((p, p))
    U2 = np.zeros((p, p))
    z1_old = S - L
    z2_old = np.concatenate([T1.ravel(), T2.ravel()])

    hist_obj, hist_rp, hist_rd = [], [], []
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        # quadratic consensus block, solved in the eigenbasis of Sigma
        B0 = S - L - U_k
        C_sum = 2.0 * eye + (T1 - U1) + (T2 - U2)
        B0t = Q.T @ B0 @ Q
        Ct = Q.T @ C_sum @ Q
        Ct_scaled = d_sig[:, None] * Ct
        M = rho1 * (B0t + B0t.T) / 2.0 + rho2 * (Ct_scaled + Ct_scaled.T) / 2.0
        denom = rho1 + rho2 * (d_sig[:, None] ** 2 + d_sig[None, :] ** 2)
        K = Q @ (M / denom) @ Q.T
        K = (K + K.T) / 2.0

        S = _kernels.soft_threshold(K + L + U_k, gamma / rho1)
        L = _kernels.psd_trace_prox(S - K - U_k, 1.0 / rho1)

        resid = C @ K - eye
        T1 = np.clip(resid + U1, -gamma * lam, gamma * lam)
        W = resid + U2
        Uw, sw, Vwt = np.linalg.svd(W)
        T2 = (Uw * np.minimum(sw, lam)) @ Vwt

        U_k = U_k + K - (S - L)
        U1 = U1 + resid - T1
        U2 = U2 + resid - T2

        z1 = S - L
        z2 = np.concatenate([T1.ravel(), T2.ravel()])
        rp1 = float(np.linalg.norm(K - z1))
        rp2 = float(
            math.sqrt(np.sum((resid - T1) ** 2) + np.sum((resid - T2) ** 2))
        )
        rd1 = rho1 * float(np.linalg.norm(z1 - z1_old))
        rd2 = rho2 * float(np.linalg.norm(z2 - z2_old))
        z1_old, z2_old = z1, z2
        scale = max(1.0, float(np.linalg.norm(K)))
        rp_s = max(rp1, rp2) / scale
        rd_s = max(rd1, rd2) / scale

        hist_obj.append(gamma * float(np.abs(S).sum()) + float(np.trace(L)))
        hist_rp.append(rp_s)
        hist_rd.append(rd_s)

        if rp_s <= opts.tol_primal and rd_s <= opts.tol_dual:
            converged = True
            break
        if it <= RHO_ADAPT_ITERS:
            if rp1 > 10.0 * rd1 and rho1 * 2.0 <= 1e4:
                rho1 *= 2.0
                U_k /= 2.0
            elif rd1 > 10.0 * rp1 and rho1 / 2.0 >= 1e-4:
                rho1 /= 2.0
                U_k *= 2.0
            if rp2 > 10.0 * rd2 and rho2 * 2.0 <= 1e4:
                rho2 *= 2.0
                U1 /= 2.0
                U2 /= 2.0
            elif rd2 > 10.0 * rp2 and rho2 / 2.0 >= 1e-4:
                rho2 /= 2.0
                U1 *= 2.0
                U2 *= 2.0

    final_resid = C @ (S - L) - eye
    linf = float(np.max(np.abs(final_resid)))
    spec = float(np.linalg.norm(final_resid, 2))
    violation = max(0.0, linf - gamma * lam) + max(0.0, spec - lam)
    if converged and violation > 1e-6 * max(1.0, gamma * lam):
        converged = False

    # residual stall with persistent constraint violation indicates an
    # infeasible problem (e.g. singular Sigma with lam < 1)
    infeasible_suspected = False
    if not converged and violation > 1e-4:
        tail = np.asarray(hist_rp[-50:])
        if len(tail) >= 50 and tail[-1] > 0.5 * tail[0]:
            infeasible_suspected = True

    decomp = PrecisionDecomposition(S=S, L=L)
    history = SolveHistory(
        objective=np.asarray(hist_obj),
        primal_residual=np.asarray(hist_rp),
        dual_residual=np.asarray(hist_rd),
    )
    return FitReport(
        decomp=decomp,
        objective=hist_obj[-1],
        iterations=it,
        primal_residual=hist_rp[-1],
        dual_residual=hist_rd[-1],
        converged=converged,
        history=history,
        meta={
            "estimator": "dantzig",
            "objective_kind": "gamma*l1 + trace",
            "constraint_linf": linf,
            "constraint_linf_bound": gamma * lam,
            "constraint_spec": spec,
            "constraint_spec_bound": lam,
            "constraint_violation": violation,
            "infeasible_suspected": infeasible_suspected,
            "backend": _kernels.active_backend(),
        },
    )
