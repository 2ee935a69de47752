"""Gaussian likelihood, penalized objective and Schur-complement marginalization."""

from __future__ import annotations

import math

import numpy as np

from .types import (
    PrecisionDecomposition,
    RegularizationParams,
    SampleCovariance,
    SolverOptions,
    symmetrize,
)


def _cov_matrix(Sigma):
    if isinstance(Sigma, SampleCovariance):
        return Sigma.matrix
    return symmetrize(Sigma, "covariance")


def gaussian_log_likelihood(K, Sigma):
    """log det K - trace(K @ Sigma) for a positive definite precision K.

    Raises ValueError when K is not PD, reporting the offending smallest
    eigenvalue.
    """
    K = symmetrize(K, "K")
    C = _cov_matrix(Sigma)
    w = np.linalg.eigvalsh(K)
    if w[0] <= 0:
        raise ValueError(
            f"K is not positive definite: smallest eigenvalue {w[0]:.6e}"
        )
    return float(np.sum(np.log(w)) - np.sum(K * C))


def entrywise_l1(M):
    """Sum of |entry| over all p^2 entries (diagonal included)."""
    return float(np.abs(M).sum())


def penalty_value(decomp, reg):
    return reg.lam * (reg.gamma * entrywise_l1(decomp.S) + float(np.trace(decomp.L)))


def objective_value(decomp, Sigma, reg, floor=0.0):
    """-loglik(S - L; Sigma) + lam*(gamma*||S||_1 + trace(L)).

    Infeasible decompositions (L not PSD up to tolerance, or S - L not PD)
    get the +inf sentinel; the reason is available from
    ``decomp.feasibility()``.
    """
    feasible, _ = decomp.feasibility(floor=floor)
    if not feasible:
        return math.inf
    C = _cov_matrix(Sigma)
    K = decomp.K
    w = np.linalg.eigvalsh(K)
    neg_ll = -(float(np.sum(np.log(w))) - float(np.sum(K * C)))
    return neg_ll + penalty_value(decomp, reg)


def marginal_precision(K_joint, observed_indices, latent_indices):
    """Marginalize the latent block of a joint precision matrix.

    Returns (K_O, S_star, L_star) where S_star is the observed diagonal
    block, L_star = K_OH @ K_HH^{-1} @ K_HO and K_O = S_star - L_star is the
    precision of the observed marginal (Schur complement).
    """
    K = symmetrize(K_joint, "K_joint")
    d = K.shape[0]
    obs = np.asarray(observed_indices, dtype=int)
    lat = np.asarray(latent_indices, dtype=int)
    if len(set(obs.tolist()) & set(lat.tolist())) > 0:
        raise ValueError("observed and latent index sets overlap")
    covered = np.sort(np.concatenate([obs, lat]))
    if len(covered) != d or not np.array_equal(covered, np.arange(d)):
        raise ValueError(
            "observed and latent index sets must partition range(p + h)"
        )

    S_star = K[np.ix_(obs, obs)]
    if lat.size == 0:
        L_star = np.zeros_like(S_star)
        return S_star.copy(), S_star.copy(), L_star

    K_oh = K[np.ix_(obs, lat)]
    K_hh = K[np.ix_(lat, lat)]
    w_hh = np.linalg.eigvalsh(K_hh)
    if w_hh[0] <= 1e-12 * max(1.0, abs(w_hh[-1])):
        raise ValueError(
            f"latent block is singular: smallest eigenvalue {w_hh[0]:.3e}"
        )
    L_star = K_oh @ np.linalg.solve(K_hh, K_oh.T)
    L_star = (L_star + L_star.T) / 2.0
    K_O = S_star - L_star
    return K_O, S_star.copy(), L_star


def sample_covariance(samples, center=False):
    """Sample covariance of n stacked row observations.

    Default is the zero-mean convention (1/n) * X.T @ X; with center=True the
    rows are mean-centered and the 1/(n-1) normalization is used instead.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"samples must be a nonempty n x p matrix, got {X.shape}")
    n = X.shape[0]
    if center:
        if n < 2:
            raise ValueError("mean-centering needs at least 2 samples")
        X = X - X.mean(axis=0, keepdims=True)
        M = X.T @ X / (n - 1)
    else:
        M = X.T @ X / n
    return SampleCovariance(matrix=(M + M.T) / 2.0, n=n)
