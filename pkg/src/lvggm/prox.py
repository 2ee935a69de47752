"""Proximal kernels used by the splitting solvers.

Each function is the closed-form proximal operator of one term of the
penalized likelihood: entrywise soft thresholding for the l1 penalty, the
eigenvalue shrink-and-clip for the trace penalty restricted to the PSD cone,
and the quadratic eigenvalue map for the Gaussian log-likelihood block.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .gaussian import _cov_matrix
from .types import symmetrize


def _as_c64(M):
    return np.ascontiguousarray(np.asarray(M, dtype=np.float64))


def soft_threshold_entrywise(M, tau):
    """prox of tau*||.||_1: each entry m -> sign(m) * max(|m| - tau, 0).

    Entries with |m| exactly equal to tau map to zero.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    M = symmetrize(M, "M")
    return _kernels.soft_threshold(_as_c64(M), float(tau))


def psd_trace_prox(M, tau):
    """prox of tau*trace(.) + indicator(PSD): eigenvalues d -> max(d - tau, 0).

    Minimizes tau*trace(L) + 0.5*||L - M||_F^2 over L >= 0; eigenvectors of M
    are preserved.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    M = symmetrize(M, "M")
    return _kernels.psd_trace_prox(_as_c64(M), float(tau))


def logdet_prox(W, Sigma, rho):
    """argmin_R -log det R + trace(R @ Sigma) + (rho/2)*||R - W||_F^2.

    Closed form: eigendecompose rho*W - Sigma = Q diag(d) Q.T and map each
    eigenvalue through (d + sqrt(d^2 + 4*rho)) / (2*rho). The output is PD
    for every symmetric input.
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    W = symmetrize(W, "W")
    C = _cov_matrix(Sigma)
    A = rho * W - C
    return _kernels.logdet_prox_core(_as_c64(A), float(rho))
