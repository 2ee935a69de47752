"""Reference NumPy implementations of the solver hot kernels.

These are the operations the splitting solvers evaluate once or more per
iteration. The compiled backend in ``_core`` implements the same three
functions with identical semantics; parity is enforced by the test suite.

All kernels expect float64 arrays. Spectral kernels return an explicitly
symmetrized result so that downstream feasibility checks never see the
asymmetry noise of the eigenvector reconstruction.
"""

import numpy as np


def soft_threshold(M, tau):
    """Entrywise shrinkage sign(m) * max(|m| - tau, 0)."""
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def psd_trace_prox(M, tau):
    """Eigenvalue map d -> max(d - tau, 0) of a symmetric matrix.

    Solves argmin_{L >= 0} tau*trace(L) + 0.5*||L - M||_F^2, which is the
    PSD projection of M shifted down by tau along the diagonal spectrum.
    """
    w, V = np.linalg.eigh(M)
    d = np.maximum(w - tau, 0.0)
    out = (V * d) @ V.T
    return (out + out.T) / 2.0


def logdet_prox_core(A, rho):
    """Eigenvalue map d -> (d + sqrt(d^2 + 4*rho)) / (2*rho) of symmetric A.

    With A = rho*W - Sigma this is the closed-form minimizer of
    -log det R + trace(R @ Sigma) + (rho/2)*||R - W||_F^2; the map sends
    every real eigenvalue to a positive one, so the result is always PD.
    """
    w, V = np.linalg.eigh(A)
    d = (w + np.sqrt(w * w + 4.0 * rho)) / (2.0 * rho)
    out = (V * d) @ V.T
    return (out + out.T) / 2.0
