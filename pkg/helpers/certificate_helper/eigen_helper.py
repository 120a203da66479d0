import numpy as np

from helpers.exceptions import InputError

ASYMMETRY_TOL = 1e-12


def sym_eig_extremes(M):
    """(lambda_min, lambda_max) of a symmetric matrix via the dense LAPACK solver."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InputError(f"expected a non-empty square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > ASYMMETRY_TOL * scale:
        raise InputError("matrix is not symmetric")
    eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(eigs[0]), float(eigs[-1])
