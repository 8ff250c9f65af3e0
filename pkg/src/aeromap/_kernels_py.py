"""Pure numpy implementations of the hot kernels (fallback backend)."""

import numpy as np


def quad_forms(S, K):
    """``Re(s_n* K s_n)`` for each column ``s_n`` of ``S``."""
    KS = K @ S
    return np.ascontiguousarray(np.real(np.einsum("mn,mn->n", S.conj(), KS)))


def gram_abs2(S):
    """``|s_n* s_n'|^2`` for all column pairs."""
    gram = S.conj().T @ S
    out = gram.real**2 + gram.imag**2
    upper = np.triu_indices(out.shape[0], 1)
    out.T[upper] = out[upper]  # exact symmetry, as in the compiled kernel
    return np.ascontiguousarray(out)


def gs_solve(A, b, x, max_sweeps, tol, stagnation_tol):
    """Projected Gauss-Seidel for ``A x = b`` with ``x >= 0``, in place on ``x``.

    Returns ``(sweeps, residuals, status)`` where ``residuals[k]`` is
    ``||A x - b|| / ||b||`` after sweep ``k + 1``.
    """
    n = b.shape[0]
    bnorm = np.sqrt(b @ b)
    residuals = []
    status = "max_iter"
    sweeps = 0
    for sweep in range(max_sweeps):
        change = 0.0
        size = 0.0
        for i in range(n):
            new = (b[i] - A[i] @ x + A[i, i] * x[i]) / A[i, i]
            if new < 0.0:
                new = 0.0
            change = max(change, abs(new - x[i]))
            x[i] = new
            size = max(size, abs(new))
        sweeps = sweep + 1
        r = A @ x - b
        res = np.sqrt(r @ r) / bnorm if bnorm > 0 else 0.0
        residuals.append(res)
        if res <= tol:
            status = "converged"
            break
        if change <= stagnation_tol * size:
            status = "stagnant"
            break
    return sweeps, np.array(residuals), status
