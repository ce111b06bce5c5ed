import numpy as np

from .errors import NotPositiveDefiniteError

JITTER_LADDER = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def cholesky_with_jitter(cov):
    """Lower Cholesky factor of ``cov``, adding ``eps * trace/d * I`` on failure.

    ``eps`` walks :data:`JITTER_LADDER`; the unperturbed matrix is tried first.
    Returns ``(L, eps_used)``.
    """
    cov = np.asarray(cov, dtype=float)
    d = cov.shape[0]
    try:
        return np.linalg.cholesky(cov), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = np.trace(cov) / d
    if not scale > 0:
        raise NotPositiveDefiniteError("covariance has non-positive trace; cannot jitter")
    eye = np.eye(d)
    for eps in JITTER_LADDER:
        try:
            return np.linalg.cholesky(cov + eps * scale * eye), eps
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefiniteError(
        f"Cholesky failed after jitter up to {JITTER_LADDER[-1]:g} * trace/d; input is not PSD"
    )


def symmetrize(a):
    return 0.5 * (a + a.T)
