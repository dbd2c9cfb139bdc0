"""Numeric core: seeded RNG, Cholesky log-determinant, Gaussian sampling and
a central-difference gradient checker.

All math in this package is double precision and all entropies / mutual
informations are in nats. Matrices are dense row-major numpy float64 arrays.
"""

import contextlib

import numpy as np

from .errors import NonFiniteLoss, NotPositiveDefinite

SYMMETRY_TOL = 1e-10


def blas_single_thread():
    """Context manager capping BLAS pools at one thread.

    The per-step matrix products in this package are far below the size
    where BLAS threading pays off; pool synchronization otherwise dominates
    the training loop. No-op when threadpoolctl is unavailable.
    """
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(limits=1, user_api="blas")


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; equal seeds yield equal draw sequences."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def spawn_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent deterministic stream derived from (seed, stream).

    Lets one run seed drive several non-interfering generators (model init,
    batch shuffling, data synthesis) without manual offset arithmetic.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def cholesky_logdet(a: np.ndarray) -> float:
    """log det(A) for a symmetric positive definite matrix, via Cholesky.

    The input is symmetrized as (A + A^T)/2 before factorization; asymmetry
    beyond SYMMETRY_TOL is rejected. Raises NotPositiveDefinite when a pivot
    is non-positive, which doubles as a degenerate-covariance detector.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise ValueError("matrix is not symmetric within 1e-10")
    sym = 0.5 * (a + a.T)
    try:
        chol = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    diag = np.diag(chol)
    if np.any(diag <= 0.0):
        raise NotPositiveDefinite("non-positive Cholesky pivot")
    return float(2.0 * np.sum(np.log(diag)))


def gaussian_sample(
    rng: np.random.Generator, mu: np.ndarray, cov_chol: np.ndarray, n: int
) -> np.ndarray:
    """Draw n rows from N(mu, L L^T) given the lower-triangular factor L."""
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    chol = np.asarray(cov_chol, dtype=np.float64)
    k = mu.shape[0]
    if chol.shape != (k, k):
        raise ValueError(f"cov_chol shape {chol.shape} does not match mu dim {k}")
    if np.any(np.diag(chol) <= 0.0):
        raise ValueError("cov_chol must have positive diagonal")
    z = rng.standard_normal((int(n), k))
    return mu + z @ chol.T


def grad_check(loss_fn, params, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn()`` takes no arguments and returns ``(loss, grads)`` where
    ``grads`` aligns with ``params``, a list of arrays the closure reads.
    Entries of each param are perturbed in place by +/- eps and restored.
    The error for one entry is |ga - gn| / (|ga| + |gn| + 1e-12).
    """
    if not 1e-7 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-7, 1e-4]")
    loss, grads = loss_fn()
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    if len(grads) != len(params):
        raise ValueError("loss_fn returned a gradient list of the wrong length")
    worst = 0.0
    for p, g in zip(params, grads):
        p = np.asarray(p)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape}")
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.shape[0]):
            orig = flat[k]
            flat[k] = orig + eps
            plus = loss_fn()[0]
            flat[k] = orig - eps
            minus = loss_fn()[0]
            flat[k] = orig
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NonFiniteLoss("non-finite loss during perturbation")
            numeric = (plus - minus) / (2.0 * eps)
            err = abs(gflat[k] - numeric) / (abs(gflat[k]) + abs(numeric) + 1e-12)
            worst = max(worst, err)
    return worst
