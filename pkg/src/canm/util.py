"""Small shared helpers: seed derivation and covariance repair."""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import NumericalError

# Eigenvalues above this (negative) floor are treated as zero when repairing
# a nearly-PSD covariance; anything below it is a genuine modeling error.
PSD_TOL = 1e-9


def derive_seed(master: int, *parts) -> int:
    """Derive a child seed from a master seed and a key path.

    Counter-based so concurrent tasks can be seeded independently of
    execution order: the same (master, parts) always yields the same seed.
    """
    keys = [int(master) & 0xFFFFFFFF]
    for p in parts:
        if isinstance(p, (int, np.integer)):
            keys.append(int(p) & 0xFFFFFFFF)
        else:
            digest = hashlib.blake2s(str(p).encode(), digest_size=4).digest()
            keys.append(int.from_bytes(digest, "big"))
    return int(np.random.SeedSequence(keys).generate_state(1)[0])


def repair_psd(cov: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Clip tiny negative eigenvalues of a symmetric matrix to zero.

    Raises NumericalError if an eigenvalue is more negative than ``-tol``
    relative to the largest one.
    """
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    scale = max(abs(vals[-1]), 1.0)
    if vals[0] < -tol * scale:
        raise NumericalError(f"matrix is not PSD: min eigenvalue {vals[0]:.3e}")
    clipped = np.clip(vals, 0.0, None)
    return (vecs * clipped) @ vecs.T


def chol_factor(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, falling back to an eigendecomposition root."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        repaired = repair_psd(cov)
        vals, vecs = np.linalg.eigh(repaired)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_mvn(rng: np.random.Generator, mean: np.ndarray, factor: np.ndarray, m: int) -> np.ndarray:
    """Draw m rows from N(mean, factor @ factor.T) with a fixed rng order."""
    z = rng.standard_normal((m, len(mean)))
    return z @ factor.T + mean
