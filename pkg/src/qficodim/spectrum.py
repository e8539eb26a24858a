"""Dense Hermitian diagonalization for the small Bloch matrices used here.

Everything is a thin, checked wrapper around LAPACK ``zheevd`` via
:func:`numpy.linalg.eigh`.  Matrices are at most 16x16, so there is no reason
to reach for anything iterative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AtCriticalityError

#: relative scale for treating two eigenvalues as one degenerate cluster
DEGENERACY_RTOL = 1e-12


def degeneracy_threshold(norm):
    """Absolute eigenvalue separation below which levels count as degenerate."""
    return DEGENERACY_RTOL * (1.0 + norm)


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (ascending), eigenvector columns and the worst residual."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[-1]


def hermitize(H):
    """Return ``(H + H^dagger) / 2``; works on stacks of matrices."""
    H = np.asarray(H, dtype=complex)
    return 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))


def _checked_hermitian(H):
    H = np.asarray(H, dtype=complex)
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    Hs = hermitize(H)
    skew = np.max(np.abs(H - Hs), axis=(-2, -1)) if H.size else 0.0
    if np.any(skew > degeneracy_threshold(np.max(np.abs(Hs), axis=(-2, -1)))):
        raise ValueError("matrix is not Hermitian to 1e-12")
    return Hs


def eigh_batch(H):
    """Diagonalize a stack ``(..., D, D)`` of Hermitian matrices.

    Returns ``(w, v)`` with eigenvalues ascending along the last axis and
    eigenvectors as columns, exactly like :func:`numpy.linalg.eigh`.
    """
    return np.linalg.eigh(_checked_hermitian(H))


def eigh(H) -> EigenSystem:
    """Full eigensystem of one Hermitian matrix, with a residual check."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    H = _checked_hermitian(H)
    w, v = np.linalg.eigh(H)
    residual = float(np.max(np.abs(H @ v - v * w))) if H.size else 0.0
    return EigenSystem(eigenvalues=w, eigenvectors=v, residual=residual)


def spectral_norm(H):
    """Largest absolute eigenvalue (batched); cheap for tiny matrices."""
    return np.max(np.abs(np.linalg.eigvalsh(hermitize(H))), axis=-1)


def gap(model, k, m=None, occupied=None) -> float:
    """Direct gap ``E[occupied] - E[occupied - 1]`` (0-indexed) at one k-point."""
    from .models import evaluate

    H = evaluate(model, k, m)
    D = H.shape[0]
    if occupied is None:
        occupied = model.occupied
    if not 1 <= occupied < D:
        raise ValueError(f"occupied must lie in [1, {D - 1}], got {occupied}")
    w = eigh(H).eigenvalues
    return float(max(w[occupied] - w[occupied - 1], 0.0))


def check_gapped(w, occupied, norm=None):
    """Raise :class:`AtCriticalityError` if any level in the stack is gapless.

    ``w`` has shape ``(..., D)``.  Returns the minimal gap found.
    """
    gaps = w[..., occupied] - w[..., occupied - 1]
    if norm is None:
        norm = np.max(np.abs(w), axis=-1)
    thresh = degeneracy_threshold(norm)
    bad = gaps <= thresh
    if np.any(bad):
        idx = np.unravel_index(np.argmax(bad), bad.shape) if bad.ndim else ()
        raise AtCriticalityError(
            f"gap {float(np.min(gaps)):.3e} below degeneracy threshold at batch index {idx}"
        )
    return float(np.min(gaps))
