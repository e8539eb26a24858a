"""Quantum metric g_mm along the tuning parameter, and topological invariants.

Three independent routes to the same density:

``metric_mm_sum``
    perturbation sum over occupied/unoccupied pairs,
    ``sum_{n occ, l unocc} |<l|dH/dm|n>|^2 / (E_l - E_n)^2``.
``metric_mm_closed``
    the two-band Dirac closed form ``s / (4 (s + m^2)^2)`` with
    ``s = sum_i v_i^2 q_i^2``.
``metric_mm_overlap``
    finite difference of occupied projectors,
    ``||P(m + d/2) - P(m - d/2)||_F^2 / (2 d^2)``.

For a degenerate occupied subspace the sum runs over all occupied states
(trace, not average).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AtCriticalityError
from .models import evaluate_batch, evaluate_dm, _as_k_batch
from .spectrum import check_gapped, degeneracy_threshold, eigh_batch


@dataclass(frozen=True)
class MetricSample:
    k: tuple
    m: float
    value: float
    method: str


def _resolve(model, m, occupied):
    if m is None:
        m = model.mass
    if occupied is None:
        occupied = model.occupied
    return float(m), int(occupied)


def metric_density(model, k, m, occupied=None, eigensystem=None):
    """Vectorized perturbation-sum metric at ``(N, d)`` momenta.

    Raises :class:`AtCriticalityError` if any point is gapless.
    """
    m, occupied = _resolve(model, m, occupied)
    if eigensystem is None:
        H = evaluate_batch(model, k, m)
        w, v = eigh_batch(H)
    else:
        w, v = eigensystem
    check_gapped(w, occupied)
    V = evaluate_dm(model)
    # matrix elements <l|V|n> in the eigenbasis
    Vt = np.conj(np.swapaxes(v, -1, -2)) @ V @ v
    block = Vt[:, occupied:, :occupied]
    dE = w[:, occupied:, None] - w[:, None, :occupied]
    return np.sum(np.abs(block) ** 2 / dE**2, axis=(-2, -1))


def metric_mm_sum(model, k, m=None, occupied=None) -> MetricSample:
    """Perturbation-sum metric at a single momentum."""
    m, occupied = _resolve(model, m, occupied)
    kb = _as_k_batch(model, k)
    if kb.shape[0] != 1:
        raise ValueError("metric_mm_sum takes one momentum; use metric_density for batches")
    value = float(metric_density(model, kb, m, occupied)[0])
    return MetricSample(tuple(kb[0]), m, value, "sum")


def metric_mm_closed(p, velocities, q, m) -> MetricSample:
    """Closed form ``s / (4 (s + m^2)^2)``, ``s = sum v_i^2 q_i^2``."""
    v = np.asarray(velocities, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    if v.shape != (p,) or q.shape != (p,):
        raise ValueError(f"need {p} velocities and momentum components")
    s = float(np.sum(v**2 * q**2))
    denom = s + m * m
    if denom == 0.0:
        raise AtCriticalityError("q = 0 and m = 0: the closed form is undefined")
    return MetricSample(tuple(q), float(m), s / (4.0 * denom**2), "closed_form")


def occupied_projectors(model, k, m, occupied):
    H = evaluate_batch(model, k, m)
    w, v = eigh_batch(H)
    check_gapped(w, occupied)
    vo = v[..., :occupied]
    return vo @ np.conj(np.swapaxes(vo, -1, -2)), w


def default_step(model, k, m, occupied):
    """``1e-4 * max(|m|, gap)`` with the smallest gap in the batch."""
    m, occupied = _resolve(model, m, occupied)
    w = np.linalg.eigvalsh(evaluate_batch(model, k, m))
    g = np.min(w[..., occupied] - w[..., occupied - 1])
    return 1e-4 * max(abs(m), float(g))


def metric_overlap_density(model, k, m, occupied=None, step=None):
    """Vectorized projector finite-difference metric."""
    m, occupied = _resolve(model, m, occupied)
    k = _as_k_batch(model, k)
    if step is None:
        step = default_step(model, k, m, occupied)
    if not step > 0:
        raise ValueError("finite-difference step must be positive")
    # the centre point must be gapped too
    _, w0 = occupied_projectors(model, k, m, occupied)
    Pp, _ = occupied_projectors(model, k, m + step / 2, occupied)
    Pm, _ = occupied_projectors(model, k, m - step / 2, occupied)
    diff = Pp - Pm
    return np.sum(np.abs(diff) ** 2, axis=(-2, -1)) / (2.0 * step**2)


def metric_mm_overlap(model, k, m=None, occupied=None, step=None) -> MetricSample:
    """Fidelity-based metric at one momentum (independent check of the sum)."""
    m, occupied = _resolve(model, m, occupied)
    kb = _as_k_batch(model, k)
    value = float(metric_overlap_density(model, kb, m, occupied, step)[0])
    return MetricSample(tuple(kb[0]), m, value, "overlap")


# -- invariants -----------------------------------------------------------------

def winding_number(model, m=None, grid_n=512) -> int:
    """Winding of the off-diagonal element ``H[0, 1](k)`` around the BZ.

    Only defined for two-band 1D models in chiral (off-diagonal) form.
    """
    m, _ = _resolve(model, m, None)
    if model.spatial_dim_d != 1 or model.matrix_dim != 2:
        raise ValueError("winding number needs a two-band one-dimensional model")
    k = -np.pi + 2 * np.pi * np.arange(grid_n) / grid_n
    H = evaluate_batch(model, k[:, None], m)
    scale = np.max(np.abs(H))
    if np.max(np.abs(H[:, 0, 0])) + np.max(np.abs(H[:, 1, 1])) > 1e-12 * (1 + scale):
        raise ValueError("model is not in chiral off-diagonal form")
    h = H[:, 0, 1]
    if np.min(np.abs(h)) <= degeneracy_threshold(scale):
        raise AtCriticalityError(f"gap closes on the k-grid at m={m}")
    phase = np.angle(h)
    steps = np.diff(np.append(phase, phase[0]))
    steps = (steps + np.pi) % (2 * np.pi) - np.pi
    total = steps.sum() / (2 * np.pi)
    return int(np.rint(total))


def chern_number(model, m=None, occupied=None, grid_n=48) -> int:
    """Lattice Chern number from plaquette link variables on an ``n x n`` mesh.

    Link variables ``U = det(V_k^dag V_{k+mu}) / |det|`` of the occupied frame;
    the plaquette phase ``arg(U_x U_y(k+x) / (U_x(k+y) U_y))`` summed over the
    mesh is ``2 pi`` times an integer by construction.
    """
    m, occupied = _resolve(model, m, occupied)
    if model.spatial_dim_d != 2 or model.kind != "lattice":
        raise ValueError("Chern number needs a two-dimensional lattice model")
    ks = -np.pi + 2 * np.pi * np.arange(grid_n) / grid_n
    KX, KY = np.meshgrid(ks, ks, indexing="ij")
    kpts = np.stack([KX.ravel(), KY.ravel()], axis=-1)
    w, v = eigh_batch(evaluate_batch(model, kpts, m))
    try:
        check_gapped(w, occupied)
    except AtCriticalityError as exc:
        raise AtCriticalityError(f"gap closes on the k-grid at m={m}") from exc
    frame = v[..., :occupied].reshape(grid_n, grid_n, model.matrix_dim, occupied)

    def link(axis):
        shifted = np.roll(frame, -1, axis=axis)
        ov = np.conj(np.swapaxes(frame, -1, -2)) @ shifted
        det = np.linalg.det(ov)
        return det / np.abs(det)

    Ux, Uy = link(0), link(1)
    F = np.angle(Ux * np.roll(Uy, -1, axis=0) / (np.roll(Ux, -1, axis=1) * Uy))
    return int(np.rint(F.sum() / (2 * np.pi)))
