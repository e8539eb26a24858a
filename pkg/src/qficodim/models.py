"""Bloch Hamiltonian families H(k, m).

Two kinds of model live here:

* ``continuum`` -- the linearized Dirac form
  ``H(q, m) = sum_i v_i q_i G_i + (m + lam * |q|^2) G_{p+1}`` built from a
  fixed Clifford set, restricted to an (ellipsoidal) cutoff ball.
* ``lattice`` -- the SSH chain and the Qi-Wu-Zhang Chern insulator on
  ``[-pi, pi]^d``.

Either kind can be decorated with extra gapped bands (:func:`with_gapped_band`).
All evaluation is vectorized: ``evaluate_batch`` accepts ``(N, d)`` momenta.

Gamma convention
----------------
``clifford_generators(n)`` uses ``k = n // 2`` qubits and the Jordan-Wigner set
``Z..Z X I..I``, ``Z..Z Y I..I`` (qubit j) followed by the diagonal ``Z...Z``.
For odd ``n`` all ``2k+1`` are returned; for even ``n`` the last ``Y``-type
generator is dropped.  The last generator, used as the mass matrix, is always
diagonal with ``+1`` on orbital 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .spectrum import eigh_batch

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

MAX_GENERATORS = 8


@dataclass(frozen=True)
class CliffordSet:
    """``n`` mutually anticommuting Hermitian involutions of dimension ``D``."""

    matrices: tuple

    @property
    def n(self) -> int:
        return len(self.matrices)

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def anticommutator_defect(self) -> float:
        """max_ab ||{G_a, G_b} - 2 delta_ab I||_inf"""
        eye = np.eye(self.dim)
        worst = 0.0
        for a, Ga in enumerate(self.matrices):
            for b, Gb in enumerate(self.matrices):
                target = 2.0 * eye if a == b else 0.0
                worst = max(worst, float(np.max(np.abs(Ga @ Gb + Gb @ Ga - target))))
        return worst


def _kron_all(mats):
    out = np.eye(1, dtype=complex)
    for M in mats:
        out = np.kron(out, M)
    return out


@lru_cache(maxsize=None)
def _clifford_cached(n):
    k = n // 2
    gens = []
    for j in range(k):
        left = [SIGMA_Z] * j
        right = [SIGMA_0] * (k - j - 1)
        gens.append(_kron_all(left + [SIGMA_X] + right))
        gens.append(_kron_all(left + [SIGMA_Y] + right))
    gens.append(_kron_all([SIGMA_Z] * k))
    if n % 2 == 0:
        del gens[2 * k - 1]
    for G in gens:
        G.setflags(write=False)
    return tuple(gens)


def clifford_generators(n: int) -> CliffordSet:
    """Deterministic minimal Clifford set with ``n`` generators.

    The dimension is ``2**(n // 2)``: two 2x2 matrices for ``n = 2, 3`` and
    4x4 matrices for ``n = 4, 5``.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_GENERATORS:
        raise ValueError(f"number of generators must be in [1, {MAX_GENERATORS}], got {n!r}")
    return CliffordSet(_clifford_cached(int(n)))


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of a Hamiltonian family ``H(k, m)``.

    ``mass`` is an optional default for ``m`` (the lattice constructors accept
    one).  ``mass_offset`` is added to ``m`` before evaluation; decorations use
    it to keep ``m = 0`` at the gap closing.
    """

    family: str
    kind: str
    codimension_p: int
    spatial_dim_d: int
    velocities: tuple
    cutoff_lambda: float | None = None
    correction: float = 0.0
    extra_bands: tuple = ()
    mass: float | None = None
    mass_offset: float = 0.0
    couplings: tuple = field(default=(), compare=False, repr=False)

    @property
    def critical_dim(self) -> int:
        if self.family == "linearized":
            return clifford_generators(self.codimension_p + 1).dim
        return 2

    @property
    def matrix_dim(self) -> int:
        return self.critical_dim + len(self.extra_bands)

    @property
    def occupied(self) -> int:
        return self.critical_dim // 2

    @property
    def k0(self) -> np.ndarray:
        return np.zeros(self.spatial_dim_d)

    @property
    def model_id(self) -> str:
        if self.family == "linearized":
            return f"linearized:p={self.codimension_p}"
        return self.family

    @property
    def effective_cutoff(self) -> float:
        """Radius of the cutoff ball in the rescaled variables ``u_i = v_i q_i``.

        The raw-q region is the ellipsoid with the same volume as the sphere of
        radius ``cutoff_lambda``; for equal velocities ``v`` it is ``v * Lambda``.
        """
        v = np.asarray(self.velocities, dtype=float)
        return float(self.cutoff_lambda * np.exp(np.mean(np.log(v))))

    def describe(self) -> dict:
        out = {
            "model": self.model_id,
            "kind": self.kind,
            "p": self.codimension_p,
            "d": self.spatial_dim_d,
            "velocities": list(self.velocities),
            "matrix_dim": self.matrix_dim,
            "occupied": self.occupied,
        }
        if self.kind == "continuum":
            out["cutoff"] = self.cutoff_lambda
            out["correction"] = self.correction
        if self.extra_bands:
            out["extra_bands"] = [list(b) for b in self.extra_bands]
            out["mass_offset"] = self.mass_offset
        return out


def linearized_model(p, velocities=None, cutoff=1.0, correction=0.0):
    """Continuum Dirac model of codimension ``p`` with optional quadratic term."""
    if not isinstance(p, (int, np.integer)) or p < 1 or p + 1 > MAX_GENERATORS:
        raise ValueError(f"codimension must be an integer in [1, {MAX_GENERATORS - 1}], got {p!r}")
    if velocities is None:
        velocities = (1.0,) * p
    velocities = tuple(float(v) for v in np.atleast_1d(velocities))
    if len(velocities) != p:
        raise ValueError(f"expected {p} velocities, got {len(velocities)}")
    if any(not v > 0 for v in velocities):
        raise ValueError("velocities must be positive")
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    return ModelSpec(
        family="linearized",
        kind="continuum",
        codimension_p=int(p),
        spatial_dim_d=int(p),
        velocities=velocities,
        cutoff_lambda=float(cutoff),
        correction=float(correction),
    )


def weyl_model(m=None, velocity=1.0, cutoff=1.0):
    """4x4 continuum Dirac/Weyl node, ``v q.G + m G_4``."""
    return replace(linearized_model(3, (velocity,) * 3, cutoff), mass=m)


def ssh_model(m=None):
    """SSH chain ``(m + 1 - cos k) s1 + sin k s2``; gap ``2|m|`` at ``k = 0``."""
    return ModelSpec(
        family="ssh", kind="lattice", codimension_p=1, spatial_dim_d=1,
        velocities=(1.0,), mass=m,
    )


def chern_model(m=None):
    """Qi-Wu-Zhang ``sin kx s1 + sin ky s2 + (m - 2 + cos kx + cos ky) s3``.

    Only the Dirac point at the origin closes near ``m = 0``; the others need
    ``|m| = 2`` or ``4``.
    """
    return ModelSpec(
        family="chern", kind="lattice", codimension_p=2, spatial_dim_d=2,
        velocities=(1.0, 1.0), mass=m,
    )


# -- evaluation ---------------------------------------------------------------

def _as_k_batch(model, k):
    k = np.asarray(k, dtype=float)
    d = model.spatial_dim_d
    if k.ndim == 0:
        k = k.reshape(1, 1)
    elif k.ndim == 1:
        k = k.reshape(1, -1) if k.shape[0] == d else k.reshape(-1, 1)
    if k.shape[-1] != d:
        raise ValueError(f"momentum has {k.shape[-1]} components, model needs {d}")
    return k


def _check_domain(model, k):
    if model.kind == "lattice":
        if np.any(np.abs(k) > np.pi * (1 + 1e-12)):
            raise ValueError("lattice momentum outside [-pi, pi]")
    else:
        v = np.asarray(model.velocities)
        r = np.sqrt(np.sum((k * v) ** 2, axis=-1))
        if np.any(r > model.effective_cutoff * (1 + 1e-10)):
            raise ValueError("continuum momentum outside the cutoff ball")


def _critical_block(model, k, m):
    """``(N, D0, D0)`` Hamiltonian of the critical bands."""
    N = k.shape[0]
    if model.family == "linearized":
        gam = clifford_generators(model.codimension_p + 1).matrices
        v = np.asarray(model.velocities)
        mass = m + model.correction * np.sum(k**2, axis=-1)
        H = np.einsum("n,ab->nab", mass, gam[-1]).astype(complex)
        for i in range(model.codimension_p):
            H += np.einsum("n,ab->nab", v[i] * k[:, i], gam[i])
        return H
    if model.family == "ssh":
        kk = k[:, 0]
        d1 = m + 1.0 - np.cos(kk)
        d2 = np.sin(kk)
        return (np.einsum("n,ab->nab", d1, SIGMA_X) + np.einsum("n,ab->nab", d2, SIGMA_Y))
    if model.family == "chern":
        kx, ky = k[:, 0], k[:, 1]
        dz = m - 2.0 + np.cos(kx) + np.cos(ky)
        return (np.einsum("n,ab->nab", np.sin(kx), SIGMA_X)
                + np.einsum("n,ab->nab", np.sin(ky), SIGMA_Y)
                + np.einsum("n,ab->nab", dz, SIGMA_Z))
    raise ValueError(f"unknown model family {model.family!r}")


def _critical_dm(model):
    if model.family == "linearized":
        return clifford_generators(model.codimension_p + 1).matrices[-1]
    if model.family == "ssh":
        return SIGMA_X
    if model.family == "chern":
        return SIGMA_Z
    raise ValueError(f"unknown model family {model.family!r}")


def _resolve_mass(model, m):
    if m is None:
        if model.mass is None:
            raise ValueError("no mass given and the model carries no default")
        m = model.mass
    return float(m)


def evaluate_batch(model, k, m=None, check_domain=True):
    """``H(k, m)`` for a stack of momenta; returns ``(N, D, D)``."""
    k = _as_k_batch(model, k)
    if check_domain:
        _check_domain(model, k)
    m = _resolve_mass(model, m) + model.mass_offset
    H0 = _critical_block(model, k, m)
    if not model.extra_bands:
        return H0
    D0 = model.critical_dim
    D = model.matrix_dim
    H = np.zeros((k.shape[0], D, D), dtype=complex)
    H[:, :D0, :D0] = H0
    for j, ((delta, g), vec) in enumerate(zip(model.extra_bands, model.couplings)):
        a = D0 + j
        H[:, a, a] = delta
        H[:, :D0, a] = g * vec
        H[:, a, :D0] = g * np.conj(vec)
    return H


def evaluate(model, k, m=None):
    """``H(k, m)`` at one momentum, as a ``(D, D)`` array."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.shape != (model.spatial_dim_d,):
        raise ValueError(f"expected a {model.spatial_dim_d}-component momentum, got shape {k.shape}")
    return evaluate_batch(model, k[None, :], m)[0]


def evaluate_dm(model, k=None, m=None):
    """Exact ``dH/dm``.  It is k- and m-independent for every built-in model."""
    if k is not None:
        _check_domain(model, _as_k_batch(model, k))
    D0 = model.critical_dim
    out = np.zeros((model.matrix_dim, model.matrix_dim), dtype=complex)
    out[:D0, :D0] = _critical_dm(model)
    return out


# -- decorations ----------------------------------------------------------------

def with_gapped_band(model, gap, coupling):
    """Append one band at energy ``gap`` with a constant coupling ``coupling``.

    The new orbital couples to the upper eigenvector of the mass matrix
    ``dH/dm`` (orbital 0 for the Clifford models), so for two-band critical
    blocks the induced self-energy only renormalizes the mass.  The resulting
    shift of the transition is measured and absorbed into ``mass_offset`` so
    ``m`` keeps measuring the distance to the gap closing at ``k0``.
    """
    gap = float(gap)
    coupling = float(coupling)
    if not gap > 0:
        raise ValueError("extra band must sit at positive energy")
    if abs(coupling) >= gap / 2:
        raise ValueError("coupling must satisfy |g| < gap / 2")
    w, v = np.linalg.eigh(_critical_dm(model))
    vec = v[:, np.argmax(w)].copy()
    vec.setflags(write=False)
    new = replace(
        model,
        extra_bands=model.extra_bands + ((gap, coupling),),
        couplings=model.couplings + (vec,),
    )
    if coupling == 0.0:
        return new
    shift = locate_transition(new, scale=4 * coupling**2 / gap)
    return replace(new, mass_offset=new.mass_offset + shift)


def _k0_gap(model, m):
    out = []
    for mm in np.atleast_1d(m):
        H = evaluate_batch(model, model.k0[None, :], mm, check_domain=False)
        w = np.linalg.eigvalsh(H[0])
        out.append(w[model.occupied] - w[model.occupied - 1])
    return np.array(out)


def locate_transition(model, scale, window=None):
    """Mass (relative to the current offset) at which the ``k0`` gap closes.

    If the gap vanishes on an interval the upper edge is returned, i.e. the
    transition reached when coming down from positive ``m``.  The gap is
    piecewise analytic, so the edge is found by extrapolating the branch to
    its right to zero on successively finer grids.
    """
    half = scale if window is None else window
    center = 0.0
    est = 0.0
    for _ in range(6):
        grid = np.linspace(center - half, center + half, 201)
        g = _k0_gap(model, grid)
        floor = g.min() + 1e-13 * (1 + np.max(g))
        i = int(np.max(np.nonzero(g <= floor)[0]))
        i = min(i, len(grid) - 3)
        m1, m2 = grid[i + 1], grid[i + 2]
        g1, g2 = g[i + 1], g[i + 2]
        est = m1 - g1 * (m2 - m1) / (g2 - g1)
        center = est
        half = 4 * (grid[1] - grid[0])
    at, above = _k0_gap(model, [est, est + 1e-3 * scale])
    if at > 1e-9 * (1 + scale) or not above > at:
        raise ValueError("decoration opens a gap: no band touching near m = 0")
    return float(est)


# -- registry -------------------------------------------------------------------

MODEL_DOCS = {
    "ssh": "SSH chain (lattice, d=p=1): (m+1-cos k) s1 + sin k s2.  No parameters.",
    "chern": "Qi-Wu-Zhang Chern insulator (lattice, d=p=2): sin kx s1 + sin ky s2 + "
             "(m-2+cos kx+cos ky) s3.  No parameters.",
    "weyl": "4x4 Weyl/Dirac node (continuum, p=3).  Parameters: velocity, cutoff.",
    "linearized:p=N": "Linearized Dirac model of codimension N (continuum).  Parameters: "
                      "velocities (list of N), cutoff, correction (quadratic coefficient).",
}

_LINEARIZED = re.compile(r"^linearized:p=(\d+)$")


def model_from_id(model_id, params=None):
    """Build a model from its string id and a parameter dict.

    Recognized decorations in ``params``: ``extra_bands`` as a list of
    ``[gap, coupling]`` pairs.
    """
    params = dict(params or {})
    extra = params.pop("extra_bands", [])
    if model_id == "ssh":
        model = ssh_model()
    elif model_id == "chern":
        model = chern_model()
    elif model_id == "weyl":
        model = weyl_model(velocity=params.pop("velocity", 1.0), cutoff=params.pop("cutoff", 1.0))
    else:
        match = _LINEARIZED.match(model_id)
        if not match:
            raise ValueError(f"unknown model id {model_id!r}")
        model = linearized_model(
            int(match.group(1)),
            velocities=params.pop("velocities", None),
            cutoff=params.pop("cutoff", 1.0),
            correction=params.pop("correction", 0.0),
        )
    if params:
        raise ValueError(f"unused parameters for {model_id}: {sorted(params)}")
    for gap_, g in extra:
        model = with_gapped_band(model, gap_, g)
    return model
