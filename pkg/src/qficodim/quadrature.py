"""Vectorized globally adaptive Gauss-Kronrod cubature on boxes.

Each box carries a tensor-product 15-point Kronrod rule.  The embedded
7-point Gauss rule, applied one axis at a time, gives a per-axis error
estimate; the box error is the sum over axes and a box is bisected along its
worst axis.  Every refinement sweep evaluates all selected boxes in a single
call of the (vectorized) integrand, so the integrand should accept an
``(N, d)`` array and return ``(N,)`` values.

Boxes are processed and summed in a fixed order, so results do not depend on
anything but the inputs.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ConvergenceError

# QUADPACK qk15 abscissae (non-negative half) and weights
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae (x1, x3, x5, x7=0)
for _i, _w in zip((1, 3, 5), _WG[:3]):
    GAUSS_WEIGHTS[_i] = _w
    GAUSS_WEIGHTS[14 - _i] = _w
GAUSS_WEIGHTS[7] = _WG[3]


def _rule_tensors(d):
    grids = np.meshgrid(*([NODES] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wk = [KRONROD_WEIGHTS] * d
    kron = _outer(wk)
    per_axis = []
    for ax in range(d):
        w = list(wk)
        w[ax] = GAUSS_WEIGHTS
        per_axis.append(_outer(w))
    return nodes, kron, np.stack(per_axis)


def _outer(ws):
    out = np.ones(1)
    for w in ws:
        out = np.multiply.outer(out, w).ravel()
    return out


class _Rule:
    _cache = {}

    @classmethod
    def get(cls, d):
        if d not in cls._cache:
            cls._cache[d] = _rule_tensors(d)
        return cls._cache[d]


def _evaluate_boxes(f, lo, hi):
    d = lo.shape[1]
    nodes, wk, wg = _Rule.get(d)
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = center[:, None, :] + half[:, None, :] * nodes[None, :, :]
    vals = np.asarray(f(pts.reshape(-1, d)), dtype=float).reshape(lo.shape[0], -1)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("integrand returned non-finite values")
    vol = np.prod(half, axis=1)
    K = vals @ wk * vol
    G = (vals @ wg.T) * vol[:, None]
    axis_err = np.abs(K[:, None] - G)
    return K, axis_err


def integrate_boxes(f, breakpoints, rel_tol=1e-9, abs_tol=0.0, max_depth=30, max_boxes=200_000):
    """Integrate ``f`` over the box given by per-axis ``breakpoints``.

    Parameters
    ----------
    f : callable
        ``f(x)`` with ``x`` of shape ``(N, d)`` returning ``(N,)`` reals.
    breakpoints : sequence of 1D arrays
        Sorted interval end points for each axis; the initial partition is
        their tensor product.  Put known features of ``f`` on breakpoints.
    rel_tol, abs_tol : float
        Stop once ``error <= max(abs_tol, rel_tol * |value|)``.
    max_depth : int
        Maximum number of bisections of any initial box.

    Returns
    -------
    (value, error, n_boxes)
    """
    axes = [np.asarray(b, dtype=float) for b in breakpoints]
    d = len(axes)
    cells = list(itertools.product(*[range(len(a) - 1) for a in axes]))
    lo = np.array([[axes[j][c[j]] for j in range(d)] for c in cells])
    hi = np.array([[axes[j][c[j] + 1] for j in range(d)] for c in cells])
    depth = np.zeros(len(cells), dtype=int)
    val, axis_err = _evaluate_boxes(f, lo, hi)
    err = axis_err.sum(axis=1)

    while True:
        total = math.fsum(val)
        total_err = math.fsum(err)
        tol = max(abs_tol, rel_tol * abs(total))
        if total_err <= tol:
            return total, total_err, len(val)
        # split the fewest worst boxes whose error accounts for the excess
        order = np.argsort(-err, kind="stable")
        need = total_err - 0.5 * tol
        csum = np.cumsum(err[order])
        n_split = int(np.searchsorted(csum, need) + 1)
        chosen = np.sort(order[:n_split])
        if np.any(depth[chosen] >= max_depth) or len(val) + n_split > max_boxes:
            raise ConvergenceError(
                f"adaptive cubature budget exhausted: error {total_err:.3e} > tolerance {tol:.3e}",
                value=total, error=total_err,
            )
        ax = np.argmax(axis_err[chosen], axis=1)
        rows = np.arange(len(chosen))
        mid = 0.5 * (lo[chosen, ax] + hi[chosen, ax])
        lo_a, hi_a = lo[chosen].copy(), hi[chosen].copy()
        hi_a[rows, ax] = mid
        lo_b, hi_b = lo[chosen].copy(), hi[chosen].copy()
        lo_b[rows, ax] = mid
        new_lo = np.concatenate([lo_a, lo_b])
        new_hi = np.concatenate([hi_a, hi_b])
        new_val, new_axis_err = _evaluate_boxes(f, new_lo, new_hi)
        keep = np.ones(len(val), dtype=bool)
        keep[chosen] = False
        # survivors keep their order, children are appended: layout is deterministic
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        depth = np.concatenate([depth[keep], np.tile(depth[chosen] + 1, 2)])
        val = np.concatenate([val[keep], new_val])
        axis_err = np.concatenate([axis_err[keep], new_axis_err])
        err = axis_err.sum(axis=1)


def integrate_1d(f, a, b, rel_tol=1e-9, abs_tol=0.0, max_depth=30, breakpoints=None):
    """Adaptive GK15 on ``[a, b]`` for a vectorized scalar function ``f(x)``."""
    bp = [a, b] if breakpoints is None else sorted({a, b, *[x for x in breakpoints if a < x < b]})
    return integrate_boxes(lambda x: f(x[:, 0]), [bp], rel_tol, abs_tol, max_depth)[:2]
