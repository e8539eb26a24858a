"""Momentum-space integrals of the metric density and m-sweeps.

``qfi_continuum`` integrates the two-band closed form over the cutoff ball in
``p`` dimensions.  After ``u_i = v_i q_i`` it is the radial integral

    (S_{p-1} / prod v) * int_0^L dr r^{p-1} r^2 / (4 (r^2 + m^2)^2),

with ``S_0 = 2, S_1 = 2 pi, S_2 = 4 pi``.  The cutoff is imposed on ``|u|``:
``L = Lambda * (prod v)^(1/p)``, the ellipsoid in ``q`` with the volume of the
``Lambda``-sphere.

``qfi_model`` integrates the full perturbation-sum density of a continuum
``ModelSpec`` over the same region, and ``qfi_lattice`` integrates a lattice
model over its Brillouin zone.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AtCriticalityError, ConvergenceError
from .models import ModelSpec
from .qgt import metric_density
from .quadrature import integrate_boxes


def sphere_area(p):
    """Surface area of the unit sphere S^{p-1} in R^p."""
    return 2.0 * math.pi ** (p / 2) / math.gamma(p / 2)


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-9
    max_refinements: int = 30
    lattice_method: str = "adaptive"
    lattice_grid_start: int = 64
    lattice_max_grid: tuple = (4096, 2048, 256)

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-2:
            raise ValueError("rel_tol must lie in (0, 1e-2]")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be positive")
        if self.lattice_method not in ("adaptive", "grid"):
            raise ValueError("lattice_method must be 'adaptive' or 'grid'")
        for n in (self.lattice_grid_start, *self.lattice_max_grid):
            if n < 2 or n & (n - 1):
                raise ValueError("lattice grids must be powers of two")

    def max_grid(self, d):
        return self.lattice_max_grid[d - 1]

    def to_dict(self):
        out = asdict(self)
        out["lattice_max_grid"] = list(self.lattice_max_grid)
        return out


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class ContinuumSource:
    """Closed-form two-band continuum integrand (no model matrices)."""

    p: int
    velocities: tuple = None
    cutoff: float = 1.0

    def __post_init__(self):
        if self.velocities is None:
            object.__setattr__(self, "velocities", (1.0,) * self.p)
        object.__setattr__(self, "velocities", tuple(float(v) for v in self.velocities))
        if len(self.velocities) != self.p or any(v <= 0 for v in self.velocities):
            raise ValueError("need p positive velocities")
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")

    def describe(self):
        return {"model": f"continuum:p={self.p}", "kind": "continuum-closed-form", "p": self.p,
                "velocities": list(self.velocities), "cutoff": self.cutoff}


def _radial_breaks(m, L):
    """``0, m, 4m, 16m, ... , L``: integrand features sit at ``r ~ |m|``."""
    pts = [0.0]
    r = abs(m)
    while r < L:
        pts.append(r)
        r *= 4.0
    pts.append(L)
    return pts


def _check_mass(m):
    if m == 0:
        raise AtCriticalityError("QFI requested at m = 0; the metric density is not integrable there")


def _continuum_with_error(p, velocities, m, cutoff, cfg):
    _check_mass(m)
    v = np.asarray(velocities, dtype=float)
    if v.shape != (p,) or np.any(v <= 0):
        raise ValueError(f"need {p} positive velocities")
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    L = cutoff * float(np.exp(np.mean(np.log(v))))
    pref = sphere_area(p) / float(np.prod(v))
    m2 = m * m

    def f(x):
        r = x[:, 0]
        r2 = r * r
        return pref * r ** (p - 1) * r2 / (4.0 * (r2 + m2) ** 2)

    val, err, _ = integrate_boxes(f, [_radial_breaks(m, L)], cfg.rel_tol, 0.0, cfg.max_refinements)
    return val, err


def qfi_continuum(p, velocities, m, cutoff, cfg=DEFAULT_CONFIG):
    """``int_{cutoff ball} d^p q  g_mm(q)`` with the closed-form two-band density."""
    return _continuum_with_error(p, velocities, m, cutoff, cfg)[0]


def scaled_integral(p, X, cfg=DEFAULT_CONFIG):
    """Dimensionless ``Phi(X) = S_{p-1} int_0^X dx x^{p+1} / (4 (x^2 + 1)^2)``.

    ``qfi_continuum(p, ones, m, L) == m**(p-2) * Phi(L / m)`` for ``m > 0``.
    """
    if not X > 0:
        raise ValueError("X = cutoff / m must be positive")
    return _continuum_with_error(p, (1.0,) * p, 1.0, X, cfg)[0]


# -- matrix models ----------------------------------------------------------------

def _is_radial(model):
    coupled = any(g != 0.0 for _, g in model.extra_bands)
    isotropic = len(set(model.velocities)) == 1
    return not coupled and (model.correction == 0.0 or isotropic)


def _model_continuum(model, m, occupied, cfg):
    _check_mass(m)
    p = model.codimension_p
    v = np.asarray(model.velocities)
    L = model.effective_cutoff
    jac = 1.0 / float(np.prod(v))
    rb = _radial_breaks(m, L)

    if _is_radial(model):
        pref = sphere_area(p) * jac

        def f(x):
            r = x[:, 0]
            q = np.zeros((r.size, p))
            q[:, 0] = r / v[0]
            return pref * r ** (p - 1) * metric_density(model, q, m, occupied)

        val, err, _ = integrate_boxes(f, [rb], cfg.rel_tol, 0.0, cfg.max_refinements)
        return val, err

    if p == 1:
        def f(x):
            return jac * metric_density(model, x / v, m, occupied)

        breaks = [-b for b in rb[:0:-1]] + rb
        val, err, _ = integrate_boxes(f, [breaks], cfg.rel_tol, 0.0, cfg.max_refinements)
        return val, err
    if p == 2:
        def f(x):
            r, phi = x[:, 0], x[:, 1]
            u = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
            return jac * r * metric_density(model, u / v, m, occupied)

        phis = np.linspace(0, 2 * np.pi, 5)
        val, err, _ = integrate_boxes(f, [rb, phis], cfg.rel_tol, 0.0, cfg.max_refinements)
        return val, err
    if p == 3:
        def f(x):
            r, th, phi = x[:, 0], x[:, 1], x[:, 2]
            st = np.sin(th)
            u = np.stack([r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(th)], axis=-1)
            return jac * r * r * st * metric_density(model, u / v, m, occupied)

        val, err, _ = integrate_boxes(
            f, [rb, [0, np.pi / 2, np.pi], [0, np.pi, 2 * np.pi]], cfg.rel_tol, 0.0, cfg.max_refinements
        )
        return val, err
    raise ValueError("non-radial continuum integration is implemented for p <= 3 only")


def qfi_model(model, m, occupied=None, cfg=DEFAULT_CONFIG):
    """Integrate the perturbation-sum density of a continuum model over its cutoff region."""
    if model.kind != "continuum":
        raise ValueError("qfi_model needs a continuum model; use qfi_lattice")
    return _model_continuum(model, m, occupied, cfg)[0]


def _lattice_adaptive(model, m, occupied, cfg):
    d = model.spatial_dim_d
    half = [b for b in _radial_breaks(m, np.pi)]
    breaks = [-b for b in half[:0:-1]] + half

    def f(x):
        return metric_density(model, x, m, occupied)

    val, err, _ = integrate_boxes(f, [breaks] * d, cfg.rel_tol, 0.0, cfg.max_refinements)
    return val, err


def _midpoint_sum(model, m, occupied, n):
    d = model.spatial_dim_d
    ks = -np.pi + 2 * np.pi * (np.arange(n) + 0.5) / n
    grids = np.meshgrid(*([ks] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    vals = []
    # chunk to bound memory on large 2D meshes
    for start in range(0, len(pts), 1 << 18):
        vals.append(metric_density(model, pts[start:start + (1 << 18)], m, occupied))
    w = (2 * np.pi / n) ** d
    return w * math.fsum(np.concatenate(vals))


def _lattice_grid(model, m, occupied, cfg):
    d = model.spatial_dim_d
    n = cfg.lattice_grid_start
    prev = _midpoint_sum(model, m, occupied, n)
    while n < cfg.max_grid(d):
        n *= 2
        cur = _midpoint_sum(model, m, occupied, n)
        err = abs(cur - prev)
        if err <= cfg.rel_tol * abs(cur):
            return cur, err
        prev = cur
    raise ConvergenceError(
        f"uniform {d}D grid did not converge by n={n}: last change {err:.3e}", value=cur, error=err
    )


def qfi_lattice(model, m, occupied=None, cfg=DEFAULT_CONFIG):
    """Brillouin-zone integral of the perturbation-sum density of a lattice model."""
    return _lattice_with_error(model, m, occupied, cfg)[0]


def _lattice_with_error(model, m, occupied, cfg):
    if model.kind != "lattice":
        raise ValueError("qfi_lattice needs a lattice model")
    _check_mass(m)
    if cfg.lattice_method == "grid":
        return _lattice_grid(model, m, occupied, cfg)
    return _lattice_adaptive(model, m, occupied, cfg)


def qfi_with_error(source, m, cfg=DEFAULT_CONFIG, occupied=None):
    """``(value, error_estimate)`` for any supported source."""
    if isinstance(source, ContinuumSource):
        return _continuum_with_error(source.p, source.velocities, m, source.cutoff, cfg)
    if isinstance(source, ModelSpec):
        if source.kind == "lattice":
            return _lattice_with_error(source, m, occupied, cfg)
        return _model_continuum(source, m, occupied, cfg)
    raise TypeError(f"unsupported source {type(source).__name__}")


# -- sweeps -----------------------------------------------------------------------

def geometric_grid(m_min, m_max, points_per_decade=16):
    """Decreasing grid ``m_max * 10**(-i / points_per_decade)`` down to ``m_min``."""
    if not 0 < m_min < m_max:
        raise ValueError("need 0 < m_min < m_max")
    if points_per_decade < 1:
        raise ValueError("points_per_decade must be positive")
    n = int(round(math.log10(m_max / m_min) * points_per_decade))
    return m_max * 10.0 ** (-np.arange(n + 1) / points_per_decade)


class SweepError(RuntimeError):
    """One or more sweep points failed; ``failures`` maps m to the exception."""

    def __init__(self, failures):
        self.failures = failures
        lines = [f"m={m!r}: {type(e).__name__}: {e}" for m, e in failures.items()]
        super().__init__("sweep failed at %d point(s):\n  " % len(failures) + "\n  ".join(lines))


@dataclass
class SweepResult:
    source: dict
    m_values: np.ndarray
    qfi_values: np.ndarray
    errors: np.ndarray
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.m_values = np.asarray(self.m_values, dtype=float)
        self.qfi_values = np.asarray(self.qfi_values, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "qfi", "err_estimate"])
        for row in zip(self.m_values, self.qfi_values, self.errors):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, source=None, config=None):
        rows = list(csv.reader(io.StringIO(text)))
        header = [h.strip() for h in rows[0]]
        if header[:2] != ["m", "qfi"]:
            raise ValueError(f"unexpected CSV header {header}")
        data = np.array([[float(x) for x in r] for r in rows[1:] if r])
        errs = data[:, 2] if data.shape[1] > 2 else np.zeros(len(data))
        return cls(source or {}, data[:, 0], data[:, 1], errs, config or {})

    def metadata(self) -> dict:
        return {
            "source": self.source,
            "config": self.config,
            "n_points": int(len(self.m_values)),
            "m_max": float(self.m_values.max()),
            "m_min": float(self.m_values.min()),
        }

    def to_json(self) -> str:
        payload = self.metadata()
        payload.update({
            "m": [float(x) for x in self.m_values],
            "qfi": [float(x) for x in self.qfi_values],
            "err_estimate": [float(x) for x in self.errors],
        })
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["source"], d["m"], d["qfi"], d["err_estimate"], d.get("config", {}))


def describe_source(source):
    return source.describe()


def sweep(source, m_grid, cfg=DEFAULT_CONFIG, occupied=None, threads=1) -> SweepResult:
    """Evaluate the integrated metric at every m of a (geometric) grid.

    Points are independent; ``threads`` only changes wall time.
    """
    m_grid = np.asarray(m_grid, dtype=float)
    if np.any(m_grid == 0):
        raise AtCriticalityError("sweep grid contains m = 0")

    def one(m):
        try:
            return qfi_with_error(source, float(m), cfg, occupied)
        except (ConvergenceError, AtCriticalityError, FloatingPointError) as exc:
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, m_grid))
    else:
        results = [one(m) for m in m_grid]
    failures = {float(m): r for m, r in zip(m_grid, results) if isinstance(r, Exception)}
    if failures:
        first = next(iter(failures.values()))
        if all(isinstance(e, AtCriticalityError) for e in failures.values()):
            raise AtCriticalityError(str(SweepError(failures))) from first
        raise SweepError(failures) from first
    vals = np.array([r[0] for r in results])
    errs = np.array([r[1] for r in results])
    meta = describe_source(source)
    if occupied is not None:
        meta["occupied"] = occupied
    return SweepResult(meta, m_grid, vals, errs, cfg.to_dict())
