"""Singular-part extraction and classification of QFI(m) sweeps.

The constant background is removed by differencing on the geometric grid,
``D(m) = QFI(m) - QFI(r m)``: for ``QFI = A + c |m|^a`` this is
``c (1 - r^a) |m|^a`` and for ``QFI = A + c ln(1/|m|)`` it is the constant
``-c ln(1/r)``.  The exponent is the slope of ``ln|D|`` against ``ln m``.

Classes
-------
``power``             divergent or vanishing power law, ``c |m|^a`` (a < 0 may
                      carry a subleading constant, which is reported as ``A``)
``log``               ``A + c ln(1/|m|)``, the marginal ``a -> 0`` case
``const_plus_power``  finite background plus a vanishing correction,
                      ``A + c |m|^a`` with ``a > 0``
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientDataError, NoiseFloorError
from .integrate import DEFAULT_CONFIG, _continuum_with_error

#: |exponent| below which a log law is preferred when it also fits better
MARGINAL_EXPONENT = 0.1
#: discard this many largest-m points before fitting
DROP_LARGEST = 2
#: discard differenced points whose quadrature error exceeds this fraction
MAX_RELATIVE_ERROR = 0.1
#: relative accuracy floor used to weight residuals in the information criterion
RESIDUAL_FLOOR = 1e-9
#: floor on the log-space uncertainty of differenced values
LOG_FLOOR = 1e-6

N_PARAMS = {"power": 2, "log": 2, "const_plus_power": 3}


@dataclass(frozen=True)
class DifferenceSeries:
    m: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    ratio: float


@dataclass(frozen=True)
class PowerFit:
    exponent: float
    amplitude: float
    rms: float
    exponent_stderr: float


@dataclass(frozen=True)
class LogFit:
    coefficient: float
    background: float
    rms: float
    coefficient_stderr: float


@dataclass
class FitReport:
    singularity_class: str
    exponent: float | None
    amplitude: float
    background: float
    rms_residual: dict
    scores: dict
    m_range: tuple
    n_points: int
    exponent_stderr: float | None = None
    amplitude_stderr: float | None = None
    tie_break: bool = False
    label: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["class"] = d.pop("singularity_class")
        d["m_range"] = list(self.m_range)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self):
        head = f"{self.label}: " if self.label else ""
        if self.singularity_class == "log":
            return f"{head}log, c={self.amplitude:.6g}±{self.amplitude_stderr or 0.0:.2g}"
        out = f"{head}{self.singularity_class}, alpha={self.exponent:.6g}±{self.exponent_stderr or 0.0:.2g}"
        out += f", c={self.amplitude:.6g}"
        if self.singularity_class == "const_plus_power":
            out += f", A={self.background:.6g}"
        return out


def _grid_ratio(m):
    m = np.asarray(m, dtype=float)
    if m.size < 2:
        raise InsufficientDataError("need at least two m values")
    if np.any(m <= 0) or np.any(np.diff(m) >= 0):
        raise ValueError("m grid must be positive and strictly decreasing")
    ratios = m[1:] / m[:-1]
    r = float(np.exp(np.mean(np.log(ratios))))
    if np.max(np.abs(ratios / r - 1)) > 1e-9:
        raise ValueError("m grid is not geometric")
    return r


def difference_series(sweep, ratio=None) -> DifferenceSeries:
    """``D(m) = QFI(m) - QFI(ratio * m)`` on the sweep's own grid.

    ``ratio`` (< 1) must be an integer power of the grid ratio; by default the
    grid ratio itself is used.
    """
    m, y, e = sweep.m_values, sweep.qfi_values, sweep.errors
    r0 = _grid_ratio(m)
    if ratio is None:
        lag = 1
    else:
        lag = int(round(math.log(ratio) / math.log(r0)))
        if lag < 1 or abs(r0**lag / ratio - 1) > 1e-8:
            raise ValueError(f"ratio {ratio} is not a power of the grid ratio {r0:.12g}")
    if len(m) <= lag:
        raise InsufficientDataError("sweep too short for this ratio")
    D = y[:-lag] - y[lag:]
    err = e[:-lag] + e[lag:]
    return DifferenceSeries(m[:-lag].copy(), D, err, r0**lag)


def _weighted_line(x, y, w):
    """Weighted least squares ``y = a + b x``; returns a, b, cov."""
    W = np.sum(w)
    xm = np.sum(w * x) / W
    ym = np.sum(w * y) / W
    sxx = np.sum(w * (x - xm) ** 2)
    b = np.sum(w * (x - xm) * (y - ym)) / sxx
    a = ym - b * xm
    res = y - a - b * x
    dof = max(len(x) - 2, 1)
    s2 = np.sum(w * res**2) / dof
    var_b = s2 / sxx
    var_a = s2 * (1 / W + xm**2 / sxx)
    return a, b, res, var_a, var_b


def fit_power(m, values, weights=None) -> PowerFit:
    """Line through ``(ln m, ln|values|)``; the slope is the exponent."""
    m = np.asarray(m, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(m) < 4:
        raise InsufficientDataError("power-law fit needs at least 4 points")
    sign = np.sign(values)
    if np.any(sign == 0) or np.any(sign != sign[0]):
        raise ValueError("series changes sign: not a single power law (wrong class or noise floor)")
    w = np.ones_like(m) if weights is None else np.asarray(weights, dtype=float)
    a, b, res, _, var_b = _weighted_line(np.log(m), np.log(np.abs(values)), w)
    return PowerFit(float(b), float(sign[0] * math.exp(a)), float(np.sqrt(np.mean(res**2))),
                    float(math.sqrt(max(var_b, 0.0))))


def fit_log(m, values) -> LogFit:
    """Least squares ``values = A + c ln(1/m)``."""
    m = np.asarray(m, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(m) < 4:
        raise InsufficientDataError("log fit needs at least 4 points")
    a, b, res, _, var_b = _weighted_line(np.log(1 / m), values, np.ones_like(m))
    return LogFit(float(b), float(a), float(np.sqrt(np.mean(res**2))), float(math.sqrt(max(var_b, 0.0))))


def _aicc(chi2, k, n):
    return chi2 + 2 * k + 2 * k * (k + 1) / max(n - k - 1, 1)


def classify_singularity(sweep, label="") -> FitReport:
    """Fit power, log and constant-plus-power laws and pick the best.

    The exponent comes from the differenced series; all three candidates are
    then scored on the same raw window with a small-sample corrected AIC.
    """
    m_all = np.asarray(sweep.m_values, dtype=float)
    if len(m_all) < 8:
        raise InsufficientDataError("classification needs at least 8 points")
    if math.log10(m_all.max() / m_all.min()) < 2 - 1e-9:
        raise InsufficientDataError("classification needs at least two decades of m")
    _grid_ratio(m_all)

    order = np.argsort(-m_all)
    m = m_all[order][DROP_LARGEST:]
    y = np.asarray(sweep.qfi_values, dtype=float)[order][DROP_LARGEST:]
    e = np.asarray(sweep.errors, dtype=float)[order][DROP_LARGEST:]

    ds = difference_series(type(sweep)(sweep.source, m, y, e))
    good = ds.errors <= MAX_RELATIVE_ERROR * np.abs(ds.values)
    if good.sum() < 4:
        raise InsufficientDataError("fewer than 4 differenced points above the quadrature noise")
    dm, dv, de = ds.m[good], ds.values[good], ds.errors[good]
    rel = de / np.abs(dv)
    pw = fit_power(dm, dv, 1.0 / (rel**2 + LOG_FLOOR**2))
    alpha = pw.exponent

    # raw window: the points entering the accepted differences
    keep = np.zeros(len(m), dtype=bool)
    keep[:-1] = good
    keep[1:] |= good
    m, y, e = m[keep], y[keep], e[keep]
    n = len(m)
    sigma = np.maximum(e, RESIDUAL_FLOOR * np.abs(y))
    sigma = np.where(sigma > 0, sigma, RESIDUAL_FLOOR)

    preds, rms, scores = {}, {}, {}

    # pure power law c m^a
    if np.all(y > 0) or np.all(y < 0):
        pure = fit_power(m, y)
        preds["power"] = pure.amplitude * m**pure.exponent
    else:
        preds["power"] = None

    lf = fit_log(m, y)
    preds["log"] = lf.background + lf.coefficient * np.log(1 / m)

    X = np.stack([np.ones(n), m**alpha], axis=1)
    Wt = 1.0 / sigma
    coef, *_ = np.linalg.lstsq(X * Wt[:, None], y * Wt, rcond=None)
    A_cpp, c_cpp = float(coef[0]), float(coef[1])
    preds["const_plus_power"] = X @ coef

    for name, pred in preds.items():
        if pred is None:
            rms[name], scores[name] = math.inf, math.inf
            continue
        res = y - pred
        rms[name] = float(np.sqrt(np.mean(res**2)))
        scores[name] = float(_aicc(np.sum((res / sigma) ** 2), N_PARAMS[name], n))

    best = min(scores, key=lambda k: (scores[k], N_PARAMS[k]))
    tie = False
    if best == "log":
        cls = "log"
    else:
        cls = "const_plus_power" if (best == "const_plus_power" and alpha > 0) else "power"
    if abs(alpha) < MARGINAL_EXPONENT and rms["log"] < rms["power"] and cls != "log":
        cls, tie = "log", True

    # amplitude uncertainty on the chosen representation
    if cls == "log":
        return FitReport(
            "log", None, lf.coefficient, lf.background, rms, scores, (float(m.min()), float(m.max())),
            n, None, lf.coefficient_stderr, tie, label,
            extra={"difference_exponent": alpha, "difference_ratio": ds.ratio},
        )
    return FitReport(
        cls, alpha, c_cpp, A_cpp, rms, scores, (float(m.min()), float(m.max())), n,
        pw.exponent_stderr, None, tie, label, extra={"difference_ratio": ds.ratio},
    )


@dataclass(frozen=True)
class RGCheck:
    """Homogeneity test of the singular part under ``m -> b m``.

    ``ratio_m_over_bm`` is ``QFI_sing(m) / QFI_sing(b m)`` (predicted
    ``b**-(p-2)``); ``ratio_bm_over_m`` is its inverse (predicted ``b**(p-2)``).
    """

    p: int
    m: float
    b: float
    ratio_m_over_bm: float
    predicted_m_over_bm: float
    ratio_bm_over_m: float
    predicted_bm_over_m: float
    deviation: float
    noise: float


def rg_check(p, m, b, cutoff, velocities=None, cfg=DEFAULT_CONFIG, max_noise=1e-2) -> RGCheck:
    """Compare measured singular-part ratios against homogeneity of degree ``p - 2``.

    The background is cancelled by differencing: ``S(x) = QFI(x) - QFI(b x)``
    scales exactly like the singular part, so ``S(m) / S(b m)`` is the measured
    ``QFI_sing(m) / QFI_sing(b m)``.
    """
    if not b > 1:
        raise ValueError("b must exceed 1")
    if m == 0:
        raise ValueError("m must be non-zero")
    m = abs(m)
    if velocities is None:
        velocities = (1.0,) * p
    vals, errs = zip(*(_continuum_with_error(p, velocities, x, cutoff, cfg) for x in (m, b * m, b * b * m)))
    s1, s2 = vals[0] - vals[1], vals[1] - vals[2]
    e1, e2 = errs[0] + errs[1], errs[1] + errs[2]
    measured = s1 / s2
    noise = abs(e1 / s1) + abs(e2 / s2)
    if noise > max_noise:
        raise NoiseFloorError(f"ratio uncertainty {noise:.2e} exceeds {max_noise:.1e}")
    predicted = b ** (-(p - 2))
    return RGCheck(p, m, b, measured, predicted, 1 / measured, 1 / predicted,
                   abs(measured / predicted - 1), noise)
