import math

import mpmath
import numpy as np
import pytest

from qficodim import integrate as integ
from qficodim.errors import AtCriticalityError
from qficodim.integrate import (
    ContinuumSource,
    QuadratureConfig,
    SweepResult,
    geometric_grid,
    qfi_continuum,
    qfi_lattice,
    qfi_model,
    qfi_with_error,
    scaled_integral,
    sphere_area,
    sweep,
)
from qficodim.models import chern_model, linearized_model, ssh_model, weyl_model, with_gapped_band


def closed_p1(m, L):
    return 0.25 * (math.atan(L / m) / m - L / (L * L + m * m))


def closed_p2(m, L):
    return math.pi / 4 * (math.log((L * L + m * m) / (m * m)) - L * L / (L * L + m * m))


def closed_p3(m, L):
    return math.pi * (L - 1.5 * m * math.atan(L / m) + m * m * L / (2 * (L * L + m * m)))


CLOSED = {1: closed_p1, 2: closed_p2, 3: closed_p3}


def mp_oracle(p, m, L):
    mpmath.mp.dps = 30
    area = 2 * mpmath.pi ** (mpmath.mpf(p) / 2) / mpmath.gamma(mpmath.mpf(p) / 2)
    f = lambda r: area * r ** (p + 1) / (4 * (r * r + m * m) ** 2)
    pts = [0, m, 10 * m, L] if 10 * m < L else [0, m, L]
    return float(mpmath.quad(f, pts))


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("m", [1e-4, 1e-2, 0.5])
def test_closed_forms_match_high_precision_oracle(p, m):
    assert CLOSED[p](m, 1.0) == pytest.approx(mp_oracle(p, m, 1.0), rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("m", [1e-4, 3e-3, 0.2, 2.0])
def test_continuum_integral_matches_closed_form(p, m):
    assert qfi_continuum(p, (1.0,) * p, m, 1.0) == pytest.approx(CLOSED[p](m, 1.0), rel=1e-9)


def test_documented_continuum_values():
    assert qfi_continuum(3, (1, 1, 1), 1e-4, 1.0) == pytest.approx(3.1409, abs=1e-4)
    # p = 1 at m = 0.1, Lambda = 1: arctan(10) / 0.4 - 1 / 4.04
    assert qfi_continuum(1, (1.0,), 0.1, 1.0) == pytest.approx(math.atan(10) / 0.4 - 1 / 4.04, rel=1e-10)


def test_mass_sign_symmetry():
    for p in (1, 2, 3):
        assert qfi_continuum(p, (1.0,) * p, -0.01, 1.0) == pytest.approx(qfi_continuum(p, (1.0,) * p, 0.01, 1.0),
                                                                         rel=1e-12)


def test_scaled_integral_limits():
    assert scaled_integral(1, 1e6) == pytest.approx(math.pi / 8, rel=1e-5)
    X = 1e4
    assert scaled_integral(2, X) == pytest.approx(math.pi / 4 * (math.log(X * X) - 1), rel=1e-6)
    with pytest.raises(ValueError):
        scaled_integral(2, 0.0)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_anisotropy_factorizes(p):
    v = np.array([1.0, 3.0, 5.0][:p])
    iso = qfi_continuum(p, (1.0,) * p, 0.01, 1.0 * np.prod(v) ** (1 / p))
    assert qfi_continuum(p, v, 0.01, 1.0) == pytest.approx(iso / np.prod(v), rel=1e-9)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_matrix_model_matches_closed_form(p):
    model = linearized_model(p, cutoff=1.0)
    copies = 2 if p == 3 else 1
    assert qfi_model(model, 0.01) == pytest.approx(copies * qfi_continuum(p, (1.0,) * p, 0.01, 1.0), rel=1e-8)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_angular_path_matches_radial(p, monkeypatch):
    model = linearized_model(p, (1.0, 3.0, 5.0)[:p], cutoff=1.0)
    radial = qfi_model(model, 0.05, cfg=QuadratureConfig(rel_tol=1e-10))
    monkeypatch.setattr(integ, "_is_radial", lambda _m: False)
    full = qfi_model(model, 0.05, cfg=QuadratureConfig(rel_tol=1e-10))
    assert full == pytest.approx(radial, rel=1e-8)


def test_weyl_model_integral():
    assert qfi_model(weyl_model(), 0.1) == pytest.approx(2 * closed_p3(0.1, 1.0), rel=1e-8)


def test_criticality_rejected():
    with pytest.raises(AtCriticalityError):
        qfi_continuum(2, (1, 1), 0.0, 1.0)
    with pytest.raises(AtCriticalityError):
        qfi_lattice(ssh_model(), 0.0)
    with pytest.raises(AtCriticalityError):
        sweep(ContinuumSource(1), [0.0])


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(lattice_method="simpson")
    with pytest.raises(ValueError):
        QuadratureConfig(lattice_grid_start=100)


@pytest.mark.parametrize("model,m", [(ssh_model(), 0.2), (chern_model(), 0.5)])
def test_lattice_adaptive_agrees_with_uniform_grid(model, m):
    cfg_a = QuadratureConfig(rel_tol=1e-10)
    cfg_g = QuadratureConfig(rel_tol=1e-10, lattice_method="grid", lattice_grid_start=16)
    assert qfi_lattice(model, m, cfg=cfg_a) == pytest.approx(qfi_lattice(model, m, cfg=cfg_g), rel=1e-9)


def test_ssh_approaches_continuum():
    """Lattice and continuum (cutoff pi) differ by an analytic background only."""
    m = 1e-3
    lat = qfi_lattice(ssh_model(), m, cfg=QuadratureConfig(rel_tol=1e-9))
    cont = qfi_continuum(1, (1.0,), m, math.pi)
    assert abs(lat - cont) / cont < 2e-2
    # the difference tends to a finite constant
    d1 = qfi_lattice(ssh_model(), 1e-2) - qfi_continuum(1, (1.0,), 1e-2, math.pi)
    d2 = lat - cont
    assert abs(d1 - d2) < 0.05 * abs(d2)


def test_chern_log_slope():
    cfg = QuadratureConfig(rel_tol=1e-8)
    slope = qfi_lattice(chern_model(), 1e-4, cfg=cfg) - qfi_lattice(chern_model(), 1e-3, cfg=cfg)
    assert slope == pytest.approx(math.pi / 2 * math.log(10), rel=1e-2)


def test_geometric_grid():
    g = geometric_grid(1e-4, 1e-2, 16)
    assert len(g) == 33
    assert g[0] == 1e-2 and g[-1] == pytest.approx(1e-4)
    assert np.allclose(g[1:] / g[:-1], 10 ** (-1 / 16))
    with pytest.raises(ValueError):
        geometric_grid(1e-2, 1e-4)


def test_sweep_round_trips(tmp_path):
    res = sweep(ContinuumSource(2), geometric_grid(1e-3, 1e-1, 4))
    again = SweepResult.from_csv(res.to_csv(), source=res.source)
    assert np.array_equal(again.m_values, res.m_values)
    assert np.array_equal(again.qfi_values, res.qfi_values)
    assert np.array_equal(again.errors, res.errors)
    back = SweepResult.from_json(res.to_json())
    assert back.source == res.source and back.config == res.config
    assert np.array_equal(back.qfi_values, res.qfi_values)
    assert res.to_csv().splitlines()[0] == "m,qfi,err_estimate"


def test_sweep_threads_do_not_change_results():
    grid = geometric_grid(1e-3, 1e-1, 4)
    a = sweep(ContinuumSource(1), grid)
    b = sweep(ContinuumSource(1), grid, threads=3)
    assert a.to_csv() == b.to_csv()


def test_sweep_records_errors_and_metadata():
    res = sweep(ssh_model(), geometric_grid(1e-2, 1e-1, 4), QuadratureConfig(rel_tol=1e-8))
    assert res.source["model"] == "ssh"
    assert res.config["rel_tol"] == 1e-8
    assert np.all(res.errors <= 1e-8 * res.qfi_values * 1.0001)


def test_sweep_failure_collects_points():
    cfg = QuadratureConfig(rel_tol=1e-12, max_refinements=1)
    with pytest.raises(integ.SweepError) as info:
        sweep(ContinuumSource(1), [1e-3, 1e-4], cfg)
    assert len(info.value.failures) == 2


def test_extra_band_model_integrates():
    model = with_gapped_band(linearized_model(1), 1.0, 0.1)
    val, err = qfi_with_error(model, 1e-2)
    base = qfi_continuum(1, (1.0,), 1e-2, 1.0)
    # the decoration changes only the background, not the 1/m leading term
    assert abs(val - base) < 0.05 * base
    assert err <= 1e-8 * val


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
