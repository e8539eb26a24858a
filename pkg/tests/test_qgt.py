import numpy as np
import pytest
from hypothesis import given, strategies as st

from qficodim.errors import AtCriticalityError
from qficodim.models import chern_model, linearized_model, ssh_model, weyl_model, with_gapped_band
from qficodim.qgt import (
    chern_number,
    metric_density,
    metric_mm_closed,
    metric_mm_overlap,
    metric_mm_sum,
    metric_overlap_density,
    winding_number,
)
from qficodim.spectrum import eigh_batch
from qficodim.models import evaluate_batch


@pytest.mark.parametrize("p", [1, 2, 3])
def test_three_routes_agree(p, rng):
    vel = tuple(rng.uniform(0.5, 2.0, p))
    model = linearized_model(p, vel, cutoff=20.0)
    for _ in range(20):
        q = rng.uniform(-1, 1, p)
        m = rng.uniform(0.05, 1.0) * rng.choice([-1, 1])
        closed = metric_mm_closed(p, vel, q, m).value
        summed = metric_mm_sum(model, q, m).value
        overlap = metric_mm_overlap(model, q, m).value
        # the Clifford set is 4x4 for p = 3: two degenerate copies
        copies = 2 if p == 3 else 1
        assert summed == pytest.approx(copies * closed, rel=1e-12)
        assert overlap == pytest.approx(summed, rel=1e-6)


def test_documented_values():
    model = linearized_model(1, cutoff=10.0)
    assert metric_mm_closed(1, [1.0], [0.0], 1.0).value == 0.0
    assert metric_mm_sum(model, [1.0], 1.0).value == pytest.approx(1 / 16)
    assert metric_mm_overlap(model, [1.0], 1.0).value == pytest.approx(1 / 16, rel=1e-7)


def test_weyl_is_twice_the_two_band_form(rng):
    model = weyl_model(cutoff=10.0)
    for _ in range(10):
        q = rng.uniform(-1, 1, 3)
        m = rng.uniform(0.1, 1)
        assert metric_mm_sum(model, q, m).value == pytest.approx(
            2 * metric_mm_closed(3, (1, 1, 1), q, m).value, rel=1e-12)


def test_gauge_invariance(rng):
    """Random phases on eigenvectors (and a unitary mix inside degenerate pairs) leave g unchanged."""
    model = weyl_model(cutoff=10.0)
    k = rng.uniform(-1, 1, (8, 3))
    m = 0.4
    w, v = eigh_batch(evaluate_batch(model, k, m))
    ref = metric_density(model, k, m, eigensystem=(w, v))
    U = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
    v2 = v.copy()
    v2[..., :2] = v[..., :2] @ U
    v2[..., 2:] = v[..., 2:] * np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
    assert np.allclose(metric_density(model, k, m, eigensystem=(w, v2)), ref, rtol=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1.5, 1.5).filter(lambda x: abs(x) > 1e-3))
def test_metric_non_negative(kx, ky, m):
    assert metric_mm_sum(chern_model(), [kx, ky], m).value >= 0.0


def test_overlap_is_second_order(rng):
    """Error of the centred projector difference falls by 4 when the step halves."""
    model = ssh_model()
    k, m = [0.7], 0.3
    exact = metric_mm_sum(model, k, m).value
    e1 = metric_mm_overlap(model, k, m, step=2e-2).value - exact
    e2 = metric_mm_overlap(model, k, m, step=1e-2).value - exact
    assert e1 / e2 == pytest.approx(4.0, rel=1e-2)


def test_decoupled_band_leaves_metric(rng):
    base = linearized_model(2, cutoff=5.0)
    model = with_gapped_band(base, 2.0, 0.0)
    k = rng.uniform(-1, 1, (10, 2))
    assert np.allclose(metric_density(model, k, 0.3), metric_density(base, k, 0.3), rtol=1e-13)


def test_gapless_point_raises():
    with pytest.raises(AtCriticalityError):
        metric_mm_sum(linearized_model(2), [0.0, 0.0], 0.0)
    with pytest.raises(AtCriticalityError):
        metric_mm_overlap(ssh_model(), [0.0], 0.0, step=1e-3)


def test_overlap_batch_matches_single(rng):
    model = chern_model()
    k = rng.uniform(-1, 1, (5, 2))
    batch = metric_overlap_density(model, k, 0.5, step=1e-5)
    for i in range(5):
        assert batch[i] == pytest.approx(metric_mm_overlap(model, k[i], 0.5, step=1e-5).value, rel=1e-12)


@pytest.mark.parametrize("m,expected", [(-0.5, 1), (-0.1, 1), (0.1, 0), (0.5, 0)])
def test_ssh_winding(m, expected):
    assert winding_number(ssh_model(), m) == expected


def test_ssh_winding_at_criticality():
    with pytest.raises(AtCriticalityError):
        winding_number(ssh_model(), 0.0, grid_n=64)


@pytest.mark.parametrize("m,expected", [(-0.5, 0), (-0.1, 0), (0.1, -1), (0.5, -1), (2.5, 1), (4.5, 0)])
def test_qwz_chern(m, expected):
    assert chern_number(chern_model(), m, grid_n=64) == expected


def test_chern_jump_is_one():
    assert abs(chern_number(chern_model(), 0.05, grid_n=96) - chern_number(chern_model(), -0.05, grid_n=96)) == 1


def test_chern_at_criticality():
    with pytest.raises(AtCriticalityError):
        chern_number(chern_model(), 0.0, grid_n=16)
