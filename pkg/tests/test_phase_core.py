import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moyal_lab.errors import IncompatibleGridsError, InvalidFieldError
from moyal_lab.phase_core import GridField, PhaseGrid, SimConfig, integrate_liouville, rasterize
from moyal_lab.states import coherent, density, rasterize_state


def test_config_rejects_nonpositive_hbar():
    with pytest.raises(ValueError):
        SimConfig(hbar=0.0)
    with pytest.raises(ValueError):
        SimConfig(default_tolerance=-1.0)


@pytest.mark.parametrize("n", [7, 6, 9])
def test_grid_needs_even_count_of_at_least_8(n):
    with pytest.raises(ValueError):
        PhaseGrid(-1, 1, -1, 1, n, 16)


def test_grid_rejects_empty_box():
    with pytest.raises(ValueError):
        PhaseGrid(1, 1, -1, 1, 8, 8)


def test_grid_nodes_and_mesh_orientation():
    g = PhaseGrid(-1.0, 1.0, -2.0, 2.0, 8, 16)
    assert g.dq == pytest.approx(0.25)
    assert g.dp == pytest.approx(0.25)
    Q, P = g.mesh()
    assert Q.shape == (8, 16)
    assert np.all(Q[:, 0] == g.q) and np.all(P[0] == g.p)


def test_zero_field_integrates_to_zero(cfg):
    g = PhaseGrid.square(3.0, 16)
    assert integrate_liouville(GridField(g, np.zeros((16, 16))), cfg) == 0


def test_coherent_state_is_normalized(cfg):
    g = PhaseGrid.square(8.0, 256)
    rho = rasterize_state(coherent(0.0, 0.0, cfg), g, cfg)
    assert abs(integrate_liouville(rho, cfg) - 1) < 1e-10


def test_gaussian_integral(cfg):
    g = PhaseGrid.square(8.0, 256)
    f = rasterize(lambda q, p: np.exp(-q**2 - p**2), g)
    assert abs(integrate_liouville(f, cfg) - 0.5) < 1e-10


def test_integral_stable_under_refinement(cfg):
    s = coherent(0.3, -0.2, cfg)
    vals = [integrate_liouville(rasterize_state(s, PhaseGrid.square(8.0, n), cfg), cfg) for n in (64, 128)]
    assert abs(vals[0] - vals[1]) < 1e-12


@settings(max_examples=25, deadline=None)
@given(a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       seed=st.integers(0, 2**32 - 1))
def test_integration_is_linear(a, b, seed):
    cfg = SimConfig()
    rng = np.random.default_rng(seed)
    g = PhaseGrid.square(2.0, 16)
    f = GridField(g, rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)))
    h = GridField(g, rng.normal(size=(16, 16)))
    lhs = integrate_liouville(f * a + h * b, cfg)
    rhs = a * integrate_liouville(f, cfg) + b * integrate_liouville(h, cfg)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_rasterize_constant_and_coordinate():
    g = PhaseGrid.square(1.0, 8)
    assert np.all(rasterize(lambda q, p: 1.0, g).values == 1)
    Q, _ = g.mesh()
    assert np.all(rasterize(lambda q, p: q, g).values == Q)


def test_coherent_peak_is_two(cfg):
    s = coherent(0.5, -1.0, cfg)
    assert density(s, 0.5, -1.0, cfg) == pytest.approx(2.0)


def test_rasterize_reports_bad_node():
    g = PhaseGrid.square(1.0, 8)
    with pytest.raises(InvalidFieldError) as info:
        rasterize(lambda q, p: 1.0 / (q + 1.0), g)
    assert info.value.location is not None


def test_field_rejects_nonfinite_and_wrong_shape():
    g = PhaseGrid.square(1.0, 8)
    bad = np.ones((8, 8))
    bad[3, 4] = np.nan
    with pytest.raises(InvalidFieldError):
        GridField(g, bad)
    with pytest.raises(ValueError):
        GridField(g, np.ones((8, 9)))


def test_fields_on_different_grids_do_not_mix():
    a = GridField(PhaseGrid.square(1.0, 8), np.ones((8, 8)))
    b = GridField(PhaseGrid.square(2.0, 8), np.ones((8, 8)))
    with pytest.raises(IncompatibleGridsError):
        a + b


def test_field_values_are_read_only():
    f = GridField(PhaseGrid.square(1.0, 8), np.ones((8, 8)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 2
