import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from collapsesim.core import (CONST, CollapseModelParams, ContractError, GaussianState,
                              GaussianStream, GeometryError, Grid, GridWavefunction,
                              InvalidArgumentError, ModelKind, check_boundary,
                              expectation_and_variance, make_gaussian_grid_state, make_noise_path,
                              map_batches, mean_estimate)
from collapsesim.core.ensemble import WORKERS_ENV, batch_ranges, default_workers


def test_constants_positive_and_planck_relations():
    for name in ("hbar", "G", "c", "amu", "m_nucleon", "g_earth", "planck_length", "planck_mass",
                 "e_charge", "eps0"):
        assert getattr(CONST, name) > 0
    assert CONST.planck_mass == pytest.approx(math.sqrt(CONST.hbar * CONST.c / CONST.G), rel=1e-12)
    assert CONST.planck_length == pytest.approx(math.sqrt(CONST.hbar * CONST.G / CONST.c**3), rel=1e-12)
    assert CONST.h == pytest.approx(2 * math.pi * CONST.hbar, rel=1e-15)


def test_model_params_validation():
    p = CollapseModelParams.qmupl()
    assert p.model_kind is ModelKind.QMUPL and p.lambda0 == 1e-2
    with pytest.raises(ValueError):
        CollapseModelParams(ModelKind.GRW, -1.0)
    with pytest.raises(ValueError):
        CollapseModelParams(ModelKind.CSL, 1e-17, r_c=0.0)


def test_noise_mean_and_variance():
    dt, n = 1e-3, 100_000
    nz = make_noise_path(7, dt, n)
    assert len(nz) == n
    assert abs(nz.increments.mean()) < 3 * math.sqrt(dt / n)
    # chi-square band: var of sample variance of N(0, dt) is 2 dt^2 / (n - 1)
    assert abs(nz.increments.var(ddof=1) - dt) < 3 * dt * math.sqrt(2.0 / (n - 1))
    z = nz.increments / math.sqrt(dt)
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_noise_deterministic_and_streams_independent():
    a = make_noise_path(7, 1e-3, 1000)
    b = make_noise_path(7, 1e-3, 1000)
    assert a.increments.tobytes() == b.increments.tobytes()
    c = make_noise_path(7, 1e-3, 1000, stream=1)
    assert not np.array_equal(a.increments, c.increments)
    assert abs(np.corrcoef(a.increments, c.increments)[0, 1]) < 0.15


def test_noise_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        make_noise_path(1, 0.0, 10)
    with pytest.raises(InvalidArgumentError):
        make_noise_path(1, 1e-3, 0)
    with pytest.raises(ValueError):
        make_noise_path(-1, 1e-3, 10)


@given(st.integers(0, 50), st.integers(0, 50))
@settings(max_examples=25, deadline=None)
def test_gaussian_stream_is_prefix_consistent(n1, n2):
    s = GaussianStream(3, 2)
    chunks = np.concatenate([s.normals(n1), s.normals(n2)])
    assert np.array_equal(chunks, GaussianStream(3, 2).normals(n1 + n2))


def test_noise_path_is_read_only():
    nz = make_noise_path(1, 1e-3, 5)
    with pytest.raises(ValueError):
        nz.increments[0] = 1.0
    assert nz.wiener()[-1] == pytest.approx(nz.increments.sum())


def test_gaussian_grid_state_moments(unit_grid):
    psi = make_gaussian_grid_state(unit_grid, 0.0, 0.0, 1.0)
    assert abs(psi.norm2() - 1) < 1e-9
    mean, var = expectation_and_variance(psi, "position")
    assert abs(mean) < unit_grid.dx
    assert var == pytest.approx(1.0, rel=0.02)
    psi2 = make_gaussian_grid_state(unit_grid, 2.0, 0.0, 1.0)
    assert abs(expectation_and_variance(psi2)[0] - 2.0) < unit_grid.dx


def test_gaussian_grid_state_momentum(unit_grid):
    psi = make_gaussian_grid_state(unit_grid, 0.0, 5.0, 1.0)
    p, varp = expectation_and_variance(psi, "momentum", hbar=1.0)
    assert abs(p - 5.0) < 1.0 / unit_grid.length
    _, varq = expectation_and_variance(psi, "position")
    assert varq * varp >= 0.25 * (1 - 1e-3)
    assert varq * varp == pytest.approx(0.25, rel=1e-3)


def test_windowed_plane_wave_momentum():
    # flat-top window with smooth cosine edges: the mean wavenumber is exactly k
    g = Grid.centered(50.0, 4096)
    x = g.x
    w = np.clip((40.0 - np.abs(x)) / 5.0, 0.0, 1.0)
    w = np.sin(0.5 * np.pi * w) ** 2
    psi = GridWavefunction(g, w * np.exp(3j * x)).normalized()
    assert expectation_and_variance(psi, "momentum", hbar=1.0)[0] == pytest.approx(3.0, abs=1e-6)


def test_geometry_errors(unit_grid):
    with pytest.raises(GeometryError):
        make_gaussian_grid_state(unit_grid, 0.0, 0.0, unit_grid.dx)
    with pytest.raises(GeometryError):
        make_gaussian_grid_state(unit_grid, 18.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Grid(0.0, 0.1, 4)


def test_unnormalized_input_is_contract_error(unit_grid):
    psi = GridWavefunction(unit_grid, 2 * make_gaussian_grid_state(unit_grid, 0, 0, 1).amplitudes)
    with pytest.raises(ContractError):
        expectation_and_variance(psi)


def test_boundary_guard(unit_grid):
    wide = make_gaussian_grid_state(unit_grid, 0.0, 0.0, 4.5)
    with pytest.raises(GeometryError):
        check_boundary(wide)
    check_boundary(make_gaussian_grid_state(unit_grid, 0.0, 0.0, 1.0))


def test_gaussian_state_on_grid_matches_spreads(unit_grid):
    g = GaussianState(0.25, 0.1, 1.0, 0.5, 0.0)
    psi = g.on_grid(unit_grid)
    _, vq = expectation_and_variance(psi, "position")
    _, vp = expectation_and_variance(psi, "momentum", hbar=1.0)
    assert math.sqrt(vq) == pytest.approx(g.sigma_q, rel=1e-6)
    assert math.sqrt(vp) == pytest.approx(g.sigma_p(1.0), rel=1e-6)
    with pytest.raises(ContractError):
        GaussianState(-1.0, 0.0, 0.0, 0.0)


def test_batches_independent_of_workers(monkeypatch):
    def fn(r):
        return [GaussianStream(11, i).normals(3).sum() for i in r]
    one = np.concatenate(map_batches(fn, 1000, batch=64, workers=1))
    four = np.concatenate(map_batches(fn, 1000, batch=64, workers=4))
    assert one.tobytes() == four.tobytes()
    assert sum(len(r) for r in batch_ranges(1000, 64)) == 1000
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert default_workers() == 3


def test_mean_estimate():
    est = mean_estimate(np.array([1.0, 2.0, 3.0, 4.0]))
    assert est.mean == 2.5 and est.n == 4
    assert est.within(2.5 + 2 * est.sem)
    assert not est.within(2.5 + 4 * est.sem)
