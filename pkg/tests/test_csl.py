import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from collapsesim.core import CONST, InvalidArgumentError, stream_generator
from collapsesim.csl import (CslParams, OutOfRegimeWarning, RigidBody, amplified_rate, cluster_rate,
                             decay_function, lambda_from_gamma, many_particle_gamma, rigid_body_gamma,
                             small_distance_gamma)
from collapsesim.grw import offdiag_decay_rate

RC = 1e-7
LAM = 2.2e-17


def brute_gamma(a, b, gamma, r_c):
    """Double loop over particle pairs, written out term by term."""
    norm = (4 * math.pi * r_c**2) ** -1.5
    total = 0.0
    for i in range(len(a)):
        for j in range(len(a)):
            total += math.exp(-np.sum((a[i] - a[j]) ** 2) / (4 * r_c**2))
            total += math.exp(-np.sum((b[i] - b[j]) ** 2) / (4 * r_c**2))
            total -= 2 * math.exp(-np.sum((a[i] - b[j]) ** 2) / (4 * r_c**2))
    return 0.5 * gamma * norm * total


def test_params_lambda_relation():
    p = CslParams()
    assert p.lambda_csl == pytest.approx(1e-36 / (4 * math.pi * 1e-14) ** 1.5, rel=1e-12)
    assert p.lambda_csl == pytest.approx(2.2e-17, rel=0.02)
    q = CslParams.from_lambda(LAM)
    assert q.lambda_csl == pytest.approx(LAM, rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        CslParams(r_c=0.0)


def test_decay_function_limits():
    assert decay_function(0.0, LAM, RC) == 0.0
    assert decay_function(1.0, LAM, RC) == pytest.approx(LAM, rel=1e-12)
    x = np.linspace(1e-12, RC / 5, 50)
    assert np.allclose(decay_function(x, LAM, RC), LAM * x**2 / (4 * RC**2), rtol=0.01)
    d = np.linspace(0, 5 * RC, 30)
    assert np.allclose(decay_function(d, LAM, RC), offdiag_decay_rate(d, 0.0, LAM, RC), rtol=1e-14)


def test_single_particle_reduction():
    gamma = CslParams().gamma_csl
    for d in (0.0, 0.3 * RC, RC, 4 * RC):
        g = many_particle_gamma([[0, 0, 0]], [[d, 0, 0]], gamma, RC)
        assert g == pytest.approx(decay_function(d, lambda_from_gamma(gamma, RC), RC), rel=1e-12, abs=1e-40)


def test_identical_configurations_give_zero():
    rng = stream_generator(4)
    pts = rng.normal(scale=RC, size=(30, 3))
    assert many_particle_gamma(pts, pts, 1e-36, RC) == pytest.approx(0.0, abs=1e-30)


def test_colocated_cluster_rigid_shift_is_lambda_n_squared():
    gamma = 1e-36
    lam = lambda_from_gamma(gamma, RC)
    for n in (1, 10, 200):
        a = np.zeros((n, 3))
        b = a + np.array([1e-4, 0, 0])
        assert many_particle_gamma(a, b, gamma, RC) == pytest.approx(lam * n**2, rel=1e-6)


def test_separated_clusters_scale_linearly():
    gamma = 1e-36
    lam = lambda_from_gamma(gamma, RC)
    n, N = 5, 4
    centers = np.array([[k * 1e-4, 0, 0] for k in range(N)])
    a = np.repeat(centers, n, axis=0)
    b = a + np.array([0, 0, 1e-3])
    assert many_particle_gamma(a, b, gamma, RC) == pytest.approx(cluster_rate(n, N, lam), rel=1e-6)


def test_matches_brute_force_and_is_symmetric():
    rng = stream_generator(9)
    a = rng.normal(scale=RC, size=(12, 3))
    b = a + rng.normal(scale=0.5 * RC, size=(12, 3))
    g = many_particle_gamma(a, b, 1e-36, RC)
    assert g == pytest.approx(brute_gamma(a, b, 1e-36, RC), rel=1e-10)
    assert g == pytest.approx(many_particle_gamma(b, a, 1e-36, RC), rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        many_particle_gamma(a, b[:5], 1e-36, RC)


@given(arrays(float, (6, 3), elements=st.floats(-3, 3)), arrays(float, (6, 3), elements=st.floats(-3, 3)))
@settings(max_examples=60, deadline=None)
def test_gamma_non_negative(a, b):
    assert many_particle_gamma(a * RC, b * RC, 1e-36, RC) >= 0.0


def test_rigid_displacement_monotone():
    rng = stream_generator(2)
    a = rng.normal(scale=2 * RC, size=(40, 3))
    ds = np.linspace(0, 10 * RC, 40)
    g = [many_particle_gamma(a, a + [d, 0, 0], 1e-36, RC) for d in ds]
    assert np.all(np.diff(g) >= -1e-12 * max(g))


def test_cluster_reference_rates():
    assert cluster_rate(10**4, 1, 2.2e-10) == pytest.approx(2.2e-2, rel=1e-12)
    assert cluster_rate(10**6, 1, 2.2e-10) == pytest.approx(2.2e2, rel=1e-12)
    assert cluster_rate(1, 1, LAM) == LAM
    with pytest.raises(InvalidArgumentError):
        cluster_rate(0, 1, LAM)


def test_small_distance_formula():
    assert small_distance_gamma([0.0, 0.0], LAM, RC) == 0.0
    d = 0.05 * RC
    assert small_distance_gamma([d], LAM, RC) == pytest.approx(LAM * d**2 / (4 * RC**2))
    assert small_distance_gamma([d] * 7, LAM, RC) == pytest.approx(49 * LAM * d**2 / (4 * RC**2))
    # agreement with the full sum for co-located particles moved by small d
    gamma = CslParams.from_lambda(LAM).gamma_csl
    a = np.zeros((7, 3))
    full = many_particle_gamma(a, a + [d, 0, 0], gamma, RC)
    assert small_distance_gamma([[d, 0, 0]] * 7, LAM, RC) == pytest.approx(full, rel=0.05)
    with pytest.warns(OutOfRegimeWarning):
        small_distance_gamma([RC], LAM, RC)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        small_distance_gamma([0.1 * RC], LAM, RC)


def test_rigid_sphere_saturation_and_zero():
    body = RigidBody(2000.0, "sphere", radius=1e-6)
    assert body.nucleon_count == pytest.approx(2000.0 * body.volume / CONST.m_nucleon, rel=1e-12)
    assert rigid_body_gamma(body, 0.0) == 0.0
    full = 1e-36 * body.nucleon_density * body.nucleon_count
    assert rigid_body_gamma(body, 2e-6) == pytest.approx(full, rel=1e-12)
    assert rigid_body_gamma(body, 5e-6) == pytest.approx(full, rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        rigid_body_gamma(body, -1.0)


def test_rigid_sphere_overlap_against_monte_carlo():
    R = 1.0
    body = RigidBody(1000.0, "sphere", radius=R)
    rng = stream_generator(77)
    n = 2_000_000
    p = rng.uniform(-R, R, size=(n, 3))
    inside = np.einsum("ij,ij->i", p, p) <= R * R
    moved = (p[:, 0] - R) ** 2 + p[:, 1] ** 2 + p[:, 2] ** 2 <= R * R
    frac_out = np.sum(inside & ~moved) / np.sum(inside)
    exact = body.n_out(R) / body.nucleon_count
    assert exact == pytest.approx(1 - 5 / 16, rel=1e-12)
    assert frac_out == pytest.approx(exact, rel=0.005)


def test_slab_and_validation():
    slab = RigidBody(1000.0, "slab", thickness=1e-6, area=1e-8)
    assert slab.n_out(2e-7) == pytest.approx(slab.nucleon_density * 1e-8 * 2e-7)
    assert slab.n_out(5e-6) == pytest.approx(slab.nucleon_count)
    with pytest.raises(InvalidArgumentError):
        RigidBody(1000.0, "cube")
    with pytest.raises(InvalidArgumentError):
        RigidBody(1000.0, "sphere")


def test_amplified_rate():
    m0 = CONST.m_nucleon
    assert amplified_rate(m0, 1e-2) == pytest.approx(1e-2, rel=1e-15)
    assert amplified_rate(2 * m0, 1e-2) == pytest.approx(2e-2, rel=1e-15)
    assert amplified_rate(1e24 * m0, 1e-16) == pytest.approx(1e8, rel=1e-15)
    with pytest.raises(InvalidArgumentError):
        amplified_rate(0.0, 1.0)
