import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_bvp, solve_ivp

from collapsesim.core import CONST, InvalidArgumentError, OutOfValidityError, RunawayError, make_noise_path
from collapsesim.measurement import (MeasurementSetup, Outcome, PointerClock, collapse_probability,
                                     collapse_time_chain, generic_collapse_ensemble,
                                     generic_collapse_trajectory, inverse_time_change,
                                     mean_hitting_time, pointer_separation, simulate_hitting,
                                     simulate_hitting_ensemble, time_change, variance_bound)
from collapsesim.qmupl import qmupl_lambda

SETUP = MeasurementSetup()
LAM_GRAM = qmupl_lambda(1e-3)


def test_setup_validation():
    with pytest.raises(InvalidArgumentError):
        MeasurementSetup(c_plus=1.0, c_minus=0.5)
    with pytest.raises(InvalidArgumentError):
        MeasurementSetup(b_threshold=2.0)
    with pytest.raises(InvalidArgumentError):
        MeasurementSetup(c_plus=1.0, c_minus=0.0).gamma0
    s = MeasurementSetup.from_plus_weight(0.3)
    assert math.tanh(s.gamma0) == pytest.approx(-0.4, rel=1e-12)
    assert s.b_threshold == 35


def test_pointer_separation_matches_linear_system():
    m, om, T, hk = 1e-3, 0.5, 2.0, 1e-2
    lam = om**2 * m / (4 * CONST.hbar)
    setup = MeasurementSetup(pointer_mass=m, kappa_hbar=hk, t_interaction=T)

    def rhs(t, y):
        drive = hk if t <= T else 0.0
        return [-om * y[0] + CONST.hbar / m * y[1] + drive, -2 * lam * y[0]]

    ts = np.linspace(0, 12, 61)
    sol = solve_ivp(rhs, [0, 12], [0.0, 0.0], t_eval=ts, rtol=1e-10, atol=1e-14, max_step=0.01)
    x = pointer_separation(ts, setup, omega=om)
    assert np.max(np.abs(x - sol.y[0])) < 1e-7 * hk


def test_pointer_separation_small_omega_t():
    ts = np.linspace(0, 1, 11)
    x = pointer_separation(ts, SETUP)
    assert pointer_separation(0.0, SETUP) == 0.0
    assert np.allclose(x[1:], 1e-2 * ts[1:], rtol=1e-3)
    assert pointer_separation(1.0, SETUP) == pytest.approx(0.01, rel=1e-3)
    assert pointer_separation(100.0, SETUP) == pytest.approx(0.01, rel=1e-2)
    with pytest.raises(InvalidArgumentError):
        pointer_separation(-1.0, SETUP)


def test_pointer_separation_uses_no_randomness(monkeypatch):
    import collapsesim.core.noise as noise

    def boom(*a, **k):
        raise AssertionError("random numbers drawn")

    monkeypatch.setattr(noise, "philox", boom)
    monkeypatch.setattr(np.random, "default_rng", boom)
    pointer_separation(np.linspace(0, 3, 7), SETUP)


def test_time_change_values():
    assert LAM_GRAM == pytest.approx(5.98e21, rel=1e-3)
    assert time_change(1.0, LAM_GRAM, 1e-2) == pytest.approx(2.0e17, rel=0.01)
    assert inverse_time_change(1.0, LAM_GRAM, 1e-2) == pytest.approx(1.7e-6, rel=0.02)
    assert time_change(0.0, LAM_GRAM, 1e-2) == 0.0
    t = np.array([1e-6, 1e-3, 0.5])
    assert np.allclose(inverse_time_change(time_change(t, LAM_GRAM, 1e-2), LAM_GRAM, 1e-2), t, rtol=1e-12)
    with pytest.raises(OutOfValidityError):
        time_change(1.5, LAM_GRAM, 1e-2)
    with pytest.raises(OutOfValidityError):
        inverse_time_change(1e18, LAM_GRAM, 1e-2)


def test_time_change_approximates_exact_integral():
    """s_t = lam * integral of X^2 against the cubic law for t << 1/omega."""
    t = 0.5
    exact = LAM_GRAM * quad(lambda u: pointer_separation(u, SETUP) ** 2, 0, t, epsabs=0, epsrel=1e-12)[0]
    assert time_change(t, LAM_GRAM, 1e-2) == pytest.approx(exact, rel=1e-4)


def test_collapse_probability_against_scale_function():
    """P+ from the scale function of the diffusion, S'(x) = exp(-2 int tanh) = sech^2 x."""
    for g0, b in [(0.0, 10.0), (-0.4236, 10.0), (1.3, 5.0), (0.2, 2.0)]:
        num = quad(lambda x: 1 / math.cosh(x) ** 2, -b, g0)[0]
        den = quad(lambda x: 1 / math.cosh(x) ** 2, -b, b)[0]
        p, q = collapse_probability(g0, b)
        assert p == pytest.approx(num / den, rel=1e-10)
        assert p + q == 1.0
    assert collapse_probability(0.0, 10.0) == (0.5, 0.5)
    g0 = MeasurementSetup.from_plus_weight(0.3).gamma0
    assert abs(collapse_probability(g0, 20.0)[0] - 0.3) < 1e-8
    with pytest.raises(InvalidArgumentError):
        collapse_probability(11.0, 10.0)


def test_mean_hitting_time_against_bvp():
    """E[S] solves f''/2 + tanh(x) f' = -1, f(+-b) = 0."""
    b = 6.0
    x = np.linspace(-b, b, 201)
    sol = solve_bvp(lambda x, y: np.vstack([y[1], -2 * (1 + np.tanh(x) * y[1])]),
                    lambda ya, yb: np.array([ya[0], yb[0]]), x, np.zeros((2, x.size)), tol=1e-8)
    for g0 in (0.0, -0.4236, 2.0):
        assert mean_hitting_time(g0, b) == pytest.approx(float(sol.sol(g0)[0]), rel=1e-5)


def test_simulate_hitting_single_and_ensemble_agree():
    ds = 1e-2
    clock = PointerClock(LAM_GRAM, 1e-2)
    ens = simulate_hitting_ensemble(0.3, 5.0, ds, 20, 4, max_steps=20_000, clock=clock, batch=8)
    for i in (0, 7, 19):
        r = simulate_hitting(0.3, 5.0, ds, make_noise_path(4, ds, 20_000, stream=i), clock=clock)
        assert r.s_col == pytest.approx(ens.s_col[i], rel=1e-12)
        assert (r.outcome is Outcome.PLUS) == (ens.outcomes[i] > 0)
        assert r.t_col == pytest.approx(inverse_time_change(r.s_col, LAM_GRAM, 1e-2))
        assert r.s_col > 0


def test_simulate_hitting_errors():
    with pytest.raises(RunawayError):
        simulate_hitting(0.0, 10.0, 1e-2, make_noise_path(1, 1e-2, 10))
    with pytest.raises(InvalidArgumentError):
        simulate_hitting(0.0, 10.0, 0.1, make_noise_path(1, 0.1, 10))
    with pytest.raises(InvalidArgumentError):
        simulate_hitting(0.0, 10.0, 1e-2, make_noise_path(1, 1e-3, 10))
    r = simulate_hitting(0.0, 5.0, 1e-2, make_noise_path(2, 1e-2, 100_000))
    assert math.isnan(r.t_col)


def test_hitting_ensemble_symmetric_and_mean_time():
    n = 4000
    ens = simulate_hitting_ensemble(0.0, 10.0, 1e-2, n, 12)
    sig = math.sqrt(0.25 / n)
    assert abs(ens.p_plus - 0.5) < 3 * sig
    sem = ens.s_col.std(ddof=1) / math.sqrt(n)
    assert abs(ens.s_col.mean() - 10.0) < 3 * sem
    # the variance is of order b
    assert 0.5 * 10 < ens.s_col.var() < 2 * 10


def test_hitting_ensemble_asymmetric_against_oracles():
    n = 4000
    g0 = MeasurementSetup.from_plus_weight(0.3).gamma0
    ens = simulate_hitting_ensemble(g0, 8.0, 1e-2, n, 13)
    assert abs(ens.p_plus - collapse_probability(g0, 8.0)[0]) < 3 * math.sqrt(0.21 / n)
    sem = ens.s_col.std(ddof=1) / math.sqrt(n)
    assert abs(ens.s_col.mean() - mean_hitting_time(g0, 8.0)) < 3 * sem


def test_hitting_ensemble_independent_of_workers():
    a = simulate_hitting_ensemble(0.1, 5.0, 1e-2, 100, 3, batch=16, workers=1)
    b = simulate_hitting_ensemble(0.1, 5.0, 1e-2, 100, 3, batch=16, workers=3)
    assert a.s_col.tobytes() == b.s_col.tobytes()
    assert a.outcomes.tobytes() == b.outcomes.tobytes()


def test_collapse_time_chain():
    est = collapse_time_chain(SETUP)
    assert est.t_col == pytest.approx(5.6e-6, rel=0.02)
    assert est.t_col_quoted == 1.5e-4
    assert est.discrepancy_factor == pytest.approx(27, rel=0.05)
    assert est.x_at_t_col == pytest.approx(5.6e-8, rel=0.02)
    assert est.x_at_t_col < 1e-2 * 1e-3
    heavy = collapse_time_chain(MeasurementSetup(pointer_mass=2e-3))
    assert heavy.t_col / est.t_col == pytest.approx(2 ** (-1 / 3), rel=1e-12)


A2 = np.diag([1.0, -1.0])
PSI07 = np.array([math.sqrt(0.7), math.sqrt(0.3)])


def test_generic_unitary_limit():
    H = np.array([[0.0, 1.0], [1.0, 0.0]])
    nz = make_noise_path(1, 1e-2, 200)
    tr = generic_collapse_trajectory(H, A2, 0.0, 0.0, PSI07, nz, hbar=1.0)
    from scipy.linalg import expm
    ref = expm(-1j * H * 2.0) @ PSI07
    assert abs(np.vdot(ref, tr.states[-1])) == pytest.approx(1.0, abs=1e-12)
    # [H, A] = 0 keeps V constant
    tr2 = generic_collapse_trajectory(np.diag([0.3, -0.2]), A2, 0.0, 0.0, PSI07, nz, hbar=1.0)
    assert np.allclose(tr2.variance, tr2.variance[0], atol=1e-12)


def test_generic_trajectory_matches_ensemble_row():
    nz = make_noise_path(9, 1e-3, 300, stream=2)
    tr = generic_collapse_trajectory(np.zeros((2, 2)), A2, 1.0, 0.5, PSI07, nz, hbar=1.0)
    ens = generic_collapse_ensemble(np.zeros((2, 2)), A2, 1.0, 0.5, PSI07, 1e-3, 300, 4, 9, hbar=1.0)
    assert ens.variance[2, -1] == pytest.approx(tr.variance[-1], rel=1e-10, abs=1e-14)
    assert np.all(tr.variance >= 0)


def test_generic_ensemble_variance_bound_and_martingale():
    n = 3000
    ens = generic_collapse_ensemble(np.zeros((2, 2)), A2, 1.0, 0.5, PSI07, 1e-3, 2000, n, 21,
                                    record_every=100, hbar=1.0)
    v = ens.variance
    mean, sem = v.mean(axis=0), v.std(axis=0, ddof=1) / math.sqrt(n)
    bound = variance_bound(v[0, 0], 1.0, ens.times)
    assert np.all(mean <= bound + 3 * sem + 1e-12)
    assert np.all(np.diff(mean) <= 3 * sem[1:] + 1e-12)
    p = ens.projector_means[:, :, 1]  # eigenvalue +1
    pm, ps = p.mean(axis=0), p.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(pm - 0.7) <= 3 * ps + 1e-12)


def test_generic_born_rule_three_level():
    n = 3000
    A = np.diag([2.0, 0.0, -1.0])
    amps = np.sqrt(np.array([0.5, 0.2, 0.3]))
    ens = generic_collapse_ensemble(np.zeros((3, 3)), A, 1.0, 0.0, amps, 2e-3, 4000, n, 8,
                                    record_every=4000, hbar=1.0)
    final = ens.projector_means[:, -1, :]  # columns: eigenvalues -1, 0, 2
    winner = np.argmax(final, axis=1)
    assert np.mean(final.max(axis=1) > 0.99) > 0.99
    for col, p in ((0, 0.3), (1, 0.2), (2, 0.5)):
        assert abs(np.mean(winner == col) - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_generic_validation():
    nz = make_noise_path(1, 1e-3, 10)
    with pytest.raises(InvalidArgumentError):
        generic_collapse_trajectory(np.zeros((2, 2)), np.array([[0, 1], [0, 0]]), 1, 0, PSI07, nz)
    with pytest.raises(InvalidArgumentError):
        generic_collapse_trajectory(np.zeros((2, 2)), A2, 1, 0, 2 * PSI07, nz)
    with pytest.raises(InvalidArgumentError):
        generic_collapse_trajectory(np.zeros((65, 65)), np.zeros((65, 65)), 1, 0, np.eye(65)[0], nz)
