import numpy as np
import pytest
from scipy.linalg import expm

from redkin.correlations import CorrelationMatrix, ExpSum, lorentzian_correlation
from redkin.generators import redfield_fast
from redkin.model import DAMPED_QUBIT_BATH_WEIGHTS, damped_qubit_model, pure_dephasing_model
from redkin.operators import ValidationError, pauli
from redkin.oracles import (
    FiniteBathSpec,
    damped_qubit_closed_form,
    damped_qubit_exact_rates,
    damped_qubit_memory,
    dephasing_exact,
    dephasing_exponent,
    dephasing_rate,
    discretize_bath,
    finite_bath_evolve,
    memory_poles,
)
from redkin.oracles.correlators import kinetic_correlator, qrt_compare, shifted_half_fourier

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
EXCITED = np.diag([1.0, 0.0]).astype(complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)


def _resonant(gamma0=1.0, kappa=1.0):
    # kernel (gamma0 kappa / 2) exp(-kappa t) in the frame of the qubit
    return ExpSum([gamma0 * kappa / 2], [kappa])


# --- memory-kernel oracle -------------------------------------------------

def test_memory_solver_matches_closed_form():
    t = np.linspace(0, 20, 201)
    for lam in (0.1, 1.0):
        c = damped_qubit_memory(_resonant(), lam, t)
        assert np.max(np.abs(c - damped_qubit_closed_form(1.0, 1.0, lam, t))) <= 1e-8


def test_closed_form_frozen_values():
    # values of exp(-t/2)[cosh(dt/2) + sinh(dt/2)/d] at t = 5, computed once from the closed form
    assert damped_qubit_closed_form(1.0, 1.0, 0.1, 5.0).real == pytest.approx(0.9801020110910249, rel=1e-13)
    assert damped_qubit_closed_form(1.0, 1.0, 1.0, 5.0).real == pytest.approx(-0.016636287454500322, rel=1e-12)


def test_memory_trivial_and_residual():
    t = np.linspace(0, 5, 11)
    assert np.allclose(damped_qubit_memory(_resonant(), 0.0, t), 1.0)
    # residual of the second-order ODE c'' + kappa c' + (gamma0 kappa lam^2 / 2) c = 0
    lam, h, t0 = 0.7, 1e-3, 2.0
    c = lambda s: damped_qubit_closed_form(1.0, 1.0, lam, s)  # noqa: E731
    d1 = (c(t0 + h) - c(t0 - h)) / (2 * h)
    d2 = (c(t0 + h) - 2 * c(t0) + c(t0 - h)) / h ** 2
    assert abs(d2 + d1 + lam ** 2 / 2 * c(t0)) <= 1e-6


def test_exact_rates_series_and_poles():
    lam = 0.05
    rates = damped_qubit_exact_rates(1.0, 1.0, lam)
    assert rates["amplitude"] == pytest.approx(lam ** 2 / 2 + lam ** 4 / 4, rel=1e-5)
    assert rates["population"] == pytest.approx(2 * rates["amplitude"])
    slowest = max(memory_poles(_resonant(), lam).real)
    assert -slowest == pytest.approx(rates["amplitude"], rel=1e-10)


# --- pure dephasing oracle ------------------------------------------------

def test_dephasing_trivial_and_frozen():
    es = ExpSum([1.0], [1.0])
    assert dephasing_exact(es, 0.1, 1.0, 0.0) == pytest.approx(1.0)
    assert np.allclose(dephasing_exact(es, 0.0, 1.0, np.linspace(0, 5, 6)), 1.0)
    # 4 lam^2 (t - 1 + exp(-t)) at lam = 0.1, t = 5
    assert dephasing_exponent(es, 0.1, 5.0) == pytest.approx(0.16026951787996346, rel=1e-13)
    assert dephasing_rate(es, 0.1) == pytest.approx(0.04)
    with pytest.raises(ValidationError):
        dephasing_exact(damped_qubit_model()[1], 0.1, 1.0, 1.0)


def test_dephasing_matches_finite_bath():
    system, cm = pure_dephasing_model(1.0)
    fb = discretize_bath(ExpSum([1.0], [1.0]), 60, (-8.0, 8.0))
    t = np.linspace(0, 5, 26)
    res = finite_bath_evolve(system, fb, 0.1, t, PLUS)
    assert res.strategy == "conditional"
    exact = 0.5 * dephasing_exact(cm, 0.1, 1.0, t, frame="schroedinger")
    assert np.max(np.abs(res.trajectory.element(0, 1) - exact)) <= 1e-3


def test_conditional_matches_discrete_exact_exponent():
    # the same formula applied to the discrete correlation is exact for the finite bath
    fb = discretize_bath(ExpSum([1.0], [1.0]), 20, (-4.0, 4.0))
    es = ExpSum(fb.couplings ** 2, 1j * fb.omegas + 1e-300)
    system, _ = pure_dephasing_model(1.0)
    t = np.linspace(0, 3, 7)
    res = finite_bath_evolve(system, fb, 0.3, t, PLUS)
    coh = res.trajectory.element(0, 1) / (0.5 * np.exp(-1j * t))
    assert np.max(np.abs(coh - np.exp(-dephasing_exponent(es, 0.3, t)))) <= 1e-10


# --- finite bath ----------------------------------------------------------

def test_discretization_reports():
    fb = discretize_bath((1.0, 1.0, 0.0), 60, (-8.0, 8.0))
    assert fb.errors["rms_rel"] < 0.02
    # the sup error is set by the spectral weight outside the window
    assert fb.errors["sup_rel"] == pytest.approx(fb.errors["tail_mass"], rel=1e-3)
    assert fb.warnings
    wide = discretize_bath((1.0, 1.0, 0.0), 120, (-16.0, 16.0))
    assert wide.errors["sup_rel"] / fb.errors["sup_rel"] == pytest.approx(0.5, rel=0.05)
    assert fb.to_json()["errors"]["sup_rel"] == fb.errors["sup_rel"]
    with pytest.raises(ValidationError):
        discretize_bath((1.0, 1.0, 0.0), 0, (-1.0, 1.0))


def test_jaynes_cummings_single_mode():
    system, _ = damped_qubit_model(omega0=1.0)
    g = 0.8
    fb = FiniteBathSpec(np.array([1.0]), np.array([g]))
    lam = 0.5
    t = np.linspace(0, 10, 41)
    res = finite_bath_evolve(system, fb, lam, t, EXCITED, weights=DAMPED_QUBIT_BATH_WEIGHTS)
    assert np.max(np.abs(res.trajectory.element(0, 0).real - np.cos(lam * g * t) ** 2)) <= 1e-10
    assert res.leakage <= 1e-12


def test_zero_coupling_is_free_evolution():
    system, _ = damped_qubit_model(omega0=1.3)
    fb = discretize_bath((1.0, 1.0, 1.3), 30, (-5.0, 7.0))
    t = np.linspace(0, 4, 5)
    res = finite_bath_evolve(system, fb, 0.0, t, PLUS, weights=DAMPED_QUBIT_BATH_WEIGHTS)
    for k, tk in enumerate(t):
        U = expm(-1j * system.H * tk)
        assert np.allclose(res.trajectory.states[k], U @ PLUS @ U.conj().T, atol=1e-12)


def test_damped_qubit_finite_bath_matches_memory_oracle():
    omega0, lam = 2.0, 0.3
    system, _ = damped_qubit_model(1.0, 1.0, omega0)
    fb = discretize_bath((1.0, 1.0, omega0), 200, (omega0 - 40, omega0 + 40))
    # revivals start to show well before the recurrence time; compare on its first half
    t = np.linspace(0, fb.recurrence_time / 2, 31)
    res = finite_bath_evolve(system, fb, lam, t, EXCITED, weights=DAMPED_QUBIT_BATH_WEIGHTS)
    exact = np.abs(damped_qubit_closed_form(1.0, 1.0, lam, t)) ** 2
    assert np.max(np.abs(res.trajectory.element(0, 0).real - exact)) <= 1e-4
    assert res.joint_purity_drift() <= 1e-10


def test_two_time_hermitian_symmetry():
    system, _ = damped_qubit_model()
    fb = discretize_bath((1.0, 1.0, 1.0), 40, (-7.0, 9.0))
    p = pauli()
    A2, A1 = SIGMA_PLUS + 0.3 * p["z"], SIGMA_MINUS
    pairs = [(t, t) for t in (0.0, 1.0, 2.5)]
    res = finite_bath_evolve(system, fb, 0.4, [0.0], PLUS, weights=DAMPED_QUBIT_BATH_WEIGHTS,
                             two_time=[(A2, A1, pairs), (A1.conj().T, A2.conj().T, pairs)])
    assert np.max(np.abs(res.correlators[0] - np.conj(res.correlators[1]))) <= 1e-10


def test_mean_force_reduces_to_gibbs():
    system, _ = damped_qubit_model()
    fb = discretize_bath((1.0, 1.0, 1.0), 20, (-3.0, 5.0))
    beta = 1.5
    gibbs = expm(-beta * system.H)
    gibbs /= np.trace(gibbs)
    devs = []
    for lam in (0.1, 0.05):
        res = finite_bath_evolve(system, fb, lam, [0.0], EXCITED, weights=DAMPED_QUBIT_BATH_WEIGHTS,
                                 mean_force_beta=beta)
        devs.append(np.max(np.abs(res.mean_force - gibbs)))
    assert devs[1] < devs[0] < 0.1
    assert devs[0] / devs[1] == pytest.approx(4, rel=0.1)


def test_excitation_strategy_rejects_oversized_space():
    system, _ = damped_qubit_model()
    fb = discretize_bath((1.0, 1.0, 1.0), 200, (-7.0, 9.0))
    with pytest.raises(ValidationError):
        finite_bath_evolve(system, fb, 0.1, [0.0], EXCITED, n_cap=2, dim_cap=1000)


# --- two-time and kinetic correlators -------------------------------------

def test_regression_exact_at_zero_coupling():
    system, cm = damped_qubit_model()
    fb = discretize_bath((1.0, 1.0, 1.0), 40, (-7.0, 9.0))
    pairs = [(t1, t1 + dt) for t1 in (0.0, 1.0, 3.0) for dt in (0.0, 0.5, 2.0)]
    res = finite_bath_evolve(system, fb, 0.0, [0.0], EXCITED, weights=DAMPED_QUBIT_BATH_WEIGHTS,
                             two_time=[(SIGMA_PLUS, SIGMA_MINUS, pairs)])
    report = qrt_compare(redfield_fast(system, cm, 0.0), SIGMA_PLUS, SIGMA_MINUS, pairs,
                         res.correlators[0], EXCITED)
    assert report.max_abs <= 1e-12
    assert report.to_json()["n_pairs"] == len(pairs)
    with pytest.raises(ValidationError):
        qrt_compare(redfield_fast(system, cm, 0.0), SIGMA_PLUS, SIGMA_MINUS, [(2.0, 1.0)], [0.0], EXCITED)


def test_shifted_half_fourier_matches_quadrature():
    from scipy.integrate import quad

    cm = CorrelationMatrix.single(lorentzian_correlation(1.0, 0.8, 0.6) + ExpSum([0.2j], [1.5]), "x")
    es = cm.entry("x", "x")

    def corr(u):
        return es(u) if u >= 0 else np.conj(es(-u))

    for tau in (1.3, -0.9):
        w = 0.7
        re = quad(lambda s: (np.exp(1j * w * s) * corr(tau + s)).real, 0, 80, limit=400, points=[max(-tau, 0)])[0]
        im = quad(lambda s: (np.exp(1j * w * s) * corr(tau + s)).imag, 0, 80, limit=400, points=[max(-tau, 0)])[0]
        assert shifted_half_fourier(cm, "x", "x", tau, w) == pytest.approx(re + 1j * im, abs=1e-10)


def test_kinetic_correlator_limits():
    system, cm = damped_qubit_model()
    p = pauli()
    assert kinetic_correlator(PLUS, p["x"], "x", 0.0, system, cm, 0.1, order=0) == 0
    assert kinetic_correlator(PLUS, p["x"], "x", 0.0, system, cm, 0.0) == 0
    near = abs(kinetic_correlator(PLUS, p["x"], "y", 0.0, system, cm, 0.1))
    far = abs(kinetic_correlator(PLUS, p["x"], "y", 40.0, system, cm, 0.1))
    assert near > 1e-3 and far <= 1e-15
    with pytest.raises(ValidationError):
        kinetic_correlator(PLUS, p["x"], "x", 0.0, system, cm, 0.1, order=2)
    partial = CorrelationMatrix(["x", "y"], {("x", "x"): cm.entry("x", "x"), ("y", "y"): cm.entry("y", "y")})
    with pytest.raises(KeyError):
        kinetic_correlator(PLUS, p["x"], "x", 0.0, system, partial, 0.1)
