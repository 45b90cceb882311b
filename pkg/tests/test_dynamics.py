import numpy as np
import pytest

from kickedkerr import fock
from kickedkerr.dynamics import (IntegrationDiverged, ModelParams,
                                 analytic_free_damping, analytic_free_kerr,
                                 auto_substeps, evolve_free, kick,
                                 kick_operator, lindblad_rhs,
                                 run_kicked_evolution)
from kickedkerr.fock import HilbertSpec, TruncationError


def random_density(dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def kicked_state(eps, dim):
    """Physically representative state: a kicked vacuum."""
    return kick(fock.vacuum(HilbertSpec(dim)), eps)


# --- lindblad_rhs -----------------------------------------------------------

def test_rhs_vacuum_is_stationary():
    rho = fock.vacuum(HilbertSpec(6))
    assert np.abs(lindblad_rhs(rho, chi=1.0, gamma=0.1)).max() == 0.0


def test_rhs_single_excitation_balance():
    rho = fock.fock_density(1, HilbertSpec(5))
    rhs = lindblad_rhs(rho, chi=1.0, gamma=0.1)
    expected = np.zeros((5, 5), complex)
    expected[0, 0] = 0.1
    expected[1, 1] = -0.1
    assert np.abs(rhs - expected).max() < 1e-15


def test_rhs_traceless_and_hermitian():
    rho = random_density(16, seed=0)
    rhs = lindblad_rhs(rho, chi=1.0, gamma=0.1)
    assert abs(np.trace(rhs)) < 1e-12
    assert np.abs(rhs - rhs.conj().T).max() < 1e-12


# --- evolve_free vs analytic oracles ---------------------------------------

def test_kerr_phase_of_02_coherence():
    # rho_20 acquires e^{-i chi t}; at chi=1, t=pi the factor is -1
    dim = 8
    rho = np.zeros((dim, dim), complex)
    rho[0, 0] = rho[2, 2] = 0.5
    rho[2, 0] = rho[0, 2] = 0.5
    params = ModelParams(epsilon=0.0, gamma=0.0, dim=dim, substeps=2000)
    out = evolve_free(rho, np.pi, params)
    assert out[2, 0] == pytest.approx(-0.5, abs=1e-8)


def test_analytic_kerr_phases():
    dim = 6
    rho = np.ones((dim, dim), complex) / dim
    out = analytic_free_kerr(rho, t=np.pi, chi=1.0)
    assert np.allclose(np.diag(out), np.diag(rho))      # dephasing only
    assert out[2, 0] == pytest.approx(-rho[2, 0])       # e^{-i pi} = -1


def test_analytic_kerr_full_revival():
    rho = random_density(16, seed=1)
    out = analytic_free_kerr(rho, t=2 * np.pi, chi=1.0)
    assert np.abs(out - rho).max() < 1e-12


def test_evolve_matches_kerr_oracle_on_kicked_states():
    # gamma=0 limit, physical states, dim <= 32, substeps = 2000
    for dim, eps in ((16, 0.6), (32, 1.0)):
        rho = kicked_state(eps, dim)
        params = ModelParams(epsilon=eps, gamma=0.0, dim=dim, substeps=2000)
        num = evolve_free(rho, np.pi, params)
        exact = analytic_free_kerr(rho, np.pi, 1.0)
        assert np.abs(num - exact).max() < 1e-7


def test_two_level_decay_closed_form():
    # chi=0: |1><1| decays with p1 = e^{-gamma t}
    dim = 4
    rho = fock.fock_density(1, HilbertSpec(dim))
    params = ModelParams(epsilon=0.0, chi=1e-12, gamma=0.1, dim=dim, substeps=1000)
    out = evolve_free(rho, np.pi, ModelParams(epsilon=0.0, chi=1.0, gamma=0.1,
                                              dim=dim, substeps=1000))
    # Kerr leaves |1><1| invariant, so the chi=1 run also shows pure decay
    p1 = np.exp(-0.1 * np.pi)
    assert out[1, 1].real == pytest.approx(p1, abs=1e-8)
    assert out[0, 0].real == pytest.approx(1 - p1, abs=1e-8)
    del params


def test_analytic_damping_half_life():
    rho = fock.fock_density(1, HilbertSpec(4))
    t_half = np.log(2) / 0.1
    out = analytic_free_damping(rho, t_half, gamma=0.1)
    assert out[0, 0].real == pytest.approx(0.5, abs=1e-12)
    assert out[1, 1].real == pytest.approx(0.5, abs=1e-12)


def test_analytic_damping_long_time_vacuum():
    rho = random_density(10, seed=2)
    out = analytic_free_damping(rho, t=500.0, gamma=0.1)  # gamma t = 50
    target = fock.vacuum(HilbertSpec(10))
    assert np.abs(out - target).max() < 1e-9


def test_evolve_matches_damping_oracle_random_rho():
    dim = 12
    rho = random_density(dim, seed=3)
    params = ModelParams(epsilon=0.0, chi=1e-9, gamma=0.1, dim=dim, substeps=1000)
    num = evolve_free(rho, np.pi, params)
    exact = analytic_free_damping(rho, np.pi, 0.1)
    # chi ~ 0 (exact 0 is excluded by the params invariant)
    assert np.abs(num - exact).max() < 1e-6


def test_evolve_zero_duration_is_identity():
    rho = random_density(8, seed=4)
    params = ModelParams(epsilon=0.0, dim=8)
    assert np.array_equal(evolve_free(rho, 0.0, params), rho)


def test_evolve_diverges_below_stability_bound():
    # dim=80 with substeps=1000 violates |h lambda| < 2 sqrt(2): must raise,
    # not return garbage.
    rho = kicked_state(1.24, 80)
    params = ModelParams(epsilon=1.24, dim=80, substeps=1000)
    with pytest.raises(IntegrationDiverged):
        evolve_free(rho, np.pi, params)


def test_auto_substeps_respects_floor_and_stability():
    assert auto_substeps(8, 1.0, np.pi, np.pi) == 1000
    steps = auto_substeps(80, 1.0, np.pi, np.pi)
    lam = 0.5 * 79 * 78
    assert steps >= np.pi * lam / (2 * np.sqrt(2))


# --- kick -------------------------------------------------------------------

def test_kick_zero_identity():
    U = kick_operator(0.0, HilbertSpec(8))
    assert np.allclose(U, np.eye(8))


def test_kick_creates_coherent_state():
    rho = kick(fock.vacuum(HilbertSpec(48)), 0.5)
    assert fock.mean_photon_number(rho) == pytest.approx(0.25, abs=1e-6)
    # U_K |0> is the coherent state |-i eps>
    expected = fock.coherent_density(-0.5j, HilbertSpec(48))
    assert np.abs(rho - expected).max() < 1e-10


def test_kick_inverse():
    rho = random_density(24, seed=5)
    back = kick(kick(rho, 0.4), -0.4)
    assert np.abs(back - rho).max() < 1e-8


def test_kick_preserves_trace():
    rho = random_density(40, seed=6)
    assert np.trace(kick(rho, 0.7)).real == pytest.approx(1.0, abs=1e-10)


# --- run_kicked_evolution ----------------------------------------------------

def test_run_epsilon_zero_stays_vacuum():
    params = ModelParams(epsilon=0.0, kicks=5, dim=16)
    rec = run_kicked_evolution(params)
    assert np.all(rec.delta == 0.0)
    assert np.all(rec.delta_n == 0.0)
    assert np.all(rec.mean_n < 1e-12)


def test_run_records_are_consistent():
    params = ModelParams(epsilon=0.6, kicks=20, dim=48)
    rec = run_kicked_evolution(params, snapshot_schedule=(10, 20))
    assert len(rec.delta) == 20
    # delta_n * mean_n == delta wherever the guard is open
    open_guard = rec.mean_n > 1e-6
    assert np.abs(rec.delta_n[open_guard] * rec.mean_n[open_guard]
                  - rec.delta[open_guard]).max() < 1e-9
    assert set(rec.snapshots) == {10, 20}
    for rho in rec.snapshots.values():
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.eigvalsh(rho).min() > -1e-7
    assert rec.trace_defect.max() < 1e-8
    assert rec.mean_n.max() < 24  # cutoff adequacy: far below dim/2


def test_run_attaches_kick_index_to_errors():
    # the rk4 engine at substeps=1000 violates the stability bound at dim=80
    params = ModelParams(epsilon=1.24, kicks=3, dim=80, substeps=1000)
    with pytest.raises(IntegrationDiverged, match=r"kick \d+"):
        run_kicked_evolution(params, integrator="rk4", compute_delta=False)


def test_exact_propagator_matches_rk4_run():
    kw = dict(kicks=12, dim=24)
    pe = ModelParams(epsilon=0.45, **kw)
    pr = ModelParams(epsilon=0.45, substeps=2000, **kw)
    rec_e = run_kicked_evolution(pe, integrator="exact")
    rec_r = run_kicked_evolution(pr, integrator="rk4")
    assert np.abs(rec_e.delta_n - rec_r.delta_n).max() < 1e-7
    assert np.abs(rec_e.mean_n - rec_r.mean_n).max() < 1e-7


def test_exact_propagator_matches_analytic_limits():
    from kickedkerr.dynamics import PeriodPropagator
    rho = random_density(20, seed=12)
    # gamma = 0: pure Kerr phases
    prop = PeriodPropagator(20, chi=1.0, gamma=0.0, period=np.pi)
    assert np.abs(prop.apply(rho) - analytic_free_kerr(rho, np.pi, 1.0)).max() < 1e-12
    # chi = 0: damping channel closed form
    prop = PeriodPropagator(20, chi=0.0, gamma=0.1, period=np.pi)
    assert np.abs(prop.apply(rho) - analytic_free_damping(rho, np.pi, 0.1)).max() < 1e-12


def test_run_converged_tail_is_exact_fixed_point():
    params = ModelParams(epsilon=0.35, kicks=220, dim=32)
    rec = run_kicked_evolution(params, compute_delta=False)
    assert rec.converged_at is not None
    k0 = rec.converged_at
    assert np.all(rec.mean_n[k0:] == rec.mean_n[k0 - 1])


def test_run_cutoff_guard_trips_on_tiny_basis():
    params = ModelParams(epsilon=1.24, kicks=10, dim=12)
    with pytest.raises(TruncationError):
        run_kicked_evolution(params)


def test_trace_defect_500_periods_under_1e6():
    # long-run drift check at modest dim for runtime; no Wigner evaluation
    params = ModelParams(epsilon=0.4, kicks=500, dim=32)
    rec = run_kicked_evolution(params, compute_delta=False)
    assert rec.trace_defect.max() < 1e-6
