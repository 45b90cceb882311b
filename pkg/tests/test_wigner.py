import numpy as np
import pytest
from numpy.polynomial.laguerre import lagval

from kickedkerr import fock
from kickedkerr.fock import HilbertSpec, TruncationError
from kickedkerr.wigner import (MassDefect, PhaseGrid, auto_grid, default_grid,
                               delta_n, negativity_delta, wigner_at,
                               wigner_grid, wigner_values)

TWO_OVER_PI = 2.0 / np.pi

# Frozen from the independent 1024x1024 brute-force quadrature oracle over
# [-7,7]^2 applied to the closed-form Fock-state Wigner functions
# W_n = (2/pi)(-1)^n e^{-2 r^2} L_n(4 r^2); see fock_delta_oracle below.
# delta(|1>) agrees with the analytic value 4 e^{-1/2} - 2 to 8e-6.
FOCK_DELTA_ORACLE = {1: 0.4261149399845608,
                     2: 0.7289908242046529,
                     3: 0.9766550052080183}


def fock_delta_oracle(n, extent=7.0, points=1024):
    """Brute-force negativity of |n><n| from the closed-form Wigner function."""
    h = 2 * extent / points
    x = -extent + (np.arange(points) + 0.5) * h
    xx, yy = np.meshgrid(x, x, indexing="ij")
    r2 = xx ** 2 + yy ** 2
    c = np.zeros(n + 1)
    c[n] = 1.0
    w = TWO_OVER_PI * (-1) ** n * np.exp(-2 * r2) * lagval(4 * r2, c)
    return float(((np.abs(w) - w) * h * h).sum())


def random_density(dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def test_oracle_values_are_current():
    for n, frozen in FOCK_DELTA_ORACLE.items():
        assert fock_delta_oracle(n) == pytest.approx(frozen, abs=1e-12)


# --- wigner_at (reference path) ---------------------------------------------

def test_vacuum_at_origin():
    rho = fock.vacuum(HilbertSpec(8))
    assert wigner_at(rho, 0.0) == pytest.approx(TWO_OVER_PI, abs=1e-12)


def test_fock1_at_origin():
    rho = fock.fock_density(1, HilbertSpec(8))
    assert wigner_at(rho, 0.0) == pytest.approx(-TWO_OVER_PI, abs=1e-12)


def test_coherent_closed_form():
    beta = 0.8
    rho = fock.coherent_density(beta, HilbertSpec(48))
    for alpha in (0.2 + 0.1j, 1.0 - 0.3j, -0.5 + 0.9j):
        expected = TWO_OVER_PI * np.exp(-2 * abs(alpha - beta) ** 2)
        assert wigner_at(rho, alpha) == pytest.approx(expected, abs=1e-6)


def test_wigner_at_truncation_error():
    rho = fock.vacuum(HilbertSpec(8))
    with pytest.raises(TruncationError):
        wigner_at(rho, 5.0)


# --- dual route: batched kernel vs reference --------------------------------

def test_grid_kernel_matches_reference_pointwise():
    # the expm reference needs the state supported well below the cutoff
    # (its displacement feels the truncation) and |alpha| <~ sqrt(dim)/4;
    # far points and cutoff-heavy states are covered by the mpmath test
    rho = np.zeros((32, 32), complex)
    rho[:10, :10] = random_density(10, seed=1)
    pts_re = np.array([-0.7, 0.0, 0.3, 0.8])
    pts_im = np.array([-0.5, 0.1, 0.4, 0.6])
    vals = wigner_values(rho, pts_re, pts_im)
    for i, re in enumerate(pts_re):
        for j, im in enumerate(pts_im):
            ref = wigner_at(rho, complex(re, im))
            assert vals[i, j] == pytest.approx(ref, abs=1e-8)


def test_grid_kernel_far_points_against_mpmath():
    # independent high-precision oracle: exact Laguerre matrix elements of
    # the displaced parity operator, summed at 40 significant digits
    mp = pytest.importorskip("mpmath").mp
    mp.dps = 40

    def wigner_mp(rho, alpha):
        dim = rho.shape[0]
        B = mp.mpc(2 * alpha.real, 2 * alpha.imag)
        x = abs(B) ** 2
        e = mp.e ** (-x / 2)
        S = mp.mpc(0)
        for n in range(dim):
            for m in range(dim):
                if n >= m:
                    G = (mp.sqrt(mp.factorial(m) / mp.factorial(n))
                         * B ** (n - m) * e * mp.laguerre(m, n - m, x))
                else:
                    G = (mp.sqrt(mp.factorial(n) / mp.factorial(m))
                         * (-mp.conj(B)) ** (m - n) * e * mp.laguerre(n, m - n, x))
                S += rho[m, n] * (-1) ** m * G
        return float((2 / mp.pi * S).real)

    rho = random_density(40, seed=8)
    for alpha in (2.0 - 2.5j, 4.0 + 4.0j, -5.9 - 5.9j):
        got = wigner_values(rho, np.array([alpha.real]), np.array([alpha.imag]))[0, 0]
        assert got == pytest.approx(wigner_mp(rho, alpha), abs=1e-12)


def test_grid_kernel_matches_reference_pure_states():
    spec = HilbertSpec(40)
    states = [fock.coherent_density(0.9 - 0.4j, spec),
              fock.fock_density(3, spec),
              fock.apply_unitary(fock.fock_density(1, spec),
                                 fock.displacement(0.5 + 0.5j, spec))]
    for rho in states:
        vals = wigner_values(rho, np.array([0.3, -0.7]), np.array([0.0, 1.2]))
        for i, re in enumerate((0.3, -0.7)):
            for j, im in enumerate((0.0, 1.2)):
                assert vals[i, j] == pytest.approx(wigner_at(rho, complex(re, im)),
                                                   abs=1e-10)


# --- wigner_grid -------------------------------------------------------------

def test_vacuum_grid_mass():
    rho = fock.vacuum(HilbertSpec(8))
    grid = PhaseGrid(-4, 4, -4, 4, 64, 64)
    fld = wigner_grid(rho, grid)
    assert abs(fld.mass - 1.0) < 1e-4


def test_fock1_grid_min_value():
    # the default grid contains alpha = 0, where W_1 = -2/pi exactly
    rho = fock.fock_density(1, HilbertSpec(16))
    fld = wigner_grid(rho, default_grid())
    assert fld.values.min() == pytest.approx(-TWO_OVER_PI, abs=2e-3)


def test_grid_linearity_in_rho():
    spec = HilbertSpec(12)
    rho0 = fock.vacuum(spec)
    rho1 = fock.fock_density(1, spec)
    grid = PhaseGrid(-4, 4, -4, 4, 32, 32)
    mixed = wigner_grid(0.5 * rho0 + 0.5 * rho1, grid)
    avg = 0.5 * wigner_grid(rho0, grid).values + 0.5 * wigner_grid(rho1, grid).values
    assert np.abs(mixed.values - avg).max() < 1e-10


def test_mass_defect_raises_on_small_extent():
    rho = fock.coherent_density(1.2, HilbertSpec(64))
    with pytest.raises(MassDefect):
        wigner_grid(rho, PhaseGrid(-1, 1, -1, 1, 32, 32))


def test_grid_invariants():
    with pytest.raises(ValueError):
        PhaseGrid(1, -1, -1, 1, 32, 32)
    with pytest.raises(ValueError):
        PhaseGrid(-1, 1, -1, 1, 8, 32)
    g = auto_grid(9.0)
    assert g.re_max == pytest.approx(9.0)
    # cell size is preserved up to the ceil quantization of the point count
    assert g.cell_area == pytest.approx(default_grid().cell_area, rel=2e-2)


# --- negativity --------------------------------------------------------------

def test_vacuum_delta_zero():
    fld = wigner_grid(fock.vacuum(HilbertSpec(8)), default_grid())
    assert negativity_delta(fld) == pytest.approx(0.0, abs=1e-9)


def test_coherent_delta_zero():
    for beta in (0.5, -0.8 + 0.6j):
        rho = fock.coherent_density(beta, HilbertSpec(48))
        fld = wigner_grid(rho, default_grid())
        assert negativity_delta(fld) == pytest.approx(0.0, abs=1e-9)


def test_fock_delta_monotone_and_matches_oracle():
    spec = HilbertSpec(16)
    vals = {}
    for n in (1, 2, 3):
        fld = wigner_grid(fock.fock_density(n, spec), default_grid())
        vals[n] = negativity_delta(fld)
        assert vals[n] == pytest.approx(FOCK_DELTA_ORACLE[n], abs=1e-3)
    assert vals[1] < vals[2] < vals[3]


def test_delta_n_guard_and_quotients():
    spec = HilbertSpec(16)
    assert delta_n(fock.vacuum(spec)) == 0.0
    d1 = delta_n(fock.fock_density(1, spec))
    assert d1 == pytest.approx(FOCK_DELTA_ORACLE[1], abs=1e-3)
    d2 = delta_n(fock.fock_density(2, spec))
    assert d2 == pytest.approx(FOCK_DELTA_ORACLE[2] / 2.0, abs=1e-3)


# --- properties --------------------------------------------------------------

def test_delta_displacement_invariance():
    spec = HilbertSpec(40)
    rho = fock.fock_density(2, spec)
    base = negativity_delta(wigner_grid(rho, default_grid()))
    for beta in (0.5, -0.3 + 0.8j, 1.0j):
        moved = fock.apply_unitary(rho, fock.displacement(beta, spec))
        val = negativity_delta(wigner_grid(moved, default_grid()))
        assert val == pytest.approx(base, abs=2e-3)


def test_delta_convexity_bound():
    spec = HilbertSpec(16)
    rho1 = fock.fock_density(1, spec)
    rho2 = fock.fock_density(3, spec)
    grid = default_grid()
    d1 = negativity_delta(wigner_grid(rho1, grid))
    d2 = negativity_delta(wigner_grid(rho2, grid))
    for lam in (0.25, 0.5, 0.75):
        mix = negativity_delta(wigner_grid(lam * rho1 + (1 - lam) * rho2, grid))
        assert mix <= lam * d1 + (1 - lam) * d2 + 2e-3


def test_delta_resolution_convergence():
    rho = fock.fock_density(2, HilbertSpec(16))
    g = default_grid()
    base = negativity_delta(wigner_grid(rho, g))
    fine = negativity_delta(wigner_grid(rho, PhaseGrid(-6, 6, -6, 6,
                                                       2 * g.n_re, 2 * g.n_im)))
    assert abs(base - fine) < 1e-3
