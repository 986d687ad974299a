import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossqed.core import InitialState, InvalidParameterError, PulseShape, SystemParams, TimeGrid
from crossqed.hierarchy import (
    LindbladChannels,
    atom_density,
    biphoton_coincidence,
    dissipator,
    integrate_hierarchy,
    lindblad_rhs,
    output_flux,
    system_operators,
)
from crossqed.single_excitation import integrate_single_excitation

from conftest import grid_for, params_for


@pytest.fixture(scope="module")
def pulse():
    return PulseShape.from_duration(10.0)


@pytest.fixture(scope="module")
def biphoton_run(pulse):
    p = params_for(1.0)
    return integrate_hierarchy(p, pulse, pulse, "g1", grid_for(p, pulse, 800), coincidence=True)


def random_density(rng, d):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_dissipator_is_trace_annihilating(seed):
    rng = np.random.default_rng(seed)
    ops = system_operators(2)
    rho = rng.normal(size=(ops.dim, ops.dim)) + 1j * rng.normal(size=(ops.dim, ops.dim))
    for L in LindbladChannels.build(params_for(3.0), ops).jumps:
        assert abs(np.trace(dissipator(L, rho))) < 1e-12


def test_lindblad_rhs_preserves_hermiticity_and_trace():
    rng = np.random.default_rng(7)
    ops = system_operators(2)
    rho = random_density(rng, ops.dim)
    drho = lindblad_rhs(LindbladChannels.build(params_for(3.0), ops), rho)
    assert abs(np.trace(drho)) < 1e-12
    assert np.max(np.abs(drho - drho.conj().T)) < 1e-12


def test_basis_is_excitation_bounded():
    ops = system_operators(2)
    assert ops.dim == 15
    for lvl, na, nb in ops.basis:
        assert na + nb + (lvl == 2) <= 2


def test_vacuum_input_keeps_ground_state_stationary():
    p = params_for(5.0)
    grid = TimeGrid(0.0, 20.0, n_steps=200)
    for level, k in (("g1", 0), ("g2", 1)):
        res = integrate_hierarchy(p, None, None, level, grid)
        assert res.final.atom_populations()[k] == pytest.approx(1.0, abs=1e-12)
        assert res.total_photons == pytest.approx(0.0, abs=1e-12)


def test_excited_atom_decays_exponentially_without_coupling():
    p = SystemParams(g_a=0.0, gamma_1=0.15, gamma_2=0.05)
    grid = TimeGrid(0.0, 10.0, n_steps=100)
    res = integrate_hierarchy(p, None, None, "e", grid)
    assert np.allclose(res.sigma_ee, np.exp(-2 * 0.2 * grid.times), atol=1e-8)


def test_initial_components(pulse):
    p = params_for(1.0)
    grid = grid_for(p, pulse, 200)
    res = integrate_hierarchy(p, pulse, pulse, "g1", grid, snapshot_times=(grid.t_start,))
    tensor = res.snapshots[grid.t_start]
    phys = tensor.physical
    for m in (0, 1):
        for n in (0, 1):
            for q in (0, 1):
                for r in (0, 1):
                    comp = tensor.component(m, n, q, r)
                    if m == n and q == r:
                        assert np.allclose(comp, phys)
                    else:
                        assert np.max(np.abs(comp)) == 0


def test_trace_and_hermiticity(biphoton_run):
    assert biphoton_run.max_trace_error < 1e-8
    assert np.max(biphoton_run.hermiticity_error) < 1e-10
    assert biphoton_run.final.hermiticity_error() < 1e-10


def test_fluxes_nonnegative(biphoton_run):
    assert output_flux(biphoton_run, "a").min() > -1e-10
    assert output_flux(biphoton_run, "b").min() > -1e-10
    with pytest.raises(InvalidParameterError):
        output_flux(biphoton_run, "c")


def test_photon_bookkeeping(biphoton_run):
    assert biphoton_run.total_photons == pytest.approx(2.0, abs=1e-3)
    assert np.trapezoid(biphoton_run.flux_a, biphoton_run.times) == pytest.approx(biphoton_run.photons_a, abs=1e-3)


def test_lossless_biphoton_conserves_photons(pulse):
    p = SystemParams(g_a=1.0, gamma_1=0.0, gamma_2=0.0)
    res = integrate_hierarchy(p, pulse, pulse, "g1", grid_for(p, pulse, 600))
    assert res.photons_a + res.photons_b == pytest.approx(2.0, abs=1e-3)
    assert res.photons_lost == pytest.approx(0.0, abs=1e-12)


def test_decoupled_level_coincidence_is_one(pulse):
    p = params_for(10.0)
    assert biphoton_coincidence(p, pulse, pulse, grid_for(p, pulse, 600), atom_init="g2") == pytest.approx(1.0, abs=1e-3)


def test_fock_cutoff_is_exact(pulse):
    p = params_for(2.0)
    grid = grid_for(p, pulse, 300)
    # tight rtol so adaptive step differences stay below the comparison threshold
    r2 = integrate_hierarchy(p, pulse, pulse, "g1", grid, n_max=2, coincidence=True, rtol=1e-11)
    r3 = integrate_hierarchy(p, pulse, pulse, "g1", grid, n_max=3, coincidence=True, rtol=1e-11)
    assert abs(r2.coincidence - r3.coincidence) < 1e-10
    assert abs(r2.photons_a - r3.photons_a) < 1e-10
    assert np.max(np.abs(r2.flux_b - r3.flux_b)) < 1e-10


@pytest.mark.parametrize("C", [0.5, 10.0])
def test_single_photon_matches_amplitude_solver(C):
    pulse = PulseShape.from_duration(40.0)
    p = params_for(C)
    grid = grid_for(p, pulse)
    h = integrate_hierarchy(p, None, pulse, "g1", grid)
    s = integrate_single_excitation(p, InitialState(1.0, 0.0, 0.0, 1.0), pulse, pulse, grid)
    assert h.photons_a == pytest.approx(s.alpha_out_energy[0], abs=1e-3)
    assert h.photons_b == pytest.approx(s.beta_out_energy[0], abs=1e-3)
    assert np.max(np.abs(h.flux_a - np.abs(s.alpha_out[0]) ** 2)) < 1e-3


def test_superposed_atom_matches_amplitude_solver(pulse):
    p = params_for(3.0)
    grid = grid_for(p, pulse, 800)
    lam = (0.6, 0.8j)
    h = integrate_hierarchy(p, pulse, None, lam, grid)
    s = integrate_single_excitation(p, InitialState(*lam, 1.0, 0.0), pulse, pulse, grid)
    assert h.photons_a == pytest.approx(s.alpha_out_energy.sum(), abs=1e-3)


def test_invalid_inputs(pulse):
    p = params_for(1.0)
    with pytest.raises(InvalidParameterError):
        integrate_hierarchy(p, pulse, pulse, "g1", n_max=1)
    with pytest.raises(InvalidParameterError):
        integrate_hierarchy(p, pulse, None, "g1", coincidence=True)
    with pytest.raises(InvalidParameterError):
        atom_density(np.diag([1.5, -0.5, 0.0]))
    with pytest.raises(InvalidParameterError):
        atom_density("x")
    assert np.allclose(atom_density((0.6, 0.8)), np.outer([0.6, 0.8, 0], [0.6, 0.8, 0]))
