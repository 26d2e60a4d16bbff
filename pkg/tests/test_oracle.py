"""Cross-validation of the linearized spectra against an exact master equation.

The oracle solves one atom in the driven cavity on a truncated photon basis
with no linearization, so these tests tie the whole drift/diffusion/output
construction to first-principles quantum mechanics.  Deviations at weak
saturation come only from the neglected nonlinear mixing and shrink with the
drive; the tolerances below were set with roughly 2-3x headroom over the
measured deviations.
"""

import math

import numpy as np
import pytest

from cavsqueeze import (
    GaussianBins,
    ModelParams,
    build_fluctuation_system,
    output_spectrum,
    solve_steady_states,
    state_equation,
)
from cavsqueeze.oracle import (
    _fock_destroy,
    homodyne_spectrum,
    liouvillian,
    me_oracle_spectrum,
    steady_density,
)

KAPPA = 2.5e6
FIVE_POINT_GRID = np.array([0.0, 1.0, 2.0, 3.0, 4.0]) * KAPPA


def _linearized_v(p, drive_y, x_target, omega_hz):
    roots = solve_steady_states(drive_y, p)
    ss = min(roots, key=lambda r: abs(r.intensity - x_target))
    fs = build_fluctuation_system(ss, p)
    return output_spectrum(fs, omega_hz).v


def _worst_deviation(p, x_target, tol_tail=15):
    y = state_equation(x_target, p)
    worst = 0.0
    for q_me in me_oracle_spectrum(p, FIVE_POINT_GRID, drive_y=y,
                                   fock_cutoff=tol_tail):
        v_lin = _linearized_v(p, y, x_target, q_me.omega_hz)
        worst = max(worst, float(np.max(np.abs(v_lin - q_me.v))))
    return worst


# === exactly solvable reference: the degenerate parametric amplifier ===


def test_parametric_amplifier_matches_closed_form():
    """A quadratic cavity-only Hamiltonian has closed-form output spectra;
    this pins the shot normalization and the 4-kappa output prefactor."""
    eps = 0.6 * KAPPA
    dim = 25
    a = _fock_destroy(dim)
    h = 0.5j * eps * (a.conj().T @ a.conj().T - a @ a)
    lv = liouvillian(h, [math.sqrt(2.0 * KAPPA) * a])
    rho = steady_density(lv, dim)
    for omega in (0.0, 0.5 * KAPPA, KAPPA, 3.0 * KAPPA):
        v = homodyne_spectrum(lv, a, rho, KAPPA, omega)
        s_amp = 1.0 + 4.0 * KAPPA * eps / ((KAPPA - eps) ** 2 + omega ** 2)
        s_sq = 1.0 - 4.0 * KAPPA * eps / ((KAPPA + eps) ** 2 + omega ** 2)
        assert abs(v[0, 0] - s_amp) < 1e-5
        assert abs(v[1, 1] - s_sq) < 1e-5
        assert abs(v[0, 1]) < 1e-8
        assert abs(v[0, 1] - v[1, 0]) < 1e-12


def test_steady_density_is_a_state():
    eps = 0.4 * KAPPA
    dim = 15
    a = _fock_destroy(dim)
    h = 0.5j * eps * (a.conj().T @ a.conj().T - a @ a)
    lv = liouvillian(h, [math.sqrt(2.0 * KAPPA) * a])
    rho = steady_density(lv, dim)
    assert abs(np.trace(rho) - 1.0) < 1e-10
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-10


# === degenerate limits ===


def test_undriven_cavity_emits_vacuum():
    p = ModelParams(c=0.2, delta=0.3, theta=1.0, n_atoms=1)
    for q in me_oracle_spectrum(p, [0.0, KAPPA, 3.0 * KAPPA], drive_y=0.0):
        assert np.max(np.abs(q.v - np.eye(2))) < 1e-10


def test_uncoupled_driven_cavity_emits_vacuum():
    # with the coupling off the cavity just sits in a coherent state
    p = ModelParams(c=0.0, theta=0.7, n_atoms=1)
    for q in me_oracle_spectrum(p, [0.0, KAPPA], drive_amp_hz=0.4 * KAPPA):
        assert np.max(np.abs(q.v - np.eye(2))) < 1e-10


# === agreement with the linearized treatment at weak saturation ===


def test_weak_drive_agreement_on_resonance():
    p = ModelParams(c=0.2, delta=0.0, theta=0.0, n_atoms=1)
    assert _worst_deviation(p, 0.05) < 0.012


def test_weak_drive_agreement_detuned():
    p = ModelParams(c=0.35, delta=1.4, theta=-0.9, n_atoms=1)
    assert _worst_deviation(p, 0.06) < 0.005


def test_weak_drive_agreement_with_dephasing():
    p = ModelParams(c=0.3, delta=0.5, theta=0.2, gamma_par_ratio=1.2,
                    n_atoms=1)
    assert _worst_deviation(p, 0.05) < 0.008


# === guard rails ===


def test_truncated_ladder_with_population_on_top_is_rejected():
    p = ModelParams(c=0.2, theta=0.0, n_atoms=1)
    with pytest.raises(RuntimeError):
        me_oracle_spectrum(p, [0.0], drive_amp_hz=2.0 * KAPPA, fock_cutoff=3)


def test_drive_arguments_must_be_unambiguous():
    p = ModelParams(c=0.2, n_atoms=1)
    with pytest.raises(ValueError):
        me_oracle_spectrum(p, [0.0])
    with pytest.raises(ValueError):
        me_oracle_spectrum(p, [0.0], drive_y=0.1, drive_amp_hz=1e5)
    with pytest.raises(ValueError):
        me_oracle_spectrum(p, [0.0], drive_y=-0.1)


def test_saturation_drive_needs_coupling():
    p = ModelParams(c=0.0, n_atoms=1)
    with pytest.raises(ValueError):
        me_oracle_spectrum(p, [0.0], drive_y=0.1)


def test_many_atom_or_profiled_requests_are_rejected():
    with pytest.raises(ValueError):
        me_oracle_spectrum(ModelParams(c=0.2, n_atoms=2), [0.0], drive_y=0.1)
    with pytest.raises(ValueError):
        me_oracle_spectrum(
            ModelParams(c=0.2, n_atoms=1, transverse=GaussianBins(m=4)),
            [0.0],
            drive_y=0.1,
        )


def test_slow_dipole_decay_is_rejected():
    p = ModelParams(c=0.2, n_atoms=1, gamma_par_ratio=2.5)
    with pytest.raises(ValueError):
        me_oracle_spectrum(p, [0.0], drive_y=0.1)
