"""Quadrature noise spectra of the field leaving the driven cavity.

Fluctuations around a steady state are treated to linear order: the state
vector (dx_re, dx_im, {dp_re, dp_im, dd} per bin) obeys dv/dt = A v + B xi
with white input channels xi.  The cavity input is vacuum; each atom bin
contributes three Langevin channels whose diffusion matrix follows from the
generalized Einstein relation for the two-level algebra at the bin's
operating point (population decay at gamma_par plus the pure dephasing
needed to make the total dipole decay gamma).

Normalization: every spectral density is expressed in shot-noise units.
Input channels carry unit spectral density after dividing the physical
diffusion by the vacuum quadrature density, so an empty cavity returns the
identity matrix and squeezing shows up as an eigenvalue of V below 1.  The
atom number enters the per-bin diffusion as 1/(w_j N) and cancels against
the collective coupling; it is kept explicit so the cancellation is
exercised, not assumed.

Frequencies: the analysis frequency omega_hz and all rates are ordinary
frequencies in Hz (half-linewidths), so omega_hz compares directly with
kappa_hz and the 2*pi factors drop out of every ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bistability import ModelParams, SteadyState

__all__ = [
    "FluctuationSystem",
    "QuadratureSpectrum",
    "DetectionChain",
    "build_fluctuation_system",
    "drift_eigenvalues",
    "output_spectrum",
    "quadrature_extrema",
    "apply_efficiency",
    "efficiency_matrix",
]


# === fluctuation system assembly ===

@dataclass(frozen=True)
class FluctuationSystem:
    """Linearized dynamics dv/dt = A v + B xi around one steady state.

    a          -- real drift matrix, (2+3M) x (2+3M)
    b          -- channel coupling matrix, (2+3M) x n_channels
    input_psd  -- symmetric spectral-density matrix of the channels,
                  shot-normalized (vacuum channel = 1)
    kappa_in_hz -- input-mirror coupling rate (= kappa when lossless)
    n_bins     -- number of transverse bins M
    """

    a: np.ndarray
    b: np.ndarray
    input_psd: np.ndarray
    kappa_in_hz: float
    n_bins: int


def build_fluctuation_system(ss: SteadyState, p: ModelParams) -> FluctuationSystem:
    """Drift, couplings and input spectra for fluctuations around ``ss``.

    Valid on any branch; the resulting spectra are physically meaningful
    only where the drift is stable.  Rejects gamma_par_ratio > 2, which
    would require negative pure dephasing.
    """
    if p.gamma_par_ratio > 2.0 + 1e-12:
        raise ValueError(
            f"gamma_par_ratio={p.gamma_par_ratio} exceeds 2: total dipole decay "
            "cannot be slower than half the population decay"
        )
    kappa = p.kappa_hz
    gamma = p.gamma_hz
    gpar = p.gamma_par_hz
    m = len(ss.bins)
    n = 2 + 3 * m
    x1, x2 = ss.x.real, ss.x.imag

    a = np.zeros((n, n))
    a[0, 0] = -kappa
    a[0, 1] = kappa * p.theta
    a[1, 0] = -kappa * p.theta
    a[1, 1] = -kappa

    loss = p.loss_fraction
    kappa_in = kappa * (1.0 - loss)
    n_cav = 4 if loss > 0.0 else 2
    n_chan = n_cav + 3 * m
    b = np.zeros((n, n_chan))
    psd = np.zeros((n_chan, n_chan))
    b[0, 0] = b[1, 1] = math.sqrt(2.0 * kappa_in)
    psd[0, 0] = psd[1, 1] = 1.0
    if loss > 0.0:
        b[0, 2] = b[1, 3] = math.sqrt(2.0 * kappa * loss)
        psd[2, 2] = psd[3, 3] = 1.0

    # shot normalization: physical vacuum density per quadrature divided out;
    # the atomic diffusion below is divided by the same factor
    sigma_cav = 2.0 * kappa * p.c / (p.n_atoms * gpar) if p.c > 0 else 0.0

    for j, bn in enumerate(ss.bins):
        ip1 = 2 + 3 * j
        ip2 = ip1 + 1
        idd = ip1 + 2
        u, w = bn.u, bn.w
        p1, p2 = bn.p.real, bn.p.imag

        a[0, ip1] = -2.0 * kappa * p.c * w * u
        a[1, ip2] = -2.0 * kappa * p.c * w * u

        a[ip1, 0] = gamma * u * bn.d
        a[ip1, idd] = gamma * u * x1
        a[ip1, ip1] = -gamma
        a[ip1, ip2] = gamma * p.delta

        a[ip2, 1] = gamma * u * bn.d
        a[ip2, idd] = gamma * u * x2
        a[ip2, ip1] = -gamma * p.delta
        a[ip2, ip2] = -gamma

        a[idd, 0] = -gpar * u * p1
        a[idd, 1] = -gpar * u * p2
        a[idd, ip1] = -gpar * u * x1
        a[idd, ip2] = -gpar * u * x2
        a[idd, idd] = -gpar

        c0 = n_cav + 3 * j
        b[ip1, c0] = b[ip2, c0 + 1] = b[idd, c0 + 2] = 1.0
        if p.c > 0:
            n_bin = w * p.n_atoms
            d_phys = np.array([
                [2.0 * gamma ** 2 / gpar, 0.0, -gpar * p1],
                [0.0, 2.0 * gamma ** 2 / gpar, -gpar * p2],
                [-gpar * p1, -gpar * p2, 2.0 * gpar * (1.0 - bn.d)],
            ]) / n_bin
            psd[c0:c0 + 3, c0:c0 + 3] = d_phys / sigma_cav

    return FluctuationSystem(a=a, b=b, input_psd=psd,
                             kappa_in_hz=kappa_in, n_bins=m)


def drift_eigenvalues(fs: FluctuationSystem) -> np.ndarray:
    """Eigenvalues of the drift matrix; all real parts < 0 means stable."""
    return np.linalg.eigvals(fs.a)


# === output spectra ===

@dataclass(frozen=True)
class QuadratureSpectrum:
    """Symmetric 2x2 spectral matrix of the output quadratures at one Ω."""

    omega_hz: float
    v: np.ndarray
    s_min: float
    s_max: float
    theta_min: float  # quadrature angle of s_min, in [0, pi)


@dataclass(frozen=True)
class DetectionChain:
    """Homodyne detection budget; only ``eta`` enters the noise arithmetic."""

    eta: float = 0.9
    pd_efficiency: float = 0.96   # informational breakdown of eta
    mode_overlap: float = 0.97    # informational breakdown of eta

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


def quadrature_extrema(v: np.ndarray) -> tuple[float, float, float]:
    """(s_min, s_max, theta_min) of a symmetric 2x2 spectral matrix.

    theta_min is the angle of the minimal-noise quadrature in [0, pi);
    an isotropic matrix reports 0 by convention.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {v.shape}")
    scale = max(abs(v[0, 0]), abs(v[1, 1]), 1e-300)
    if abs(v[0, 1] - v[1, 0]) > 1e-8 * scale:
        raise ValueError(f"spectral matrix must be symmetric, got {v!r}")
    va, vb, vc = v[0, 0], 0.5 * (v[0, 1] + v[1, 0]), v[1, 1]
    mean = 0.5 * (va + vc)
    radius = math.hypot(0.5 * (va - vc), vb)
    s_min = mean - radius
    s_max = mean + radius
    if radius <= 1e-14 * max(abs(mean), 1.0):
        theta = 0.0
    elif vb == 0.0:
        theta = 0.0 if va <= vc else 0.5 * math.pi
    else:
        theta = math.atan2(s_min - va, vb) % math.pi
    return s_min, s_max, theta


def output_spectrum(fs: FluctuationSystem, omega_hz: float) -> QuadratureSpectrum:
    """Shot-normalized output quadrature spectrum at analysis frequency Ω.

    Each white channel is propagated through the linear response
    (-iΩ - A)^(-1) B; the detected field is the transmitted cavity leakage
    minus the directly reflected input, sqrt(2 kappa_in) dx - dx_in.
    """
    if not (np.isfinite(omega_hz) and omega_hz >= 0):
        raise ValueError(f"omega_hz must be finite and >= 0, got {omega_hz}")
    n = fs.a.shape[0]
    try:
        resp = np.linalg.solve(-1j * omega_hz * np.eye(n) - fs.a, fs.b)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"fluctuation response is singular at omega_hz={omega_hz}: "
            "the operating point sits on an instability boundary"
        ) from exc
    root = math.sqrt(2.0 * fs.kappa_in_hz)
    w_out = root * resp[:2, :]
    w_out[0, 0] -= 1.0
    w_out[1, 1] -= 1.0
    v = np.real(w_out @ fs.input_psd @ w_out.conj().T)
    v = 0.5 * (v + v.T)
    s_min, s_max, theta = quadrature_extrema(v)
    return QuadratureSpectrum(omega_hz=float(omega_hz), v=v,
                              s_min=s_min, s_max=s_max, theta_min=theta)


def apply_efficiency(s, eta: float):
    """Noise power after a lossy detection path: S -> eta*S + (1 - eta).

    Acts elementwise; applying it to the eigenvalues of V is exact because
    the efficiency map eta*V + (1-eta)*I preserves eigenvectors.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("noise power must be >= 0")
    out = eta * s_arr + (1.0 - eta)
    if out.ndim == 0:
        return float(out)
    return out


def efficiency_matrix(v: np.ndarray, eta: float) -> np.ndarray:
    """Efficiency map on the full 2x2 spectral matrix."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    v = np.asarray(v, dtype=float)
    return eta * v + (1.0 - eta) * np.eye(2)
