"""Steady states of a driven optical cavity filled with saturable two-level atoms.

Conventions used throughout the package
---------------------------------------
Intensities are in saturation units: the intracavity intensity X = |x|^2
enters the atomic saturation denominator as 1 + delta^2 + X, and the drive
intensity Y is normalized the same way, so an empty resonant cavity
transmits X = Y.  Detunings are in half-linewidth units: ``delta`` is the
probe offset from atomic resonance in units of the dipole half-linewidth
``gamma_hz``, ``theta`` the offset from cavity resonance in units of the
cavity half-linewidth ``kappa_hz``.  All rates are half-linewidths in Hz.

The steady state obeys

    Y = X * [(1 + 2*C*G(X))^2 + (theta - 2*C*delta*G(X))^2]

where G is the saturable susceptibility averaged over the transverse beam
profile.  The profile is represented by radial bins (u_j, w_j): u_j is the
relative mode amplitude seen by atoms in bin j and w_j the bin's relative
atom number, normalized so that sum_j w_j u_j^2 = 1.  A flat profile is the
single bin (u=1, w=1), giving G = 1/(1 + delta^2 + X).  A Gaussian profile
uses Gauss-Legendre nodes in s = u^2 on (0, 1) with w_j = weight_j / s_j,
which converges to the analytic transverse average

    G(X) -> log(1 + X/(1 + delta^2)) / X.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

__all__ = [
    "PlaneWave",
    "GaussianBins",
    "ModelParams",
    "Branch",
    "BinSteady",
    "SteadyState",
    "TurningPoints",
    "bin_layout",
    "gaussian_susceptibility_limit",
    "state_equation",
    "state_equation_slope",
    "turning_points",
    "solve_steady_states",
    "peak_transmission",
    "cooperativity_from_amplitudes",
    "critical_point",
]


@dataclass(frozen=True)
class PlaneWave:
    """Flat transverse profile: every atom sees the full mode amplitude."""


@dataclass(frozen=True)
class GaussianBins:
    """Gaussian transverse profile discretized into ``m`` radial bins."""

    m: int = 32

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"bin count must be >= 1, got {self.m}")


Transverse = PlaneWave | GaussianBins


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless operating point plus the physical rates behind it.

    c            -- cooperativity (collective atom-cavity coupling), >= 0
    delta        -- probe-atom detuning in units of gamma_hz
    theta        -- probe-cavity detuning in units of kappa_hz
    kappa_hz     -- cavity half-linewidth (amplitude decay) in Hz
    gamma_hz     -- atomic dipole half-linewidth in Hz
    gamma_par_ratio -- population decay rate over gamma_hz (2 = radiative limit)
    n_atoms      -- effective atom number; enters only the noise normalization
    transverse   -- beam profile handling, PlaneWave() or GaussianBins(m)
    loss_fraction -- fraction of the cavity decay not through the input mirror
    """

    c: float = 220.0
    delta: float = -20.0
    theta: float = 0.0
    kappa_hz: float = 2.5e6
    gamma_hz: float = 2.6e6
    gamma_par_ratio: float = 2.0
    n_atoms: float = 1.0e6
    transverse: Transverse = field(default_factory=PlaneWave)
    loss_fraction: float = 0.0

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError(f"cooperativity must be >= 0, got {self.c}")
        if not self.kappa_hz > 0:
            raise ValueError(f"kappa_hz must be > 0, got {self.kappa_hz}")
        if not self.gamma_hz > 0:
            raise ValueError(f"gamma_hz must be > 0, got {self.gamma_hz}")
        if not self.gamma_par_ratio > 0:
            raise ValueError(
                f"gamma_par_ratio must be > 0, got {self.gamma_par_ratio}"
            )
        if not self.n_atoms >= 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        if not 0.0 <= self.loss_fraction < 1.0:
            raise ValueError(
                f"loss_fraction must lie in [0, 1), got {self.loss_fraction}"
            )

    @property
    def gamma_par_hz(self) -> float:
        return self.gamma_par_ratio * self.gamma_hz


class Branch(enum.Enum):
    LOWER = "lower"
    MIDDLE = "middle"
    UPPER = "upper"
    MONOSTABLE = "mono"


@dataclass(frozen=True)
class BinSteady:
    """Per-bin steady state: mode amplitude, atom weight, dipole, inversion."""

    u: float
    w: float
    p: complex
    d: float


@dataclass(frozen=True)
class SteadyState:
    x: complex          # intracavity amplitude, gauge: drive amplitude real > 0
    intensity: float    # X = |x|^2
    drive: float        # Y
    bins: tuple[BinSteady, ...]
    branch: Branch
    stable: bool        # sign of dY/dX; folds (slope 0) count as unstable
    slope: float        # dY/dX at the root


@dataclass(frozen=True)
class TurningPoints:
    points: tuple[float, ...]     # X values with dY/dX = 0, ascending
    ordinates: tuple[float, ...]  # Y at those points
    bistable: bool


@lru_cache(maxsize=None)
def _gauss_legendre_01(m: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights for integrating over s = u^2 on (0, 1)
    xi, lam = np.polynomial.legendre.leggauss(m)
    return (xi + 1.0) / 2.0, lam / 2.0


def bin_layout(transverse: Transverse) -> tuple[np.ndarray, np.ndarray]:
    """Return (u, w) arrays for a transverse profile.

    The weights satisfy sum_j w_j u_j^2 = 1, so the weak-field susceptibility
    is profile-independent.
    """
    if isinstance(transverse, PlaneWave):
        return np.array([1.0]), np.array([1.0])
    if isinstance(transverse, GaussianBins):
        s, v = _gauss_legendre_01(transverse.m)
        return np.sqrt(s), v / s
    raise TypeError(f"unknown transverse profile: {transverse!r}")


def gaussian_susceptibility_limit(x_int, a_sat):
    """Infinite-bin Gaussian-profile susceptibility log(1 + X/A)/X.

    ``a_sat`` is the off-resonance saturation scale 1 + delta^2.  Used as the
    analytic reference the binned profile must converge to.
    """
    x_int = np.asarray(x_int, dtype=float)
    out = np.empty_like(x_int)
    small = x_int == 0.0
    out[~small] = np.log1p(x_int[~small] / a_sat) / x_int[~small]
    out[small] = 1.0 / a_sat
    if out.ndim == 0:
        return float(out)
    return out


def _susceptibility(x_int: np.ndarray, a_sat: float,
                    s: np.ndarray, ws: np.ndarray) -> np.ndarray:
    # G(X) = sum_j w_j s_j / (A + s_j X); ws = w*s precomputed
    return np.sum(ws / (a_sat + np.multiply.outer(x_int, s)), axis=-1)

def _susceptibility_slope(x_int: np.ndarray, a_sat: float,
                          s: np.ndarray, ws: np.ndarray) -> np.ndarray:
    # dG/dX = -sum_j w_j s_j^2 / (A + s_j X)^2
    return -np.sum(ws * s / (a_sat + np.multiply.outer(x_int, s)) ** 2, axis=-1)


def _geometry(p: ModelParams) -> tuple[np.ndarray, np.ndarray, float]:
    u, w = bin_layout(p.transverse)
    s = u * u
    return s, w * s, 1.0 + p.delta * p.delta


def state_equation(x_int, p: ModelParams):
    """Drive intensity Y required to sustain intracavity intensity X.

    Accepts a scalar or array X >= 0; the map is single-valued in this
    direction even when the response X(Y) is multivalued.
    """
    x_arr = np.asarray(x_int, dtype=float)
    if np.any(x_arr < 0) or not np.all(np.isfinite(x_arr)):
        raise ValueError("intracavity intensity X must be finite and >= 0")
    s, ws, a_sat = _geometry(p)
    g = _susceptibility(x_arr, a_sat, s, ws)
    absorb = 1.0 + 2.0 * p.c * g
    disperse = p.theta - 2.0 * p.c * p.delta * g
    y = x_arr * (absorb ** 2 + disperse ** 2)
    if y.ndim == 0:
        return float(y)
    return y


def state_equation_slope(x_int, p: ModelParams):
    """Analytic dY/dX; negative slope marks the unstable branch."""
    x_arr = np.asarray(x_int, dtype=float)
    s, ws, a_sat = _geometry(p)
    g = _susceptibility(x_arr, a_sat, s, ws)
    gp = _susceptibility_slope(x_arr, a_sat, s, ws)
    absorb = 1.0 + 2.0 * p.c * g
    disperse = p.theta - 2.0 * p.c * p.delta * g
    slope = (absorb ** 2 + disperse ** 2
             + 4.0 * p.c * x_arr * gp * (absorb - p.delta * disperse))
    if slope.ndim == 0:
        return float(slope)
    return slope


def _state_equation_curvature(x_int, p: ModelParams):
    # d2Y/dX2, used to pin degenerate folds where the slope only touches zero
    x_arr = np.asarray(x_int, dtype=float)
    s, ws, a_sat = _geometry(p)
    g = _susceptibility(x_arr, a_sat, s, ws)
    gp = _susceptibility_slope(x_arr, a_sat, s, ws)
    denom = a_sat + np.multiply.outer(x_arr, s)
    gpp = 2.0 * np.sum(ws * s * s / denom ** 3, axis=-1)
    absorb = 1.0 + 2.0 * p.c * g
    disperse = p.theta - 2.0 * p.c * p.delta * g
    proj = absorb - p.delta * disperse
    curv = (8.0 * p.c * gp * proj
            + 4.0 * p.c * x_arr * gpp * proj
            + 8.0 * p.c ** 2 * x_arr * gp ** 2 * (1.0 + p.delta ** 2))
    if curv.ndim == 0:
        return float(curv)
    return curv


def _bisect(f, lo: float, hi: float, flo: float, rel_tol: float,
            max_iter: int = 200) -> float:
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rel_tol * max(abs(mid), 1e-300):
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def turning_points(p: ModelParams, x_max: float | None = None) -> TurningPoints:
    """Locate the folds of the steady-state response below ``x_max``.

    Scans a dense logarithmic grid for sign changes of dY/dX and refines
    each to 1e-10 relative by bisection.  Returns 0, 1 or 2 points; exactly
    2 means the response is bistable within the scanned window.
    """
    a_sat = 1.0 + p.delta * p.delta
    if x_max is None:
        x_max = 100.0 * a_sat
    if not x_max > 0:
        raise ValueError(f"x_max must be > 0, got {x_max}")
    x_lo = min(1e-9 * a_sat, 1e-6 * x_max)
    grid = np.geomspace(x_lo, x_max, 4096)
    slopes = state_equation_slope(grid, p)
    sign_flip = np.flatnonzero(np.sign(slopes[:-1]) != np.sign(slopes[1:]))

    f = lambda x: state_equation_slope(x, p)
    points = []
    for i in sign_flip:
        points.append(_bisect(f, grid[i], grid[i + 1], slopes[i], 1e-10))
    # collapse grid-level duplicates (can only come from slope noise at a fold)
    deduped: list[float] = []
    for x in sorted(points):
        if not deduped or x - deduped[-1] > 1e-8 * x:
            deduped.append(x)
    if len(deduped) > 2:
        raise RuntimeError(
            f"found {len(deduped)} slope sign changes at {p!r}; "
            "the saturable response should fold at most twice"
        )
    ys = tuple(state_equation(x, p) for x in deduped)
    return TurningPoints(tuple(deduped), ys, len(deduped) == 2)


def _assemble_state(x_root: float, y_drive: float, p: ModelParams,
                    branch: Branch) -> SteadyState:
    s, ws, a_sat = _geometry(p)
    u, w = bin_layout(p.transverse)
    g = _susceptibility(np.asarray(x_root, dtype=float), a_sat, s, ws)
    absorb = 1.0 + 2.0 * p.c * g
    disperse = p.theta - 2.0 * p.c * p.delta * g
    if y_drive > 0:
        x_amp = (x_root / math.sqrt(y_drive)) * complex(absorb, -disperse)
    else:
        x_amp = 0.0 + 0.0j
    dsat = a_sat / (a_sat + s * x_root)
    pol = u * x_amp * dsat / complex(1.0, p.delta)
    bins = tuple(
        BinSteady(float(u[j]), float(w[j]), complex(pol[j]), float(dsat[j]))
        for j in range(len(u))
    )
    slope = state_equation_slope(x_root, p)
    return SteadyState(
        x=complex(x_amp),
        intensity=float(x_root),
        drive=float(y_drive),
        bins=bins,
        branch=branch,
        stable=slope > 0.0,
        slope=float(slope),
    )


def solve_steady_states(y_drive: float, p: ModelParams) -> list[SteadyState]:
    """All steady states at drive intensity Y, sorted by increasing X.

    Roots are bracketed on monotone segments of the response (split at the
    turning points), refined by bisection and polished with Newton steps.
    Three roots are labeled lower/middle/upper and the middle one is always
    unstable; a single root is labeled monostable.
    """
    if not (np.isfinite(y_drive) and y_drive >= 0):
        raise ValueError(f"drive intensity Y must be finite and >= 0, got {y_drive}")
    if y_drive == 0.0:
        return [_assemble_state(0.0, 0.0, p, Branch.MONOSTABLE)]

    # roots satisfy X <= Y, so the fold scan never needs to look beyond Y;
    # the lower bracket edge sits below Y / max(state-equation factor)
    s, ws, a_sat = _geometry(p)
    g0 = float(np.sum(ws)) / a_sat
    factor_max = (1.0 + 2.0 * p.c * g0) ** 2 + (
        abs(p.theta) + 2.0 * p.c * abs(p.delta) * g0) ** 2
    tps = turning_points(p, x_max=y_drive)
    edges = [0.25 * y_drive / factor_max]
    edges.extend(x for x in tps.points if edges[0] < x < y_drive)
    edges.append(y_drive)

    f = lambda x: state_equation(x, p) - y_drive
    fvals = [f(x) for x in edges]
    roots: list[float] = []
    for i in range(len(edges) - 1):
        lo, hi, flo, fhi = edges[i], edges[i + 1], fvals[i], fvals[i + 1]
        if flo == 0.0:
            roots.append(lo)
            continue
        if fhi == 0.0:
            if i == len(edges) - 2:
                roots.append(hi)
            continue
        if (flo < 0) == (fhi < 0):
            continue
        x = _bisect(f, lo, hi, flo, 1e-14)
        # Newton polish; keep the bisection value if the step misbehaves
        for _ in range(3):
            dfdx = state_equation_slope(x, p)
            if dfdx == 0.0:
                break
            step = f(x) / dfdx
            x_new = x - step
            if not (lo <= x_new <= hi):
                break
            x = x_new
        roots.append(x)

    deduped: list[float] = []
    for x in sorted(roots):
        if not deduped or x - deduped[-1] > 1e-9 * max(x, 1e-300):
            deduped.append(x)

    if len(deduped) == 3:
        labels = [Branch.LOWER, Branch.MIDDLE, Branch.UPPER]
    elif len(deduped) == 2:
        # drive sits exactly on a fold ordinate: middle and one outer root merged
        labels = [Branch.LOWER, Branch.UPPER]
    else:
        labels = [Branch.MONOSTABLE] * len(deduped)
    return [
        _assemble_state(x, y_drive, p, lab) for x, lab in zip(deduped, labels)
    ]


def peak_transmission(y_drive: float, p: ModelParams) -> float:
    """Largest intracavity intensity with the dispersive shift compensated.

    This is the peak of a cavity-length scan at fixed drive: the root of
    X*(1 + 2*C*G(X))^2 = Y with the highest X.
    """
    if not y_drive > 0:
        raise ValueError(f"drive intensity must be > 0, got {y_drive}")
    s, ws, a_sat = _geometry(p)

    def h(x):
        g = _susceptibility(np.asarray(x, dtype=float), a_sat, s, ws)
        return x * (1.0 + 2.0 * p.c * g) ** 2

    # monotone segments of h: sign changes of (1 + 2CG) + 4CXG'
    def hslope_factor(x):
        xa = np.asarray(x, dtype=float)
        g = _susceptibility(xa, a_sat, s, ws)
        gp = _susceptibility_slope(xa, a_sat, s, ws)
        return 1.0 + 2.0 * p.c * g + 4.0 * p.c * xa * gp

    grid = np.geomspace(1e-12 * y_drive, y_drive, 2048)
    fac = hslope_factor(grid)
    edges = [grid[0]]
    for i in np.flatnonzero(np.sign(fac[:-1]) != np.sign(fac[1:])):
        edges.append(_bisect(hslope_factor, grid[i], grid[i + 1], fac[i], 1e-12))
    edges.append(y_drive)

    fh = lambda x: h(x) - y_drive
    for i in range(len(edges) - 1, 0, -1):
        lo, hi = edges[i - 1], edges[i]
        flo, fhi = fh(lo), fh(hi)
        if fhi == 0.0:
            return hi
        if (flo < 0) != (fhi < 0):
            return _bisect(fh, lo, hi, flo, 1e-14)
    raise RuntimeError(
        f"no transmission peak found for Y={y_drive} at {p!r}"
    )


def cooperativity_from_amplitudes(bistable_peak: float, empty_peak: float,
                                  p: ModelParams,
                                  drive_y: float | None = None) -> float:
    """Infer the cooperativity from peak transmissions with and without atoms.

    Both peaks must be in the same (arbitrary) units; when ``drive_y`` is not
    given the peaks are assumed to be in saturation units, so the drive is
    read off the empty-cavity peak.  The peak-transmission ratio is inverted
    by bisection against the simulated ratio, which decreases monotonically
    with the cooperativity.
    """
    if not (bistable_peak > 0 and empty_peak > 0):
        raise ValueError("transmission peaks must be > 0")
    if bistable_peak > empty_peak * (1.0 + 1e-12):
        raise ValueError(
            f"peak ratio {bistable_peak / empty_peak:.6g} exceeds 1: "
            "atoms cannot increase the resonant transmission"
        )
    ratio = min(bistable_peak / empty_peak, 1.0)
    if ratio == 1.0:
        return 0.0
    y = empty_peak if drive_y is None else drive_y
    if not y > 0:
        raise ValueError(f"drive intensity must be > 0, got {y}")

    def r_of_c(c):
        return peak_transmission(y, replace(p, c=c)) / y

    c_hi = 1.0
    while r_of_c(c_hi) > ratio:
        c_hi *= 4.0
        if c_hi > 1e8:
            raise ValueError(
                f"peak ratio {ratio:.6g} not reachable below C=1e8 at drive {y:.6g}"
            )
    c_lo = 0.0
    for _ in range(200):
        mid = 0.5 * (c_lo + c_hi)
        if c_hi - c_lo <= 1e-12 * max(mid, 1.0):
            break
        if r_of_c(mid) > ratio:
            c_lo = mid
        else:
            c_hi = mid
    c_star = 0.5 * (c_lo + c_hi)
    if abs(r_of_c(c_star) - ratio) > 1e-6:
        raise ValueError(
            f"no cooperativity reproduces peak ratio {ratio:.6g} to 1e-6; "
            "the ratio may fall inside a branch-jump gap"
        )
    return c_star


def critical_point(p: ModelParams, c_hint: float | None = None,
                   x_max: float | None = None) -> tuple[float, float, float]:
    """Onset of bistability for the detunings/profile in ``p``.

    Returns (c_crit, x_crit, y_crit): the cooperativity at which the two
    folds of the response merge into a degenerate point with dY/dX = 0 and
    d2Y/dX2 = 0, together with that point's coordinates.  ``p.c`` is ignored
    except as a search hint.  Solved by bisecting the minimum slope over X
    (negative iff bistable) as a function of C, the inner minimum being
    pinned by the curvature zero.
    """
    a_sat = 1.0 + p.delta * p.delta
    if x_max is None:
        x_max = 1e4 * a_sat
    grid = np.geomspace(1e-6 * a_sat, x_max, 4096)

    def min_slope(c: float) -> tuple[float, float]:
        pc = replace(p, c=c)
        slopes = state_equation_slope(grid, pc)
        i = int(np.argmin(slopes))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        f = lambda x: _state_equation_curvature(x, pc)
        flo, fhi = f(lo), f(hi)
        if (flo < 0) != (fhi < 0):
            x_star = _bisect(f, lo, hi, flo, 1e-13)
        else:
            x_star = grid[i]
        return state_equation_slope(x_star, pc), x_star

    c_hi = c_hint if c_hint and c_hint > 0 else 1.0
    for _ in range(60):
        if min_slope(c_hi)[0] < 0.0:
            break
        c_hi *= 2.0
    else:
        raise RuntimeError(
            f"response never turns bistable below C={c_hi:.3g} at {p!r}"
        )
    c_lo = 0.0
    for _ in range(200):
        mid = 0.5 * (c_lo + c_hi)
        if c_hi - c_lo <= 1e-12 * max(mid, 1.0):
            break
        if min_slope(mid)[0] < 0.0:
            c_hi = mid
        else:
            c_lo = mid
    c_crit = 0.5 * (c_lo + c_hi)
    _, x_crit = min_slope(c_crit)
    y_crit = state_equation(x_crit, replace(p, c=c_crit))
    return c_crit, x_crit, y_crit
