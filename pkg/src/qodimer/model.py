"""Model parameters, symmetric steady states and coupling utilities.

Two χ(2) waveguides (A and B) share a doubly resonant cavity pumped at the
fundamental frequency.  In normalized units the intracavity fields obey

    dA1/dt = (-1 + i Δ1) A1 + A1* A2 - i J1 B1 + E + noise
    dA2/dt = (-γ + i Δ2) A2 - A1²/2   - i J2 B2     + noise

and the mirrored equations for guide B.  Guide-symmetric steady states
(A_j = B_j) coincide with those of a single waveguide at the shifted
detunings d_j = Δ_j - J_j, which is what makes the closed forms below
possible.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimerParams",
    "EffectiveDetunings",
    "NormalizationContext",
    "ModeProfilePair",
    "SymmetricSteadyState",
    "effective_detunings",
    "pump_for_intensity",
    "sh_steady_intensity",
    "steady_phases",
    "solve_symmetric_steady_states",
    "bistability_predicate",
    "deterministic_drift",
    "drift_residual",
    "output_carriers",
    "coupling_overlap_integral",
    "normalized_coupling",
]

@dataclass(frozen=True)
class DimerParams:
    """Dimensionless model parameters.

    gamma   -- SH/FH loss-rate ratio γ = γ2/γ1 (> 0)
    delta1  -- FH detuning Δ1
    delta2  -- SH detuning Δ2
    j1, j2  -- FH and SH cross-waveguide coupling strengths (>= 0)
    pump    -- real pump amplitude E (>= 0), equal in both guides
    ns      -- noise-strength parameter n_s = κ²/γ1² (> 0); sets the inverse
               scale of quantum fluctuations and never enters the normalized
               analytic spectra
    """

    gamma: float
    delta1: float
    delta2: float
    j1: float
    j2: float
    pump: float
    ns: float = 1e8

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.ns > 0:
            raise ValueError(f"ns must be > 0, got {self.ns}")
        if self.pump < 0:
            raise ValueError(f"pump must be >= 0, got {self.pump}")
        if self.j1 < 0 or self.j2 < 0:
            raise ValueError(f"couplings must be >= 0, got j1={self.j1}, j2={self.j2}")
        for name in ("gamma", "delta1", "delta2", "j1", "j2", "pump", "ns"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def with_pump(self, pump: float) -> "DimerParams":
        return DimerParams(self.gamma, self.delta1, self.delta2,
                           self.j1, self.j2, pump, self.ns)


@dataclass(frozen=True)
class EffectiveDetunings:
    """Shifted detunings d_j = Δ_j - J_j of the guide-symmetric sector."""

    d1: float
    d2: float


@dataclass(frozen=True)
class NormalizationContext:
    """Physical quantities needed to translate a propagation coupling into
    normalized units.

    kappa         -- nonlinear coupling (arbitrary units, > 0)
    gamma1        -- FH input-mirror loss rate (1/time)
    cavity_length -- cavity length L_cav
    transmission1 -- FH intensity transmission T1 of the input mirror (0, 1]
    round_trip_time -- cavity round-trip time τ
    """

    kappa: float
    gamma1: float
    cavity_length: float
    transmission1: float
    round_trip_time: float

    def __post_init__(self) -> None:
        for name in ("kappa", "gamma1", "cavity_length", "transmission1",
                     "round_trip_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.transmission1 > 1:
            raise ValueError("transmission1 must be <= 1")

    @property
    def noise_strength(self) -> float:
        """n_s = κ²/γ1²."""
        return (self.kappa / self.gamma1) ** 2


@dataclass(frozen=True)
class SymmetricSteadyState:
    """Guide-symmetric steady state: both guides share (Ī1, Ī2, φ1, φ2)."""

    i1: float
    i2: float
    phi1: float
    phi2: float
    a1: complex
    a2: complex
    branch: str = "lower"
    multiplicity: int = 1


@dataclass(frozen=True)
class ModeProfilePair:
    """Sampled transverse mode profiles of the two isolated guides.

    Profiles are normalized to ∫ u² dx = 1 on the supplied grid.
    ``overlap_window`` bounds the region where the product u_A u_B is
    integrated (the far-side core of the neighbouring guide).
    """

    grid: np.ndarray
    u_a: np.ndarray
    u_b: np.ndarray
    k1: float
    beta: float
    index_contrast: float
    overlap_window: tuple[float, float]
    norm_tol: float = 1e-4

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "u_a", np.asarray(self.u_a, dtype=float))
        object.__setattr__(self, "u_b", np.asarray(self.u_b, dtype=float))
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing 1-D")
        if self.u_a.shape != grid.shape or self.u_b.shape != grid.shape:
            raise ValueError("profiles must be sampled on the common grid")
        for name, u in (("u_a", self.u_a), ("u_b", self.u_b)):
            norm = np.trapezoid(u * u, grid)
            if abs(norm - 1.0) > self.norm_tol:
                raise ValueError(
                    f"{name} not normalized: integral of u^2 is {norm:.6g}")


def effective_detunings(params: DimerParams) -> EffectiveDetunings:
    """d_j = Δ_j - J_j."""
    return EffectiveDetunings(params.delta1 - params.j1,
                              params.delta2 - params.j2)


def _cubic_coefficients(params: DimerParams) -> tuple[float, float, float]:
    """Coefficients (c3, c2, c1) of E² = c3 Ī1³ + c2 Ī1² + c1 Ī1."""
    d = effective_detunings(params)
    q = d.d2 ** 2 + params.gamma ** 2
    return 1.0 / (4.0 * q), (params.gamma - d.d1 * d.d2) / q, d.d1 ** 2 + 1.0


def pump_for_intensity(params: DimerParams, i1: float) -> float:
    """Pump power E² that sustains the FH intensity Ī1 on a symmetric branch.

    Always finite: the denominator d2² + γ² is positive for γ > 0.
    """
    if i1 < 0:
        raise ValueError("i1 must be >= 0")
    c3, c2, c1 = _cubic_coefficients(params)
    return ((c3 * i1 + c2) * i1 + c1) * i1


def sh_steady_intensity(params: DimerParams, i1: float) -> float:
    """SH intensity Ī2 = Ī1² / [4 (d2² + γ²)]."""
    if i1 < 0:
        raise ValueError("i1 must be >= 0")
    d = effective_detunings(params)
    return i1 ** 2 / (4.0 * (d.d2 ** 2 + params.gamma ** 2))


def _wrap_phase(phi: float) -> float:
    """Reduce an angle into (-π, π]."""
    r = phi % (2.0 * math.pi)
    return r - 2.0 * math.pi if r > math.pi else r


def steady_phases(params: DimerParams, i1: float) -> tuple[float, float]:
    """Steady-state phases (φ1, φ2), each reduced into (-π, π]."""
    if i1 < 0:
        raise ValueError("i1 must be >= 0")
    d = effective_detunings(params)
    phi1 = -cmath.phase(1.0 - 1j * d.d1 + i1 / (2.0 * (params.gamma - 1j * d.d2)))
    phi2 = -cmath.phase(-params.gamma + 1j * d.d2) + 2.0 * phi1
    return _wrap_phase(phi1), _wrap_phase(phi2)


def _make_state(params: DimerParams, i1: float, branch: str,
                multiplicity: int) -> SymmetricSteadyState:
    i2 = sh_steady_intensity(params, i1)
    phi1, phi2 = steady_phases(params, i1)
    return SymmetricSteadyState(
        i1=i1, i2=i2, phi1=phi1, phi2=phi2,
        a1=math.sqrt(i1) * cmath.exp(1j * phi1),
        a2=math.sqrt(i2) * cmath.exp(1j * phi2),
        branch=branch, multiplicity=multiplicity)


_BRANCH_NAMES = {1: ("lower",), 2: ("lower", "upper"),
                 3: ("lower", "middle", "upper")}


def solve_symmetric_steady_states(params: DimerParams) -> list[SymmetricSteadyState]:
    """All symmetric steady states at the given pump, ordered by ascending Ī1.

    The real cubic in Ī1 is solved through companion-matrix eigenvalues,
    which stays well behaved near double roots (turning points).  Roots with
    residual imaginary part below 1e-9·(1+|root|) are accepted; nearly
    coincident roots are merged so an exact fold reports two states.
    """
    if params.pump == 0.0:
        return [_make_state(params, 0.0, "lower", 1)]
    c3, c2, c1 = _cubic_coefficients(params)
    roots = np.roots([c3, c2, c1, -params.pump ** 2])
    real = []
    for z in roots:
        tol = 1e-9 * (1.0 + abs(z.real))
        if abs(z.imag) < tol and z.real >= -1e-12:
            real.append(max(z.real, 0.0))
    real.sort()
    merged: list[float] = []
    for r in real:
        if merged and abs(r - merged[-1]) <= 1e-9 * (1.0 + abs(r)):
            continue
        merged.append(r)
    names = _BRANCH_NAMES[len(merged)]
    return [_make_state(params, r, names[k], len(merged))
            for k, r in enumerate(merged)]


def bistability_predicate(eff: EffectiveDetunings, gamma: float) -> bool:
    """Closed-form test for the existence of a three-root pump window.

    True iff d1·d2 > 0 and |d2|(|d1| - √3) / (√3 |d1| + 1) > γ.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if eff.d1 * eff.d2 <= 0:
        return False
    x, y = abs(eff.d1), abs(eff.d2)
    return y * (x - math.sqrt(3.0)) / (math.sqrt(3.0) * x + 1.0) > gamma


def deterministic_drift(params: DimerParams,
                        a1: complex, a2: complex,
                        b1: complex, b2: complex) -> np.ndarray:
    """Noise-free right-hand side for the four intracavity fields."""
    g, d1, d2 = params.gamma, params.delta1, params.delta2
    j1, j2, e = params.j1, params.j2, params.pump
    return np.array([
        (-1.0 + 1j * d1) * a1 + np.conj(a1) * a2 - 1j * j1 * b1 + e,
        (-g + 1j * d2) * a2 - 0.5 * a1 * a1 - 1j * j2 * b2,
        (-1.0 + 1j * d1) * b1 + np.conj(b1) * b2 - 1j * j1 * a1 + e,
        (-g + 1j * d2) * b2 - 0.5 * b1 * b1 - 1j * j2 * a2,
    ])


def drift_residual(state: SymmetricSteadyState, params: DimerParams) -> float:
    """Max |drift| at the symmetric state; ~0 for a genuine steady state."""
    f = deterministic_drift(params, state.a1, state.a2, state.a1, state.a2)
    return float(np.abs(f).max())


def output_carriers(state: SymmetricSteadyState, params: DimerParams,
                    carrier: str = "detected") -> tuple[complex, complex]:
    """Classical output amplitudes (w1, w2) used as photon-number weights.

    "detected" is the boundary-condition mean of the actual output beam,
    w1 = √2·𝒜1 - E/√2 (the FH beam interferes with the reflected pump),
    w2 = √(2γ)·𝒜2.  "intracavity" drops the pump term, w1 = √2·𝒜1, which
    reproduces the bare intracavity-weighted spectra (|w_j|² = 2γ̄_j Ī_j
    exactly).  The two coincide for the SH.
    """
    w2 = math.sqrt(2.0 * params.gamma) * state.a2
    w1 = math.sqrt(2.0) * state.a1
    if carrier == "detected":
        w1 = w1 - params.pump / math.sqrt(2.0)
    elif carrier != "intracavity":
        raise ValueError(f"unknown carrier {carrier!r}")
    return w1, w2


def coupling_overlap_integral(profiles: ModeProfilePair) -> float:
    """Propagation-equation coupling constant (units 1/length).

    Trapezoidal quadrature of
        (n_co² - n_cl²)/2 · k1²/β · ∫ u_A u_B dx
    over the overlap window.  The grid must cover the window.
    """
    lo, hi = profiles.overlap_window
    if lo > hi:
        lo, hi = hi, lo
    grid = profiles.grid
    if lo < grid[0] or hi > grid[-1]:
        raise ValueError(
            f"grid [{grid[0]:g}, {grid[-1]:g}] does not cover the overlap "
            f"window [{lo:g}, {hi:g}]")
    integrand = profiles.u_a * profiles.u_b
    inside = (grid > lo) & (grid < hi)
    xs = np.concatenate(([lo], grid[inside], [hi]))
    ys = np.concatenate(([np.interp(lo, grid, integrand)],
                         integrand[inside],
                         [np.interp(hi, grid, integrand)]))
    overlap = np.trapezoid(ys, xs)
    return profiles.index_contrast * profiles.k1 ** 2 / profiles.beta * overlap


def normalized_coupling(jprop: float, ctx: NormalizationContext) -> float:
    """Normalized coupling J̃ = J_prop · 2 L_cav / T1."""
    return jprop * 2.0 * ctx.cavity_length / ctx.transmission1
