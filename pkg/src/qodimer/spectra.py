"""Semi-analytic photon-number correlation spectra of the output beams.

The stationary normally-ordered spectral matrix of the linearized system,

    S(ω) = (-iω I - A)⁻¹ D (iω I - Aᵀ)⁻¹,

feeds quadratic forms that assemble the shot-noise-normalized variances of
sums/differences of output intensities.  A pair observable (O_j, O'_k) with
classical output carriers (w_j, w_k) gives

    V̄(±; ω) = 1 + uᵀ S(ω) u / (|w_j|² + |w_k|²),
    u[O_j]  = √(2 γ̄_j) w_j*,   u[O_j†]  = √(2 γ̄_j) w_j,
    u[O'_k] = ±√(2 γ̄_k) w_k*,  u[O'_k†] = ±√(2 γ̄_k) w_k,

with γ̄ = 1 (FH) or γ (SH).  For the intracavity carrier w_j = √(2γ̄_j) 𝒜_j
this reduces to the familiar closed forms in terms of the single-mode
normally-ordered spectra (see ``single_mode_normal_spectrum``); the detected
carrier keeps the pump contribution to the FH output beam and is the default.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import DimerParams, SymmetricSteadyState, output_carriers
from .stability import LinearizedSystem

__all__ = [
    "SpectralMatrix",
    "SpectrumSeries",
    "SpectralSingularityError",
    "PAIR_OBSERVABLES",
    "MONOMER_MODES",
    "spectral_matrix",
    "spectral_matrix_from_matrices",
    "single_mode_normal_spectrum",
    "dimer_spectrum",
    "monomer_spectrum",
    "shot_noise_level",
    "pair_weight_vector",
    "default_omega_grid",
    "COND_LIMIT",
]

#: (-iωI - A) condition numbers beyond this mark the point as missing
COND_LIMIT = 1e12

#: slot of each field in the 8-component fluctuation basis
_SLOT = {"A1": 0, "A2": 2, "B1": 4, "B2": 6}

PAIR_OBSERVABLES = ("A1A2", "A1B2", "A1B1", "A2B2")
MONOMER_MODES = ("fh", "sh")


class SpectralSingularityError(RuntimeError):
    """(-iωI - A) is numerically singular (neutral eigenvalue at this ω)."""

    def __init__(self, omega: float, cond: float):
        super().__init__(
            f"spectral matrix ill-conditioned at omega={omega:.6g} "
            f"(cond {cond:.3g} > {COND_LIMIT:.0e}); the state sits at or "
            "beyond an instability threshold")
        self.omega = omega
        self.cond = cond


@dataclass(frozen=True)
class SpectralMatrix:
    omega: float
    entries: np.ndarray


@dataclass(frozen=True)
class SpectrumSeries:
    """Shot-noise-normalized variance on a frequency grid.

    ``values`` tend to 1 at large |ω|.  ``shot_noise`` is the absolute
    normalization C_SN (includes the 1/n_s factor).  ``missing`` lists grid
    frequencies dropped for sitting on a neutral eigenvalue.
    """

    observable: str
    sign: str | None
    omega: np.ndarray
    values: np.ndarray
    shot_noise: float
    stat_err: np.ndarray | None = None
    missing: tuple[float, ...] = ()
    meta: dict = field(default_factory=dict)

    def minimum(self) -> tuple[float, float]:
        """(ω, V̄) at the global minimum, NaN-safe."""
        k = int(np.nanargmin(self.values))
        return float(self.omega[k]), float(self.values[k])


def default_omega_grid(omega_max: float = 20.0, points: int = 512) -> np.ndarray:
    return np.linspace(-omega_max, omega_max, points)


def spectral_matrix(sys: LinearizedSystem, omega: float,
                    check_condition: bool = True) -> SpectralMatrix:
    """S(ω) = (-iωI - A)⁻¹ D (iωI - Aᵀ)⁻¹ via LU solves.

    The noise-strength factor 1/n_s is deliberately absent; it cancels in
    every shot-noise-normalized quantity.
    """
    return spectral_matrix_from_matrices(sys.drift, sys.diffusion, omega,
                                         check_condition)


def spectral_matrix_from_matrices(a: np.ndarray, d: np.ndarray, omega: float,
                                  check_condition: bool = True,
                                  ) -> SpectralMatrix:
    """Generic-dimension stationary spectral matrix (n=1 gives a Lorentzian)."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    d = np.atleast_2d(np.asarray(d, dtype=complex))
    n = a.shape[0]
    eye = np.eye(n)
    m = -1j * omega * eye - a
    if check_condition:
        cond = np.linalg.cond(m)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SpectralSingularityError(float(omega), float(cond))
    left = np.linalg.solve(m, d)
    # right-multiply by (iωI - Aᵀ)⁻¹ through a transposed solve
    entries = np.linalg.solve(1j * omega * eye - a, left.T).T
    return SpectralMatrix(omega=float(omega), entries=entries)


def single_mode_normal_spectrum(sys: LinearizedSystem,
                                state: SymmetricSteadyState,
                                mode: str, omega: float) -> float:
    """Normally-ordered single-mode intensity spectrum of one guide.

    Vⁿ_1(ω) = Ī1 (S₁₂(ω) + S₁₂(-ω) + 2 Re[S₁₁(ω) e^{-2iφ₁}]) for the FH,
    and the (3,4)/φ₂ analogue for the SH.  Both guides give the same value
    at a symmetric state.  Real up to roundoff; the imaginary residue is
    checked and discarded.
    """
    _check_consistency(sys, state)
    if mode not in MONOMER_MODES:
        raise ValueError(f"mode must be one of {MONOMER_MODES}")
    k = 0 if mode == "fh" else 2
    intensity = state.i1 if mode == "fh" else state.i2
    phase = state.phi1 if mode == "fh" else state.phi2
    s_pos = spectral_matrix(sys, omega).entries
    s_neg = spectral_matrix(sys, -omega).entries
    v = intensity * (s_pos[k, k + 1] + s_neg[k, k + 1]
                     + 2.0 * np.real(s_pos[k, k] * np.exp(-2j * phase)))
    if abs(v.imag) > 1e-10 * max(1.0, abs(v.real)):
        raise ArithmeticError(
            f"single-mode spectrum has imaginary residue {v.imag:.3e}")
    return float(v.real)


def _check_consistency(sys: LinearizedSystem, state: SymmetricSteadyState,
                       params: DimerParams | None = None) -> None:
    if sys.state is not state and not (
            np.isclose(sys.state.a1, state.a1)
            and np.isclose(sys.state.a2, state.a2)):
        raise ValueError("state does not match the one the system was built from")
    if params is not None and sys.params != params:
        raise ValueError("params do not match the ones the system was built from")


def _pair_fields(observable: str) -> tuple[str, str]:
    if observable not in PAIR_OBSERVABLES:
        raise ValueError(
            f"observable must be one of {PAIR_OBSERVABLES}, got {observable!r}")
    return observable[:2], observable[2:]


def pair_weight_vector(observable: str, sign: str,
                       state: SymmetricSteadyState, params: DimerParams,
                       carrier: str = "detected",
                       ) -> tuple[np.ndarray, float]:
    """Quadratic-form weights u and the shot normalization Σ|w|² (per n_s)."""
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    sgn = 1.0 if sign == "plus" else -1.0
    w1, w2 = output_carriers(state, params, carrier)
    u = np.zeros(8, dtype=complex)
    csn = 0.0
    for fld, factor in zip(_pair_fields(observable), (1.0, sgn)):
        w = w1 if fld in ("A1", "B1") else w2
        gbar = 1.0 if fld in ("A1", "B1") else params.gamma
        root = math.sqrt(2.0 * gbar)
        k = _SLOT[fld]
        u[k] += factor * root * np.conj(w)
        u[k + 1] += factor * root * w
        csn += abs(w) ** 2
    return u, csn


def _assemble(sys: LinearizedSystem, u: np.ndarray, csn: float,
              omega_grid: np.ndarray) -> tuple[np.ndarray, list[float]]:
    if csn <= 0.0 or not np.isfinite(csn):
        raise ValueError("shot-noise normalization undefined "
                         "(vanishing output carrier)")
    values = np.full(len(omega_grid), np.nan)
    missing: list[float] = []
    for k, omega in enumerate(omega_grid):
        try:
            s = spectral_matrix(sys, float(omega)).entries
        except SpectralSingularityError:
            missing.append(float(omega))
            continue
        v = u @ s @ u
        if abs(v.imag) > 1e-9 * max(1.0, csn, abs(v.real)):
            raise ArithmeticError(
                f"assembled variance has imaginary residue {v.imag:.3e} "
                f"at omega={omega:.6g}")
        values[k] = 1.0 + v.real / csn
    if missing:
        warnings.warn(
            f"{len(missing)} spectrum points dropped near a neutral "
            "eigenvalue", RuntimeWarning, stacklevel=3)
    return values, missing


def dimer_spectrum(sys: LinearizedSystem, state: SymmetricSteadyState,
                   params: DimerParams, observable: str, sign: str,
                   omega_grid: np.ndarray,
                   carrier: str = "detected") -> SpectrumSeries:
    """Normalized cross-guide / cross-harmonic intensity spectrum V̄^(±)(ω).

    Valid on guide-symmetric states only (the type encodes that).  With
    ``carrier="intracavity"`` the result equals the closed forms built from
    ``single_mode_normal_spectrum`` plus the printed cross-spectral terms.
    """
    _check_consistency(sys, state, params)
    u, csn = pair_weight_vector(observable, sign, state, params, carrier)
    omega_grid = np.asarray(omega_grid, dtype=float)
    values, missing = _assemble(sys, u, csn, omega_grid)
    return SpectrumSeries(
        observable=observable, sign=sign, omega=omega_grid, values=values,
        shot_noise=csn / params.ns, missing=tuple(missing),
        meta={"carrier": carrier, "kind": "analytic"})


def monomer_spectrum(sys: LinearizedSystem, state: SymmetricSteadyState,
                     params: DimerParams, mode: str,
                     omega_grid: np.ndarray,
                     carrier: str = "detected") -> SpectrumSeries:
    """Single-guide normalized intensity spectrum V̄_j(ω) = 1 + 2γ̄_j Vⁿ_j/Ī_j
    (intracavity carrier) or its detected-carrier generalization."""
    _check_consistency(sys, state, params)
    if mode not in MONOMER_MODES:
        raise ValueError(f"mode must be one of {MONOMER_MODES}")
    intensity = state.i1 if mode == "fh" else state.i2
    if intensity <= 0.0:
        raise ValueError("shot-noise normalization undefined at zero intensity")
    w1, w2 = output_carriers(state, params, carrier)
    w = w1 if mode == "fh" else w2
    gbar = 1.0 if mode == "fh" else params.gamma
    k = _SLOT["A1" if mode == "fh" else "A2"]
    u = np.zeros(8, dtype=complex)
    u[k] = math.sqrt(2.0 * gbar) * np.conj(w)
    u[k + 1] = math.sqrt(2.0 * gbar) * w
    omega_grid = np.asarray(omega_grid, dtype=float)
    values, missing = _assemble(sys, u, abs(w) ** 2, omega_grid)
    return SpectrumSeries(
        observable=mode, sign=None, omega=omega_grid, values=values,
        shot_noise=abs(w) ** 2 / params.ns, missing=tuple(missing),
        meta={"carrier": carrier, "kind": "analytic"})


def shot_noise_level(state: SymmetricSteadyState, params: DimerParams,
                     observable: str, carrier: str = "intracavity") -> float:
    """Absolute shot-noise level C_SN of a pair observable or monomer mode.

    With the intracavity carrier this is exactly 2 n_s⁻¹ (γ̄_j Ī_j + γ̄_k Ī_k)
    for pairs and 2 γ̄_j n_s⁻¹ Ī_j for single modes; the detected carrier
    replaces |w|² = 2γ̄Ī by the measured output flux.
    """
    w1, w2 = output_carriers(state, params, carrier)
    if observable in MONOMER_MODES:
        w = w1 if observable == "fh" else w2
        return abs(w) ** 2 / params.ns
    total = 0.0
    for fld in _pair_fields(observable):
        total += abs(w1 if fld in ("A1", "B1") else w2) ** 2
    return total / params.ns
