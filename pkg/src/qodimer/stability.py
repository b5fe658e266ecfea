"""Linearization around symmetric steady states and instability analysis.

The fluctuation vector is ordered
    Δw = (ΔA1, ΔA1†, ΔA2, ΔA2†, ΔB1, ΔB1†, ΔB2, ΔB2†)
so the 8×8 drift matrix is block-circulant under the A↔B swap,
A = [[M, X], [X, M]], with a diagonal cross block X = diag(∓iJ).  The
guide-symmetric sector M+X equals the single-waveguide matrix at the
shifted detunings d_j = Δ_j - J_j; the antisymmetric sector is M-X.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    DimerParams,
    SymmetricSteadyState,
    effective_detunings,
    solve_symmetric_steady_states,
    bistability_predicate,
)

__all__ = [
    "BASIS_LABELS",
    "LinearizedSystem",
    "EigenSpectrum",
    "StabilityTag",
    "StaticSubtype",
    "StabilityClass",
    "ClassificationError",
    "BranchDisappearedError",
    "ThresholdError",
    "build_linearized_system",
    "eigen_spectrum",
    "classify_state",
    "critical_pump_threshold",
    "find_threshold_bracket",
    "PlaneSpec",
    "ScanCell",
    "scan_bifurcation",
    "STABILITY_RE_TOL",
    "IMAG_TOL",
]

BASIS_LABELS = ("dA1", "dA1+", "dA2", "dA2+", "dB1", "dB1+", "dB2", "dB2+")

#: eigenvalue real parts within this of zero count as neutral
STABILITY_RE_TOL = 1e-9
#: |Im λ| below this counts as a static (non-oscillatory) eigenvalue
IMAG_TOL = 1e-7

def swap_matrix() -> np.ndarray:
    """Permutation exchanging the A and B fluctuation slots."""
    s = np.zeros((8, 8))
    s[:4, 4:] = np.eye(4)
    s[4:, :4] = np.eye(4)
    return s


class ClassificationError(RuntimeError):
    """Dominant eigenvector has no clean swap parity and no fallback applies."""


class BranchDisappearedError(RuntimeError):
    """Requested branch ceases to exist inside a pump bracket (fold)."""


class ThresholdError(RuntimeError):
    """Bisection bracket invalid or threshold kind mismatch."""


@dataclass(frozen=True)
class LinearizedSystem:
    """8×8 fluctuation drift A, diffusion D and a factor B with BᵀB = D."""

    drift: np.ndarray
    diffusion: np.ndarray
    noise_factor: np.ndarray
    state: SymmetricSteadyState
    params: DimerParams
    basis: tuple[str, ...] = BASIS_LABELS

    def internal_block(self) -> np.ndarray:
        """Single-guide block (carries the raw detunings Δ_j)."""
        return self.drift[:4, :4].copy()

    def cross_block(self) -> np.ndarray:
        """Diagonal cross-coupling block diag(-iJ1, iJ1, -iJ2, iJ2)."""
        return self.drift[:4, 4:].copy()

    def symmetric_block(self) -> np.ndarray:
        """Guide-symmetric sector M+X: the equivalent single-waveguide
        matrix at the shifted detunings d_j (upper-left entry -1+i·d1)."""
        return self.drift[:4, :4] + self.drift[:4, 4:]

    def antisymmetric_block(self) -> np.ndarray:
        """Guide-antisymmetric sector M-X."""
        return self.drift[:4, :4] - self.drift[:4, 4:]


def build_linearized_system(state: SymmetricSteadyState,
                            params: DimerParams) -> LinearizedSystem:
    """Assemble drift, diffusion and noise factor at a symmetric state.

    The diffusion matrix is diagonal, diag(𝒜2, 𝒜2*, 0, 0, 𝒜2, 𝒜2*, 0, 0);
    B is its principal complex square root (diagonal), so BᵀB = D exactly.
    """
    g, d1, d2 = params.gamma, params.delta1, params.delta2
    a1, a2 = state.a1, state.a2
    m = np.array([
        [-1.0 + 1j * d1, a2, np.conj(a1), 0.0],
        [np.conj(a2), -1.0 - 1j * d1, 0.0, a1],
        [-a1, 0.0, -g + 1j * d2, 0.0],
        [0.0, -np.conj(a1), 0.0, -g - 1j * d2],
    ], dtype=complex)
    x = np.diag([-1j * params.j1, 1j * params.j1,
                 -1j * params.j2, 1j * params.j2])
    drift = np.block([[m, x], [x, m]])
    diag_d = np.array([a2, np.conj(a2), 0.0, 0.0,
                       a2, np.conj(a2), 0.0, 0.0], dtype=complex)
    diffusion = np.diag(diag_d)
    noise_factor = np.diag(np.sqrt(diag_d))
    return LinearizedSystem(drift=drift, diffusion=diffusion,
                            noise_factor=noise_factor,
                            state=state, params=params)


@dataclass(frozen=True)
class EigenSpectrum:
    """Eigenvalues of the fluctuation drift with the dominant one singled out."""

    values: np.ndarray
    dominant: int
    dominant_vector: np.ndarray

    @property
    def dominant_value(self) -> complex:
        return complex(self.values[self.dominant])


def eigen_spectrum(sys: LinearizedSystem) -> EigenSpectrum:
    """All eight eigenvalues; dominant = max Re, ties broken by larger |Im|
    then by index."""
    if not np.all(np.isfinite(sys.drift)):
        raise ValueError("drift matrix has non-finite entries")
    try:
        values, vectors = np.linalg.eig(sys.drift)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise np.linalg.LinAlgError(
            f"eigen-solver failed on drift matrix:\n{sys.drift!r}") from exc
    order = sorted(range(8),
                   key=lambda k: (-values[k].real, -abs(values[k].imag), k))
    dom = order[0]
    return EigenSpectrum(values=values, dominant=dom,
                         dominant_vector=vectors[:, dom])


class StabilityTag(enum.Enum):
    STABLE_SYMMETRIC = "stable"
    STATIC_INSTABILITY = "static"
    HOPF_INSTABILITY = "hopf"


class StaticSubtype(enum.Enum):
    BISTABLE_FOLD = "fold"
    ASYMMETRIC_TRANSITION = "asymmetric"


@dataclass(frozen=True)
class StabilityClass:
    tag: StabilityTag
    critical_eigenvalue: complex
    subtype: StaticSubtype | None = None
    frequency: float | None = None

    def label(self) -> str:
        if self.tag is StabilityTag.STABLE_SYMMETRIC:
            return "stable"
        if self.tag is StabilityTag.HOPF_INSTABILITY:
            return "hopf"
        return self.subtype.value if self.subtype else "static"


def _swap_parity(vec: np.ndarray, tol: float) -> StaticSubtype | None:
    """Swap parity of an eigenvector: fold (symmetric) or asymmetric."""
    scale = float(np.linalg.norm(vec))
    sym_err = float(np.linalg.norm(vec[:4] - vec[4:]))
    asym_err = float(np.linalg.norm(vec[:4] + vec[4:]))
    if sym_err <= tol * scale and asym_err > tol * scale:
        return StaticSubtype.BISTABLE_FOLD
    if asym_err <= tol * scale and sym_err > tol * scale:
        return StaticSubtype.ASYMMETRIC_TRANSITION
    return None


def _sector_membership(sys: LinearizedSystem, lam: complex,
                       tol: float) -> StaticSubtype | None:
    """Resolve parity through sector spectra when the eigenvector is an
    arbitrary mixture of a degenerate pair."""
    scale = max(1.0, float(np.abs(sys.drift).max()))
    in_sym = np.abs(np.linalg.eigvals(sys.symmetric_block()) - lam).min() \
        < tol * scale
    in_asym = np.abs(np.linalg.eigvals(sys.antisymmetric_block()) - lam).min() \
        < tol * scale
    if in_sym and not in_asym:
        return StaticSubtype.BISTABLE_FOLD
    if in_asym and not in_sym:
        return StaticSubtype.ASYMMETRIC_TRANSITION
    return None


def classify_state(spec: EigenSpectrum, multiplicity: int = 1,
                   stab_tol: float = STABILITY_RE_TOL,
                   imag_tol: float = IMAG_TOL,
                   parity_tol: float = 1e-6,
                   sys: LinearizedSystem | None = None) -> StabilityClass:
    """Classify a symmetric state from its dominant eigenvalue.

    Stable if Re λ < -stab_tol.  Otherwise a Hopf instability when the
    dominant eigenvalue oscillates (|Im λ| > imag_tol), else a static
    instability subtyped by the swap parity of the dominant eigenvector:
    symmetric -> bistable fold, antisymmetric -> asymmetric transition.
    When the vector parity is ambiguous the sector spectra (if ``sys`` is
    given) and then the root count (3 roots -> fold) break the tie; a
    genuinely two-sided degeneracy is reported as an error, not guessed.
    """
    lam = spec.dominant_value
    if lam.real < -stab_tol:
        return StabilityClass(StabilityTag.STABLE_SYMMETRIC, lam)
    if abs(lam.imag) > imag_tol:
        return StabilityClass(StabilityTag.HOPF_INSTABILITY, lam,
                              frequency=abs(lam.imag))
    subtype = _swap_parity(spec.dominant_vector, parity_tol)
    if subtype is None and sys is not None:
        subtype = _sector_membership(sys, lam, 1e-8)
    if subtype is None and multiplicity == 3:
        subtype = StaticSubtype.BISTABLE_FOLD
    if subtype is None:
        raise ClassificationError(
            "dominant eigenvector is neither swap-symmetric nor "
            f"antisymmetric within tolerance {parity_tol:g} "
            f"(eigenvalue {lam:.6g}, multiplicity {multiplicity})")
    return StabilityClass(StabilityTag.STATIC_INSTABILITY, lam, subtype=subtype)


def _branch_state(params: DimerParams, branch: str) -> SymmetricSteadyState:
    states = solve_symmetric_steady_states(params)
    for s in states:
        if s.branch == branch:
            return s
    raise BranchDisappearedError(
        f"branch {branch!r} does not exist at pump {params.pump:g} "
        f"(root count {len(states)})")


def _max_re(params: DimerParams, branch: str) -> tuple[float, EigenSpectrum, int]:
    state = _branch_state(params, branch)
    spec = eigen_spectrum(build_linearized_system(state, params))
    return spec.dominant_value.real, spec, state.multiplicity


def critical_pump_threshold(params: DimerParams, kind: str,
                            bracket: tuple[float, float],
                            branch: str = "lower",
                            tol: float = 1e-6) -> float:
    """Pump amplitude at which the branch's dominant eigenvalue crosses zero.

    Bisects max Re λ(E) to |E_hi - E_lo| < tol and then checks that the
    crossing eigenvalue is of the requested kind ("hopf": |Im λ| > imag
    tolerance, "static": |Im λ| below it).  A fold inside the bracket
    raises BranchDisappearedError naming the pump where the branch vanished.
    """
    if kind not in ("hopf", "static"):
        raise ValueError("kind must be 'hopf' or 'static'")
    e_lo, e_hi = bracket
    if not 0 <= e_lo < e_hi:
        raise ThresholdError(f"invalid bracket {bracket}")
    try:
        g_lo, _, _ = _max_re(params.with_pump(e_lo), branch)
        g_hi, _, _ = _max_re(params.with_pump(e_hi), branch)
    except BranchDisappearedError as exc:
        raise BranchDisappearedError(
            f"branch {branch!r} missing at a bracket endpoint: {exc}") from exc
    if not g_lo < 0 <= g_hi:
        raise ThresholdError(
            f"max Re λ does not change sign on bracket: g({e_lo:g})={g_lo:.3e},"
            f" g({e_hi:g})={g_hi:.3e}")
    while e_hi - e_lo > tol:
        e_mid = 0.5 * (e_lo + e_hi)
        try:
            g_mid, _, _ = _max_re(params.with_pump(e_mid), branch)
        except BranchDisappearedError as exc:
            raise BranchDisappearedError(
                f"branch {branch!r} disappears near pump {e_mid:.6g} "
                f"inside the bracket (fold): {exc}") from exc
        if g_mid < 0:
            e_lo = e_mid
        else:
            e_hi = e_mid
    e_c = 0.5 * (e_lo + e_hi)
    _, spec, _ = _max_re(params.with_pump(e_hi), branch)
    lam = spec.dominant_value
    is_hopf = abs(lam.imag) > IMAG_TOL
    if kind == "hopf" and not is_hopf:
        raise ThresholdError(
            f"crossing eigenvalue {lam:.6g} at E={e_c:.6g} is static, "
            "not a Hopf pair")
    if kind == "static" and is_hopf:
        raise ThresholdError(
            f"crossing eigenvalue {lam:.6g} at E={e_c:.6g} oscillates, "
            "not a static crossing")
    return e_c


def find_threshold_bracket(params: DimerParams, branch: str = "lower",
                           e_max: float = 400.0, n: int = 160,
                           ) -> tuple[float, float]:
    """First sign change of max Re λ(E) on a geometric-ish pump grid."""
    grid = np.linspace(0.0, e_max, n + 1)[1:]
    prev_e, prev_g = None, None
    for e in grid:
        try:
            g, _, _ = _max_re(params.with_pump(float(e)), branch)
        except BranchDisappearedError:
            prev_e, prev_g = None, None
            continue
        if prev_g is not None and prev_g < 0 <= g:
            return float(prev_e), float(e)
        prev_e, prev_g = e, g
    raise ThresholdError(
        f"no instability of branch {branch!r} found for pump <= {e_max:g}")


# ---------------------------------------------------------------------------
# parameter-plane scans

_AXES = ("delta", "delta1", "delta2", "j1", "j2", "gamma", "pump")


@dataclass(frozen=True)
class PlaneSpec:
    """Axes of a bifurcation scan.  "delta" sets both detunings at once."""

    x_axis: str
    x_values: np.ndarray
    y_axis: str
    y_values: np.ndarray

    def __post_init__(self) -> None:
        for ax in (self.x_axis, self.y_axis):
            if ax not in _AXES:
                raise ValueError(f"unknown axis {ax!r}; choose from {_AXES}")
        if self.x_axis == self.y_axis:
            raise ValueError("axes must differ")


@dataclass
class ScanCell:
    x: float
    y: float
    max_roots: int = 0
    bistable: bool = False
    predicate_bistable: bool = False
    onset_pump: float | None = None
    onset_class: str | None = None
    upper_class: str | None = None
    error: str | None = None


def _apply_axis(params: DimerParams, axis: str, value: float) -> DimerParams:
    if axis == "delta":
        kw = {"delta1": value, "delta2": value}
    else:
        kw = {axis: value}
    fields = {"gamma": params.gamma, "delta1": params.delta1,
              "delta2": params.delta2, "j1": params.j1, "j2": params.j2,
              "pump": params.pump, "ns": params.ns}
    fields.update(kw)
    return DimerParams(**fields)


def _pump_sweep_for(params: DimerParams, pump_values: np.ndarray) -> np.ndarray:
    return pump_values[pump_values > 0]


def fold_pump_window(params: DimerParams) -> tuple[float, float] | None:
    """Pump interval with three coexisting branches, from the turning points
    of the pump-intensity cubic; None when the branch map is monotone."""
    from .model import _cubic_coefficients, pump_for_intensity

    c3, c2, c1 = _cubic_coefficients(params)
    disc = c2 ** 2 - 3.0 * c3 * c1
    if c2 >= 0 or disc <= 0:
        return None
    root = math.sqrt(disc)
    i_lo = (-c2 - root) / (3.0 * c3)
    i_hi = (-c2 + root) / (3.0 * c3)
    if i_lo <= 0:
        return None
    e2_hi = pump_for_intensity(params, i_lo)
    e2_lo = pump_for_intensity(params, i_hi)
    if e2_lo >= e2_hi:
        return None
    return math.sqrt(max(e2_lo, 0.0)), math.sqrt(e2_hi)


def _classify_cell(params: DimerParams, pump_values: np.ndarray) -> ScanCell:
    """Root counting and first-instability classification over a pump sweep."""
    cell = ScanCell(x=math.nan, y=math.nan)
    cell.predicate_bistable = bistability_predicate(
        effective_detunings(params), params.gamma)
    # a coarse sweep can step over a narrow fold window; probe its center
    window = fold_pump_window(params)
    sweep = _pump_sweep_for(params, pump_values)
    if window is not None:
        sweep = np.sort(np.append(sweep, 0.5 * (window[0] + window[1])))
    upper_seen_stable = False
    for e in sweep:
        p = params.with_pump(float(e))
        states = solve_symmetric_steady_states(p)
        cell.max_roots = max(cell.max_roots, len(states))
        if len(states) >= 3:
            cell.bistable = True
        base = states[0]
        if cell.onset_class is None and cell.error is None:
            sys0 = build_linearized_system(base, p)
            try:
                cls = classify_state(eigen_spectrum(sys0),
                                     multiplicity=len(states), sys=sys0)
            except ClassificationError as exc:
                cell.error = f"pump {e:g}: {exc}"
            else:
                if cls.tag is not StabilityTag.STABLE_SYMMETRIC:
                    cell.onset_pump = float(e)
                    cell.onset_class = cls.label()
        if len(states) >= 2 and cell.upper_class is None:
            sys_u = build_linearized_system(states[-1], p)
            try:
                cls_u = classify_state(eigen_spectrum(sys_u),
                                       multiplicity=len(states), sys=sys_u)
            except ClassificationError as exc:
                if cell.error is None:
                    cell.error = f"upper branch, pump {e:g}: {exc}"
                continue
            if cls_u.tag is not StabilityTag.STABLE_SYMMETRIC:
                cell.upper_class = cls_u.label()
            else:
                upper_seen_stable = True
    if cell.upper_class is None and upper_seen_stable:
        cell.upper_class = "stable"
    return cell


def scan_bifurcation(plane: PlaneSpec, fixed: DimerParams,
                     pump_values: np.ndarray) -> list[list[ScanCell]]:
    """Classify every cell of the plane; per-cell failures are recorded
    in-cell and the scan continues."""
    pump_values = np.asarray(pump_values, dtype=float)
    rows = []
    for y in plane.y_values:
        row = []
        for x in plane.x_values:
            try:
                p = _apply_axis(_apply_axis(fixed, plane.x_axis, float(x)),
                                plane.y_axis, float(y))
                if "pump" in (plane.x_axis, plane.y_axis):
                    sweep = np.array([p.pump])
                else:
                    sweep = pump_values
                cell = _classify_cell(p, sweep)
            except Exception as exc:  # per-cell failure, keep scanning
                cell = ScanCell(x=float(x), y=float(y), error=str(exc))
            cell.x, cell.y = float(x), float(y)
            row.append(cell)
        rows.append(row)
    return rows
