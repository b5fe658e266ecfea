"""Truncated-Wigner stochastic integration and spectrum estimation.

One trajectory integrates the four intracavity fields with the Heun
predictor-corrector scheme under additive vacuum noise, then forms windowed
output fields through the input-output boundary condition

    out_j = sqrt(2 γ̄_j) <field_j>_window - <input_j>_window,

where the input window average contains the classical pump (FH only) and the
very same noise increments that drove the integration, so input-output
correlations survive the windowing.  Two-time correlations of the output
fluctuation vector feed discrete Wiener-Khintchine spectra normalized to the
shot level of the output carriers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from numba import njit

from .model import DimerParams, SymmetricSteadyState, output_carriers
from .spectra import SpectrumSeries

__all__ = [
    "SimConfig",
    "FieldState",
    "OutputSample",
    "TrajectoryDivergedError",
    "DIVERGENCE_LIMIT",
    "sample_noise_increment",
    "heun_step",
    "classical_output_means",
    "integrate_output_windows",
    "integrate_trajectory",
    "CorrelationAccumulator",
    "accumulate_two_time_correlations",
    "estimate_spectra",
    "simulate_spectrum",
]

#: field norms beyond this abort a trajectory
DIVERGENCE_LIMIT = 1e6

#: component slot of each field in the 8-component output-fluctuation basis
_SLOT = {"A1": 0, "A2": 2, "B1": 4, "B2": 6}
#: index of each field in the compact 4-field layout (a1, a2, b1, b2)
_FIELD = {"A1": 0, "A2": 1, "B1": 2, "B2": 3}


class TrajectoryDivergedError(RuntimeError):
    def __init__(self, traj_index: int, time: float, norm: float):
        super().__init__(
            f"trajectory {traj_index} diverged at t={time:.6g} "
            f"(field norm {norm:.3g} > {DIVERGENCE_LIMIT:.0e}); "
            "check parameters against the stability module")
        self.traj_index = traj_index
        self.time = time


@dataclass(frozen=True)
class SimConfig:
    """Stochastic run configuration (times in normalized units).

    Defaults follow the desk-scale recipe: dt = 0.001, 40-step output
    windows (Δτ_win = 0.04), 512 correlation lags at one-window stride.
    """

    dt: float = 1e-3
    window_steps: int = 40
    lag_count: int = 512
    lag_stride: int = 1
    total_time: float = 2e4
    transient_time: float = 100.0
    seed: int = 0
    trajectories: int = 1

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.window_steps < 1:
            raise ValueError("window_steps must be >= 1")
        if self.lag_count < 2:
            raise ValueError("lag_count must be >= 2")
        if self.lag_stride < 1:
            raise ValueError("lag_stride must be >= 1")
        if self.transient_time < 0:
            raise ValueError("transient_time must be >= 0")
        if self.total_time <= 0:
            raise ValueError("total_time must be > 0")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")

    @property
    def window_time(self) -> float:
        return self.window_steps * self.dt

    @property
    def lag_spacing(self) -> float:
        return self.lag_stride * self.window_time

    def windows_per_trajectory(self) -> int:
        return int(round(self.total_time / self.trajectories / self.window_time))


@dataclass(frozen=True)
class FieldState:
    a1: complex
    a2: complex
    b1: complex
    b2: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.b1, self.b2], dtype=complex)

    def norm(self) -> float:
        return float(np.abs(self.as_array()).max())

    @staticmethod
    def from_steady(state: SymmetricSteadyState) -> "FieldState":
        return FieldState(state.a1, state.a2, state.a1, state.a2)


@dataclass(frozen=True)
class OutputSample:
    """Windowed output amplitudes at one window-center time."""

    time: float
    a_out1: complex
    a_out2: complex
    b_out1: complex
    b_out2: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.a_out1, self.a_out2, self.b_out1, self.b_out2],
                        dtype=complex)


def sample_noise_increment(rng: np.random.Generator, dt: float, ns: float,
                           mode: str, gamma: float | None = None,
                           size: int | None = None):
    """Integrated noise forcing for one step.

    The underlying increment W is complex Gaussian with <W* W> = dt/(2 n_s)
    and <W W> = 0 (independent quadratures of variance dt/(4 n_s) each).
    Returns √2·W for the FH and √(2γ)·W for the SH.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    std = math.sqrt(dt / (4.0 * ns))
    shape = () if size is None else (size,)
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * std
    if mode == "fh":
        return math.sqrt(2.0) * w
    if mode == "sh":
        if gamma is None:
            raise ValueError("gamma required for the SH increment")
        return math.sqrt(2.0 * gamma) * w
    raise ValueError("mode must be 'fh' or 'sh'")


def _drift4(y: np.ndarray, params: DimerParams) -> np.ndarray:
    g, d1, d2 = params.gamma, params.delta1, params.delta2
    j1, j2, e = params.j1, params.j2, params.pump
    a1, a2, b1, b2 = y
    return np.array([
        (-1.0 + 1j * d1) * a1 + np.conj(a1) * a2 - 1j * j1 * b1 + e,
        (-g + 1j * d2) * a2 - 0.5 * a1 * a1 - 1j * j2 * b2,
        (-1.0 + 1j * d1) * b1 + np.conj(b1) * b2 - 1j * j1 * a1 + e,
        (-g + 1j * d2) * b2 - 0.5 * b1 * b1 - 1j * j2 * a2,
    ])


def heun_step(state: FieldState, params: DimerParams, dt: float,
              noise: tuple[complex, complex, complex, complex]) -> FieldState:
    """One predictor-corrector step with the same noise realization in both
    stages: x̃ = x + dt f(x) + η,  x' = x + dt/2 [f(x) + f(x̃)] + η."""
    y = state.as_array()
    eta = np.asarray(noise, dtype=complex)
    f0 = _drift4(y, params)
    pred = y + dt * f0 + eta
    f1 = _drift4(pred, params)
    out = y + 0.5 * dt * (f0 + f1) + eta
    if np.abs(out).max() > DIVERGENCE_LIMIT:
        raise TrajectoryDivergedError(-1, math.nan, float(np.abs(out).max()))
    return FieldState(*out)


@njit(cache=True)
def _heun_chunk(y, w_raw, dt, gamma, delta1, delta2, j1, j2, pump,
                win_steps, field_sums, noise_sums):  # pragma: no cover - numba
    """Integrate one chunk; accumulate per-window field and raw-noise sums.

    Returns the step index of divergence, or -1.  ``y`` is the (4,) state,
    ``w_raw`` the (nsteps, 4) raw complex noise increments; the forcing on
    field j is sqrt(2 γ̄_j)·W_j.
    """
    s2 = math.sqrt(2.0)
    s2g = math.sqrt(2.0 * gamma)
    c1 = complex(-1.0, delta1)
    c2 = complex(-gamma, delta2)
    nsteps = w_raw.shape[0]
    for m in range(nsteps):
        a1, a2, b1, b2 = y[0], y[1], y[2], y[3]
        e1 = s2 * w_raw[m, 0]
        e2 = s2g * w_raw[m, 1]
        e3 = s2 * w_raw[m, 2]
        e4 = s2g * w_raw[m, 3]
        f1 = c1 * a1 + np.conj(a1) * a2 - 1j * j1 * b1 + pump
        f2 = c2 * a2 - 0.5 * a1 * a1 - 1j * j2 * b2
        f3 = c1 * b1 + np.conj(b1) * b2 - 1j * j1 * a1 + pump
        f4 = c2 * b2 - 0.5 * b1 * b1 - 1j * j2 * a2
        p1 = a1 + dt * f1 + e1
        p2 = a2 + dt * f2 + e2
        p3 = b1 + dt * f3 + e3
        p4 = b2 + dt * f4 + e4
        g1 = c1 * p1 + np.conj(p1) * p2 - 1j * j1 * p3 + pump
        g2 = c2 * p2 - 0.5 * p1 * p1 - 1j * j2 * p4
        g3 = c1 * p3 + np.conj(p3) * p4 - 1j * j1 * p1 + pump
        g4 = c2 * p4 - 0.5 * p3 * p3 - 1j * j2 * p2
        a1 = a1 + 0.5 * dt * (f1 + g1) + e1
        a2 = a2 + 0.5 * dt * (f2 + g2) + e2
        b1 = b1 + 0.5 * dt * (f3 + g3) + e3
        b2 = b2 + 0.5 * dt * (f4 + g4) + e4
        y[0], y[1], y[2], y[3] = a1, a2, b1, b2
        k = m // win_steps
        field_sums[k, 0] += a1
        field_sums[k, 1] += a2
        field_sums[k, 2] += b1
        field_sums[k, 3] += b2
        noise_sums[k, 0] += w_raw[m, 0]
        noise_sums[k, 1] += w_raw[m, 1]
        noise_sums[k, 2] += w_raw[m, 2]
        noise_sums[k, 3] += w_raw[m, 3]
        if m % win_steps == win_steps - 1:
            big = (abs(a1) > DIVERGENCE_LIMIT or abs(a2) > DIVERGENCE_LIMIT
                   or abs(b1) > DIVERGENCE_LIMIT or abs(b2) > DIVERGENCE_LIMIT)
            if big or not (math.isfinite(a1.real) and math.isfinite(a2.real)
                           and math.isfinite(b1.real) and math.isfinite(b2.real)):
                return m
    return -1


def _trajectory_rng(seed: int, traj_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(traj_index,)))


def classical_output_means(state: SymmetricSteadyState,
                           params: DimerParams) -> np.ndarray:
    """Boundary-condition means of the four windowed outputs
    (√2𝒜1 - E/√2, √(2γ)𝒜2, and the guide-B copies)."""
    w1, w2 = output_carriers(state, params, carrier="detected")
    return np.array([w1, w2, w1, w2], dtype=complex)


def integrate_output_windows(config: SimConfig, params: DimerParams,
                             initial: FieldState, traj_index: int = 0,
                             n_windows: int | None = None,
                             noise: bool = True) -> np.ndarray:
    """Windowed output amplitudes of one trajectory, shape (n_windows, 4).

    out_j = sqrt(2 γ̄_j)·<field_j>_win - E/√2·[j is FH] - <ξ_j>_win, the last
    term built from the very noise increments that drove the integration.
    Deterministic in (seed, traj_index, config); the transient span is
    integrated and discarded before recording.  ``noise=False`` runs the
    deterministic flow through the same code path.
    """
    if n_windows is None:
        n_windows = config.windows_per_trajectory()
    win = config.window_steps
    dt = config.dt
    rng = _trajectory_rng(config.seed, traj_index)
    std = math.sqrt(dt / (4.0 * params.ns))
    y = initial.as_array()
    root = np.array([math.sqrt(2.0), math.sqrt(2.0 * params.gamma)] * 2)
    pump_mean = np.array([params.pump / math.sqrt(2.0), 0.0] * 2)

    transient_windows = int(math.ceil(config.transient_time / config.window_time))
    chunk_windows = max(1, min(4096, n_windows))

    def run(windows: int, collect: bool) -> np.ndarray | None:
        out = np.empty((windows, 4), dtype=complex) if collect else None
        done = 0
        while done < windows:
            nw = min(chunk_windows, windows - done)
            nsteps = nw * win
            if noise:
                g = rng.standard_normal((nsteps, 8))
                w_raw = (g[:, 0::2] + 1j * g[:, 1::2]) * std
            else:
                w_raw = np.zeros((nsteps, 4), dtype=complex)
            field_sums = np.zeros((nw, 4), dtype=complex)
            noise_sums = np.zeros((nw, 4), dtype=complex)
            bad = _heun_chunk(y, w_raw, dt, params.gamma, params.delta1,
                              params.delta2, params.j1, params.j2, params.pump,
                              win, field_sums, noise_sums)
            if bad >= 0:
                t_bad = (done + bad / win) * config.window_time
                raise TrajectoryDivergedError(traj_index, t_bad,
                                              float(np.abs(y).max()))
            if collect:
                out[done:done + nw] = (root * (field_sums / win)
                                       - pump_mean
                                       - noise_sums / (win * dt))
            done += nw
        return out

    run(transient_windows, collect=False)
    return run(n_windows, collect=True)


def integrate_trajectory(config: SimConfig, params: DimerParams,
                         state: FieldState | SymmetricSteadyState | None = None,
                         traj_index: int = 0) -> Iterator[OutputSample]:
    """Stream of windowed OutputSamples for one trajectory.

    Starts from the supplied state (a SymmetricSteadyState is expanded to
    equal guide fields) or from vacuum.  Times are window centers measured
    from the end of the transient.
    """
    if state is None:
        initial = FieldState(0j, 0j, 0j, 0j)
    elif isinstance(state, SymmetricSteadyState):
        initial = FieldState.from_steady(state)
    else:
        initial = state
    values = integrate_output_windows(config, params, initial, traj_index)
    half = 0.5 * config.window_time
    for k, row in enumerate(values):
        yield OutputSample(time=k * config.window_time + half,
                           a_out1=complex(row[0]), a_out2=complex(row[1]),
                           b_out1=complex(row[2]), b_out2=complex(row[3]))


def _lag_sums(components: np.ndarray, lag_count: int,
              stride: int) -> np.ndarray:
    """Sliding-origin lag sums R[k, a, b] = Σ_t x_a(t) x_b(t + k·stride)
    for complex component series, via FFT cross-correlation."""
    n_comp, length = components.shape
    need = (lag_count - 1) * stride + 1
    if length < need:
        raise ValueError("series shorter than the requested lag span")
    nfft = 1 << int(math.ceil(math.log2(length + need)))
    fwd = np.fft.fft(components, nfft, axis=1)
    # FFT of x(-t): mirror-conjugate trick, X(-f) = conj(FFT(conj(x)))(f)
    rev = np.conj(np.fft.fft(np.conj(components), nfft, axis=1))
    out = np.empty((lag_count, n_comp, n_comp), dtype=complex)
    idx = np.arange(lag_count) * stride
    for a in range(n_comp):
        prod = rev[a][None, :] * fwd
        corr = np.fft.ifft(prod, axis=1)
        out[:, a, :] = corr[:, idx].T
    return out


class CorrelationAccumulator:
    """Running two-time correlation estimates of the output fluctuations.

    Holds raw sliding-origin sums of the 8-component fluctuation basis
    (Δout, Δout*, per field) over ``lag_count`` lags spaced ``lag_stride``
    windows apart, plus the 4x4 intensity-fluctuation analogue used by the
    quadratic estimator.  Merging is additive, so per-trajectory or
    per-segment accumulators combine associatively.
    """

    def __init__(self, lag_count: int, lag_stride: int, window_time: float,
                 classical_means: np.ndarray,
                 carriers: np.ndarray | None = None,
                 use_empirical_means: bool = False):
        self.lag_count = int(lag_count)
        self.lag_stride = int(lag_stride)
        self.window_time = float(window_time)
        self.classical_means = np.asarray(classical_means, dtype=complex)
        if self.classical_means.shape != (4,):
            raise ValueError("classical_means must have shape (4,)")
        self.carriers = (self.classical_means if carriers is None
                         else np.asarray(carriers, dtype=complex))
        self.use_empirical_means = bool(use_empirical_means)
        self.corr = np.zeros((self.lag_count, 8, 8), dtype=complex)
        self.quad_corr = np.zeros((self.lag_count, 4, 4))
        self.mean_sum = np.zeros(8, dtype=complex)
        self.count = 0

    def add_output_windows(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[1] != 4:
            raise ValueError("expected an (n_windows, 4) array")
        means = (values.mean(axis=0) if self.use_empirical_means
                 else self.classical_means)
        dw4 = values - means
        dw8 = np.empty((8, len(values)), dtype=complex)
        dw8[0::2] = dw4.T
        dw8[1::2] = np.conj(dw4.T)
        self.corr += _lag_sums(dw8, self.lag_count, self.lag_stride)
        self.mean_sum += dw8.sum(axis=1)
        # intensity fluctuations around the empirical mean for the quadratic
        # estimator: the carrier re-enters through |Δ + w|²
        intens = np.abs(dw4 + self.carriers) ** 2
        di = (intens - intens.mean(axis=0)).T.astype(complex)
        self.quad_corr += _lag_sums(di, self.lag_count, self.lag_stride).real
        self.count += len(values)

    def merge(self, other: "CorrelationAccumulator") -> "CorrelationAccumulator":
        if (other.lag_count != self.lag_count
                or other.lag_stride != self.lag_stride
                or other.window_time != self.window_time):
            raise ValueError("accumulator shapes incompatible")
        self.corr += other.corr
        self.quad_corr += other.quad_corr
        self.mean_sum += other.mean_sum
        self.count += other.count
        return self

    @property
    def lag_spacing(self) -> float:
        return self.lag_stride * self.window_time

    def correlations(self) -> np.ndarray:
        """Biased estimate ⟨Δw(0) Δw(τ_k)ᵀ⟩, normalized by the sample count."""
        if self.count == 0:
            raise ValueError("no data accumulated")
        return self.corr / self.count

    def intensity_correlations(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("no data accumulated")
        return self.quad_corr / self.count


def accumulate_two_time_correlations(
        samples: Iterable[OutputSample] | np.ndarray,
        steady_outputs: np.ndarray,
        lag_count: int = 512, lag_stride: int = 1,
        window_time: float = 0.04,
        use_empirical_means: bool = False) -> CorrelationAccumulator:
    """Accumulate ⟨Δw(0) Δw(τ_k)ᵀ⟩ from a stream of output samples.

    ``steady_outputs`` are the classical output means (see
    ``classical_output_means``); fluctuations are taken about them unless
    empirical means are requested.  Fewer than 10·lag_count windows raise,
    since shorter spans cannot support a stationary estimate.
    """
    if isinstance(samples, np.ndarray):
        values = samples
    else:
        values = np.array([s.as_array() for s in samples], dtype=complex)
    if len(values) < 10 * lag_count:
        raise ValueError(
            f"insufficient data: {len(values)} windows < 10 x {lag_count} lags")
    acc = CorrelationAccumulator(lag_count, lag_stride, window_time,
                                 classical_means=np.asarray(steady_outputs),
                                 use_empirical_means=use_empirical_means)
    acc.add_output_windows(values)
    return acc


def _observable_fields(observable: str) -> tuple[str, ...]:
    if observable == "fh":
        return ("A1",)
    if observable == "sh":
        return ("A2",)
    fields = (observable[:2], observable[2:])
    if any(f not in _SLOT for f in fields):
        raise ValueError(f"unknown observable {observable!r}")
    return fields


def _estimator_weights(observable: str, sign: str, w1: complex, w2: complex,
                       ) -> tuple[np.ndarray, float]:
    """Output-basis weights for the linearized photon-number estimator."""
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    fields = _observable_fields(observable)
    sgn = (1.0, 1.0 if sign == "plus" else -1.0)
    v = np.zeros(8, dtype=complex)
    csn = 0.0
    for f, s in zip(fields, sgn):
        w = w1 if f in ("A1", "B1") else w2
        v[_SLOT[f]] += s * np.conj(w)
        v[_SLOT[f] + 1] += s * w
        csn += abs(w) ** 2
    return v, csn


def _spectrum_from_scalar_lags(c: np.ndarray, lag_spacing: float,
                               taper: str | None) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided Wiener-Khintchine transform of a real lag series.

    V(ω_m) = Δτ (c_0 + 2 Σ_{k≥1} c_k cos ω_m τ_k) on the canonical grid
    ω_m = 2π m / (N Δτ), m = -N/2 .. N/2-1 (ascending).
    """
    n = len(c)
    if taper == "hann":
        k = np.arange(n)
        c = c * 0.5 * (1.0 + np.cos(np.pi * k / n))
    elif taper is not None:
        raise ValueError("taper must be None or 'hann'")
    m = np.arange(-(n // 2), n - n // 2)
    omegas = 2.0 * np.pi * m / (n * lag_spacing)
    taus = np.arange(1, n) * lag_spacing
    v = c[0] + 2.0 * np.cos(np.outer(omegas, taus)) @ c[1:]
    return omegas, lag_spacing * v


def estimate_spectra(acc: CorrelationAccumulator,
                     state: SymmetricSteadyState, params: DimerParams,
                     observable: str, sign: str,
                     carrier: str = "detected",
                     estimator: str = "linearized",
                     taper: str | None = None) -> SpectrumSeries:
    """Shot-noise-normalized spectrum from accumulated output correlations.

    The symmetric-ordered output statistics already contain the vacuum, so
    no unit offset is added; dividing by C_SN = Σ|w|²/n_s lands coherent
    light at V̄ = 1.  The default ``linearized`` estimator contracts the
    8×8 correlation with the carrier weights; ``quadratic`` uses the full
    |out|² intensity fluctuations instead.
    """
    w1, w2 = output_carriers(state, params, carrier)
    if estimator == "linearized":
        v, csn = _estimator_weights(observable, sign, w1, w2)
        lags = np.einsum("a,kab,b->k", v, acc.correlations(), v)
        if np.abs(lags.imag).max() > 1e-10 * max(1.0, np.abs(lags.real).max()):
            raise ArithmeticError("lag series has an imaginary residue; "
                                  "accumulator basis is not conjugate-paired")
        c = lags.real
    elif estimator == "quadratic":
        fields = _observable_fields(observable)
        q = acc.intensity_correlations()
        if len(fields) == 1:
            ia = _FIELD[fields[0]]
            c = q[:, ia, ia]
            csn = abs(w1 if fields[0] in ("A1", "B1") else w2) ** 2
        else:
            ia, ib = _FIELD[fields[0]], _FIELD[fields[1]]
            sgn = 1.0 if sign == "plus" else -1.0
            c = (q[:, ia, ia] + q[:, ib, ib]
                 + sgn * (q[:, ia, ib] + q[:, ib, ia]))
            csn = (abs(w1 if fields[0] in ("A1", "B1") else w2) ** 2
                   + abs(w1 if fields[1] in ("A1", "B1") else w2) ** 2)
    else:
        raise ValueError("estimator must be 'linearized' or 'quadratic'")
    if csn <= 0:
        raise ValueError("shot-noise normalization undefined "
                         "(vanishing output carrier)")
    if abs(c[-1]) > 0.05 * abs(c[0]):
        warnings.warn(
            "correlation window too short: |C(τ_max)| is "
            f"{abs(c[-1]) / abs(c[0]):.1%} of C(0); increase lag_count or "
            "lag_stride", RuntimeWarning, stacklevel=2)
    omegas, v_abs = _spectrum_from_scalar_lags(c, acc.lag_spacing, taper)
    csn_abs = csn / params.ns
    values = v_abs / csn_abs
    return SpectrumSeries(
        observable=observable, sign=sign, omega=omegas, values=values,
        shot_noise=csn_abs,
        meta={"carrier": carrier, "kind": "simulation", "estimator": estimator,
              "windows": acc.count})


def simulate_spectrum(params: DimerParams, config: SimConfig,
                      state: SymmetricSteadyState,
                      observables: list[tuple[str, str]],
                      carrier: str = "detected",
                      estimator: str = "linearized",
                      n_segments: int = 16,
                      use_empirical_means: bool = False,
                      taper: str | None = None,
                      ) -> dict[tuple[str, str], SpectrumSeries]:
    """Full pipeline: trajectories -> correlations -> normalized spectra.

    Trajectories are independent (index-spawned RNG streams) and their
    window series are split into segments; the pooled accumulator gives the
    central estimate and the segment scatter gives pointwise standard
    errors.  Segment count is reduced automatically if segments would drop
    below twice the lag span.
    """
    means = classical_output_means(state, params)
    span = config.lag_count * config.lag_stride
    n_win = config.windows_per_trajectory()
    if n_win * config.trajectories < 10 * config.lag_count:
        raise ValueError(
            f"insufficient data: {n_win * config.trajectories} windows "
            f"< 10 x {config.lag_count} lags")
    per_traj = max(1, round(n_segments / config.trajectories))
    while per_traj > 1 and n_win // per_traj < 2 * span:
        per_traj -= 1

    def make_acc() -> CorrelationAccumulator:
        return CorrelationAccumulator(
            config.lag_count, config.lag_stride, config.window_time,
            classical_means=means, use_empirical_means=use_empirical_means)

    pooled = make_acc()
    segments: list[CorrelationAccumulator] = []
    initial = FieldState.from_steady(state)
    for traj in range(config.trajectories):
        values = integrate_output_windows(config, params, initial, traj,
                                          n_windows=n_win)
        bounds = np.linspace(0, n_win, per_traj + 1, dtype=int)
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            seg = make_acc()
            seg.add_output_windows(values[lo:hi])
            segments.append(seg)
            pooled.merge(seg)

    out: dict[tuple[str, str], SpectrumSeries] = {}
    for obs, sign in observables:
        series = estimate_spectra(pooled, state, params, obs, sign,
                                  carrier=carrier, estimator=estimator,
                                  taper=taper)
        if len(segments) > 1:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                seg_vals = np.array([
                    estimate_spectra(s, state, params, obs, sign,
                                     carrier=carrier, estimator=estimator,
                                     taper=taper).values
                    for s in segments])
            err = seg_vals.std(axis=0, ddof=1) / math.sqrt(len(segments))
            series = SpectrumSeries(
                observable=series.observable, sign=series.sign,
                omega=series.omega, values=series.values,
                shot_noise=series.shot_noise, stat_err=err,
                meta=dict(series.meta, segments=len(segments)))
        out[(obs, sign)] = series
    return out
