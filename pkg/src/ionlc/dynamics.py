"""Time evolution, propagator construction, fidelity and frequency fits.

Unitary and Lindblad evolution run on the adaptive RK45 kernels with
harmonic-envelope generators exported by TimeDependentHamiltonian, so
the integrator sees closed-form envelopes rather than tabulated samples.
The slice-product propagator is deliberately independent of that path
(scipy matrix exponentials on midpoint samples) and serves as the oracle
the evolution routines are validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from ._kernels import backend_name, get_kernels
from ._kernels.tableau import MAX_STEPS_EXCEEDED, OK, STEP_UNDERFLOW
from .errors import ConvergenceError, NumericalError, StepUnderflowError
from .hamiltonians import TimeDependentHamiltonian
from .qalgebra import ModeLayout, QOperator, QState

__all__ = [
    "EvolutionSpec",
    "SimulationResult",
    "RabiFit",
    "evolve_pure",
    "evolve_lindblad",
    "propagate_columns",
    "propagator",
    "fidelity",
    "extract_rabi_frequency",
]


@dataclass(frozen=True)
class EvolutionSpec:
    """What to integrate: Hamiltonian, horizon, error target, dissipators.

    collapse_ops is a tuple of (QOperator, rate) pairs; rates are 1/s in
    whatever unit system the Hamiltonian uses. Empty means unitary.
    """

    hamiltonian: TimeDependentHamiltonian
    t_final: float
    tolerance: float = 1e-9
    collapse_ops: tuple = ()

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if not 1e-12 <= self.tolerance <= 1e-4:
            raise ValueError(
                f"tolerance must lie in [1e-12, 1e-4], got {self.tolerance}"
            )
        ops = tuple(self.collapse_ops)
        for op, rate in ops:
            if not isinstance(op, QOperator):
                raise TypeError("collapse entries must be (QOperator, rate) pairs")
            if op.layout != self.hamiltonian.layout:
                raise ValueError("collapse operator layout differs from the Hamiltonian")
            if rate < 0:
                raise ValueError(f"collapse rates must be >= 0, got {rate}")
        object.__setattr__(self, "collapse_ops", ops)


@dataclass
class SimulationResult:
    """Evolution output: final state plus sampled series and diagnostics.

    conservation_drift is max |norm - 1| (pure) or max |trace - 1|
    (Lindblad) over the sampled snapshots. convergence_delta is the
    population stranded in the highest kept Fock level of any bosonic
    mode at t_final: near-zero means the truncation was adequate.
    """

    final_state: QState
    times: np.ndarray
    expectations: dict
    n_steps: int
    t_reached: float
    backend: str
    conservation_drift: float
    convergence_delta: float
    positivity_floor: float | None = None
    snapshots: np.ndarray | None = None


def _sample_grid(t_final: float, sample_times) -> np.ndarray:
    if sample_times is None:
        return np.array([0.0, t_final])
    ts = np.unique(np.asarray(sample_times, dtype=float))
    if ts.size and (ts[0] < 0.0 or ts[-1] > t_final * (1 + 1e-12)):
        raise ValueError("sample times must lie within [0, t_final]")
    if ts.size == 0 or ts[0] > 0.0:
        ts = np.concatenate(([0.0], ts))
    if ts[-1] < t_final:
        ts = np.concatenate((ts, [t_final]))
    return ts


def _generator_now(mats, coeffs, offsets) -> np.ndarray:
    # t=0 snapshot of the generator, used only to seed the step size
    weights = np.array(
        [np.sum(coeffs[offsets[k] : offsets[k + 1]]) for k in range(mats.shape[0])]
    )
    return np.tensordot(weights, mats, axes=1)


def _initial_step(freqs, g_now, t_final: float) -> float:
    # fastest phase or generator norm sets the scale; the controller
    # refines from here so only the order of magnitude matters
    w_max = float(np.max(np.abs(freqs))) if freqs.size else 0.0
    g_norm = float(np.max(np.sum(np.abs(g_now), axis=1)))
    scale = max(w_max, g_norm, 1.0 / t_final)
    return min(t_final, 0.1 / scale)


def _step_tolerances(tolerance: float) -> tuple[float, float]:
    # per-step error control accumulates over the horizon, so the stepper
    # runs two decades below the requested end-to-end target; the floors
    # keep the controller clear of the roundoff plateau
    return max(1e-2 * tolerance, 1e-13), max(1e-5 * tolerance, 1e-15)


def _raise_on_status(status: int, t_reached: float, n_steps: int):
    if status == OK:
        return
    if status == STEP_UNDERFLOW:
        raise StepUnderflowError(
            f"step size underflow at t={t_reached:.9g} after {n_steps} steps; "
            "the generator is too stiff or has non-finite entries",
            t_fail=t_reached,
        )
    if status == MAX_STEPS_EXCEEDED:
        raise NumericalError(
            f"step budget exhausted at t={t_reached:.9g} after {n_steps} steps; "
            "raise max_steps or loosen the tolerance"
        )
    raise NumericalError(f"integrator returned unknown status {status}")


def _tail_population(probs: np.ndarray, layout: ModeLayout) -> float:
    p = probs.reshape(layout.dims)
    worst = 0.0
    for axis, d in enumerate(layout.dims):
        if d < 3:
            continue  # spin slots have no truncation tail
        sel = [slice(None)] * len(layout.dims)
        sel[axis] = d - 1
        worst = max(worst, float(np.sum(np.abs(p[tuple(sel)]))))
    return worst


def _expectation_series_pure(ys: np.ndarray, observables: dict) -> dict:
    return {
        name: np.einsum("ti,ij,tj->t", ys.conj(), op.matrix, ys)
        for name, op in observables.items()
    }


def _expectation_series_mixed(rhos: np.ndarray, observables: dict) -> dict:
    return {
        name: np.einsum("ij,tji->t", op.matrix, rhos)
        for name, op in observables.items()
    }


def _check_observables(observables, layout) -> dict:
    observables = dict(observables or {})
    for name, op in observables.items():
        if not isinstance(op, QOperator) or op.layout != layout:
            raise ValueError(f"observable {name!r} does not live on the evolution layout")
    return observables


def evolve_pure(
    spec: EvolutionSpec,
    psi0: QState,
    *,
    sample_times=None,
    observables=None,
    backend: str | None = None,
    keep_states: bool = False,
    max_steps: int = 2_000_000,
) -> SimulationResult:
    """Adaptive integration of the Schrodinger equation for a pure state."""
    if spec.collapse_ops:
        raise ValueError("spec carries collapse operators; use evolve_lindblad")
    layout = spec.hamiltonian.layout
    if psi0.layout != layout:
        raise ValueError("initial state layout differs from the Hamiltonian")
    psi0.vector  # raises if psi0 is a density matrix
    observables = _check_observables(observables, layout)

    mats, coeffs, freqs, offsets = spec.hamiltonian.to_kernel_arrays()
    coeffs = -1j * coeffs  # Schrodinger generator G = -i H
    ts = _sample_grid(spec.t_final, sample_times)
    h0 = _initial_step(freqs, _generator_now(mats, coeffs, offsets), spec.t_final)
    rtol, atol = _step_tolerances(spec.tolerance)
    kern = get_kernels(backend)
    # kernels integrate column blocks: promote the vector, then squeeze
    ys, status, n_steps, t_reached = kern.rk45_linear(
        mats, coeffs, freqs, offsets, psi0.vector[:, None], ts,
        h0, rtol, atol, max_steps,
    )
    _raise_on_status(status, t_reached, n_steps)
    ys = ys[:, :, 0]

    norms = np.linalg.norm(ys, axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    # the 1e-9 norm budget binds whenever the requested tolerance can deliver
    # it; looser exploratory runs get a flat sanity bound instead, otherwise
    # the error-vs-tolerance scaling could never be observed
    budget = 1e-9 if spec.tolerance <= 1e-8 else 1e-5
    if drift > budget:
        raise NumericalError(
            f"norm drift {drift:.3e} exceeds the {budget:.0e} pure-state "
            "budget; tighten the tolerance"
        )
    return SimulationResult(
        final_state=QState(layout, vector=ys[-1] / norms[-1]),
        times=ts,
        expectations=_expectation_series_pure(ys, observables),
        n_steps=n_steps,
        t_reached=t_reached,
        backend=backend_name(backend),
        conservation_drift=drift,
        convergence_delta=_tail_population(np.abs(ys[-1]) ** 2, layout),
        snapshots=ys if keep_states else None,
    )


def evolve_lindblad(
    spec: EvolutionSpec,
    rho0: QState,
    *,
    sample_times=None,
    observables=None,
    backend: str | None = None,
    keep_states: bool = False,
    max_steps: int = 2_000_000,
) -> SimulationResult:
    """Deterministic master-equation evolution of a density matrix."""
    layout = spec.hamiltonian.layout
    if rho0.layout != layout:
        raise ValueError("initial state layout differs from the Hamiltonian")
    observables = _check_observables(observables, layout)

    mats, coeffs, freqs, offsets = spec.hamiltonian.to_kernel_arrays()
    n = layout.total_dim
    l_ops = np.empty((len(spec.collapse_ops), n, n), dtype=np.complex128)
    for i, (op, rate) in enumerate(spec.collapse_ops):
        l_ops[i] = math.sqrt(rate) * op.matrix
    ldl_ops = np.ascontiguousarray(
        np.einsum("kji,kjl->kil", l_ops.conj(), l_ops)
    ) if l_ops.size else np.empty((0, n, n), dtype=np.complex128)

    ts = _sample_grid(spec.t_final, sample_times)
    h0 = _initial_step(freqs, _generator_now(mats, coeffs, offsets), spec.t_final)
    rtol, atol = _step_tolerances(spec.tolerance)
    kern = get_kernels(backend)
    rhos, status, n_steps, t_reached = kern.rk45_lindblad(
        mats, coeffs, freqs, offsets, l_ops, ldl_ops, rho0.density, ts,
        h0, rtol, atol, max_steps,
    )
    _raise_on_status(status, t_reached, n_steps)

    traces = np.einsum("tii->t", rhos).real
    drift = float(np.max(np.abs(traces - 1.0)))
    budget = 1e-8 if spec.tolerance <= 1e-8 else 1e-5
    if drift > budget:
        raise NumericalError(
            f"trace drift {drift:.3e} exceeds the {budget:.0e} density "
            "budget; tighten the tolerance"
        )
    # snapshots are exactly Hermitian (kernels symmetrize); renormalize the
    # recorded trace drift away so the state type's 1e-9 gate is meaningful
    final = rhos[-1] / traces[-1]
    final_state = QState(layout, density=final)
    floor = final_state.min_eigenvalue()
    if floor < -1e-8:
        raise NumericalError(
            f"density lost positivity (min eigenvalue {floor:.3e}); "
            "tighten the tolerance or enlarge the truncation"
        )
    return SimulationResult(
        final_state=final_state,
        times=ts,
        expectations=_expectation_series_mixed(rhos, observables),
        n_steps=n_steps,
        t_reached=t_reached,
        backend=backend_name(backend),
        conservation_drift=drift,
        convergence_delta=_tail_population(np.einsum("ii->i", final).real, layout),
        positivity_floor=floor,
        snapshots=rhos if keep_states else None,
    )


def propagate_columns(
    hamiltonian: TimeDependentHamiltonian,
    t_final: float,
    y0: np.ndarray,
    *,
    tolerance: float = 1e-10,
    backend: str | None = None,
    max_steps: int = 2_000_000,
) -> tuple[np.ndarray, int]:
    """Integrate y' = -i H(t) y for a block of column vectors.

    One adaptive pass advances every column of y0 (shape (total_dim, m))
    under the same Hamiltonian; feeding the identity yields the full
    propagator at a fraction of the slice-product cost. No norm
    bookkeeping happens here: columns are not states, so callers owning
    unitarity or completeness guarantees check them on the result.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    y0 = np.ascontiguousarray(y0, dtype=np.complex128)
    if y0.ndim != 2 or y0.shape[0] != hamiltonian.layout.total_dim:
        raise ValueError(
            f"y0 must have shape (total_dim, m) = ({hamiltonian.layout.total_dim}, m)"
        )
    mats, coeffs, freqs, offsets = hamiltonian.to_kernel_arrays()
    coeffs = -1j * coeffs
    h0 = _initial_step(freqs, _generator_now(mats, coeffs, offsets), t_final)
    rtol, atol = _step_tolerances(tolerance)
    ys, status, n_steps, t_reached = get_kernels(backend).rk45_linear(
        mats, coeffs, freqs, offsets, y0,
        np.array([0.0, t_final]), h0, rtol, atol, max_steps,
    )
    _raise_on_status(status, t_reached, n_steps)
    return ys[-1], n_steps


def _slice_product(hamiltonian: TimeDependentHamiltonian, t_final: float, n_slices: int) -> np.ndarray:
    dt = t_final / n_slices
    u = np.eye(hamiltonian.layout.total_dim, dtype=np.complex128)
    for k in range(n_slices):
        t_mid = (k + 0.5) * dt
        u = expm(-1j * dt * hamiltonian.value(t_mid).matrix) @ u
    return u


def propagator(
    hamiltonian: TimeDependentHamiltonian,
    t_final: float,
    n_slices: int,
    *,
    tol: float = 1e-8,
) -> QOperator:
    """Time-ordered product of midpoint slice exponentials.

    Independent of the adaptive integrator; doubling the slice count must
    move the result by less than tol or ConvergenceError is raised. The
    finer product is returned.
    """
    if t_final <= 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if n_slices < 1:
        raise ValueError(f"n_slices must be >= 1, got {n_slices}")
    coarse = _slice_product(hamiltonian, t_final, n_slices)
    fine = _slice_product(hamiltonian, t_final, 2 * n_slices)
    delta = float(np.max(np.abs(fine - coarse)))
    if delta >= tol:
        raise ConvergenceError(
            f"slice doubling moved the propagator by {delta:.3e} >= {tol:.1e}; "
            "increase n_slices",
            residual=delta,
            iterations=2 * n_slices,
        )
    return QOperator(hamiltonian.layout, fine)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a: QState, b: QState) -> float:
    """Uhlmann fidelity; squared overlap for pure states. Symmetric."""
    if a.layout != b.layout:
        raise ValueError(
            f"layout mismatch: {a.layout.labels}{a.layout.dims} vs "
            f"{b.layout.labels}{b.layout.dims}"
        )
    if a.is_pure and b.is_pure:
        f = abs(np.vdot(a.vector, b.vector)) ** 2
    elif a.is_pure or b.is_pure:
        psi, rho = (a, b) if a.is_pure else (b, a)
        v = psi.vector
        f = float(np.real(np.vdot(v, rho.density @ v)))
    else:
        s = _psd_sqrt(a.density)
        w = np.linalg.eigvalsh(s @ b.density @ s)
        f = float(np.sum(np.sqrt(np.clip(w, 0.0, None)))) ** 2
    return float(np.clip(f, 0.0, 1.0))


@dataclass(frozen=True)
class RabiFit:
    """Least-squares sinusoid fit y ~ offset + amplitude*cos(omega t + phase).

    residual_rms is relative to the fitted amplitude. confident is False
    for flat series, poor fits, or spans shorter than three periods.
    """

    omega: float
    amplitude: float
    offset: float
    phase: float
    residual_rms: float
    n_periods: float
    confident: bool


def extract_rabi_frequency(times, values) -> RabiFit:
    """Fit one real sinusoid to a (near-)uniformly sampled series.

    The frequency is seeded from a zero-padded spectrum and refined by
    profiling: for each trial omega the offset/quadrature amplitudes are
    linear least squares, and the scalar omega minimizes the residual.
    """
    t = np.asarray(times, dtype=float)
    y = np.real(np.asarray(values))
    if t.ndim != 1 or t.shape != y.shape or t.size < 8:
        raise ValueError("need matching 1-d series with at least 8 samples")
    span = float(t[-1] - t[0])
    if span <= 0:
        raise ValueError("times must be increasing")
    offset0 = float(np.mean(y))
    y0 = y - offset0
    scale = max(1.0, abs(offset0))
    if float(np.std(y0)) < 1e-12 * scale:
        return RabiFit(0.0, 0.0, offset0, 0.0, 0.0, 0.0, confident=False)

    # spectral seed on an 8x zero-padded grid, DC excluded
    n_pad = 8 * t.size
    spectrum = np.abs(np.fft.rfft(y0, n=n_pad))
    k = int(np.argmax(spectrum[1:])) + 1
    dt = span / (t.size - 1)
    w_seed = 2.0 * math.pi * k / (n_pad * dt)
    dw = 2.0 * math.pi / (n_pad * dt)

    def profiled_sse(w):
        design = np.column_stack((np.ones_like(t), np.cos(w * t), np.sin(w * t)))
        _, res, _, _ = np.linalg.lstsq(design, y, rcond=None)
        if res.size:
            return float(res[0])
        r = y - design @ np.linalg.lstsq(design, y, rcond=None)[0]
        return float(r @ r)

    lo = max(w_seed - 3 * dw, 0.25 * dw)
    hi = w_seed + 3 * dw
    best = minimize_scalar(
        profiled_sse, bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12 * max(w_seed, 1.0)},
    )
    w = float(best.x)
    design = np.column_stack((np.ones_like(t), np.cos(w * t), np.sin(w * t)))
    c, a_cos, b_sin = np.linalg.lstsq(design, y, rcond=None)[0]
    amplitude = float(np.hypot(a_cos, b_sin))
    model = design @ np.array([c, a_cos, b_sin])
    resid = float(np.sqrt(np.mean((y - model) ** 2)))
    resid_rel = resid / max(amplitude, 1e-300)
    n_periods = w * span / (2.0 * math.pi)
    confident = bool(resid_rel < 0.1 and n_periods >= 3.0 and amplitude > 1e-10 * scale)
    return RabiFit(
        omega=w,
        amplitude=amplitude,
        offset=float(c),
        phase=float(math.atan2(-b_sin, a_cos)),
        residual_rms=resid_rel,
        n_periods=float(n_periods),
        confident=confident,
    )
