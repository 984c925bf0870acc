"""Hamiltonian builders for the modulated ion/LC-circuit interface.

All builders return TimeDependentHamiltonian objects whose terms pair a
static operator with a finite Fourier envelope, so integrators consume
them without sampling error. Frames:

  - lab: both oscillators plus the capacitively modulated coupling. The
    LC frequency carries (1 + 2eta/3 sin(nu t)); the coupling carries
    (1 - 2eta/3 sin(nu t)). The phase opposition between the two
    envelopes is what makes the lower-sideband part of the coupling add
    up to the effective swap rate (2/3) eta g0 instead of cancelling.
  - interaction: the lab frame conjugated by the exact counter-rotation
    exp(i theta(t) A^dag A + i omega_i t B^dag B) with
    theta(t) = omega_lc t - beta (cos(nu t) - 1), beta = 2 eta omega_lc
    / (3 nu). theta' reproduces the modulated LC frequency exactly, so
    only the coupling survives; its oscillating phase is expanded in a
    Bessel series truncated below 1e-14.
  - rotating: the resonance-selected beam-splitter (rwa) and bichromatic
    spin gate (ms) Hamiltonians, written with real positive couplings
    (the quadrature phase origin is chosen per mode, which is a gauge
    choice with no observable consequence).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.constants import elementary_charge, hbar
from scipy.special import jv

from .device import DeviceParams, zero_point_charge, zero_point_motion
from .qalgebra import ModeLayout, QOperator, annihilation, pauli, quadratures

__all__ = [
    "HierarchyWarning",
    "HarmonicEnvelope",
    "TimeDependentHamiltonian",
    "ClassicalSolution",
    "lab_frame_hamiltonian",
    "interaction_frame_hamiltonian",
    "interaction_frame_unitary",
    "rwa_hamiltonian",
    "ms_hamiltonian",
    "classical_solutions",
    "quasienergy_charge_operator",
    "charge_envelope",
    "modulation_envelope",
    "scaled_hierarchy",
]

_FRAMES = ("lab", "interaction", "rotating")


class HierarchyWarning(UserWarning):
    """A frequency-hierarchy precondition is violated, results may drift."""


@dataclass(frozen=True)
class HarmonicEnvelope:
    """Finite Fourier sum sum_j coeffs[j] exp(i freqs[j] t).

    A pure function of time; calling it never mutates state.
    """

    coeffs: tuple
    freqs: tuple

    def __post_init__(self):
        if len(self.coeffs) != len(self.freqs):
            raise ValueError("coeffs and freqs must have equal length")
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        object.__setattr__(self, "freqs", tuple(float(f) for f in self.freqs))

    def __call__(self, t):
        c = np.asarray(self.coeffs)
        w = np.asarray(self.freqs)
        t = np.asarray(t, dtype=float)
        return np.sum(c * np.exp(1j * w * t[..., None]), axis=-1)

    def conjugate(self) -> "HarmonicEnvelope":
        return HarmonicEnvelope(
            tuple(np.conj(self.coeffs)), tuple(-f for f in self.freqs)
        )

    def shifted(self, delta_w: float) -> "HarmonicEnvelope":
        return HarmonicEnvelope(self.coeffs, tuple(f + delta_w for f in self.freqs))


class TimeDependentHamiltonian:
    """Sum of (static operator, scalar envelope) terms on one mode layout.

    Envelopes are HarmonicEnvelope instances (or any pure callable of
    time, though only harmonic terms can be exported to the integration
    kernels). value(t) materializes H(t)/hbar as a QOperator.
    """

    def __init__(self, layout: ModeLayout, terms: Sequence, frame: str):
        if frame not in _FRAMES:
            raise ValueError(f"frame must be one of {_FRAMES}, got {frame!r}")
        terms = tuple(terms)
        for op, env in terms:
            if not isinstance(op, QOperator):
                raise TypeError("each term needs a QOperator static part")
            if op.layout != layout:
                raise ValueError("term operator layout differs from the declared layout")
            if not callable(env):
                raise TypeError("each term needs a callable envelope")
        self.layout = layout
        self.terms = terms
        self.frame = frame

    def value(self, t: float) -> QOperator:
        total = np.zeros((self.layout.total_dim, self.layout.total_dim), dtype=np.complex128)
        for op, env in self.terms:
            total += complex(env(t)) * op.matrix
        return QOperator(self.layout, total)

    def hermiticity_residual(self, times) -> float:
        """Max relative Hermiticity defect of H(t) over the given times."""
        worst = 0.0
        for t in np.atleast_1d(times):
            h = self.value(float(t)).matrix
            scale = max(1.0, float(np.max(np.abs(h))))
            worst = max(worst, float(np.max(np.abs(h - h.conj().T))) / scale)
        return worst

    def to_kernel_arrays(self):
        """Factor the terms into (mats, coeffs, freqs, offsets) for kernels."""
        mats = []
        coeffs = []
        freqs = []
        offsets = [0]
        for i, (op, env) in enumerate(self.terms):
            if not isinstance(env, HarmonicEnvelope):
                raise TypeError(
                    f"term {i} has a non-harmonic envelope and cannot be "
                    "exported to the integration kernels"
                )
            mats.append(op.matrix)
            coeffs.extend(env.coeffs)
            freqs.extend(env.freqs)
            offsets.append(len(coeffs))
        return (
            np.ascontiguousarray(mats, dtype=np.complex128),
            np.asarray(coeffs, dtype=np.complex128),
            np.asarray(freqs, dtype=np.float64),
            np.asarray(offsets, dtype=np.int64),
        )


def _require_slots(layout: ModeLayout, *labels: str):
    missing = [lab for lab in labels if lab not in layout.labels]
    if missing:
        raise ValueError(
            f"layout {layout.labels} is missing required slot(s) {missing}"
        )


def _sin_envelope(base: float, amplitude: float, nu: float) -> HarmonicEnvelope:
    """base + amplitude * sin(nu t) as a three-line Fourier sum."""
    return HarmonicEnvelope(
        (base, -0.5j * amplitude, 0.5j * amplitude), (0.0, nu, -nu)
    )


def lab_frame_hamiltonian(params: DeviceParams, layout: ModeLayout) -> TimeDependentHamiltonian:
    """Full lab-frame H/hbar on (lc, motion).

    omega_lc (1 + 2eta/3 sin nu t) A^dag A + omega_i B^dag B
    + g0 (1 - 2eta/3 sin nu t) (A + A^dag)(B + B^dag).

    The frequency and coupling modulations are phase-opposed: both stem
    from the same capacitance drive, entering inversely in the coupling.
    """
    _require_slots(layout, "lc", "motion")
    dim_lc = layout.dim("lc")
    dim_mot = layout.dim("motion")
    a = annihilation(dim_lc)
    b = annihilation(dim_mot)
    n_lc = QOperator(layout, layout.lift({"lc": a.conj().T @ a}))
    n_mot = QOperator(layout, layout.lift({"motion": b.conj().T @ b}))
    coupling = QOperator(
        layout, layout.lift({"lc": a + a.conj().T, "motion": b + b.conj().T})
    )
    two_thirds = 2.0 * params.eta / 3.0
    return TimeDependentHamiltonian(
        layout,
        [
            (n_lc, _sin_envelope(params.omega_lc, params.omega_lc * two_thirds, params.nu)),
            (n_mot, HarmonicEnvelope((params.omega_i,), (0.0,))),
            (coupling, _sin_envelope(params.g0, -params.g0 * two_thirds, params.nu)),
        ],
        frame="lab",
    )


def _beta(params: DeviceParams) -> float:
    return 2.0 * params.eta * params.omega_lc / (3.0 * params.nu)


def _phase_harmonics(beta: float, tol: float = 1e-14):
    """Bessel expansion e^{i beta cos x} = sum_k i^k J_k(beta) e^{i k x}."""
    kmax = 1
    while abs(jv(kmax, beta)) > tol and kmax < 64:
        kmax += 1
    ks = np.arange(-kmax, kmax + 1)
    return ks, (1j ** ks) * jv(ks, beta)


def _lc_lowering_envelope(params: DeviceParams) -> HarmonicEnvelope:
    """Envelope multiplying the LC lowering operator in the exact
    interaction frame: (1 - 2eta/3 sin nu t) e^{-i theta(t)}."""
    eta, nu, w = params.eta, params.nu, params.omega_lc
    beta = _beta(params)
    ks, base = _phase_harmonics(beta)
    # e^{-i theta} = e^{-i w t} e^{i beta (cos nu t - 1)}
    base = base * np.exp(-1j * beta)
    kmin, kmax = ks[0] - 1, ks[-1] + 1
    coef = np.zeros(kmax - kmin + 1, dtype=np.complex128)
    # multiply by (1 - 2eta/3 sin nu t) = 1 + (i eta/3) e^{i nu t} - (i eta/3) e^{-i nu t}
    for offset, c in ((0, 1.0), (1, 0.5j * 2 * eta / 3), (-1, -0.5j * 2 * eta / 3)):
        coef[ks - kmin + offset] += c * base
    freqs = np.arange(kmin, kmax + 1) * nu - w
    return HarmonicEnvelope(tuple(coef), tuple(freqs))


def interaction_frame_hamiltonian(
    params: DeviceParams, layout: ModeLayout
) -> TimeDependentHamiltonian:
    """Lab frame conjugated by the exact counter-rotation; coupling only.

    H/hbar = g0 [kappa_a(t) A + conj] (B e^{-i omega_i t} + conj) with
    kappa_a the Bessel-expanded phase envelope of the LC mode. Built as
    four Hermitian-paired product terms so H(t) is Hermitian to roundoff.
    """
    _require_slots(layout, "lc", "motion")
    a = annihilation(layout.dim("lc"))
    b = annihilation(layout.dim("motion"))
    ops = {
        "ab": QOperator(layout, layout.lift({"lc": a, "motion": b})),
        "abd": QOperator(layout, layout.lift({"lc": a, "motion": b.conj().T})),
        "adb": QOperator(layout, layout.lift({"lc": a.conj().T, "motion": b})),
        "adbd": QOperator(
            layout, layout.lift({"lc": a.conj().T, "motion": b.conj().T})
        ),
    }
    kappa_a = _lc_lowering_envelope(params)
    g0 = params.g0
    scaled = HarmonicEnvelope(tuple(g0 * np.asarray(kappa_a.coeffs)), kappa_a.freqs)
    terms = [
        (ops["ab"], scaled.shifted(-params.omega_i)),
        (ops["abd"], scaled.shifted(+params.omega_i)),
        (ops["adb"], scaled.shifted(+params.omega_i).conjugate()),
        (ops["adbd"], scaled.shifted(-params.omega_i).conjugate()),
    ]
    return TimeDependentHamiltonian(layout, terms, frame="interaction")


def interaction_frame_unitary(params: DeviceParams, layout: ModeLayout, t: float) -> QOperator:
    """The counter-rotation U(t) relating lab and interaction frames.

    U(t) = exp(i theta(t) A^dag A + i omega_i t B^dag B) with
    theta(t) = omega_lc t - beta (cos nu t - 1); U(0) is the identity.
    psi_interaction(t) = U(t) psi_lab(t).
    """
    _require_slots(layout, "lc", "motion")
    theta = params.omega_lc * t - _beta(params) * (math.cos(params.nu * t) - 1.0)
    n_lc = np.arange(layout.dim("lc"))
    n_mot = np.arange(layout.dim("motion"))
    phase_lc = np.exp(1j * theta * n_lc)
    phase_mot = np.exp(1j * params.omega_i * t * n_mot)
    u = layout.lift({"lc": np.diag(phase_lc), "motion": np.diag(phase_mot)})
    return QOperator(layout, u)


def modulation_envelope(
    eta: float,
    nu: float,
    *,
    omega_i: float | None = None,
    omega_lc: float | None = None,
    form: str = "printed",
) -> Callable:
    """Scalar modulation factor kappa(t) on the LC lowering operator.

    form="printed" is the first-order textbook expression
    1 + (2 eta/3)(sin nu t - i (omega_i/nu) cos nu t), which requires
    omega_i. form="exact" is the envelope the interaction-frame builder
    actually uses, (1 - 2 eta/3 sin nu t) e^{i beta (cos nu t - 1)},
    which requires omega_lc. The two agree at eta = 0 and differ at
    O(eta) in phase convention.
    """
    if form == "printed":
        if omega_i is None:
            raise ValueError("printed form needs omega_i")
        ratio = omega_i / nu

        def kappa(t):
            t = np.asarray(t, dtype=float)
            return 1.0 + (2.0 * eta / 3.0) * (
                np.sin(nu * t) - 1j * ratio * np.cos(nu * t)
            )

        return kappa
    if form == "exact":
        if omega_lc is None:
            raise ValueError("exact form needs omega_lc")
        beta = 2.0 * eta * omega_lc / (3.0 * nu)

        def kappa(t):
            t = np.asarray(t, dtype=float)
            return (1.0 - (2.0 * eta / 3.0) * np.sin(nu * t)) * np.exp(
                1j * beta * (np.cos(nu * t) - 1.0)
            )

        return kappa
    raise ValueError(f"form must be 'printed' or 'exact', got {form!r}")


def rwa_hamiltonian(g: float, Delta: float, layout: ModeLayout) -> TimeDependentHamiltonian:
    """Resonance-selected beam-splitter H/hbar = g (e^{i Delta t} a b^dag + h.c.)."""
    _require_slots(layout, "lc", "motion")
    a = annihilation(layout.dim("lc"))
    b = annihilation(layout.dim("motion"))
    ab_dag = QOperator(layout, layout.lift({"lc": a, "motion": b.conj().T}))
    ad_b = QOperator(layout, layout.lift({"lc": a.conj().T, "motion": b}))
    return TimeDependentHamiltonian(
        layout,
        [
            (ab_dag, HarmonicEnvelope((g,), (Delta,))),
            (ad_b, HarmonicEnvelope((g,), (-Delta,))),
        ],
        frame="rotating",
    )


def ms_hamiltonian(
    params: DeviceParams, delta: float, layout: ModeLayout
) -> TimeDependentHamiltonian:
    """Bichromatic gate generator in the motional rotating frame.

    H/hbar = sqrt(2) M (x cos delta t + p sin delta t) with
    M = (2 eta g0 / 3) q + (Omega0/4) sigma_x acting on (spin, lc); x, p
    are the motional quadratures. M is a constant of the motion.
    """
    _require_slots(layout, "spin", "lc", "motion")
    if delta == 0:
        raise ValueError("delta must be nonzero")
    if 3.0 * params.Omega0 > abs(delta):
        warnings.warn(
            f"carrier Rabi frequency Omega0={params.Omega0:.3e} is not well "
            f"below the detuning |delta|={abs(delta):.3e}; spin-loop closure degrades",
            HierarchyWarning,
            stacklevel=2,
        )
    if 3.0 * abs(delta) > params.omega_i:
        warnings.warn(
            f"detuning |delta|={abs(delta):.3e} is not well below the trap "
            f"frequency omega_i={params.omega_i:.3e}; the motional rotating "
            "frame leaks counter-rotating terms",
            HierarchyWarning,
            stacklevel=2,
        )
    x_mot, p_mot, _ = quadratures(layout.dim("motion"))
    _, _, q_lc = quadratures(layout.dim("lc"))
    m_full = (2.0 * params.eta * params.g0 / 3.0) * layout.lift({"lc": q_lc}) + (
        params.Omega0 / 4.0
    ) * layout.lift({"spin": pauli("x")})
    mx = QOperator(layout, math.sqrt(2.0) * (m_full @ layout.lift({"motion": x_mot})))
    mp = QOperator(layout, math.sqrt(2.0) * (m_full @ layout.lift({"motion": p_mot})))
    cos_env = HarmonicEnvelope((0.5, 0.5), (delta, -delta))
    sin_env = HarmonicEnvelope((-0.5j, 0.5j), (delta, -delta))
    return TimeDependentHamiltonian(
        layout, [(mx, cos_env), (mp, sin_env)], frame="rotating"
    )


@dataclass(frozen=True)
class ClassicalSolution:
    """First-order classical quadrature amplitudes of the driven LC mode.

    form="printed" evaluates
        q+(t) = e^{i w t} - (eta/6)(e^{2 i w t} + 3 e^{-i (nu - w) t}),
    whose sideband corrections are real-weighted. form="consistent"
    carries the exact first-order response of
        q'' = -w^2 (1 - eta sin nu t) q,
    i.e. q+(t) = e^{i w t} + (i eta w^2 / 2) [e^{-i (nu - w) t} /
    (w^2 - (nu-w)^2) - e^{i (nu + w) t} / (w^2 - (nu+w)^2)], which
    leaves a residual that is exactly second order in eta. q-(t) is the
    complex conjugate of q+(t) for both forms.
    """

    eta: float
    omega: float
    nu: float
    form: str = "printed"

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must satisfy 0 <= eta < 1, got {self.eta}")
        if self.form not in ("printed", "consistent"):
            raise ValueError(f"form must be 'printed' or 'consistent', got {self.form!r}")
        if self.omega <= 0 or self.nu <= 0:
            raise ValueError("omega and nu must be positive")

    def q_plus(self, t):
        t = np.asarray(t, dtype=float)
        w, nu, eta = self.omega, self.nu, self.eta
        carrier = np.exp(1j * w * t)
        if self.form == "printed":
            return carrier - (eta / 6.0) * (
                np.exp(2j * w * t) + 3.0 * np.exp(-1j * (nu - w) * t)
            )
        up = np.exp(1j * (nu + w) * t) / (w**2 - (nu + w) ** 2)
        down = np.exp(-1j * (nu - w) * t) / (w**2 - (nu - w) ** 2)
        return carrier + 0.5j * eta * w**2 * (down - up)

    def q_minus(self, t):
        return np.conj(self.q_plus(t))


def classical_solutions(eta: float, omega: float, nu: float, form: str = "printed") -> ClassicalSolution:
    """Evaluator for the first-order classical solutions q±(t)."""
    return ClassicalSolution(eta=eta, omega=omega, nu=nu, form=form)


def charge_envelope(eta: float, nu: float, t) -> np.ndarray:
    """Scalar prefactor (1 - eta/3 sin nu t) of the quasienergy charge."""
    return 1.0 - (eta / 3.0) * np.sin(nu * np.asarray(t, dtype=float))


def quasienergy_charge_operator(params: DeviceParams, t: float, layout: ModeLayout) -> QOperator:
    """Charge operator in the quasienergy basis at time t (Coulomb).

    Q = (1 - eta/3 sin nu t) sqrt(hbar/2Z) [A(t) + A^dag(t)] with
    A(t) = e^{-i omega_lc t} (1 - 2i eta/3 sin nu t) A(0).
    """
    _require_slots(layout, "lc")
    a = annihilation(layout.dim("lc"))
    s = math.sin(params.nu * t)
    amp = np.exp(-1j * params.omega_lc * t) * (1.0 - 2j * params.eta * s / 3.0)
    prefactor = float(charge_envelope(params.eta, params.nu, t)) * math.sqrt(
        hbar / (2.0 * params.Z)
    )
    matrix = prefactor * (amp * a + np.conj(amp) * a.conj().T)
    return QOperator(layout, layout.lift({"lc": matrix}))


def scaled_hierarchy(
    ratio: float = 1e-2,
    *,
    eta: float = 0.3,
    coupling_ratio: float = 0.2,
    omega_i: float = 2 * math.pi * 10.0,
    Omega0: float = 2 * math.pi * 0.5,
    kappa_lc: float = 0.0,
    gamma_heat: float = 0.0,
) -> DeviceParams:
    """Desk-scale operating point preserving the design frequency ratios.

    omega_i/omega_lc = ratio (default 1e-2), g0 = coupling_ratio*omega_i
    (default 0.2, i.e. g0 = 2pi*2 at omega_i = 2pi*10), nu on the red
    sideband. Circuit fields (L, zeta) are back-solved so the DeviceParams
    consistency invariants hold exactly; they have no physical meaning at
    this scale.
    """
    if not 0.0 < ratio <= 0.5:
        raise ValueError(f"ratio must be in (0, 0.5], got {ratio}")
    omega_lc = omega_i / ratio
    g0 = coupling_ratio * omega_i
    C0 = 46e-15
    h = 25e-6
    ion_mass = 1.494e-26
    Z = 2.7e3
    L = 1.0 / (omega_lc**2 * C0)
    z0 = zero_point_motion(ion_mass, omega_i)
    q0 = zero_point_charge(Z)
    zeta = g0 * hbar * h * C0 / (elementary_charge * z0 * q0)
    return DeviceParams.from_circuit(
        L=L,
        C0=C0,
        eta=eta,
        omega_i=omega_i,
        h=h,
        zeta=zeta,
        ion_mass=ion_mass,
        Z=Z,
        kappa_lc=kappa_lc,
        gamma_heat=gamma_heat,
        Omega0=Omega0,
    )
