"""Physical device parameters and engineering estimates for the
ion/LC-circuit interface.

Everything is SI with angular frequencies in rad/s; Hz enters only at the
CLI boundary. The characteristic impedance Z is an independent input
rather than sqrt(L/C): the zero-point charge budget is anchored to the
quoted 2.7 kOhm, which is not the sqrt(L/C) of the quoted L and C (that
gives 3.09 kOhm). impedance() computes the formula value; DeviceParams.Z
records the design number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from scipy.constants import elementary_charge, epsilon_0, hbar

from .electrostatics import ConvergenceError, ElectrodeGeometry, geometric_factor

__all__ = [
    "DeviceParams",
    "ElectrodeGeometry",
    "ConvergenceError",
    "lc_frequency",
    "impedance",
    "zero_point_motion",
    "zero_point_charge",
    "base_coupling",
    "effective_coupling",
    "shield_capacitance",
    "heating_rate_scaled",
    "baw_backaction",
    "geometric_factor",
    "decoherence_budget",
]

# 9Be+ ion mass
_DEFAULT_ION_MASS = 1.494e-26

# relative slack for the derived-field consistency invariant
_CONSISTENT = 1e-12


def lc_frequency(L: float, C: float) -> float:
    """Natural angular frequency 1/sqrt(LC) of the resonator (rad/s)."""
    if L <= 0 or C <= 0:
        raise ValueError(f"L and C must be positive, got L={L}, C={C}")
    return 1.0 / math.sqrt(L * C)


def impedance(L: float, C: float) -> float:
    """Characteristic impedance sqrt(L/C) in Ohm."""
    if L <= 0 or C <= 0:
        raise ValueError(f"L and C must be positive, got L={L}, C={C}")
    return math.sqrt(L / C)


def zero_point_motion(mass: float, omega_i: float) -> float:
    """Motional zero-point length sqrt(hbar / (2 m omega_i)) in metres."""
    if mass <= 0 or omega_i <= 0:
        raise ValueError(f"mass and omega_i must be positive, got {mass}, {omega_i}")
    return math.sqrt(hbar / (2.0 * mass * omega_i))


def zero_point_charge(Z: float) -> float:
    """Zero-point charge sqrt(hbar / (2 Z)) in Coulomb."""
    if Z <= 0:
        raise ValueError(f"impedance must be positive, got {Z}")
    return math.sqrt(hbar / (2.0 * Z))


def base_coupling(params: "DeviceParams") -> float:
    """Single-quantum coupling g0 = e zeta z0 q0 / (hbar h C0) in rad/s."""
    return (
        elementary_charge
        * params.zeta
        * params.z0
        * params.q0
        / (hbar * params.h * params.C0)
    )


def effective_coupling(g0: float, eta: float) -> float:
    """Resonantly selected swap coupling g = (2/3) eta g0 in rad/s."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must satisfy 0 <= eta < 1, got {eta}")
    return (2.0 / 3.0) * eta * g0


def shield_capacitance(coil_length: float, shield_diameter: float, coil_diameter: float) -> float:
    """Coaxial-shield capacitance 2 pi eps0 l / ln(D/d) in Farad."""
    if coil_length <= 0:
        raise ValueError(f"coil length must be positive, got {coil_length}")
    if not shield_diameter > coil_diameter > 0:
        raise ValueError(
            "need shield_diameter > coil_diameter > 0, got "
            f"D={shield_diameter}, d={coil_diameter}"
        )
    return 2.0 * math.pi * epsilon_0 * coil_length / math.log(shield_diameter / coil_diameter)


def heating_rate_scaled(rate_ref: float, d_ref: float, d: float) -> float:
    """Anomalous heating rate moved to distance d with the 1/d^4 law."""
    if rate_ref < 0 or d_ref <= 0 or d <= 0:
        raise ValueError(
            f"need rate_ref >= 0 and positive distances, got {rate_ref}, {d_ref}, {d}"
        )
    return rate_ref * (d_ref / d) ** 4


def baw_backaction(
    x_B: float, zeta0: float, n_lc: float, omega_lc: float, nu: float, kappa_B: float
) -> complex:
    """Acoustic-resonator back-action displacement ratio zeta_LC / zeta0.

    Complex ratio (x_B / zeta0) n_LC omega_LC / (omega_LC - nu + i kappa_B/2);
    abs() of the return value is the magnitude estimate.
    """
    if zeta0 <= 0:
        raise ValueError(f"zeta0 must be positive, got {zeta0}")
    return (x_B / zeta0) * n_lc * omega_lc / (omega_lc - nu + 0.5j * kappa_B)


def decoherence_budget(
    kappa_lc: float, gamma_heat: float, gamma_spin: float, protocol_time: float
) -> float:
    """Infidelity estimate (sum of rates) * protocol time."""
    rates = (kappa_lc, gamma_heat, gamma_spin)
    if any(r < 0 for r in rates) or protocol_time < 0:
        raise ValueError("rates and protocol_time must be nonnegative")
    return sum(rates) * protocol_time


@dataclass(frozen=True)
class DeviceParams:
    """Complete device operating point.

    Construct through from_circuit()/reference_design(); direct construction
    must supply derived fields (omega_lc, z0, q0, g0) consistent with
    their formulas to 1e-12 relative, or validation rejects the instance.
    """

    L: float  # inductance (H)
    C0: float  # static capacitance (F)
    eta: float  # modulation depth
    omega_lc: float  # LC angular frequency (rad/s)
    omega_i: float  # motional angular frequency (rad/s)
    nu: float  # drive angular frequency (rad/s)
    h: float  # ion height above the electrode plane (m)
    zeta: float  # geometric factor
    ion_mass: float  # kg
    z0: float  # motional zero-point length (m)
    q0: float  # zero-point charge (C)
    g0: float  # base coupling (rad/s)
    Z: float  # characteristic impedance (Ohm)
    kappa_lc: float  # LC energy decay rate (1/s)
    gamma_heat: float  # motional heating rate (1/s)
    Omega0: float  # spin/motion Rabi frequency (rad/s)

    def __post_init__(self):
        positive = (
            "L", "C0", "omega_lc", "omega_i", "nu", "h", "zeta",
            "ion_mass", "z0", "q0", "g0", "Z",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        # Omega0 may be zero: the carrier drive is simply off
        for name in ("kappa_lc", "gamma_heat", "Omega0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must satisfy 0 <= eta < 1, got {self.eta}")
        checks = {
            "omega_lc": lc_frequency(self.L, self.C0),
            "z0": zero_point_motion(self.ion_mass, self.omega_i),
            "q0": zero_point_charge(self.Z),
            "g0": base_coupling(self),
        }
        for name, want in checks.items():
            have = getattr(self, name)
            if abs(have - want) > _CONSISTENT * abs(want):
                raise ValueError(
                    f"derived field {name}={have!r} inconsistent with its "
                    f"formula value {want!r}"
                )

    @classmethod
    def from_circuit(
        cls,
        *,
        L: float = 440e-9,
        C0: float = 46e-15,
        eta: float = 0.3,
        omega_i: float = 2 * math.pi * 1e6,
        nu: float | None = None,
        h: float = 25e-6,
        zeta: float = 0.25,
        ion_mass: float = _DEFAULT_ION_MASS,
        Z: float = 2.7e3,
        kappa_lc: float = 2e3,
        gamma_heat: float = 500.0,
        Omega0: float = 2 * math.pi * 1e5,
    ) -> "DeviceParams":
        """Build a consistent parameter set from the independent inputs.

        nu defaults to the red-sideband resonance omega_lc - omega_i.
        """
        omega_lc = lc_frequency(L, C0)
        z0 = zero_point_motion(ion_mass, omega_i)
        q0 = zero_point_charge(Z)
        g0 = elementary_charge * zeta * z0 * q0 / (hbar * h * C0)
        if nu is None:
            nu = omega_lc - omega_i
        return cls(
            L=L, C0=C0, eta=eta, omega_lc=omega_lc, omega_i=omega_i, nu=nu,
            h=h, zeta=zeta, ion_mass=ion_mass, z0=z0, q0=q0, g0=g0, Z=Z,
            kappa_lc=kappa_lc, gamma_heat=gamma_heat, Omega0=Omega0,
        )

    @classmethod
    def reference_design(cls) -> "DeviceParams":
        """The reference operating point: 440 nH, 46 fF, 2.7 kOhm, 9Be+."""
        return cls.from_circuit()

    def detuning(self) -> float:
        """Drive detuning Delta = nu - (omega_lc - omega_i) in rad/s."""
        return self.nu - (self.omega_lc - self.omega_i)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
