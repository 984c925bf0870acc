"""Run configuration: parsing, validation, and canonical echo.

YAML supplies the nested key/value syntax; the schema, defaults, and
unit handling live here. Two rules contain the usual sweep-config
hazards: unknown keys are hard errors naming the full dotted path, and
dimensionful keys carry explicit unit suffixes (omega_i_hz, h_m,
kappa_lc_per_s) so files stay in the units experimentalists quote.
Values are stored exactly as given; the 2 pi Hz-to-angular conversion
happens in one place (device_params and the run layer), which keeps the
parse -> echo -> parse round trip bit-exact.
"""

import math
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .device import DeviceParams

__all__ = [
    "ConfigError",
    "RunConfig",
    "SimulateConfig",
    "ProtocolConfig",
    "BudgetConfig",
    "MsConfig",
    "CatConfig",
    "TwoIonConfig",
    "SweepConfig",
    "MODES",
    "DEVICE_KEYS",
    "load_config",
    "config_from_mapping",
    "device_params",
    "require_mode",
]

TWO_PI = 2.0 * math.pi

MODES = ("params", "simulate", "protocol", "sweep", "check")

# config key -> (DeviceParams.from_circuit kwarg, multiplier into SI rad/s)
DEVICE_KEYS = {
    "L_henry": ("L", 1.0),
    "C0_farad": ("C0", 1.0),
    "Z_ohm": ("Z", 1.0),
    "eta": ("eta", 1.0),
    "zeta": ("zeta", 1.0),
    "h_m": ("h", 1.0),
    "ion_mass_kg": ("ion_mass", 1.0),
    "omega_i_hz": ("omega_i", TWO_PI),
    "nu_hz": ("nu", TWO_PI),
    "Omega0_hz": ("Omega0", TWO_PI),
    "kappa_lc_per_s": ("kappa_lc", 1.0),
    "gamma_heat_per_s": ("gamma_heat", 1.0),
}


class ConfigError(ValueError):
    """A config failed validation; the message names the offending key."""


@dataclass(frozen=True)
class SimulateConfig:
    """One swap of the circuit-motion exchange, sampled as a time series."""

    frame: str = "rwa"  # rwa | interaction | lab
    hierarchy_ratio: float = 1e-2  # omega_i / omega_lc of the scaled point
    delta_hz: float = 0.0  # beam-splitter detuning, scaled Hz
    dims: tuple = (8, 8)  # (lc, motion) Fock truncations
    tolerance: float = 1e-9
    n_samples: int = 121


@dataclass(frozen=True)
class BudgetConfig:
    """Swap - sideband-pulse - swap process tomography with dissipation."""

    dims: tuple = (2, 4, 4)
    tolerance: float = 1e-8
    kappa_lc_per_s: float | None = None  # None: take the device value
    gamma_heat_per_s: float | None = None
    heating_model: str = "symmetric"
    convergence: bool = True


@dataclass(frozen=True)
class MsConfig:
    """Echoed spin-dependent loop sequence at the scaled operating point."""

    hierarchy_ratio: float = 1e-2
    delta_hz: float = 5.0  # loop detuning, scaled Hz
    n_loops: int = 1
    dims: tuple = (2, 6, 6)  # acceptance uses (2, 8, 8); this keeps runs short
    tolerance: float = 1e-9
    convergence: bool = True


@dataclass(frozen=True)
class CatConfig:
    """Cat-state displacement sensing: parity fringe and SI extrapolation."""

    alpha_cat: float = 2.0
    probe_displacement: float = 0.5
    lc_dim: int = 64
    n_points: int = 101
    n_bar: float = 100.0


@dataclass(frozen=True)
class TwoIonConfig:
    """Geometric two-spin phase gate mediated by the shared circuit."""

    alpha: float = 0.6266570686577501  # sqrt(pi/8): the pi-phase point
    lc_dim: int = 32


@dataclass(frozen=True)
class ProtocolConfig:
    name: str = "budget"  # budget | ms | cat | two_ion
    budget: BudgetConfig = BudgetConfig()
    ms: MsConfig = MsConfig()
    cat: CatConfig = CatConfig()
    two_ion: TwoIonConfig = TwoIonConfig()


@dataclass(frozen=True)
class SweepConfig:
    """Heating-resistance scan: loop detuning swept at fixed phase alpha."""

    axis: str = "delta_hz"
    values: tuple = ()  # scaled Hz; must be nonempty for mode=sweep
    workers: int = 1
    hierarchy_ratio: float = 1e-2
    gamma_heat_per_s: float = 0.02  # scaled occupation growth rate
    target_alpha: float = 0.2
    dims: tuple = (2, 6, 8)
    tolerance: float = 1e-7
    heating_model: str = "symmetric"


@dataclass(frozen=True)
class RunConfig:
    mode: str | None = None
    seed: int | None = None  # reserved; echoed untouched by deterministic runs
    out_dir: str | None = None
    device: tuple = ()  # sorted (config key, value) override pairs
    simulate: SimulateConfig = SimulateConfig()
    protocol: ProtocolConfig = ProtocolConfig()
    sweep: SweepConfig = SweepConfig()

    def to_mapping(self) -> dict:
        """Canonical nested-dict echo; parsing it reproduces this config."""
        return {
            "mode": self.mode,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "device": {k: v for k, v in self.device},
            "simulate": {
                "frame": self.simulate.frame,
                "hierarchy_ratio": self.simulate.hierarchy_ratio,
                "delta_hz": self.simulate.delta_hz,
                "dims": list(self.simulate.dims),
                "tolerance": self.simulate.tolerance,
                "n_samples": self.simulate.n_samples,
            },
            "protocol": {
                "name": self.protocol.name,
                "budget": {
                    "dims": list(self.protocol.budget.dims),
                    "tolerance": self.protocol.budget.tolerance,
                    "kappa_lc_per_s": self.protocol.budget.kappa_lc_per_s,
                    "gamma_heat_per_s": self.protocol.budget.gamma_heat_per_s,
                    "heating_model": self.protocol.budget.heating_model,
                    "convergence": self.protocol.budget.convergence,
                },
                "ms": {
                    "hierarchy_ratio": self.protocol.ms.hierarchy_ratio,
                    "delta_hz": self.protocol.ms.delta_hz,
                    "n_loops": self.protocol.ms.n_loops,
                    "dims": list(self.protocol.ms.dims),
                    "tolerance": self.protocol.ms.tolerance,
                    "convergence": self.protocol.ms.convergence,
                },
                "cat": {
                    "alpha_cat": self.protocol.cat.alpha_cat,
                    "probe_displacement": self.protocol.cat.probe_displacement,
                    "lc_dim": self.protocol.cat.lc_dim,
                    "n_points": self.protocol.cat.n_points,
                    "n_bar": self.protocol.cat.n_bar,
                },
                "two_ion": {
                    "alpha": self.protocol.two_ion.alpha,
                    "lc_dim": self.protocol.two_ion.lc_dim,
                },
            },
            "sweep": {
                "axis": self.sweep.axis,
                "values": list(self.sweep.values),
                "workers": self.sweep.workers,
                "hierarchy_ratio": self.sweep.hierarchy_ratio,
                "gamma_heat_per_s": self.sweep.gamma_heat_per_s,
                "target_alpha": self.sweep.target_alpha,
                "dims": list(self.sweep.dims),
                "tolerance": self.sweep.tolerance,
                "heating_model": self.sweep.heating_model,
            },
        }


def _require_mapping(node, path: str) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(f"config section '{path}' must be a mapping")
    for key in node:
        if not isinstance(key, str):
            raise ConfigError(f"config section '{path}' has a non-string key {key!r}")
    return node


def _finite(value: float, path: str) -> float:
    if not math.isfinite(value):
        raise ConfigError(f"config key '{path}' must be finite, got {value!r}")
    return value


def _float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key '{path}' must be a number, got {value!r}")
    return _finite(float(value), path)


def _optional_float(value, path: str):
    return None if value is None else _float(value, path)


def _int(value, path: str, *, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"config key '{path}' must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"config key '{path}' must be >= {minimum}, got {value}")
    return value


def _bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"config key '{path}' must be a boolean, got {value!r}")
    return value


def _choice(allowed):
    def convert(value, path: str) -> str:
        if value not in allowed:
            raise ConfigError(
                f"config key '{path}' must be one of {sorted(allowed)}, got {value!r}"
            )
        return value

    return convert


def _dims(length: int):
    def convert(value, path: str) -> tuple:
        if not isinstance(value, (list, tuple)) or len(value) != length:
            raise ConfigError(
                f"config key '{path}' must be a list of {length} truncation dims"
            )
        return tuple(_int(v, path, minimum=2) for v in value)

    return convert


def _tolerance(value, path: str) -> float:
    tol = _float(value, path)
    # the integrator contract: tolerances outside this window are rejected
    if not 1e-12 <= tol <= 1e-4:
        raise ConfigError(
            f"config key '{path}' must lie in [1e-12, 1e-4], got {tol!r}"
        )
    return tol


def _values_list(value, path: str) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"config key '{path}' must be a list of numbers")
    return tuple(_float(v, f"{path}[{i}]") for i, v in enumerate(value))


def _parse_section(node, path: str, schema: dict, cls):
    mapping = _require_mapping(node, path)
    for key in mapping:
        if key not in schema:
            raise ConfigError(f"unknown config key '{path}.{key}'")
    kwargs = {k: schema[k](mapping[k], f"{path}.{k}") for k in mapping}
    return cls(**kwargs)


_SIMULATE_SCHEMA = {
    "frame": _choice(("rwa", "interaction", "lab")),
    "hierarchy_ratio": _float,
    "delta_hz": _float,
    "dims": _dims(2),
    "tolerance": _tolerance,
    "n_samples": lambda v, p: _int(v, p, minimum=2),
}

_BUDGET_SCHEMA = {
    "dims": _dims(3),
    "tolerance": _tolerance,
    "kappa_lc_per_s": _optional_float,
    "gamma_heat_per_s": _optional_float,
    "heating_model": _choice(("symmetric", "raising")),
    "convergence": _bool,
}

_MS_SCHEMA = {
    "hierarchy_ratio": _float,
    "delta_hz": _float,
    "n_loops": lambda v, p: _int(v, p, minimum=1),
    "dims": _dims(3),
    "tolerance": _tolerance,
    "convergence": _bool,
}

_CAT_SCHEMA = {
    "alpha_cat": _float,
    "probe_displacement": _float,
    "lc_dim": lambda v, p: _int(v, p, minimum=2),
    "n_points": lambda v, p: _int(v, p, minimum=5),
    "n_bar": _float,
}

_TWO_ION_SCHEMA = {
    "alpha": _float,
    "lc_dim": lambda v, p: _int(v, p, minimum=2),
}

_SWEEP_SCHEMA = {
    "axis": _choice(("delta_hz",)),
    "values": _values_list,
    "workers": lambda v, p: _int(v, p, minimum=1),
    "hierarchy_ratio": _float,
    "gamma_heat_per_s": _float,
    "target_alpha": _float,
    "dims": _dims(3),
    "tolerance": _tolerance,
    "heating_model": _choice(("symmetric", "raising")),
}

_TOP_KEYS = ("mode", "seed", "out_dir", "device", "simulate", "protocol", "sweep")


def _parse_device(node, path: str) -> tuple:
    mapping = _require_mapping(node, path)
    for key in mapping:
        if key not in DEVICE_KEYS:
            raise ConfigError(f"unknown config key '{path}.{key}'")
    return tuple(sorted((k, _float(v, f"{path}.{k}")) for k, v in mapping.items()))


def _parse_protocol(node, path: str) -> ProtocolConfig:
    mapping = _require_mapping(node, path)
    sections = {
        "budget": (_BUDGET_SCHEMA, BudgetConfig),
        "ms": (_MS_SCHEMA, MsConfig),
        "cat": (_CAT_SCHEMA, CatConfig),
        "two_ion": (_TWO_ION_SCHEMA, TwoIonConfig),
    }
    kwargs = {}
    for key, value in mapping.items():
        if key == "name":
            kwargs["name"] = _choice(tuple(sections))(value, f"{path}.name")
        elif key in sections:
            schema, cls = sections[key]
            kwargs[key] = _parse_section(value, f"{path}.{key}", schema, cls)
        else:
            raise ConfigError(f"unknown config key '{path}.{key}'")
    return ProtocolConfig(**kwargs)


def config_from_mapping(mapping) -> RunConfig:
    """Validate a nested mapping (parsed YAML) into a RunConfig."""
    mapping = _require_mapping(mapping, "<root>")
    for key in mapping:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
    kwargs = {}
    if mapping.get("mode") is not None:
        kwargs["mode"] = _choice(MODES)(mapping["mode"], "mode")
    if mapping.get("seed") is not None:
        kwargs["seed"] = _int(mapping["seed"], "seed", minimum=0)
    if mapping.get("out_dir") is not None:
        value = mapping["out_dir"]
        if not isinstance(value, str) or not value:
            raise ConfigError("config key 'out_dir' must be a nonempty string")
        kwargs["out_dir"] = value
    if "device" in mapping:
        kwargs["device"] = _parse_device(mapping["device"], "device")
    if "simulate" in mapping:
        kwargs["simulate"] = _parse_section(
            mapping["simulate"], "simulate", _SIMULATE_SCHEMA, SimulateConfig
        )
    if "protocol" in mapping:
        kwargs["protocol"] = _parse_protocol(mapping["protocol"], "protocol")
    if "sweep" in mapping:
        kwargs["sweep"] = _parse_section(
            mapping["sweep"], "sweep", _SWEEP_SCHEMA, SweepConfig
        )
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    """Parse and validate a YAML config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    return config_from_mapping(data)


def require_mode(config: RunConfig, mode: str) -> RunConfig:
    """Fix the run mode and apply the cross-field checks that depend on it.

    A mode already present in the file must agree with the subcommand:
    silently reinterpreting a sweep config as a one-off run is exactly
    the kind of surprise the unknown-key rule exists to prevent.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if config.mode is not None and config.mode != mode:
        raise ConfigError(
            f"config requests mode '{config.mode}' but the subcommand is '{mode}'"
        )
    if mode == "sweep" and not config.sweep.values:
        raise ConfigError("config key 'sweep.values' must be nonempty for a sweep")
    return replace(config, mode=mode)


def device_params(config: RunConfig) -> DeviceParams:
    """Resolve device overrides into a consistent parameter set.

    This is the Hz -> rad/s boundary: _hz keys are multiplied by 2 pi
    here and nowhere else.
    """
    kwargs = {}
    for key, value in config.device:
        target, scale = DEVICE_KEYS[key]
        kwargs[target] = scale * value
    try:
        return DeviceParams.from_circuit(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid device override: {exc}") from exc
