"""Protocol configuration: defaults, file loading, canonical hashing.

All energies and rates are in units of the resonator frequency omega and
all times in units of 1/omega.  The defaults reproduce the source
protocol's operating point: qubit half-splittings starting at 0.8/0.2,
intrinsic cavity decay 1e-4, qubit relaxation 1e-5, dephasing 2e-5, and
an output coupler of 0.1 (a thousand times the intrinsic rate).
Transfer-ramp shapes are calibration artifacts; see the profile fields.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

__all__ = ["ProtocolConfig", "ConfigError", "load_config", "config_hash"]


class ConfigError(ValueError):
    pass


# transfer-1 ramp shapes: interior breakpoints as (time fraction,
# delta-split fraction, coupling); the ramp ends at (1.0, 0.0, g_end).
RABI_RAMP1 = ((0.25, 1.0, 0.105), (0.60, 1.0, 0.39), (0.65, 1.0, 0.39))
STARK_RAMP1 = ((0.0417, 0.9388, 0.1922), (0.3003, 0.9948, 0.2971),
               (0.5976, 0.4150, 0.6485))


@dataclass(frozen=True)
class ProtocolConfig:
    # truncation
    fock_cutoff: int = 8
    spectrum_fock_cutoff: int = 40
    # static model parameters
    omega: float = 1.0
    delta1_start: float = 0.8
    delta2_start: float = 0.2
    u1: float = 0.0
    u2: float = 0.0
    # transfer-1 ramp (first adiabatic passage)
    t_ramp1: float = 68.0
    ramp1_profile: tuple = RABI_RAMP1
    g_end: float = 0.39
    interp: str = "smoothstep"
    # remaining timeline
    t_hold: float = 22.0
    t_emit1: float = 52.0
    t_bump: float = 15.0
    t_ramp2: float = 48.0
    t_idle: float = 55.0
    kappa_switch_time: float = 2.0
    g2_max: float = 0.39
    # Stark-assisted fast variant
    stark_u: float = 0.5
    stark_t_ramp1: float = 12.0
    stark_ramp1_profile: tuple = STARK_RAMP1
    stark_g_end: float = 0.7841
    stark_interp: str = "smootherstep"
    # dissipation rates
    kappa_in: float = 1e-4
    kappa_c_on: float = 0.1
    gamma1: float = 1e-5
    gamma2: float = 1e-5
    gamma_phi1: float = 2e-5
    gamma_phi2: float = 2e-5
    # preparation
    prep: str = "ideal"           # "ideal" | "pulse" | "none"
    rabi_amplitude: float = 0.1
    pulse_t_on: float = 0.0
    pulse_t_off: float = 0.0
    # numerics
    rtol: float = 1e-8
    atol: float = 1e-10
    traj_dt: float = 0.25
    corr_dt: float = 0.5
    warmup_periods: int = 1
    corr_tau_periods: float = 1.5
    seed: int = 0
    # output
    out_dir: str = "out"

    def __post_init__(self):
        if self.fock_cutoff < 1 or self.spectrum_fock_cutoff < 1:
            raise ConfigError("Fock cutoffs must be >= 1")
        if self.omega <= 0:
            raise ConfigError("omega must be positive")
        if abs((self.delta1_start + self.delta2_start) - self.omega) > 1e-9:
            raise ConfigError("delta1_start + delta2_start must equal omega "
                              "(dark-state manifold)")
        for name in ("t_ramp1", "t_hold", "t_emit1", "t_bump", "t_ramp2",
                     "t_idle", "stark_t_ramp1"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.kappa_switch_time <= 0 or self.kappa_switch_time >= self.t_hold:
            raise ConfigError("kappa_switch_time must lie inside the hold phase")
        for name in ("kappa_in", "kappa_c_on", "gamma1", "gamma2",
                     "gamma_phi1", "gamma_phi2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.prep not in ("ideal", "pulse", "none"):
            raise ConfigError(f"unknown prep mode {self.prep!r}")
        if self.prep == "pulse" and self.pulse_t_off <= self.pulse_t_on:
            raise ConfigError("pulse mode needs pulse_t_off > pulse_t_on")
        if self.interp not in ("linear", "smoothstep", "smootherstep") or \
           self.stark_interp not in ("linear", "smoothstep", "smootherstep"):
            raise ConfigError("interp must be linear|smoothstep|smootherstep")
        if self.stark_u < 0 or self.u1 < 0 or self.u2 < 0:
            raise ConfigError("Stark couplings must be >= 0")
        for prof_name in ("ramp1_profile", "stark_ramp1_profile"):
            prof = getattr(self, prof_name)
            fr = [p[0] for p in prof]
            if any(not (0 < f < 1) for f in fr) or sorted(fr) != list(fr):
                raise ConfigError(f"{prof_name} fractions must increase in (0,1)")
        if self.traj_dt <= 0 or self.corr_dt <= 0:
            raise ConfigError("output grid steps must be positive")

    # derived timeline -----------------------------------------------------
    @property
    def period(self) -> float:
        return (self.t_ramp1 + self.t_hold + self.t_emit1 + self.t_bump
                + self.t_ramp2 + self.t_idle)

    @property
    def emission_window1(self) -> tuple[float, float]:
        t0 = self.t_ramp1 + self.t_hold
        return (t0, t0 + self.t_emit1)

    @property
    def emission_window2(self) -> tuple[float, float]:
        t0 = self.t_ramp1 + self.t_hold + self.t_emit1
        return (t0, self.period)

    def canonical_dict(self) -> dict:
        doc = asdict(self)
        doc["ramp1_profile"] = [list(p) for p in self.ramp1_profile]
        doc["stark_ramp1_profile"] = [list(p) for p in self.stark_ramp1_profile]
        return doc

    def replace(self, **changes) -> "ProtocolConfig":
        from dataclasses import replace

        return replace(self, **changes)


_FIELD_NAMES = {f.name for f in fields(ProtocolConfig)}


def _from_dict(doc: dict) -> ProtocolConfig:
    unknown = set(doc) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    doc = dict(doc)
    for key in ("ramp1_profile", "stark_ramp1_profile"):
        if key in doc:
            try:
                doc[key] = tuple(tuple(float(x) for x in row) for row in doc[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key} must be a list of "
                                  "[fraction, split, coupling] rows") from exc
    try:
        return ProtocolConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ProtocolConfig:
    """Config from a TOML (preferred) or JSON file, with field overrides."""
    doc: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
        if path.suffix.lower() == ".json":
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        else:
            try:
                import tomllib  # type: ignore[import-not-found]
            except ModuleNotFoundError:
                import tomli as tomllib
            try:
                doc = tomllib.loads(text)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    return _from_dict(doc)


def config_hash(config: ProtocolConfig) -> str:
    blob = json.dumps(config.canonical_dict(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()
