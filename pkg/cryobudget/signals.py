"""Signal levels and the power they dissipate: pi-pulse drive and flux bias."""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

from scipy import constants

from .errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

# Peak power quoted for the reference pulse in the drive-line literature.
REFERENCE_PEAK_DBM = -66.0

# pi/2 pulses need a quarter of the pi-pulse power.
PI_HALF_POWER_RATIO = 0.25

# Flux pulse current amplitudes in A.
FLUX_PULSE_PRESETS = {"default": 0.2e-3, "alternative": 0.4e-3}


def dbm_to_watt(dbm: float) -> float:
    return 1e-3 * 10 ** (dbm / 10)


def watt_to_dbm(watt: float) -> float:
    if watt <= 0:
        return -math.inf
    return 10 * math.log10(watt / 1e-3)


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian pi-pulse and how often it is played."""

    sigma: float = 5e-9
    duration: float = 30e-9
    qubit_frequency: float = 2 * math.pi * 5e9
    t1_limit: float = 0.5e-3
    duty_cycle: float = 0.33
    pi_half_share: float = 0.5

    def __post_init__(self):
        if self.sigma <= 0 or self.qubit_frequency <= 0 or self.t1_limit <= 0:
            raise DomainError("sigma, qubit frequency and T1 limit must be > 0")
        for label, value in (("duty_cycle", self.duty_cycle), ("pi_half_share", self.pi_half_share)):
            if not 0 <= value <= 1:
                raise ConfigError(f"{label} must be within [0, 1], got {value}")


@dataclass(frozen=True)
class PulsePowers:
    omega0: float
    peak: float
    average: float
    line_average: float
    reference_peak_dBm: float = REFERENCE_PEAK_DBM
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def peak_dBm(self) -> float:
        return watt_to_dbm(self.peak)

    @property
    def line_average_dBm(self) -> float:
        return watt_to_dbm(self.line_average)

    @property
    def reference_deviation_dB(self) -> float:
        """Computed peak power minus the quoted reference value."""
        return self.peak_dBm - self.reference_peak_dBm


def pi_pulse_powers(pulse: PulseSpec) -> PulsePowers:
    """Rabi amplitude and drive powers needed for a pi-pulse at the T1 limit."""
    warnings = []
    if pulse.duration < 6 * pulse.sigma and not math.isclose(pulse.duration, 6 * pulse.sigma, rel_tol=1e-9):
        msg = f"pulse duration {pulse.duration:g} s is shorter than 6 sigma ({6 * pulse.sigma:g} s)"
        logger.warning(msg)
        warnings.append(msg)
    omega0 = math.sqrt(math.pi / (2 * pulse.sigma ** 2))
    peak = constants.hbar * pulse.qubit_frequency * pulse.t1_limit * omega0 ** 2 / 4
    average = math.sqrt(math.pi) / 6 * peak
    share = pulse.pi_half_share
    line_average = average * pulse.duty_cycle * ((1 - share) + PI_HALF_POWER_RATIO * share)
    return PulsePowers(omega0=omega0, peak=peak, average=average, line_average=line_average, warnings=tuple(warnings))


@dataclass(frozen=True)
class FluxBiasSpec:
    """Effective resistances seen by a flux-bias current, and the currents used."""

    r_eff_mxc: float = 0.15
    r_eff_cp: float = 0.42
    i_max: float = 1e-3
    pulse_amplitude: float = FLUX_PULSE_PRESETS["default"]
    pulse_duty: float = 0.33

    def __post_init__(self):
        if self.r_eff_mxc < 0 or self.r_eff_cp < 0:
            raise ConfigError("effective resistances must be >= 0")
        if self.i_max < 0 or self.pulse_amplitude < 0:
            raise ConfigError("flux currents must be >= 0")
        if not 0 <= self.pulse_duty <= 1:
            raise ConfigError(f"pulse_duty must be within [0, 1], got {self.pulse_duty}")


@dataclass(frozen=True)
class FluxLoads:
    mxc: float
    cp: float

    def __add__(self, other: "FluxLoads") -> "FluxLoads":
        return FluxLoads(self.mxc + other.mxc, self.cp + other.cp)

    def scaled(self, factor: float) -> "FluxLoads":
        return FluxLoads(self.mxc * factor, self.cp * factor)


def flux_bias_load(spec: FluxBiasSpec, current: float) -> FluxLoads:
    return FluxLoads(mxc=spec.r_eff_mxc * current ** 2, cp=spec.r_eff_cp * current ** 2)


def flux_bias_average_load(spec: FluxBiasSpec) -> FluxLoads:
    """Mean DC load for offset currents spread uniformly over [0, i_max]."""
    return flux_bias_load(spec, spec.i_max).scaled(1 / 3)


def flux_pulse_load(spec: FluxBiasSpec) -> FluxLoads:
    return flux_bias_load(spec, spec.pulse_amplitude).scaled(spec.pulse_duty)
