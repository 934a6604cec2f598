"""Thermal photons and current noise along attenuated lines, and the dephasing they cause."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import constants, optimize

from .errors import DomainError, OutOfRangeError
from .fridge import FridgeModel, LineSpec, validate_line
from .materials import cable_attenuation_db, is_cryogenic

logger = logging.getLogger(__name__)

DEFAULT_FREQUENCY = 6e9

_MIN_SLICES = 1024
_MAX_SLICES = 1 << 22
_SLICE_RTOL = 1e-9


def bose_einstein(T: float, frequency: float) -> float:
    """Mean thermal photon number of a mode at ``frequency`` and temperature ``T``.

    Args:
        T: Temperature in K; zero gives no photons.
        frequency: Mode frequency in Hz.

    Raises:
        OutOfRangeError: ``T`` is negative.
        DomainError: ``frequency`` is not positive.
    """
    if T < 0:
        raise OutOfRangeError(f"temperature must be >= 0, got {T}")
    if frequency <= 0:
        raise DomainError(f"frequency must be > 0, got {frequency}")
    if T == 0:
        return 0.0
    x = constants.h * frequency / (constants.k * T)
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)


def _bose_einstein_array(temperatures: np.ndarray, frequency: float) -> np.ndarray:
    out = np.zeros_like(temperatures, dtype=float)
    warm = temperatures > 0
    x = constants.h * frequency / (constants.k * temperatures[warm])
    with np.errstate(over="ignore"):
        out[warm] = 1.0 / np.expm1(x)
    return out


def thermal_voltage_psd(T: float, R: float, frequency: float) -> float:
    """Two-sided voltage noise of a resistor, quantum corrected, in V^2/Hz."""
    if R <= 0:
        raise DomainError(f"resistance must be > 0, got {R}")
    if T < 0:
        raise OutOfRangeError(f"temperature must be >= 0, got {T}")
    if T == 0:
        return 0.0
    x = constants.h * frequency / (constants.k * T)
    return 2 * constants.k * T * R * x * bose_einstein(T, frequency)


# ---------------------------------------------------------------------------
# attenuator chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteAttenuator:
    """Lumped attenuator, linear power ratio ``attenuation`` >= 1, at ``temperature``."""

    attenuation: float
    temperature: float
    label: str = ""

    def __post_init__(self):
        if self.attenuation < 1:
            raise DomainError(f"attenuation must be >= 1 (linear), got {self.attenuation}")
        if self.temperature < 0:
            raise OutOfRangeError(f"attenuator temperature must be >= 0, got {self.temperature}")

    @classmethod
    def from_db(cls, db: float, temperature: float, label: str = "") -> "DiscreteAttenuator":
        return cls(10 ** (db / 10), temperature, label)


@dataclass(frozen=True)
class DistributedSegment:
    """Lossy cable with a linear temperature gradient from ``t_start`` to ``t_end``."""

    attenuation_dB: float
    t_start: float
    t_end: float
    label: str = ""

    def __post_init__(self):
        if self.attenuation_dB < 0:
            raise DomainError(f"cable attenuation must be >= 0 dB, got {self.attenuation_dB}")
        if self.t_start < 0 or self.t_end < 0:
            raise OutOfRangeError("cable end temperatures must be >= 0")


ChainElement = Union[DiscreteAttenuator, DistributedSegment]


@dataclass(frozen=True)
class AttenuatorChain:
    """Elements in signal order, room temperature first."""

    elements: Tuple[ChainElement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    @classmethod
    def from_plan(cls, fridge: FridgeModel, plan: Dict[str, float]) -> "AttenuatorChain":
        """Discrete attenuators at plate temperatures; ``plan`` maps stage -> dB."""
        return cls(
            tuple(
                DiscreteAttenuator.from_db(plan.get(stage.name, 0.0), stage.temperature, stage.name)
                for stage in fridge.stages
            )
        )

    @property
    def total_dB(self) -> float:
        total = 0.0
        for element in self.elements:
            if isinstance(element, DiscreteAttenuator):
                total += 10 * math.log10(element.attenuation)
            else:
                total += element.attenuation_dB
        return total


@dataclass(frozen=True)
class PhotonNumberProfile:
    """Photon occupation after every element of a chain."""

    frequency: float
    n_input: float
    labels: Tuple[str, ...]
    values: Tuple[float, ...]

    @property
    def n_mxc(self) -> float:
        return self.values[-1] if self.values else self.n_input

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.labels, self.values))


def _attenuate(n: float, attenuation: float, n_bath: float) -> float:
    return n / attenuation + (attenuation - 1) / attenuation * n_bath


def _distributed(n_in: float, segment: DistributedSegment, frequency: float, slices: int) -> float:
    a = 10 ** (-segment.attenuation_dB / (10 * slices))
    positions = (np.arange(slices) + 0.5) / slices
    temps = segment.t_start + (segment.t_end - segment.t_start) * positions
    baths = _bose_einstein_array(temps, frequency)
    # slice k is followed by slices k+1 .. N-1
    weights = a ** (slices - 1 - np.arange(slices))
    return n_in * a ** slices + (1 - a) * float(np.dot(weights, baths))


def _propagate_distributed(n_in: float, segment: DistributedSegment, frequency: float) -> float:
    if segment.attenuation_dB == 0:
        return n_in
    slices = _MIN_SLICES
    previous = _distributed(n_in, segment, frequency, slices)
    while slices < _MAX_SLICES:
        slices *= 2
        current = _distributed(n_in, segment, frequency, slices)
        if abs(current - previous) <= _SLICE_RTOL * max(abs(current), 1e-300):
            return current
        previous = current
    logger.warning("%s: slice refinement stopped at %d slices", segment.label or "cable", slices)
    return previous


def cascade_photon_number(
    chain: AttenuatorChain, frequency: float = DEFAULT_FREQUENCY, n_input: Optional[float] = None
) -> PhotonNumberProfile:
    """Propagate thermal photons down ``chain``.

    ``n_input`` defaults to the occupation at 300 K. Each lumped attenuator
    passes 1/A of the incoming photons and emits (A-1)/A of its own thermal
    population; cables are sliced into many such attenuators.

    Args:
        chain: Elements in signal order, room temperature first.
        frequency: Signal frequency in Hz.
        n_input: Photon number entering the chain.

    Returns:
        Occupation after every element; ``n_mxc`` is the last one.
    """
    if n_input is None:
        n_input = bose_einstein(300.0, frequency)
    if n_input < 0:
        raise DomainError(f"input photon number must be >= 0, got {n_input}")
    n = n_input
    labels, values = [], []
    for element in chain.elements:
        if isinstance(element, DiscreteAttenuator):
            n = _attenuate(n, element.attenuation, bose_einstein(element.temperature, frequency))
        else:
            n = _propagate_distributed(n, element, frequency)
        labels.append(element.label)
        values.append(n)
    return PhotonNumberProfile(frequency=frequency, n_input=n_input, labels=tuple(labels), values=tuple(values))


def chain_for_line(
    line: LineSpec, fridge: FridgeModel, frequency: float = DEFAULT_FREQUENCY, with_cable_loss: bool = False
) -> AttenuatorChain:
    """Attenuator chain seen by a signal travelling down ``line``.

    Components sit at their stage temperature unless they override it. With
    ``with_cable_loss`` every cable run adds a distributed segment whose
    temperature falls linearly from the stage above.
    """
    validate_line(line, fridge)
    elements = []
    upper = fridge.temperature(line.top)
    for segment in line.segments:
        stage_temperature = fridge.temperature(segment.stage)
        if with_cable_loss and segment.cable is not None:
            db = cable_attenuation_db(segment.cable, frequency, segment.run_length(fridge), is_cryogenic(upper))
            elements.append(DistributedSegment(db, upper, stage_temperature, f"cable:{segment.stage}"))
        for component in segment.components:
            db = component.attenuation_at(frequency)
            if db > 0:
                temperature = component.temperature_override
                if temperature is None:
                    temperature = stage_temperature
                elements.append(DiscreteAttenuator.from_db(db, temperature, f"{component.kind.value}:{segment.stage}"))
        upper = stage_temperature
    return AttenuatorChain(tuple(elements))


def reference_attenuations(fridge: FridgeModel, frequency: float = DEFAULT_FREQUENCY) -> Dict[str, float]:
    """Attenuation per stage, in dB, that brings the photon number to the plate's thermal value."""
    result = {}
    upper = fridge.room_temperature
    for stage in fridge.stages:
        n_upper = bose_einstein(upper, frequency)
        n_stage = bose_einstein(stage.temperature, frequency)
        result[stage.name] = math.inf if n_stage == 0 else 10 * math.log10(n_upper / n_stage)
        upper = stage.temperature
    return result


# ---------------------------------------------------------------------------
# flux noise and dephasing
# ---------------------------------------------------------------------------


def current_noise_psd(
    A_4K: float, T_RT: float, T_4K: float, R: float, two_sided: bool = True
) -> float:
    """Current noise reaching the flux line after an attenuator of ``A_4K`` at 4K, in A^2/Hz.

    Args:
        A_4K: Linear power attenuation at 4K; infinite leaves only the 4K noise.
        T_RT: Temperature of the room temperature source in K.
        T_4K: Temperature of the attenuator in K.
        R: Line impedance in ohm.
        two_sided: Two-sided spectral density when true, one-sided otherwise.

    Raises:
        DomainError: ``A_4K`` is below 1 or ``R`` is not positive.
    """
    if A_4K < 1:
        raise DomainError(f"attenuation must be >= 1 (linear), got {A_4K}")
    if R <= 0:
        raise DomainError(f"resistance must be > 0, got {R}")
    prefactor = 2 if two_sided else 4

    def johnson(T: float) -> float:
        return prefactor * constants.k * T / R

    if math.isinf(A_4K):
        return johnson(T_4K)
    return johnson(T_RT) / A_4K + (A_4K - 1) / A_4K * johnson(T_4K)


@dataclass(frozen=True)
class FluxCoupling:
    """Mutual inductance (flux quanta per mA), sweet-spot frequency (rad/s) and flux bias (flux quanta)."""

    mutual_inductance: float
    sweet_spot_frequency: float
    flux_bias: float = 0.0

    def __post_init__(self):
        if self.mutual_inductance <= 0:
            raise DomainError("mutual inductance must be > 0")
        if self.sweet_spot_frequency <= 0:
            raise DomainError("sweet-spot frequency must be > 0")
        if abs(self.flux_bias) >= 0.5:
            raise DomainError(f"flux bias must satisfy |phi| < 0.5, got {self.flux_bias}")


def _flux_slope(phi: float) -> float:
    # d(omega)/d(phi) / omega0, phi in flux quanta
    c = math.cos(math.pi * phi)
    if c <= 0:
        raise DomainError(f"cos(pi * phi) must be > 0, got {c:.3g} at phi = {phi}")
    return math.pi * abs(math.sin(math.pi * phi)) / (2 * math.sqrt(c))


def flux_sensitivity(coupling: FluxCoupling) -> float:
    """Qubit frequency change per unit flux-line current, in rad s^-1 A^-1."""
    m_per_ampere = coupling.mutual_inductance * 1e3
    return coupling.sweet_spot_frequency * _flux_slope(coupling.flux_bias) * m_per_ampere


def detuning_flux(fraction: float) -> float:
    """Flux bias (in flux quanta) that lowers the qubit frequency by ``fraction``."""
    if not 0 <= fraction < 1:
        raise DomainError(f"detuning fraction must be within [0, 1), got {fraction}")
    if fraction == 0:
        return 0.0
    return optimize.brentq(
        lambda phi: math.sqrt(max(math.cos(math.pi * phi), 0.0)) - (1 - fraction), 0.0, 0.5, xtol=1e-15
    )


@dataclass(frozen=True)
class DephasingBounds:
    """Upper bounds on T2* and T2 echo in s; ``None`` means unbounded."""

    t2_star: Optional[float]
    t2_echo: Optional[float]

    @classmethod
    def unbounded(cls) -> "DephasingBounds":
        return cls(None, None)

    @property
    def is_unbounded(self) -> bool:
        return self.t2_star is None


def dephasing_bounds(S_I: float, D: float) -> DephasingBounds:
    """Dephasing times from white current noise.

    Args:
        S_I: Current noise in A^2/Hz.
        D: Frequency sensitivity to flux-line current in rad s^-1 A^-1.

    Returns:
        T2* and a T2 echo of twice T2*, unbounded when ``D`` is zero.
    """
    if S_I <= 0:
        raise DomainError(f"current noise must be > 0, got {S_I}")
    if D == 0:
        return DephasingBounds.unbounded()
    t2_star = 2 / (D ** 2 * S_I)
    return DephasingBounds(t2_star=t2_star, t2_echo=2 * t2_star)


def calibrate_sweet_spot_frequency(t2_star: float, S_I: float, flux_bias: float, mutual_inductance: float) -> float:
    """Sweet-spot frequency (rad/s) that makes ``dephasing_bounds`` return ``t2_star``."""
    if t2_star <= 0 or S_I <= 0:
        raise DomainError("t2_star and S_I must be > 0")
    slope = _flux_slope(flux_bias)
    if slope == 0:
        raise DomainError("no dephasing at the sweet spot; pick a detuned flux bias")
    D = math.sqrt(2 / (t2_star * S_I))
    return D / (slope * mutual_inductance * 1e3)


def dephasing_table(
    attenuations_db: Sequence[float],
    coupling: FluxCoupling,
    T_RT: float = 300.0,
    T_4K: float = 2.85,
    R: float = 50.0,
    two_sided: bool = True,
) -> Dict[float, DephasingBounds]:
    """Dephasing bounds for several 4K flux-line attenuations.

    Returns:
        Bounds keyed by attenuation in dB, in the order given.
    """
    D = flux_sensitivity(coupling)
    return {
        db: dephasing_bounds(current_noise_psd(10 ** (db / 10), T_RT, T_4K, R, two_sided), D)
        for db in attenuations_db
    }
