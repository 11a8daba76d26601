"""Traffic classes and sigmoidal delay-utility curves.

A system couples two Poisson packet classes to one work-conserving server.
Each class rates its mean sojourn time through a sigmoid that is pinned to
1 at zero delay and decays toward 0 past an inflection point, so "utility"
reads as the fraction of value retained at a given latency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

# exp() overflows above ~709.78; clamping the argument keeps every curve
# evaluation finite while leaving results bit-exact on the sane range.
_EXP_CLAMP = 700.0


def _safe_exp(x: float) -> float:
    """exp with the argument clamped to +/-700."""
    if x > _EXP_CLAMP:
        x = _EXP_CLAMP
    elif x < -_EXP_CLAMP:
        x = -_EXP_CLAMP
    return math.exp(x)


def _softplus(x: float) -> float:
    """log(1 + exp(x)) evaluated without overflow."""
    if x > _EXP_CLAMP:
        return x
    if x < -_EXP_CLAMP:
        return 0.0
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@dataclass(frozen=True)
class UtilityCurve:
    """Sigmoidal value-vs-latency curve for one traffic class.

    The curve is u(l) = 1 - c * (sigmoid(a*(l - b)) - d) with c and d chosen
    so that u(0) = 1 and u(l) -> 1 - c*(1 - d) as l grows.  ``steepness`` is
    a and ``inflection`` is b: at l = b the curve passes through its midpoint
    and falls off at rate a.

    Attributes:
        steepness: Decay rate a of the sigmoid, must be positive.
        inflection: Latency b at the sigmoid midpoint, must be positive.
    """

    steepness: float
    inflection: float

    def __post_init__(self) -> None:
        if not self.steepness > 0.0:
            raise ValueError(f"steepness must be positive, got {self.steepness}")
        if not self.inflection > 0.0:
            raise ValueError(f"inflection must be positive, got {self.inflection}")

    @property
    def scale(self) -> float:
        """Normalizing factor c = (1 + exp(a*b)) / exp(a*b)."""
        return 1.0 + _safe_exp(-self.steepness * self.inflection)

    @property
    def offset(self) -> float:
        """Normalizing offset d = 1 / (1 + exp(a*b))."""
        return 1.0 / (1.0 + _safe_exp(self.steepness * self.inflection))

    def utility(self, latency: float) -> float:
        """Utility in (0, 1] at a mean sojourn time.

        Algebraically equal to the defining form
        1 - c*(sigmoid(a*(l - b)) - d) but evaluated as
        (1 + exp(-a*b)) / (1 + exp(a*(l - b))), which cannot cancel
        catastrophically when a*(l - b) is large.

        Args:
            latency: Mean sojourn time, must be nonnegative.

        Returns:
            The retained-value fraction, u(0) = 1, decreasing in latency.
        """
        if latency < 0.0:
            raise ValueError(f"latency must be nonnegative, got {latency}")
        return self.scale / (1.0 + _safe_exp(self.steepness * (latency - self.inflection)))

    def log_utility(self, latency: float) -> float:
        """log of :meth:`utility`, stable far past the inflection point.

        log u(l) = log1p(exp(-a*b)) - softplus(a*(l - b)), so the value stays
        accurate (no underflow to log(0)) even when the utility itself would
        round to zero in double precision.
        """
        if latency < 0.0:
            raise ValueError(f"latency must be nonnegative, got {latency}")
        a, b = self.steepness, self.inflection
        return math.log1p(_safe_exp(-a * b)) - _softplus(a * (latency - b))

    def log_utility_slope(self, latency: float) -> float:
        """d/dl of log u(l), i.e. -a * sigmoid(a*(l - b)).

        Always negative; used by the optimizer for first-order conditions.
        """
        a, b = self.steepness, self.inflection
        return -a / (1.0 + _safe_exp(-a * (latency - b)))


@dataclass(frozen=True)
class ClassParams:
    """One Poisson traffic class.

    Attributes:
        arrival_rate: Packet arrival rate in packets/s, nonnegative.
        packet_size: Mean packet size in bits, positive.
        curve: Delay-utility curve for the class.
        weight: Importance weight of the class in the system objective.
        size_second_moment: Second moment of packet size in bits^2.  Defaults
            to packet_size**2, the deterministic-size case.
    """

    arrival_rate: float
    packet_size: float
    curve: UtilityCurve
    weight: float = 1.0
    size_second_moment: float | None = None

    def __post_init__(self) -> None:
        if self.arrival_rate < 0.0:
            raise ValueError(f"arrival_rate must be nonnegative, got {self.arrival_rate}")
        if not self.packet_size > 0.0:
            raise ValueError(f"packet_size must be positive, got {self.packet_size}")
        if not self.weight > 0.0:
            raise ValueError(f"weight must be positive, got {self.weight}")
        if self.size_second_moment is not None:
            # Jensen: E[S^2] >= E[S]^2, small slack for rounded inputs
            floor = self.packet_size**2 * (1.0 - 1e-12)
            if self.size_second_moment < floor:
                raise ValueError(
                    "size_second_moment must be at least packet_size**2, got "
                    f"{self.size_second_moment} < {self.packet_size**2}"
                )

    @property
    def second_moment(self) -> float:
        """E[S^2] of packet size in bits^2 (deterministic by default)."""
        if self.size_second_moment is None:
            return self.packet_size**2
        return self.size_second_moment


class UnstableSystemError(ValueError):
    """Raised when total utilization makes queue delays infinite."""


@dataclass(frozen=True)
class SystemConfig:
    """Two traffic classes sharing one server.

    Attributes:
        server_rate: Service rate r in bits/s, positive.
        class1: First (delay-sensitive, by convention) traffic class.
        class2: Second (throughput-oriented, by convention) traffic class.
    """

    server_rate: float
    class1: ClassParams
    class2: ClassParams

    def __post_init__(self) -> None:
        if not self.server_rate > 0.0:
            raise ValueError(f"server_rate must be positive, got {self.server_rate}")

    def klass(self, index: int) -> ClassParams:
        """The class with 1-based index 1 or 2."""
        if index == 1:
            return self.class1
        if index == 2:
            return self.class2
        raise ValueError(f"class index must be 1 or 2, got {index}")

    def service_rate(self, index: int) -> float:
        """Packet service rate mu_i = r / s_i in packets/s."""
        return self.server_rate / self.klass(index).packet_size

    def mean_service_time(self, index: int) -> float:
        """Mean service time s_i / r in seconds."""
        return self.klass(index).packet_size / self.server_rate

    def service_second_moment(self, index: int) -> float:
        """Second moment of service time, E[S^2] / r^2, in s^2."""
        return self.klass(index).second_moment / self.server_rate**2

    def utilization(self, index: int) -> float:
        """Per-class utilization rho_i = lambda_i / mu_i."""
        return self.klass(index).arrival_rate / self.service_rate(index)

    @property
    def total_utilization(self) -> float:
        """rho_1 + rho_2."""
        return self.utilization(1) + self.utilization(2)

    @property
    def is_stable(self) -> bool:
        """Whether rho_1 + rho_2 < 1, the condition for finite delays."""
        return self.total_utilization < 1.0

    def require_stable(self) -> None:
        """Raise :class:`UnstableSystemError` unless the system is stable."""
        if not self.is_stable:
            raise UnstableSystemError(
                f"unstable system: utilization {self.utilization(1):.6g} (class 1) "
                f"+ {self.utilization(2):.6g} (class 2) = "
                f"{self.total_utilization:.6g} is not < 1; mean delays diverge"
            )
