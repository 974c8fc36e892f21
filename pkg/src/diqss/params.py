"""Parameter records driving the rate formulas and the simulator."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

from .errors import DomainError
from .noisemodel import compose_source
from .strategies import StrategyConfig

SourceModel = Literal["phase_flip", "qber_only"]


@dataclass(frozen=True)
class FiberModel:
    """Symmetric star link: each photon crosses ``distance`` km of fiber.

    The fiber transmissivity is 10^(-alpha d / 10), which never exceeds 1.
    """

    eta_d: float = 0.98
    eta_c: float = 0.99
    alpha: float = 0.2
    distance: float = 0.0

    def __post_init__(self):
        for name in ("eta_d", "eta_c"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha!r}")
        if not self.distance >= 0:
            raise DomainError(f"distance must be non-negative, got {self.distance!r}")

    @property
    def transmissivity(self) -> float:
        return 10 ** (-self.alpha * self.distance / 10)


def global_efficiency(m: FiberModel) -> float:
    """eta = eta_t eta_d eta_c."""
    return m.transmissivity * m.eta_d * m.eta_c


@dataclass(frozen=True)
class ProtocolParams:
    """Everything a rate evaluation needs.

    Give exactly one of ``eta`` (global detection efficiency) or ``fiber``.

    ``source_model`` decides how an imperfect source (``source_fidelity`` < 1)
    enters. ``"phase_flip"`` mixes in |GHZ_1^-> so both the error rate and
    the CHSH value see the combined fidelity F (2 F_s - 1). ``"qber_only"``
    adds the source error to the error rate only and leaves the CHSH value at
    the channel fidelity; it is not realizable by any state and exists to
    compare against published imperfect-source numbers.
    """

    fidelity: float = 1.0
    eta: float | None = None
    fiber: FiberModel | None = None
    source_fidelity: float = 1.0
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    source_model: SourceModel = "phase_flip"

    def __post_init__(self):
        if (self.eta is None) == (self.fiber is None):
            raise DomainError("give exactly one of eta or fiber parameters")
        if self.eta is not None and not (0.0 <= self.eta <= 1.0):
            raise DomainError(f"eta must lie in [0, 1], got {self.eta!r}")
        for name in ("fidelity", "source_fidelity"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {v!r}")
        if self.source_model not in ("phase_flip", "qber_only"):
            raise DomainError(f"unknown source model {self.source_model!r}")

    @property
    def global_eta(self) -> float:
        return self.eta if self.eta is not None else global_efficiency(self.fiber)

    @property
    def qber_fidelity(self) -> float:
        """Fidelity whose (1 - F)/2 is the loss-free key error rate."""
        return compose_source(self.source_fidelity, self.fidelity)

    @property
    def chsh_fidelity(self) -> float:
        """Fidelity scaling the loss-free CHSH value 2 sqrt(2) F."""
        if self.source_model == "qber_only":
            return self.fidelity
        return compose_source(self.source_fidelity, self.fidelity)

    def with_(self, **changes) -> "ProtocolParams":
        """Copy with changes; setting ``eta`` drops ``fiber`` and vice versa."""
        if "eta" in changes and "fiber" not in changes:
            changes["fiber"] = None
        if "fiber" in changes and "eta" not in changes:
            changes["eta"] = None
        return replace(self, **changes)
