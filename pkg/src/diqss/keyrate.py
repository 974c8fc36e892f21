"""Closed-form error rates, CHSH values, Eve-entropy bounds and key rates.

All rates are Devetak-Winter lower bounds per sifted key round (basis
combination A1 B1 C1): rate = H(A1|E) bound - h(error rate). Negative rates
are returned as computed so that root finders see the sign change.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .params import ProtocolParams
from .strategies import StrategyConfig

SQRT2 = math.sqrt(2)
TSIRELSON = 2 * SQRT2
SUPER_QUANTUM_SLACK = 1e-9


def binary_entropy(x: float) -> float:
    """h(x) in bits, with 0 log 0 = 0."""
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"binary entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def _nonlocal_excess(S: float) -> float | None:
    """S^2/4 - 1 for S in [2, 2 sqrt 2]; None below the local bound."""
    if S > TSIRELSON + SUPER_QUANTUM_SLACK:
        raise DomainError(f"CHSH value {S!r} exceeds the Tsirelson bound")
    if S < 2:
        return None
    return min(S * S / 4 - 1, 1.0)


def eve_bound(S: float) -> float:
    """Lower bound on H(A1|E): 1 - h(1/2 + sqrt(S^2/4 - 1)/2).

    Returns 0 for S < 2 (no certified nonlocality). Use
    :func:`is_nonlocal` to tell that case apart.
    """
    t = _nonlocal_excess(S)
    if t is None:
        return 0.0
    return 1 - binary_entropy(0.5 + math.sqrt(t) / 2)


def is_nonlocal(S: float) -> bool:
    return S >= 2


def eve_bound_preprocessed(S: float, q: float) -> float:
    """Eve-entropy bound g(S, q) when Alice flips her key bit with probability q."""
    if not (0.0 <= q <= 0.5):
        raise DomainError(f"flip probability q must lie in [0, 0.5], got {q!r}")
    t = _nonlocal_excess(S)
    if t is None:
        return 0.0
    radicand = (1 - 2 * q) ** 2 + 4 * q * (1 - q) * t
    return (
        1
        - binary_entropy(0.5 + math.sqrt(t) / 2)
        + binary_entropy(min(0.5 + math.sqrt(radicand) / 2, 1.0))
    )


def _loss_qber(eta: float, fidelity: float) -> float:
    return 1 - eta**3 / 2 - eta**3 * fidelity / 2


def _postselected_qber(eta: float, fidelity: float) -> float:
    return (1 - fidelity) / 2 * eta**3 - 1.5 * eta**2 + 1.5 * eta


def raw_qber(params: ProtocolParams) -> float:
    """Error rate before any preprocessing flip (three-value or postselected)."""
    eta = params.global_eta
    if params.strategy.postselects:
        return _postselected_qber(eta, params.qber_fidelity)
    return _loss_qber(eta, params.qber_fidelity)


def qber(params: ProtocolParams) -> float:
    """Key error rate of the configured strategy.

    none: 1 - eta^3/2 - eta^3 F/2
    postselect: (1 - F) eta^3 / 2 - 3 eta^2 / 2 + 3 eta / 2
    preprocess / advanced: q + (1 - 2q) times the matching value above.
    """
    q = params.strategy.flip_probability
    return q + (1 - 2 * q) * raw_qber(params)


def chsh_value(params: ProtocolParams) -> float:
    """2 sqrt(2) F eta^3, plus 2 (1 - eta)^3 under postselection.

    Preprocessing acts on key rounds only and leaves this unchanged.
    """
    eta = params.global_eta
    s = TSIRELSON * params.chsh_fidelity * eta**3
    if params.strategy.postselects:
        s += 2 * (1 - eta) ** 3
    return s


@dataclass(frozen=True)
class RateBreakdown:
    delta: float
    S: float
    eve_bound: float
    key_error: float
    rate: float
    strategy: StrategyConfig
    nonlocal_: bool

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy.kind,
            "q": self.strategy.q,
            "delta": self.delta,
            "S": self.S,
            "eve_bound": self.eve_bound,
            "key_error": self.key_error,
            "rate": self.rate,
            "nonlocal": self.nonlocal_,
        }


def rate_from_statistics(S: float, delta: float, q: float = 0.0) -> float:
    """g(S, q) - h(delta) for an already-flipped error rate ``delta``."""
    return eve_bound_preprocessed(S, q) - binary_entropy(delta)


def key_rate(params: ProtocolParams) -> RateBreakdown:
    """Rate lower bound of the configured strategy with its components."""
    S = chsh_value(params)
    delta = qber(params)
    q = params.strategy.flip_probability
    eve = eve_bound_preprocessed(S, q) if q > 0 else eve_bound(S)
    err = binary_entropy(delta)
    return RateBreakdown(delta, S, eve, err, eve - err, params.strategy, is_nonlocal(S))


def rate(params: ProtocolParams) -> float:
    return key_rate(params).rate
