"""Noise preprocessing and postselection as transforms on outcomes.

Postselection replaces every no-click by +1 for all three parties, turning
the three-value measurement into a deterministic two-value one. Noise
preprocessing has Alice flip her key bit with probability q, and only in
key rounds (basis combination A1 B1 C1).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .errors import ContractViolation, DomainError
from .noisemodel import NO_CLICK, OUTCOMES, OutcomeTable, _INDEX

StrategyKind = Literal["none", "preprocess", "postselect", "advanced"]
KINDS = ("none", "preprocess", "postselect", "advanced")

SiftCase = Literal["test", "key", "discard"]


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind = "none"
    q: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown strategy {self.kind!r}; expected one of {KINDS}")
        if not (0.0 <= self.q <= 0.5):
            raise DomainError(f"flip probability q must lie in [0, 0.5], got {self.q!r}")

    @property
    def postselects(self) -> bool:
        return self.kind in ("postselect", "advanced")

    @property
    def flip_probability(self) -> float:
        """q if Alice preprocesses, else 0."""
        return self.q if self.kind in ("preprocess", "advanced") else 0.0


def postselect_map(outcome: tuple[int, int, int]) -> tuple[int, int, int]:
    """Replace each no-click by +1."""
    return tuple(1 if o == NO_CLICK else o for o in outcome)


def postselect_table(t: OutcomeTable) -> OutcomeTable:
    """Aggregate a three-valued table along :func:`postselect_map`."""
    probs = np.zeros((3, 3, 3))
    for abc in itertools.product(OUTCOMES, repeat=3):
        a, b, c = postselect_map(abc)
        probs[_INDEX[a], _INDEX[b], _INDEX[c]] += t.prob(*abc)
    return OutcomeTable(t.basis, probs)


def preprocess_flip_distribution(p_error: float, q: float) -> float:
    """Error probability after a flip with probability q: q + (1 - 2q) p."""
    for name, x in (("p_error", p_error), ("q", q)):
        if not (0.0 <= x <= 1.0):
            raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return q + (1 - 2 * q) * p_error


def sift_case(i: int, j: int, k: int) -> SiftCase:
    """Classify a basis combination: key for (1,1,1), discard for other Bob-1 rounds."""
    if j != 1:
        return "test"
    return "key" if (i, k) == (1, 1) else "discard"


def sift_codes(i: np.ndarray, j: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Vectorized :func:`sift_case`: 0 test, 1 key, 2 discard."""
    key = (i == 1) & (j == 1) & (k == 1)
    return np.where(j != 1, 0, np.where(key, 1, 2)).astype(np.int8)


SIFT_NAMES = ("test", "key", "discard")


def key_bit(outcome: int) -> int | None:
    """+1 -> 0, -1 -> 1; no key bit for a no-click."""
    return {1: 0, -1: 1}.get(outcome)


@dataclass(frozen=True)
class RoundRecord:
    """One protocol round.

    ``flipped`` records Alice's preprocessing flip. If her outcome was a
    no-click there is no sign to negate, but the flip still toggles whether
    the round counts as a key error; see :func:`key_errors`.
    """

    bases: tuple[int, int, int]
    raw: tuple[int, int, int]
    outcomes: tuple[int, int, int]
    flipped: bool = False

    @property
    def sift_case(self) -> SiftCase:
        return sift_case(*self.bases)

    @property
    def key_bits(self) -> tuple[int | None, int | None, int | None] | None:
        if self.sift_case != "key":
            return None
        return tuple(key_bit(o) for o in self.outcomes)

    @property
    def key_error(self) -> bool | None:
        """Whether k_A != k_B xor k_C; None outside key rounds."""
        if self.sift_case != "key":
            return None
        return bool(key_errors(np.array([self.outcomes]), np.array([self.flipped]))[0])


def key_errors(outcomes: np.ndarray, flipped: np.ndarray) -> np.ndarray:
    """Error indicator for key rounds.

    ``outcomes`` are the post-strategy outcomes of shape (n, 3). A round with
    every party clicking is an error when a b c = -1, i.e. k_A != k_B xor k_C.
    A round with any no-click is an error by definition, unless Alice flipped
    it: her flip toggles the error status of every key round, so the error
    rate becomes q + (1 - 2q) delta whatever the loss pattern.
    """
    outcomes = np.asarray(outcomes)
    any_lost = (outcomes == NO_CLICK).any(axis=1)
    return np.where(any_lost, ~np.asarray(flipped, dtype=bool), outcomes.prod(axis=1) != 1)


def apply_strategy(
    outcomes: np.ndarray, sift: np.ndarray, cfg: StrategyConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``cfg`` to a batch of raw outcomes.

    Args:
        outcomes: int array (n, 3) of raw outcomes in {+1, -1, 0}.
        sift: int array (n,) of sift codes from :func:`sift_codes`.
        cfg: the strategy.
        rng: randomness for the flips; one uniform is drawn per key round.

    Returns:
        ``(outcomes, flipped)``; test and discard rounds are never flipped.
    """
    out = np.array(outcomes, dtype=np.int8, copy=True)
    if cfg.postselects:
        out[out == NO_CLICK] = 1
    flipped = np.zeros(len(out), dtype=bool)
    key = np.flatnonzero(sift == 1)
    q = cfg.flip_probability
    if q > 0 and len(key):
        flipped[key] = rng.random(len(key)) < q
        out[flipped, 0] *= -1  # no-click stays 0
    return out, flipped


def flip_alice(record: RoundRecord) -> RoundRecord:
    """Flip Alice's key bit; only key rounds may be flipped."""
    if record.sift_case != "key":
        raise ContractViolation(
            f"refusing to flip Alice's outcome in a {record.sift_case} round {record.bases}"
        )
    a, b, c = record.outcomes
    return replace(record, outcomes=(-a, b, c), flipped=not record.flipped)


def apply_to_record(record: RoundRecord, cfg: StrategyConfig, rng: np.random.Generator) -> RoundRecord:
    """Single-round form of :func:`apply_strategy`, starting from ``record.raw``."""
    code = SIFT_NAMES.index(record.sift_case)
    out, flipped = apply_strategy(np.array([record.raw]), np.array([code]), cfg, rng)
    return replace(record, outcomes=tuple(int(o) for o in out[0]), flipped=bool(flipped[0]))
