"""Channel model: white noise, per-photon loss and an imperfect GHZ source.

Outcomes are encoded as integers: +1, -1 and ``NO_CLICK = 0`` for a lost
photon. Encoding the no-click as zero means a product of outcomes vanishes
whenever any party failed to click, which is exactly how lost rounds enter
the correlators of the three-value strategy.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import qstate
from .errors import DomainError
from .nonlocality import PROTOCOL_BASES, BasisAngles, SettingTriple

NO_CLICK = 0
OUTCOMES = (1, -1, NO_CLICK)
_INDEX = {1: 0, -1: 1, NO_CLICK: 2}


def _check_prob(name: str, x: float) -> float:
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return float(x)


@dataclass(frozen=True)
class ChannelParams:
    fidelity: float
    eta: float
    source_fidelity: float = 1.0

    def __post_init__(self):
        _check_prob("fidelity", self.fidelity)
        _check_prob("eta", self.eta)
        _check_prob("source_fidelity", self.source_fidelity)


@dataclass(frozen=True)
class OutcomeTable:
    """Joint distribution of (a, b, c) over {+1, -1, no-click}^3 for one basis triple.

    ``probs[ia, ib, ic]`` uses index 0 for +1, 1 for -1 and 2 for no-click.
    """

    basis: SettingTriple | None
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.shape != (3, 3, 3):
            raise DomainError(f"outcome table must be 3x3x3, got {p.shape}")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def prob(self, a: int, b: int, c: int) -> float:
        return float(self.probs[_INDEX[a], _INDEX[b], _INDEX[c]])

    def items(self) -> Iterator[tuple[tuple[int, int, int], float]]:
        for abc in itertools.product(OUTCOMES, repeat=3):
            yield abc, self.prob(*abc)

    def total(self) -> float:
        return float(self.probs.sum())

    def no_click_marginal(self, party: int) -> float:
        """P(party did not click); party 0, 1, 2 = Alice, Bob, Charlie."""
        return float(np.take(self.probs, 2, axis=party).sum())

    def correlator(self) -> float:
        """E[a b c] with a no-click counted as zero."""
        v = np.array(OUTCOMES, dtype=float)
        return float(np.einsum("abc,a,b,c->", self.probs, v, v, v))

    def charlie_marginal(self, c: int) -> float:
        return float(self.probs[:, :, _INDEX[c]].sum())

    def conditional_pair_correlator(self, c: int) -> tuple[float, float]:
        """``(P(c), E[a b | c])`` with Alice/Bob no-clicks counted as zero."""
        p_c = self.charlie_marginal(c)
        if p_c == 0:
            return 0.0, 0.0
        v = np.array(OUTCOMES, dtype=float)
        joint = float(np.einsum("ab,a,b->", self.probs[:, :, _INDEX[c]], v, v))
        return p_c, joint / p_c

    def check(self, eta: float | None = None, tol: float = 1e-10) -> None:
        """Raise DomainError unless normalized (and, given eta, loss marginals match)."""
        if np.any(self.probs < -tol):
            raise DomainError("negative probability in outcome table")
        if abs(self.total() - 1) > tol:
            raise DomainError(f"outcome table sums to {self.total()!r}")
        if eta is not None:
            for party in range(3):
                if abs(self.no_click_marginal(party) - (1 - eta)) > tol:
                    raise DomainError(f"no-click marginal of party {party} differs from 1 - eta")

    @classmethod
    def from_counts(cls, counts: np.ndarray, basis: SettingTriple | None = None) -> "OutcomeTable":
        counts = np.asarray(counts, dtype=float)
        n = counts.sum()
        if n == 0:
            raise DomainError("cannot build an outcome table from zero counts")
        return cls(basis, counts / n)


def white_noise_state(fidelity: float) -> np.ndarray:
    """F |GHZ><GHZ| + (1 - F) I / 8."""
    _check_prob("fidelity", fidelity)
    return qstate.mix([fidelity, 1 - fidelity], [qstate.ghz(1, "+"), qstate.maximally_mixed(3)])


def source_state(source_fidelity: float = 1.0) -> np.ndarray:
    """Imperfect source: the target GHZ with a phase-flipped |GHZ_1^->> admixture."""
    _check_prob("source_fidelity", source_fidelity)
    return qstate.mix(
        [source_fidelity, 1 - source_fidelity], [qstate.ghz(1, "+"), qstate.ghz(1, "-")]
    )


def channel_state(fidelity: float, source_fidelity: float = 1.0) -> np.ndarray:
    """Source output sent through the white-noise channel."""
    _check_prob("fidelity", fidelity)
    return qstate.mix(
        [fidelity, 1 - fidelity], [source_state(source_fidelity), qstate.maximally_mixed(3)]
    )


def composed_qber(source_fidelity: float, fidelity: float) -> float:
    """Key error rate of an imperfect source followed by the noisy channel (no loss).

    F_s (1-F)/2 + (1-F_s) F + (1-F_s)(1-F)/2 = 1/2 + F/2 - F_s F
    """
    _check_prob("source_fidelity", source_fidelity)
    _check_prob("fidelity", fidelity)
    return 0.5 + 0.5 * fidelity - source_fidelity * fidelity


def compose_source(source_fidelity: float, fidelity: float) -> float:
    """Effective channel fidelity F (2 F_s - 1) of source plus channel.

    It is the unique F_comb with (1 - F_comb)/2 equal to :func:`composed_qber`,
    and it also scales every GHZ correlator of :func:`channel_state`. May be
    negative when F_s < 1/2.
    """
    _check_prob("source_fidelity", source_fidelity)
    _check_prob("fidelity", fidelity)
    return fidelity * (2 * source_fidelity - 1)


def outcome_table(rho: np.ndarray, eta: float, s: SettingTriple) -> OutcomeTable:
    """Outcome distribution with independent per-photon detection efficiency eta.

    Each party clicks with probability eta; clicked parties' outcomes follow
    the Born rule on the marginal of the clicked subsystem.
    """
    _check_prob("eta", eta)
    rho = qstate.as_density(rho)
    thetas = (s.theta_a, s.theta_b, s.theta_c)
    probs = np.zeros((3, 3, 3))
    for abc in itertools.product(OUTCOMES, repeat=3):
        ops = []
        weight = 1.0
        for o, th in zip(abc, thetas):
            if o == NO_CLICK:
                ops.append(qstate.I2)
                weight *= 1 - eta
            else:
                ops.append(qstate.projector(th, o))
                weight *= eta
        if weight == 0:
            continue
        born = qstate.expectation(rho, qstate.tensor(*ops))
        probs[_INDEX[abc[0]], _INDEX[abc[1]], _INDEX[abc[2]]] = weight * max(born, 0.0)
    return OutcomeTable(s, probs)


@dataclass(frozen=True)
class Branch:
    """One term of the lossy mixed state: the parties holding a photon and their state."""

    weight: float
    parties: tuple[int, ...]
    state: np.ndarray | None


def full_mixed_state_description(fidelity: float, eta: float) -> list[Branch]:
    """Click-pattern decomposition of the shared state.

    Weights are eta^3 (all photons arrive), eta^2 (1-eta) per surviving pair,
    eta (1-eta)^2 per surviving single photon and (1-eta)^3 for vacuum.
    Surviving pairs hold (|HH><HH| + |VV><VV|)/2 and single photons I/2.
    Zero-weight branches are dropped.
    """
    _check_prob("fidelity", fidelity)
    _check_prob("eta", eta)
    lost = 1 - eta
    pair_state = (np.outer(qstate.ket("HH"), qstate.ket("HH")) + np.outer(qstate.ket("VV"), qstate.ket("VV"))) / 2
    branches = [Branch(eta**3, (0, 1, 2), white_noise_state(fidelity))]
    for pair in ((1, 2), (0, 2), (0, 1)):
        branches.append(Branch(eta**2 * lost, pair, pair_state))
    for single in (0, 1, 2):
        branches.append(Branch(eta * lost**2, (single,), qstate.I2 / 2))
    branches.append(Branch(lost**3, (), None))
    return [b for b in branches if b.weight > 0]


def branch_outcome_table(branches: list[Branch], s: SettingTriple) -> OutcomeTable:
    """Outcome table induced by a branch list: absent parties read no-click."""
    thetas = (s.theta_a, s.theta_b, s.theta_c)
    probs = np.zeros((3, 3, 3))
    for br in branches:
        if not br.parties:
            probs[2, 2, 2] += br.weight
            continue
        for outs in itertools.product((1, -1), repeat=len(br.parties)):
            ops = [qstate.projector(thetas[p], o) for p, o in zip(br.parties, outs)]
            born = qstate.expectation(br.state, qstate.tensor(*ops))
            idx = [2, 2, 2]
            for p, o in zip(br.parties, outs):
                idx[p] = _INDEX[o]
            probs[tuple(idx)] += br.weight * born
    return OutcomeTable(s, probs)


def protocol_tables(rho: np.ndarray, eta: float, bases: BasisAngles = PROTOCOL_BASES) -> dict:
    """Outcome tables for all twelve basis combinations (i, j, k)."""
    return {
        (i, j, k): outcome_table(rho, eta, bases.triple(i, j, k))
        for i in bases.alice
        for j in bases.bob
        for k in bases.charlie
    }
