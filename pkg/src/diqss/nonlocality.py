"""CHSH and Svetlichny polynomials for the three-party GHZ test.

Basis labels follow the protocol: Alice i in {1, 2}, Bob j in {1, 2, 3},
Charlie k in {1, 2}. Every basis is an equatorial observable E(theta), see
:func:`diqss.qstate.equatorial_observable`.

Charlie's sigma_x outcome (k=1) leaves Alice and Bob in |phi^+->, which
saturates S_AB with the settings below, while his -sigma_y outcome (k=2)
leaves |psi^+->, which saturates the remapped form S'_AB. The Svetlichny
polynomial is therefore assembled as <S_AB c_1> + <S'_AB c_2>; with the
opposite pairing the ideal GHZ state would score zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import qstate
from .errors import DomainError

TSIRELSON = 2 * np.sqrt(2)


@dataclass(frozen=True)
class SettingTriple:
    theta_a: float
    theta_b: float
    theta_c: float

    def __post_init__(self):
        if not all(np.isfinite([self.theta_a, self.theta_b, self.theta_c])):
            raise DomainError("setting angles must be finite")


@dataclass(frozen=True)
class BasisAngles:
    """Equatorial angle of every basis the three parties may choose."""

    alice: Mapping[int, float] = field(default_factory=lambda: {1: 0.0, 2: np.pi / 2})
    bob: Mapping[int, float] = field(
        default_factory=lambda: {1: 0.0, 2: -np.pi / 4, 3: np.pi / 4}
    )
    charlie: Mapping[int, float] = field(default_factory=lambda: {1: 0.0, 2: -np.pi / 2})

    def triple(self, i: int, j: int, k: int) -> SettingTriple:
        return SettingTriple(self.alice[i], self.bob[j], self.charlie[k])


PROTOCOL_BASES = BasisAngles()

# CHSH terms ((i, j), sign): S_AB and the remapped S'_AB (b2 -> b3, b3 -> -b2)
CHSH_TERMS = (((1, 2), 1), ((2, 2), 1), ((1, 3), 1), ((2, 3), -1))
CHSH_PRIME_TERMS = (((2, 3), 1), ((2, 2), 1), ((1, 3), 1), ((1, 2), -1))

# Charlie's basis k selects which CHSH form his outcome multiplies
CHARLIE_FORM = {1: CHSH_TERMS, 2: CHSH_PRIME_TERMS}

SVETLICHNY_TERMS = tuple(
    ((i, j, k), sign) for k, terms in CHARLIE_FORM.items() for (i, j), sign in terms
)
TEST_COMBINATIONS = tuple(ijk for ijk, _ in SVETLICHNY_TERMS)


def correlator(rho: np.ndarray, s: SettingTriple) -> float:
    """<a b c> = Tr[rho E(theta_a) x E(theta_b) x E(theta_c)]."""
    op = qstate.tensor(
        qstate.equatorial_observable(s.theta_a),
        qstate.equatorial_observable(s.theta_b),
        qstate.equatorial_observable(s.theta_c),
    )
    return qstate.expectation(rho, op)


def pair_correlator(rho_ab: np.ndarray, theta_a: float, theta_b: float) -> float:
    op = qstate.tensor(
        qstate.equatorial_observable(theta_a), qstate.equatorial_observable(theta_b)
    )
    return qstate.expectation(rho_ab, op)


def correlators(rho: np.ndarray, bases: BasisAngles = PROTOCOL_BASES) -> dict:
    """All eight Svetlichny correlators keyed by (i, j, k)."""
    return {ijk: correlator(rho, bases.triple(*ijk)) for ijk in TEST_COMBINATIONS}


def _pair_values(source, bases: BasisAngles) -> Mapping:
    if isinstance(source, Mapping):
        return source
    rho = qstate.as_density(source)
    if rho.shape != (4, 4):
        raise DomainError(f"two-qubit state expected, got shape {rho.shape}")
    return {
        (i, j): pair_correlator(rho, bases.alice[i], bases.bob[j])
        for i in (1, 2)
        for j in (2, 3)
    }


def _combine(values: Mapping, terms) -> float:
    missing = [ij for ij, _ in terms if ij not in values]
    if missing:
        raise DomainError(f"missing correlators for {missing}")
    return float(sum(sign * values[ij] for ij, sign in terms))


def chsh(source, bases: BasisAngles = PROTOCOL_BASES) -> float:
    """S_AB = <a1 b2> + <a2 b2> + <a1 b3> - <a2 b3>.

    ``source`` is a 4x4 state (or two-qubit ket) or a mapping (i, j) -> <a_i b_j>.
    """
    return _combine(_pair_values(source, bases), CHSH_TERMS)


def chsh_prime(source, bases: BasisAngles = PROTOCOL_BASES) -> float:
    """S'_AB = <a2 b3> + <a2 b2> + <a1 b3> - <a1 b2>."""
    return _combine(_pair_values(source, bases), CHSH_PRIME_TERMS)


def remapped_bases(bases: BasisAngles = PROTOCOL_BASES) -> BasisAngles:
    """Angle form of b2 -> b3, b3 -> -b2; chsh on these equals chsh_prime."""
    bob = dict(bases.bob)
    bob[2], bob[3] = bases.bob[3], bases.bob[2] + np.pi
    return replace(bases, bob=bob)


def svetlichny(source, bases: BasisAngles = PROTOCOL_BASES) -> float:
    """Eight-term Svetlichny polynomial from a state or a correlator map."""
    if isinstance(source, Mapping):
        values = source
    else:
        values = correlators(source, bases)
    missing = [ijk for ijk in TEST_COMBINATIONS if ijk not in values]
    if missing:
        raise DomainError(f"missing correlators for {missing}")
    return float(sum(sign * values[ijk] for ijk, sign in SVETLICHNY_TERMS))


def collapse(rho: np.ndarray, theta_c: float, outcome: int) -> tuple[float, np.ndarray | None]:
    """Alice-Bob state after Charlie measures E(theta_c) and gets ``outcome``.

    Returns ``(probability, rho_ab)``; ``rho_ab`` is None when the outcome
    has zero probability.
    """
    rho = qstate.as_density(rho)
    proj = qstate.tensor(qstate.I2, qstate.I2, qstate.projector(theta_c, outcome))
    unnormalized = qstate.partial_trace(proj @ rho @ proj, keep=(0, 1))
    p = float(np.trace(unnormalized).real)
    if p < 1e-15:
        return 0.0, None
    return p, unnormalized / p


def charlie_conditioned_chsh(
    rho: np.ndarray, charlie_basis: int, outcome: int, bases: BasisAngles = PROTOCOL_BASES
) -> tuple[float, float]:
    """``(P(c_k = outcome), signed CHSH)`` on the collapsed Alice-Bob state."""
    p, rho_ab = collapse(rho, bases.charlie[charlie_basis], outcome)
    if rho_ab is None:
        return 0.0, 0.0
    form = CHARLIE_FORM[charlie_basis]
    return p, outcome * _combine(_pair_values(rho_ab, bases), form)


def decomposition_check(rho: np.ndarray, bases: BasisAngles = PROTOCOL_BASES) -> tuple[float, float]:
    """Svetlichny value computed directly and via Charlie-conditioned CHSH."""
    lhs = svetlichny(rho, bases)
    rhs = 0.0
    for k in (1, 2):
        for c in (1, -1):
            p, s = charlie_conditioned_chsh(rho, k, c, bases)
            rhs += p * s
    return lhs, rhs


def conditioned_S(tables: Mapping, charlie_outcome: int, charlie_basis: int) -> float:
    """Sign-corrected CHSH value for one Charlie branch, from outcome tables.

    Charlie's basis 1 selects S_AB and basis 2 selects S'_AB; a -1 outcome
    flips the sign so every ideal branch reads +2 sqrt(2). Alice/Bob no-click
    outcomes contribute zero to the pair correlators.

    Args:
        tables: mapping (i, j, k) -> OutcomeTable covering the four
            Alice-Bob test pairs for ``charlie_basis``.
        charlie_outcome: +1 or -1.
        charlie_basis: 1 or 2.
    """
    if charlie_outcome not in (1, -1):
        raise DomainError(f"Charlie outcome must be +1 or -1, got {charlie_outcome!r}")
    if charlie_basis not in CHARLIE_FORM:
        raise DomainError(f"Charlie basis must be 1 or 2, got {charlie_basis!r}")
    values = {}
    for (i, j), _ in CHARLIE_FORM[charlie_basis]:
        key = (i, j, charlie_basis)
        if key not in tables:
            raise DomainError(f"no outcome table for basis combination {key}")
        p_c, corr = tables[key].conditional_pair_correlator(charlie_outcome)
        if p_c == 0:
            raise DomainError(
                f"empty conditioning subset: c{charlie_basis} = {charlie_outcome:+d} "
                f"never occurs in table {key}"
            )
        values[(i, j)] = corr
    return charlie_outcome * _combine(values, CHARLIE_FORM[charlie_basis])


def average_S(tables: Mapping) -> float:
    """CHSH value S averaged over Charlie's bases and outcomes.

    Built from the Charlie-conditioned branches weighted by P(c_k = c); it
    equals half the Svetlichny value of the same tables, which for the lossy
    white-noise state is 2 sqrt(2) F eta^3.
    """
    total = 0.0
    for k, form in CHARLIE_FORM.items():
        for c in (1, -1):
            weighted = {}
            for (i, j), _ in form:
                p_c, corr = tables[(i, j, k)].conditional_pair_correlator(c)
                weighted[(i, j)] = p_c * corr
            total += c * _combine(weighted, form)
    return total / 2
