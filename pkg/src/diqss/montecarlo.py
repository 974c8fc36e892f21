"""Round-by-round Monte Carlo of the secret sharing protocol.

Each round draws a basis per party, samples the outcome triple from the
exact outcome table of that basis combination, sifts the round into test,
key or discard, applies the strategy, and accumulates integer counts.

Rounds are processed in fixed chunks of ``CHUNK`` rounds. Every chunk draws
from its own generators keyed by (seed, chunk index, purpose), so results
are bit-identical for any number of workers.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import keyrate, noisemodel
from .errors import DomainError, EstimatorError, ValidationFailure
from .noisemodel import NO_CLICK, OUTCOMES, OutcomeTable
from .nonlocality import PROTOCOL_BASES, SVETLICHNY_TERMS, TEST_COMBINATIONS, BasisAngles
from .params import ProtocolParams
from .strategies import SIFT_NAMES, RoundRecord, apply_strategy, key_errors, sift_codes

CHUNK = 1 << 16

COMBINATIONS = tuple(itertools.product((1, 2), (1, 2, 3), (1, 2)))
_COMBO_INDEX = {ijk: n for n, ijk in enumerate(COMBINATIONS)}
OUTCOME_GRID = np.array(list(itertools.product(OUTCOMES, repeat=3)), dtype=np.int8)
# outcome value + 1 -> position in OUTCOMES (1 -> 0, -1 -> 1, 0 -> 2)
_VALUE_TO_POS = np.array([1, 2, 0])

_PURPOSES = {"bases": 1, "outcomes": 2, "flips": 3, "announce": 4}


def stream(seed: int, chunk: int, purpose: str) -> np.random.Generator:
    """Generator keyed by (seed, chunk index, purpose)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk, _PURPOSES[purpose]])))


@dataclass(frozen=True)
class BasisChoice:
    """Per-party basis probabilities; uniform by default."""

    alice: tuple[float, ...] = (0.5, 0.5)
    bob: tuple[float, ...] = (1 / 3, 1 / 3, 1 / 3)
    charlie: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self):
        for name, p, n in (("alice", self.alice, 2), ("bob", self.bob, 3), ("charlie", self.charlie, 2)):
            if len(p) != n or min(p) < 0 or abs(sum(p) - 1) > 1e-12:
                raise DomainError(f"{name} basis probabilities must be {n} numbers summing to 1")


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr}


@dataclass
class RoundBatch:
    """Per-round arrays for one chunk."""

    start: int
    bases: np.ndarray  # (n, 3) basis indices
    raw: np.ndarray  # (n, 3) outcomes before the strategy
    outcomes: np.ndarray  # (n, 3) outcomes after the strategy
    flipped: np.ndarray  # (n,) Alice flipped (key rounds only)
    sift: np.ndarray  # (n,) 0 test, 1 key, 2 discard
    announced: np.ndarray  # (n,) key round used for error estimation

    def __len__(self) -> int:
        return len(self.sift)

    def records(self) -> list[RoundRecord]:
        return [
            RoundRecord(
                tuple(int(x) for x in self.bases[n]),
                tuple(int(x) for x in self.raw[n]),
                tuple(int(x) for x in self.outcomes[n]),
                bool(self.flipped[n]),
            )
            for n in range(len(self))
        ]


@dataclass
class _Counts:
    outcomes: np.ndarray = field(default_factory=lambda: np.zeros((len(COMBINATIONS), 27), dtype=np.int64))
    announced: int = 0
    errors: int = 0

    def __add__(self, other: "_Counts") -> "_Counts":
        return _Counts(self.outcomes + other.outcomes, self.announced + other.announced, self.errors + other.errors)


def _cdf_table(tables: Mapping) -> np.ndarray:
    cdf = np.empty((len(COMBINATIONS), 27))
    for ijk, n in _COMBO_INDEX.items():
        p = np.clip(tables[ijk].probs.reshape(27), 0, None)
        c = np.cumsum(p / p.sum())
        c[-1] = 1.0
        cdf[n] = c
    return cdf


class _Sampler:
    def __init__(
        self,
        params: ProtocolParams,
        state: np.ndarray | None,
        basis_choice: BasisChoice,
        bases: BasisAngles,
        qber_fraction: float,
    ):
        if state is None:
            if params.source_model != "phase_flip":
                raise DomainError("the qber_only source model has no state to simulate")
            state = noisemodel.channel_state(params.fidelity, params.source_fidelity)
        self.tables = noisemodel.protocol_tables(state, params.global_eta, bases)
        self.cdf = _cdf_table(self.tables)
        self.cfg = params.strategy
        self.choice = basis_choice
        self.qber_fraction = qber_fraction

    def batch(self, seed: int, chunk: int, n: int) -> RoundBatch:
        rb = stream(seed, chunk, "bases")
        i = rb.choice(np.array([1, 2]), size=n, p=self.choice.alice)
        j = rb.choice(np.array([1, 2, 3]), size=n, p=self.choice.bob)
        k = rb.choice(np.array([1, 2]), size=n, p=self.choice.charlie)
        combo = (i - 1) * 6 + (j - 1) * 2 + (k - 1)
        u = stream(seed, chunk, "outcomes").random(n)
        idx = np.minimum((u[:, None] >= self.cdf[combo]).sum(axis=1), 26)
        raw = OUTCOME_GRID[idx]
        sift = sift_codes(i, j, k)
        out, flipped = apply_strategy(raw, sift, self.cfg, stream(seed, chunk, "flips"))
        announced = sift == 1
        if self.qber_fraction < 1:
            announced &= stream(seed, chunk, "announce").random(n) < self.qber_fraction
        return RoundBatch(
            chunk * CHUNK, np.stack([i, j, k], axis=1), raw, out, flipped, sift, announced
        )

    def counts(self, seed: int, chunk: int, n: int) -> _Counts:
        b = self.batch(seed, chunk, n)
        combo = (b.bases[:, 0] - 1) * 6 + (b.bases[:, 1] - 1) * 2 + (b.bases[:, 2] - 1)
        pos = _VALUE_TO_POS[b.outcomes.astype(np.int64) + 1]
        cell = pos[:, 0] * 9 + pos[:, 1] * 3 + pos[:, 2]
        table = np.bincount(combo * 27 + cell, minlength=len(COMBINATIONS) * 27)
        err = key_errors(b.outcomes[b.announced], b.flipped[b.announced])
        return _Counts(table.reshape(len(COMBINATIONS), 27), int(b.announced.sum()), int(err.sum()))


def _chunks(n_rounds: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK, n_rounds - c * CHUNK)) for c in range(math.ceil(n_rounds / CHUNK))]


def simulate_rounds(
    params: ProtocolParams,
    n_rounds: int,
    seed: int,
    *,
    state: np.ndarray | None = None,
    basis_choice: BasisChoice = BasisChoice(),
    bases: BasisAngles = PROTOCOL_BASES,
    qber_fraction: float = 1.0,
) -> Iterator[RoundBatch]:
    """Yield the simulated rounds chunk by chunk (same rounds as :func:`simulate`)."""
    if n_rounds < 1:
        raise DomainError(f"n_rounds must be at least 1, got {n_rounds!r}")
    sampler = _Sampler(params, state, basis_choice, bases, qber_fraction)
    for c, n in _chunks(n_rounds):
        yield sampler.batch(seed, c, n)


def _cell_values() -> np.ndarray:
    return OUTCOME_GRID.prod(axis=1).astype(float)


def svetlichny_estimator(counts: Mapping) -> tuple[Estimate, dict]:
    """Svetlichny value and per-term correlators from outcome counts.

    Each correlator is the all-click conditional correlator times the
    bucket's empirical all-click rate, i.e. (n_{abc=+1} - n_{abc=-1}) / n.
    Its standard error follows from the multinomial counts; the eight
    terms combine in quadrature.

    Args:
        counts: mapping (i, j, k) -> 27 (or 3x3x3) outcome counts.
    """
    missing = [ijk for ijk in TEST_COMBINATIONS if ijk not in counts or np.sum(counts[ijk]) == 0]
    if missing:
        raise EstimatorError(f"no test rounds for basis combinations {missing}")
    v = _cell_values()
    total, var = 0.0, 0.0
    terms = {}
    for ijk, sign in SVETLICHNY_TERMS:
        c = np.asarray(counts[ijk], dtype=float).reshape(27)
        n = c.sum()
        n_click = c[v != 0].sum()
        if n_click:
            conditional = (c[v > 0].sum() - c[v < 0].sum()) / n_click
        else:
            conditional = 0.0
        mean = conditional * n_click / n
        second = n_click / n
        se = math.sqrt(max(second - mean**2, 0.0) / n)
        terms[ijk] = Estimate(mean, se)
        total += sign * mean
        var += se**2
    return Estimate(total, math.sqrt(var)), terms


def counts_from_records(records: Sequence[RoundRecord]) -> dict:
    """Post-strategy outcome counts per basis combination."""
    out: dict = {}
    for r in records:
        c = out.setdefault(r.bases, np.zeros(27, dtype=np.int64))
        pos = [OUTCOMES.index(o) for o in r.outcomes]
        c[pos[0] * 9 + pos[1] * 3 + pos[2]] += 1
    return out


@dataclass
class SimulationReport:
    n_rounds: int
    seed: int
    params: ProtocolParams
    empirical_S: Estimate
    empirical_S_ABC: Estimate
    empirical_qber: Estimate | None
    sift_fractions: dict
    estimated_rate: float | None
    correlators: dict
    counts: dict
    n_key_announced: int

    @property
    def qber_defined(self) -> bool:
        return self.empirical_qber is not None

    def tables(self) -> dict:
        """Empirical post-strategy outcome tables per basis combination."""
        return {
            ijk: OutcomeTable.from_counts(c.reshape(3, 3, 3))
            for ijk, c in self.counts.items()
            if c.sum() > 0
        }

    def as_dict(self) -> dict:
        st = self.params.strategy
        return {
            "n_rounds": self.n_rounds,
            "seed": self.seed,
            "strategy": st.kind,
            "q": st.q,
            "eta": self.params.global_eta,
            "fidelity": self.params.fidelity,
            "source_fidelity": self.params.source_fidelity,
            "empirical_S": self.empirical_S.as_dict(),
            "empirical_S_ABC": self.empirical_S_ABC.as_dict(),
            "empirical_qber": self.empirical_qber.as_dict() if self.empirical_qber else None,
            "qber_defined": self.qber_defined,
            "key_rounds_announced": self.n_key_announced,
            "sift_fractions": self.sift_fractions,
            "estimated_rate": self.estimated_rate,
        }


def simulate(
    params: ProtocolParams,
    n_rounds: int,
    seed: int,
    *,
    state: np.ndarray | None = None,
    basis_choice: BasisChoice = BasisChoice(),
    bases: BasisAngles = PROTOCOL_BASES,
    qber_fraction: float = 1.0,
    workers: int = 1,
) -> SimulationReport:
    """Simulate ``n_rounds`` protocol rounds.

    Args:
        params: channel and strategy. The shared state is the imperfect
            source sent through the white-noise channel unless ``state`` is
            given.
        n_rounds: number of distributed GHZ states.
        seed: master seed; the report is a pure function of the arguments
            other than ``workers``.
        state: optional 8x8 density matrix (or ket) overriding the channel.
        basis_choice: basis selection probabilities.
        bases: measurement angles.
        qber_fraction: share of key rounds Alice announces for error
            estimation.
        workers: threads over which chunks are spread.
    """
    if n_rounds < 1:
        raise DomainError(f"n_rounds must be at least 1, got {n_rounds!r}")
    if not (0.0 < qber_fraction <= 1.0):
        raise DomainError(f"qber_fraction must lie in (0, 1], got {qber_fraction!r}")
    sampler = _Sampler(params, state, basis_choice, bases, qber_fraction)
    jobs = _chunks(n_rounds)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda cn: sampler.counts(seed, *cn), jobs))
    else:
        parts = [sampler.counts(seed, c, n) for c, n in jobs]
    total = sum(parts[1:], parts[0])

    counts = {ijk: total.outcomes[n] for ijk, n in _COMBO_INDEX.items()}
    sift_totals = np.zeros(3, dtype=np.int64)
    for ijk, n in _COMBO_INDEX.items():
        sift_totals[sift_codes(*(np.array([x]) for x in ijk))[0]] += total.outcomes[n].sum()
    sift_fractions = {name: float(sift_totals[n] / n_rounds) for n, name in enumerate(SIFT_NAMES)}

    try:
        s_abc, terms = svetlichny_estimator(counts)
    except EstimatorError:
        s_abc, terms = Estimate(float("nan"), float("nan")), {}
    s = Estimate(s_abc.value / 2, s_abc.stderr / 2)

    qber_est = None
    if total.announced:
        p = total.errors / total.announced
        qber_est = Estimate(p, math.sqrt(p * (1 - p) / total.announced))

    est_rate = None
    if qber_est is not None and math.isfinite(s.value):
        S_clipped = min(s.value, keyrate.TSIRELSON)
        est_rate = keyrate.rate_from_statistics(S_clipped, qber_est.value, params.strategy.flip_probability)

    return SimulationReport(
        n_rounds=n_rounds,
        seed=seed,
        params=params,
        empirical_S=s,
        empirical_S_ABC=s_abc,
        empirical_qber=qber_est,
        sift_fractions=sift_fractions,
        estimated_rate=est_rate,
        correlators=terms,
        counts=counts,
        n_key_announced=total.announced,
    )


@dataclass
class ValidationReport:
    passed: bool
    k_sigma: float
    margins: dict
    report: SimulationReport

    @property
    def failures(self) -> list[str]:
        return [name for name, m in self.margins.items() if not m["ok"]]

    def check(self) -> "ValidationReport":
        if not self.passed:
            detail = ", ".join(
                f"{n}: empirical {self.margins[n]['empirical']:.6g} vs analytic "
                f"{self.margins[n]['analytic']:.6g} ({self.margins[n]['z']:.2f} sigma)"
                for n in self.failures
            )
            raise ValidationFailure(f"Monte Carlo disagrees with closed form beyond {self.k_sigma} sigma: {detail}")
        return self

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "k_sigma": self.k_sigma,
            "failures": self.failures,
            "margins": self.margins,
            "simulation": self.report.as_dict(),
        }


def _margin(empirical: float, analytic: float, se: float, k_sigma: float) -> dict:
    diff = abs(empirical - analytic)
    if se == 0:
        ok = diff <= 1e-12
        z = 0.0 if ok else math.inf
    else:
        z = diff / se
        ok = z < k_sigma
    return {"empirical": empirical, "analytic": analytic, "stderr": se, "z": z, "ok": ok}


def validate_against_analytic(
    params: ProtocolParams, n_rounds: int, seed: int, k_sigma: float = 4.0, **kwargs
) -> ValidationReport:
    """Compare simulated error rate and CHSH value to the closed forms.

    The error rate and the CHSH value must both lie within ``k_sigma``
    standard errors of :func:`diqss.keyrate.qber` and
    :func:`diqss.keyrate.chsh_value`. Call ``.check()`` on the result to
    raise :class:`ValidationFailure` naming the offending quantity.
    """
    rep = simulate(params, n_rounds, seed, **kwargs)
    margins = {
        "S": _margin(rep.empirical_S.value, keyrate.chsh_value(params), rep.empirical_S.stderr, k_sigma)
    }
    if rep.empirical_qber is None:
        margins["qber"] = {"empirical": None, "analytic": keyrate.qber(params), "stderr": None, "z": math.inf, "ok": False}
    else:
        margins["qber"] = _margin(rep.empirical_qber.value, keyrate.qber(params), rep.empirical_qber.stderr, k_sigma)
    passed = all(m["ok"] for m in margins.values())
    return ValidationReport(passed, k_sigma, margins, rep)
