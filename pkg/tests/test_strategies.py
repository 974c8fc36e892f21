import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diqss import noisemodel as nm, nonlocality as nl, qstate
from diqss.errors import ContractViolation, DomainError
from diqss.strategies import (
    RoundRecord,
    StrategyConfig,
    apply_strategy,
    apply_to_record,
    flip_alice,
    key_errors,
    postselect_map,
    postselect_table,
    preprocess_flip_distribution,
    sift_case,
    sift_codes,
)

_SYM = {"+": 1, "-": -1, "x": 0}

# the published mapping, row by row ('x' is a no-click)
MAPPING_ROWS = {
    "+++": ["++x", "+x+", "x++", "+xx", "x+x", "xx+", "xxx"],
    "+--": ["x--"],
    "-+-": ["-x-"],
    "--+": ["--x"],
    "++-": ["+x-", "x+-", "xx-"],
    "+-+": ["+-x", "x-+", "x-x"],
    "-++": ["-+x", "-x+", "-xx"],
}


def parse(s):
    return tuple(_SYM[ch] for ch in s)


def test_postselect_map_matches_published_rows():
    for target, sources in MAPPING_ROWS.items():
        for src in sources:
            assert postselect_map(parse(src)) == parse(target), src


def test_postselect_map_covers_all_lossy_cases():
    listed = {src for sources in MAPPING_ROWS.values() for src in sources}
    lossy = {"".join(p) for p in itertools.product("+-x", repeat=3) if "x" in p}
    assert listed == lossy


def test_postselect_map_identity_without_loss():
    for o in itertools.product((1, -1), repeat=3):
        assert postselect_map(o) == o
        assert postselect_map(postselect_map(o)) == o


def _lossy_ghz_table(eta=0.8):
    return nm.outcome_table(nm.white_noise_state(0.9), eta, nl.SettingTriple(0, 0, 0))


def test_postselect_table_lines():
    t = _lossy_ghz_table()
    tp = postselect_table(t)
    assert tp.prob(-1, -1, -1) == pytest.approx(t.prob(-1, -1, -1), abs=1e-15)
    assert tp.prob(1, -1, -1) == pytest.approx(t.prob(1, -1, -1) + t.prob(0, -1, -1), abs=1e-15)
    for target, sources in MAPPING_ROWS.items():
        want = t.prob(*parse(target)) + sum(t.prob(*parse(s)) for s in sources)
        assert tp.prob(*parse(target)) == pytest.approx(want, abs=1e-15)
    assert tp.no_click_marginal(0) == 0


def test_postselect_table_preserves_probability(rng):
    for _ in range(20):
        t = nm.outcome_table(qstate.random_density(rng), rng.uniform(), nl.SettingTriple(*rng.uniform(0, 6, 3)))
        assert abs(postselect_table(t).total() - t.total()) < 1e-12


def test_flip_distribution_examples():
    assert preprocess_flip_distribution(0.05, 0.0) == 0.05
    assert preprocess_flip_distribution(0.05, 0.2) == pytest.approx(0.23)
    for p in (0.0, 0.3, 1.0):
        assert preprocess_flip_distribution(p, 0.5) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        preprocess_flip_distribution(1.5, 0.1)


@given(st.floats(0, 0.5), st.floats(0, 1))
def test_flip_distribution_symmetric(q, p):
    assert preprocess_flip_distribution(p, q) + preprocess_flip_distribution(1 - p, q) == pytest.approx(1)


@given(st.floats(0, 0.5), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_flip_distribution_affine(q, p1, p2, w):
    mixed = preprocess_flip_distribution(w * p1 + (1 - w) * p2, q)
    want = w * preprocess_flip_distribution(p1, q) + (1 - w) * preprocess_flip_distribution(p2, q)
    assert mixed == pytest.approx(want, abs=1e-12)


def test_strategy_config_validation():
    assert StrategyConfig("preprocess", 0.2).flip_probability == 0.2
    assert StrategyConfig("postselect", 0.2).flip_probability == 0.0
    assert StrategyConfig("advanced", 0.1).postselects
    with pytest.raises(DomainError):
        StrategyConfig("preprocess", 0.6)
    with pytest.raises(DomainError):
        StrategyConfig("bogus")


def test_sift_classification():
    assert sift_case(1, 1, 1) == "key"
    assert sift_case(2, 1, 1) == "discard"
    assert sift_case(1, 1, 2) == "discard"
    assert sift_case(2, 3, 2) == "test"
    i, j, k = np.array([[1, 1, 1], [2, 1, 2], [1, 2, 1]]).T
    assert list(sift_codes(i, j, k)) == [1, 2, 0]


class _Always:
    """Stands in for a generator whose uniforms are all ``u``."""

    def __init__(self, u):
        self.u = u

    def random(self, n):
        return np.full(n, self.u)


def test_key_round_flips_on_small_draw():
    rec = RoundRecord((1, 1, 1), (1, 1, 1), (1, 1, 1))
    out = apply_to_record(rec, StrategyConfig("preprocess", 0.3), _Always(0.1))
    assert out.outcomes == (-1, 1, 1) and out.flipped
    assert out.key_error
    out = apply_to_record(rec, StrategyConfig("preprocess", 0.3), _Always(0.9))
    assert out.outcomes == (1, 1, 1) and not out.key_error


def test_test_round_never_flipped():
    rec = RoundRecord((2, 3, 1), (1, -1, 0), (1, -1, 0))
    for cfg in (StrategyConfig("preprocess", 0.5), StrategyConfig("advanced", 0.5)):
        out = apply_to_record(rec, cfg, _Always(0.0))
        assert not out.flipped
        assert out.outcomes[:2] == (1, -1)


def test_advanced_key_round_postselects_then_flips():
    rec = RoundRecord((1, 1, 1), (0, -1, -1), (0, -1, -1))
    cfg = StrategyConfig("advanced", 0.2)
    out = apply_to_record(rec, cfg, _Always(0.9))
    assert out.outcomes == (1, -1, -1)
    out = apply_to_record(rec, cfg, _Always(0.1))
    assert out.outcomes == (-1, -1, -1)


def test_flip_alice_contract():
    with pytest.raises(ContractViolation):
        flip_alice(RoundRecord((1, 2, 1), (1, 1, 1), (1, 1, 1)))
    with pytest.raises(ContractViolation):
        flip_alice(RoundRecord((2, 1, 1), (1, 1, 1), (1, 1, 1)))
    assert flip_alice(RoundRecord((1, 1, 1), (1, 1, 1), (1, 1, 1))).outcomes == (-1, 1, 1)


def test_key_errors_rule():
    outs = np.array([[1, 1, 1], [1, -1, 1], [0, 1, 1], [0, 1, 1], [1, 0, -1]])
    flips = np.array([False, False, False, True, True])
    assert list(key_errors(outs, flips)) == [False, True, True, False, False]


def test_record_key_bits():
    rec = RoundRecord((1, 1, 1), (1, -1, 0), (1, -1, 0))
    assert rec.key_bits == (0, 1, None)
    assert RoundRecord((1, 2, 1), (1, 1, 1), (1, 1, 1)).key_bits is None
    assert RoundRecord((1, 2, 1), (1, 1, 1), (1, 1, 1)).key_error is None


def test_apply_strategy_flip_rate_and_test_rounds(rng):
    n = 200_000
    outs = np.ones((n, 3), dtype=np.int8)
    sift = np.where(np.arange(n) % 2 == 0, 1, 0).astype(np.int8)
    out, flipped = apply_strategy(outs, sift, StrategyConfig("preprocess", 0.2), rng)
    assert not flipped[sift == 0].any()
    assert np.array_equal(out[sift == 0], outs[sift == 0])
    rate = flipped[sift == 1].mean()
    assert abs(rate - 0.2) < 4 * np.sqrt(0.2 * 0.8 / (n / 2))
