"""Acceptance checks for the published anchors and core properties.

Each criterion is one check function returning ``(ok, detail)``. Under
pytest every check prints a single ``PASS``/``FAIL`` line and then asserts;
``python3 tests/test_acceptance.py`` prints the same lines without pytest.
"""
from __future__ import annotations

import itertools
import math
import sys
import time
import warnings

import numpy as np
import pytest

from diqss import keyrate as kr
from diqss import montecarlo as mc
from diqss import noisemodel as nm
from diqss import nonlocality as nl
from diqss import qstate
from diqss import thresholds as th
from diqss.params import FiberModel, ProtocolParams
from diqss.strategies import StrategyConfig

SQ2 = math.sqrt(2)
FIBER = FiberModel(eta_d=0.98, eta_c=0.99)
PP = 1e-4  # 0.01 percentage points, as a probability


def _eta_star(kind="none", q=0.0, F=1.0):
    p = ProtocolParams(fidelity=F, eta=1.0, strategy=StrategyConfig(kind, q))
    return th.find_threshold(p, "eta").value


def _line(cond, text):
    return bool(cond), text


def check_1():
    v = _eta_star()
    return _line(abs(v - 0.9632) <= 5 * PP, f"eta* plain F=1 = {v:.6f} (published 0.9632 +- 0.0005)")


def check_2():
    v = _eta_star(F=0.95)
    return _line(abs(v - 0.9757) <= 5 * PP, f"eta* plain F=0.95 = {v:.6f} (published 0.9757 +- 0.0005)")


def check_3():
    want = {0.0: 0.07148, 0.05: 0.07616, 0.2: 0.0795, 0.4: 0.08072}
    got = {
        q: th.find_threshold(ProtocolParams(eta=1.0, strategy=StrategyConfig("preprocess", q)), "delta").value
        for q in want
    }
    ok = all(abs(got[q] - want[q]) <= PP for q in want)
    detail = ", ".join(f"q={q:g}: {got[q]:.6f} vs {want[q]}" for q in want)
    return _line(ok, f"delta* at eta=1 ({detail}; tol 0.0001)")


def check_4():
    v = _eta_star("postselect")
    return _line(abs(v - 0.9499) <= 5 * PP, f"eta* postselect = {v:.6f} (published 0.9499 +- 0.0005)")


def check_5():
    a, b = _eta_star("advanced", 0.4), _eta_star("advanced", 0.4999)
    ok = abs(a - 0.9430) <= 5 * PP and abs(b - 0.9429) <= 5 * PP
    return _line(ok, f"eta* advanced q=0.4 = {a:.6f} (0.9430), q=0.4999 = {b:.6f} (0.9429); tol 0.0005")


def check_6():
    p = ProtocolParams(fiber=FIBER, strategy=StrategyConfig("advanced", 0.2))
    d = th.find_threshold(p, "d").value
    u = th.user_distance(d)
    ok = abs(d - 0.59) <= 0.01 and abs(u - 1.02) <= 0.02
    return _line(ok, f"d* advanced q=0.2 = {d:.5f} km (0.59 +- 0.01), user distance {u:.5f} km (1.02 +- 0.02)")


def check_7():
    d = th.find_threshold(ProtocolParams(fiber=FIBER), "d").value
    u = th.user_distance(d)
    return _line(abs(u - 0.26) <= 0.03, f"plain user distance = {u:.5f} km (d* = {d:.5f}; published about 0.26 +- 0.03)")


def check_8():
    r_p = kr.rate(ProtocolParams(fiber=FiberModel(0.98, 0.99, distance=0.3), strategy=StrategyConfig("postselect")))
    r_qp = kr.rate(ProtocolParams(fiber=FiberModel(0.98, 0.99, distance=0.3), strategy=StrategyConfig("advanced", 0.2)))
    ratio = r_p / r_qp
    return _line(1.6 <= ratio <= 2.4, f"r_p / r_qp(q=0.2) at d=0.3 km = {ratio:.4f} (in [1.6, 2.4])")


def _imperfect_source_distance(model: str, q: float = 0.4):
    p = ProtocolParams(
        fidelity=1.0,
        fiber=FIBER,
        source_fidelity=0.96,
        strategy=StrategyConfig("advanced", q),
        source_model=model,
    )
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return th.user_distance(th.find_threshold(p, "d").value)
    except Exception:
        return float("nan")


def check_9():
    Fs = 0.96
    delta_star = th.find_threshold(ProtocolParams(eta=1.0, strategy=StrategyConfig("preprocess", 0.4)), "delta").value
    # 1/2 + F/2 - F_s F = delta*
    F_star = (0.5 - delta_star) / (Fs - 0.5)
    noise = (1 - F_star) / 2
    u = _imperfect_source_distance("phase_flip")
    ok_F = abs(F_star - 0.9114) <= 5 * PP and abs(noise - 0.04426) <= 5 * PP
    ok_u = abs(u - 0.693) <= 0.05
    return _line(
        ok_F and ok_u,
        f"F_s=0.96: F* = {F_star:.5f} (0.9114), channel noise threshold {noise:.5f} (0.04426); "
        f"user distance {u:.4f} km vs 0.693 +- 0.05 [assumption: CHSH uses F(2F_s-1)]",
    )


def check_9_qber_only():
    u = _imperfect_source_distance("qber_only")
    return _line(
        abs(u - 0.693) <= 0.05,
        f"informational: user distance {u:.4f} km when the source error raises only the error rate "
        "(CHSH at channel F)",
    )


def check_10():
    F = th.find_threshold(ProtocolParams(eta=1.0), "F").value
    implied = 1 - 2 * th.find_threshold(ProtocolParams(eta=1.0), "delta").value
    return _line(
        0.850 <= F <= 0.862,
        f"F* plain = {F:.6f} in [0.850, 0.862]; published anchor 0.851, delta*-implied {implied:.6f}",
    )


def check_11():
    rho = qstate.pure(qstate.ghz(1, "+"))
    s = nl.svetlichny(rho)
    worst = abs(s - 4 * SQ2)
    for k, theta in nl.PROTOCOL_BASES.charlie.items():
        form = nl.chsh if k == 1 else nl.chsh_prime
        for c in (1, -1):
            _, ab = nl.collapse(rho, theta, c)
            worst = max(worst, abs(form(ab) - c * 2 * SQ2))
    return _line(worst <= 1e-9, f"S_ABC(GHZ) = {s:.12f}; collapsed CHSH = +-2sqrt2; max error {worst:.2e}")


def check_12():
    rng = np.random.default_rng(12)
    worst = max(abs(np.subtract(*nl.decomposition_check(qstate.random_density(rng)))) for _ in range(100))
    return _line(worst <= 1e-9, f"decomposition identity on 100 random states, max error {worst:.2e}")


MC_POINTS = [
    (ProtocolParams(fidelity=0.99, eta=0.97), 1),
    (ProtocolParams(fidelity=0.97, eta=0.98, strategy=StrategyConfig("preprocess", 0.2)), 2),
    (ProtocolParams(fidelity=1.0, eta=0.95, strategy=StrategyConfig("postselect")), 3),
    (ProtocolParams(fidelity=1.0, eta=0.9499, strategy=StrategyConfig("advanced", 0.2)), 4),
    (ProtocolParams(fidelity=0.98, eta=0.96, strategy=StrategyConfig("advanced", 0.4)), 5),
    (ProtocolParams(fidelity=0.99, fiber=FiberModel(0.98, 0.99, distance=0.2), strategy=StrategyConfig("preprocess", 0.05)), 6),
]


def check_13():
    t0 = time.perf_counter()
    parts, ok = [], True
    for params, seed in MC_POINTS:
        v = mc.validate_against_analytic(params, 1_000_000, seed, k_sigma=4)
        ok &= v.passed
        parts.append(
            f"{params.strategy.kind}: z_S={v.margins['S']['z']:.2f} z_d={v.margins['qber']['z']:.2f}"
        )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 180
    return _line(ok, f"Monte Carlo vs closed form, 6 x 10^6 rounds in {elapsed:.1f} s ({'; '.join(parts)})")


def check_14():
    params = ProtocolParams(eta=1.0)
    got = {}
    for i, sign in itertools.product((1, 2, 3, 4), "+-"):
        rep = mc.simulate(params, 100_000, 100 + i, state=qstate.ghz(i, sign))
        got[f"{i}{sign}"] = rep.empirical_qber.value
    ok = all(v == (1.0 if k.endswith("-") else 0.0) for k, v in got.items())
    return _line(ok, "GHZ basis classification: " + " ".join(f"{k}:{v:g}" for k, v in got.items()))


def check_15():
    rng = np.random.default_rng(15)
    failures = []
    for _ in range(200):
        rho = qstate.random_density(rng, dim=4, rank=1)
        a = dict(zip((1, 2), rng.uniform(-np.pi, np.pi, 2)))
        b = {1: 0.0, **dict(zip((2, 3), rng.uniform(-np.pi, np.pi, 2)))}
        if abs(nl.chsh(rho, nl.BasisAngles(alice=a, bob=b))) > 2 * SQ2 + 1e-9:
            failures.append("tsirelson")
            break
    for _ in range(50):
        t = nm.outcome_table(qstate.random_density(rng), rng.uniform(), nl.SettingTriple(*rng.uniform(0, 6, 3)))
        try:
            t.check(eta=1 - t.no_click_marginal(0))
        except Exception:
            failures.append("normalization")
            break
    grid = np.linspace(0, 1, 41)
    for eta, F in itertools.product(grid, grid):
        plain = ProtocolParams(fidelity=F, eta=eta)
        post = ProtocolParams(fidelity=F, eta=eta, strategy=StrategyConfig("postselect"))
        if kr.qber(post) > kr.qber(plain) + 1e-15 or kr.chsh_value(post) < kr.chsh_value(plain) - 1e-15:
            failures.append("postselection grid")
            break
    for S, q in itertools.product(np.linspace(2, 2 * SQ2, 41), np.linspace(0, 0.5, 21)):
        if kr.eve_bound_preprocessed(S, q) < kr.eve_bound(S) - 1e-12:
            failures.append("g >= eve_bound")
            break
    p = ProtocolParams(fidelity=0.98, eta=0.96, strategy=StrategyConfig("advanced", 0.2))
    if mc.simulate(p, 100_000, 9).as_dict() != mc.simulate(p, 100_000, 9, workers=3).as_dict():
        failures.append("seed determinism")
    return _line(not failures, "property suite" + (f" failed: {failures}" if failures else ": all hold"))


CRITERIA = [
    ("1", check_1),
    ("2", check_2),
    ("3", check_3),
    ("4", check_4),
    ("5", check_5),
    ("6", check_6),
    ("7", check_7),
    ("8", check_8),
    ("9", check_9),
    ("9-info", check_9_qber_only),
    ("10", check_10),
    ("11", check_11),
    ("12", check_12),
    ("13", check_13),
    ("14", check_14),
    ("15", check_15),
]


def _report(label, fn):
    ok, detail = fn()
    return ok, f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"


@pytest.mark.parametrize("label, fn", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(label, fn, capsys):
    ok, line = _report(label, fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [_report(label, fn) for label, fn in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
