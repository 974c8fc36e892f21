"""Monte Carlo check of the closed-form error rate and CHSH value.

Simulates each parameter point and reports how many standard errors the
empirical values sit from the formulas.

    python3 scripts/run_validation.py --rounds 1000000 --k-sigma 4
"""
import argparse
import sys
import time

from diqss import montecarlo
from diqss.params import FiberModel, ProtocolParams
from diqss.strategies import StrategyConfig

POINTS = [
    ("none eta=0.97 F=0.99", ProtocolParams(fidelity=0.99, eta=0.97)),
    ("preprocess q=0.2 eta=0.98 F=0.97", ProtocolParams(fidelity=0.97, eta=0.98, strategy=StrategyConfig("preprocess", 0.2))),
    ("postselect eta=0.95", ProtocolParams(eta=0.95, strategy=StrategyConfig("postselect"))),
    ("advanced q=0.2 eta=0.9499", ProtocolParams(eta=0.9499, strategy=StrategyConfig("advanced", 0.2))),
    ("advanced q=0.4 eta=0.96 F=0.98", ProtocolParams(fidelity=0.98, eta=0.96, strategy=StrategyConfig("advanced", 0.4))),
    (
        "preprocess q=0.05 fiber d=0.2 F=0.99",
        ProtocolParams(fidelity=0.99, fiber=FiberModel(0.98, 0.99, distance=0.2), strategy=StrategyConfig("preprocess", 0.05)),
    ),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1, help="first seed; point n uses seed + n")
    ap.add_argument("--k-sigma", type=float, default=4.0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    all_ok = True
    for n, (name, params) in enumerate(POINTS):
        t0 = time.perf_counter()
        v = montecarlo.validate_against_analytic(params, args.rounds, args.seed + n, args.k_sigma, workers=args.workers)
        all_ok &= v.passed
        s, d = v.margins["S"], v.margins["qber"]
        print(
            f"{'ok  ' if v.passed else 'FAIL'} {name:<40} "
            f"S {s['empirical']:.5f} vs {s['analytic']:.5f} ({s['z']:.2f} se)  "
            f"delta {d['empirical']:.5f} vs {d['analytic']:.5f} ({d['z']:.2f} se)  "
            f"[{time.perf_counter() - t0:.1f} s]"
        )
    sys.exit(0 if all_ok else 1)


if __name__ == "__main__":
    main()
