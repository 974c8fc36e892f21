"""Write the rate-curve CSV for every figure into one directory.

    python3 scripts/reproduce_figures.py --out figures/
"""
import argparse
from pathlib import Path

from diqss import figures


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures", help="output directory")
    ap.add_argument("--only", type=int, nargs="*", default=list(figures.FIGURES))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fig in args.only:
        path = out / f"fig{fig}.csv"
        path.write_text(figures.reproduce(fig))
        print(path)


if __name__ == "__main__":
    main()
