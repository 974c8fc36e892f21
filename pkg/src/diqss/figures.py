"""Curve definitions for regenerating the published rate figures as CSV."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict

import numpy as np

from . import thresholds
from .errors import DomainError
from .params import FiberModel, ProtocolParams
from .strategies import StrategyConfig

FIGURES = (2, 3, 4, 5, 6, 8)

# curve parameters of the imperfect-source figure
SOURCE_FIDELITY = 0.96
FIG8_Q = 0.2


def _grid(lo: float, hi: float, step: float) -> list[float]:
    n = int(round((hi - lo) / step))
    return [float(x) for x in np.round(np.linspace(lo, hi, n + 1), 12)]


def figure_curves(figure: int) -> tuple[str, list[float], dict[str, ProtocolParams], str]:
    """``(variable, grid, curves, title)`` of one figure."""
    P = ProtocolParams
    fiber = FiberModel(eta_d=0.98, eta_c=0.99)
    if figure == 2:
        curves = {f"r(F={F:g})": P(fidelity=F, eta=1.0) for F in (1.0, 0.99, 0.97, 0.95)}
        return "eta", _grid(0.9, 1.0, 0.001), curves, "rate vs global detection efficiency"
    if figure == 3:
        curves = {
            f"r_q(q={q:g})": P(eta=1.0, strategy=StrategyConfig("preprocess", q))
            for q in (0.0, 0.05, 0.2, 0.4)
        }
        return "delta", _grid(0.0, 0.1, 0.0005), curves, "preprocessed rate vs error rate at eta=1"
    if figure == 4:
        curves = {"r": P(eta=1.0), "r_p": P(eta=1.0, strategy=StrategyConfig("postselect"))}
        return "eta", _grid(0.9, 1.0, 0.001), curves, "rate with and without postselection, F=1"
    if figure == 5:
        curves = {
            f"r_qp(q={q:g})": P(eta=1.0, strategy=StrategyConfig("advanced", q))
            for q in (0.0, 0.05, 0.2, 0.4)
        }
        return "eta", _grid(0.9, 1.0, 0.001), curves, "advanced postselection rate vs eta, F=1"
    if figure == 6:
        curves = {
            "r": P(fiber=fiber),
            "r_q(q=0.2)": P(fiber=fiber, strategy=StrategyConfig("preprocess", 0.2)),
            "r_p": P(fiber=fiber, strategy=StrategyConfig("postselect")),
            "r_qp(q=0.2)": P(fiber=fiber, strategy=StrategyConfig("advanced", 0.2)),
        }
        return "d", _grid(0.0, 0.8, 0.005), curves, "rate vs fiber distance, eta_d=0.98, eta_c=0.99, F=1"
    if figure == 8:
        curves = {}
        for model, tag in (("phase_flip", ""), ("qber_only", ",qber_only")):
            for F in (1.0, 0.99, 0.98):
                curves[f"r_qp(F={F:g}{tag})"] = P(
                    fidelity=F,
                    fiber=fiber,
                    source_fidelity=SOURCE_FIDELITY,
                    strategy=StrategyConfig("advanced", FIG8_Q),
                    source_model=model,
                )
        return "d", _grid(0.0, 0.8, 0.005), curves, "advanced rate vs distance, imperfect source F_s=0.96"
    raise DomainError(f"unknown figure {figure!r}; expected one of {FIGURES}")


def params_to_dict(p: ProtocolParams) -> dict:
    d = asdict(p)
    d["strategy"] = {"kind": p.strategy.kind, "q": p.strategy.q}
    return d


def params_from_dict(d: dict) -> ProtocolParams:
    d = dict(d)
    d["strategy"] = StrategyConfig(**d["strategy"])
    if d.get("fiber") is not None:
        d["fiber"] = FiberModel(**d["fiber"])
    return ProtocolParams(**d)


def write_csv(
    variable: str,
    rows: list[dict],
    curves: dict[str, ProtocolParams],
    comments: list[str] = (),
) -> str:
    """CSV text: ``#`` comment lines (including each curve's parameters as
    JSON), a header row, then one numeric row per grid point."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write(f"# x: {variable}\n")
    for name, p in curves.items():
        buf.write(f"# curve {name}: {json.dumps(params_to_dict(p), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = [variable, *curves]
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(float(r[c])) for c in cols])
    return buf.getvalue()


def read_csv(text: str) -> tuple[str, dict[str, ProtocolParams], list[dict]]:
    """Inverse of :func:`write_csv`: ``(variable, curves, rows)``."""
    variable = None
    curves: dict[str, ProtocolParams] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# x: "):
            variable = line[5:].strip()
        elif line.startswith("# curve "):
            name, _, js = line[8:].partition(": ")
            curves[name] = params_from_dict(json.loads(js))
        elif not line.startswith("#") and line.strip():
            body.append(line)
    reader = csv.DictReader(body)
    rows = [{k: float(v) for k, v in r.items()} for r in reader]
    return variable, curves, rows


def reproduce(figure: int) -> str:
    variable, grid, curves, title = figure_curves(figure)
    rows = thresholds.sweep(variable, grid, curves)
    comments = [f"figure: {figure}", f"title: {title}"]
    if figure == 8:
        comments.append(
            "source models: phase_flip mixes |GHZ_1^-> into the source so the CHSH value uses "
            "F(2F_s-1); qber_only raises only the error rate"
        )
    return write_csv(variable, rows, curves, comments)
