"""Threshold root finding, the fiber-loss model and parameter sweeps.

Thresholds are the zero crossings of a rate lower bound in one variable
with everything else held fixed. Variables:

``eta``    global detection efficiency
``delta``  loss-free-equivalent error rate at fixed eta (sets F)
``F``      channel fidelity
``d``      source-to-user fiber distance in km
``eta_c``  coupling efficiency (fiber model)
``q``      preprocessing flip probability (sweeps only)
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from . import keyrate
from .errors import DomainError, NoThresholdError
from .params import FiberModel, ProtocolParams, global_efficiency
from .strategies import StrategyConfig

__all__ = [
    "FiberModel",
    "global_efficiency",
    "user_distance",
    "ThresholdResult",
    "solve_threshold",
    "rate_function",
    "find_threshold",
    "threshold_suite",
    "coupling_thresholds",
    "sweep",
]

VARIABLES = ("eta", "delta", "F", "d", "eta_c", "q")

DEFAULT_BRACKETS = {
    "eta": (0.90, 1.0),
    "delta": (0.0, 0.12),
    "F": (0.80, 1.0),
    "d": (0.0, 5.0),
    "eta_c": (0.90, 1.0),
}
WIDE_BRACKETS = {
    "eta": (0.5, 1.0),
    "delta": (0.0, 0.5),
    "F": (0.0, 1.0),
    "d": (0.0, 100.0),
    "eta_c": (0.0, 1.0),
}


def user_distance(d: float) -> float:
    """Distance between two users at the corners of an equilateral triangle
    whose circumcenter holds the source, each ``d`` km from it."""
    if d < 0:
        raise DomainError(f"distance must be non-negative, got {d!r}")
    return math.sqrt(3) * d


@dataclass(frozen=True)
class ThresholdResult:
    variable: str
    value: float
    bracket: tuple[float, float]
    residual_rate: float
    iterations: int

    def as_dict(self) -> dict:
        out = {
            "variable": self.variable,
            "value": self.value,
            "bracket": list(self.bracket),
            "residual_rate": self.residual_rate,
            "iterations": self.iterations,
        }
        if self.variable == "d":
            out["user_distance"] = user_distance(self.value)
        return out


def solve_threshold(
    rate_fn: Callable[[float], float],
    bracket: tuple[float, float],
    tol: float = 1e-7,
    *,
    variable: str = "x",
    residual_tol: float = 1e-9,
    max_iter: int = 200,
) -> ThresholdResult:
    """Bisection on the sign change of ``rate_fn`` inside ``bracket``.

    Stops once the bracket is narrower than ``tol`` and the rate at the
    midpoint is within ``residual_tol`` of zero, or when the bracket can no
    longer be halved in floating point.
    """
    lo, hi = map(float, bracket)
    f_lo, f_hi = rate_fn(lo), rate_fn(hi)
    if f_lo == 0:
        return ThresholdResult(variable, lo, (lo, hi), 0.0, 0)
    if f_hi == 0:
        return ThresholdResult(variable, hi, (lo, hi), 0.0, 0)
    if f_lo * f_hi > 0:
        raise NoThresholdError(
            f"no threshold in range: rate has the same sign at {variable}={lo} "
            f"({f_lo:.3g}) and {variable}={hi} ({f_hi:.3g})"
        )
    a, b, f_a = lo, hi, f_lo
    mid, f_mid = a, f_a
    for it in range(1, max_iter + 1):
        mid = 0.5 * (a + b)
        f_mid = rate_fn(mid)
        if f_mid == 0 or (b - a < tol and abs(f_mid) < residual_tol):
            break
        if mid in (a, b):
            break
        if (f_mid < 0) == (f_a < 0):
            a, f_a = mid, f_mid
        else:
            b = mid
    return ThresholdResult(variable, mid, (lo, hi), f_mid, it)


def _delta_to_fidelity(params: ProtocolParams, delta: float) -> float:
    """Channel fidelity giving pre-flip error rate ``delta`` at the fixed eta."""
    if params.source_fidelity != 1:
        raise DomainError("delta parameterization needs a perfect source (F_s = 1)")
    eta = params.global_eta
    if eta == 0:
        raise DomainError("delta parameterization undefined at eta = 0")
    if params.strategy.postselects:
        return 1 - 2 * (delta - 1.5 * eta * (1 - eta)) / eta**3
    return (2 - eta**3 - 2 * delta) / eta**3


def with_variable(params: ProtocolParams, variable: str, x: float) -> ProtocolParams:
    """``params`` with ``variable`` set to ``x``."""
    if variable == "eta":
        return params.with_(eta=x)
    if variable == "F":
        return params.with_(fidelity=x)
    if variable == "delta":
        return params.with_(fidelity=_delta_to_fidelity(params, x))
    if variable == "q":
        return params.with_(strategy=replace(params.strategy, q=x))
    if variable in ("d", "eta_c"):
        fiber = params.fiber if params.fiber is not None else FiberModel()
        field = "distance" if variable == "d" else "eta_c"
        return params.with_(fiber=replace(fiber, **{field: x}))
    raise DomainError(f"unknown variable {variable!r}; expected one of {VARIABLES}")


def rate_function(params: ProtocolParams, variable: str) -> Callable[[float], float]:
    def fn(x: float) -> float:
        return keyrate.rate(with_variable(params, variable, x))

    return fn


def _domain_bracket(params: ProtocolParams, variable: str, bracket: tuple[float, float]):
    lo, hi = bracket
    if variable == "delta":
        # keep the implied fidelity inside [0, 1]
        base = params.with_(fidelity=1.0)
        d_min = keyrate.raw_qber(base)
        d_max = keyrate.raw_qber(params.with_(fidelity=0.0))
        lo, hi = max(lo, d_min), min(hi, d_max)
    return lo, hi


def find_threshold(
    params: ProtocolParams,
    variable: str,
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-7,
) -> ThresholdResult:
    """Threshold of ``variable`` for ``params``.

    Without an explicit bracket the default bracket is tried first and, if
    the rate does not change sign there, a wide bracket once (with a warning).
    """
    fn = rate_function(params, variable)
    if bracket is not None:
        return solve_threshold(fn, _domain_bracket(params, variable, bracket), tol, variable=variable)
    try:
        return solve_threshold(
            fn, _domain_bracket(params, variable, DEFAULT_BRACKETS[variable]), tol, variable=variable
        )
    except NoThresholdError:
        wide = _domain_bracket(params, variable, WIDE_BRACKETS[variable])
        warnings.warn(
            f"no sign change on default {variable} bracket {DEFAULT_BRACKETS[variable]}; "
            f"retrying on {wide}",
            stacklevel=2,
        )
        return solve_threshold(fn, wide, tol, variable=variable)


def threshold_suite(params: ProtocolParams, fiber: FiberModel | None = None) -> dict:
    """eta*, delta*, F*, eta_c* and d* for one strategy.

    eta* and F* use ``params`` (eta* ignores any fiber). delta* is taken at
    the params' global eta. eta_c* (at zero distance) and d* use ``fiber``,
    default 98% detectors and 99% coupling. Entries whose rate never changes
    sign are None.
    """
    fiber = fiber if fiber is not None else (params.fiber or FiberModel())
    fibered = params.with_(fiber=fiber)
    jobs = {
        "eta": (params.with_(eta=params.global_eta), "eta"),
        "delta": (params.with_(eta=params.global_eta), "delta"),
        "F": (params, "F"),
        "eta_c": (fibered.with_(fiber=replace(fiber, distance=0.0)), "eta_c"),
        "d": (fibered, "d"),
    }
    out = {}
    for name, (p, var) in jobs.items():
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out[name] = find_threshold(p, var)
        except (NoThresholdError, DomainError):
            out[name] = None
    return out


def coupling_thresholds(
    strategies: Sequence[StrategyConfig],
    fidelity: float = 1.0,
    fiber: FiberModel = FiberModel(),
    target: float = 0.97,
) -> tuple[dict, str]:
    """eta_c* at zero distance for each strategy, and the label closest to ``target``."""
    results = {}
    for st in strategies:
        p = ProtocolParams(fidelity=fidelity, fiber=replace(fiber, distance=0.0), strategy=st)
        label = strategy_label(st)
        try:
            results[label] = find_threshold(p, "eta_c")
        except NoThresholdError:
            results[label] = None
    found = {k: v for k, v in results.items() if v is not None}
    best = min(found, key=lambda k: abs(found[k].value - target)) if found else ""
    return results, best


def strategy_label(st: StrategyConfig) -> str:
    if st.kind in ("preprocess", "advanced"):
        return f"{st.kind}(q={st.q:g})"
    return st.kind


def sweep(
    variable: str,
    values: Iterable[float],
    curves: dict[str, ProtocolParams],
    workers: int = 1,
) -> list[dict]:
    """Rate of every curve at every grid value.

    Args:
        variable: one of ``VARIABLES``.
        values: grid of x values; output rows follow this order.
        curves: column name -> base parameters of that curve.
        workers: evaluate grid points on this many threads.

    Returns:
        One dict per grid value with key ``variable`` plus one key per curve.
    """
    if variable not in VARIABLES:
        raise DomainError(f"unknown variable {variable!r}; expected one of {VARIABLES}")
    xs = [float(x) for x in values]

    def row(x: float) -> dict:
        r = {variable: x}
        for name, p in curves.items():
            r[name] = keyrate.rate(with_variable(p, variable, x))
        return r

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(row, xs))
    return [row(x) for x in xs]
