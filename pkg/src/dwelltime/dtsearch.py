"""Scalar searches over dwell-time parameters.

The constant dwell-time search scans the spectral radius of the monodromy
map before bisecting, because ``rho(M(T))`` need not be monotone in ``T``.
The certificate-based searches (minimum dwell-time, largest ``T_max``) rely
on monotonicity of feasibility and bisect directly.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import clockcond
from .matalg import eig, expm, spectral_radius
from .model import ImpulsiveSystem, ensure_valid
from .moments import lift, monodromy

__all__ = [
    "SearchError",
    "SearchResult",
    "smallest_constant_dt",
    "smallest_minimum_dt",
    "largest_ranged_tmax",
    "decay_rate",
    "rho_scan",
    "smallest_pwl_constant_dt",
    "SCAN_POINTS",
    "DEFAULT_TOL",
]

SCAN_POINTS = 200
DEFAULT_TOL = 1e-4


class SearchError(RuntimeError):
    """A search that cannot produce a threshold; ``reason`` is a short tag."""

    def __init__(self, reason: str, message: str, data: dict | None = None):
        super().__init__(message)
        self.reason = reason
        self.data = data or {}


@dataclass
class SearchResult:
    threshold: float | None
    bracket: tuple
    evaluations: int
    stable_intervals: list = field(default_factory=list)
    method: str = ""
    scan: list = field(default_factory=list)   # (T, value) pairs for plotting
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "threshold": None if self.threshold is None else float(self.threshold),
            "bracket": [float(b) for b in self.bracket],
            "evaluations": int(self.evaluations),
            "stable_intervals": [[float(a), float(b)] for a, b in self.stable_intervals],
            "method": self.method,
            "settings": self.settings,
            "scan": [[float(t), float(v)] for t, v in self.scan],
        }


def _check_range(T_range, tol):
    lo, hi = (float(T_range[0]), float(T_range[1]))
    if not (0 < lo < hi):
        raise ValueError(f"need 0 < T_lo < T_hi, got {T_range!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    return lo, hi


def rho_scan(sys: ImpulsiveSystem, Ts, threads: int = 1) -> np.ndarray:
    """Spectral radius of the monodromy map at every dwell-time in ``Ts``."""
    lp = lift(sys)
    f = lambda T: spectral_radius(_monodromy_from(lp, T))
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return np.array(list(ex.map(f, Ts)))
    return np.array([f(T) for T in Ts])


def _monodromy_from(lp, T):
    return expm(lp.gen * T) @ lp.jump


def _intervals(Ts, stable):
    """Contiguous runs of stable scan points, as (first, last) pairs."""
    out, start = [], None
    for T, s in zip(Ts, stable):
        if s and start is None:
            start = T
        if not s and start is not None:
            out.append((start, prev))
            start = None
        prev = T
    if start is not None:
        out.append((start, prev))
    return out


def smallest_constant_dt(sys: ImpulsiveSystem, T_range=(0.01, 20.0), tol: float = DEFAULT_TOL,
                         scan_points: int = SCAN_POINTS, threads: int = 1) -> SearchResult:
    """Smallest constant dwell-time at which ``rho(M(T)) < 1``.

    A uniform scan brackets the first unstable-to-stable crossing, which is
    then bisected until the bracket is no wider than ``tol``.
    """
    ensure_valid(sys)
    lo, hi = _check_range(T_range, tol)
    lp = lift(sys)
    Ts = np.linspace(lo, hi, int(scan_points))
    rhos = rho_scan(sys, Ts, threads)
    stable = rhos < 1.0
    evals = len(Ts)
    intervals = _intervals(Ts, stable)
    scan = list(zip(Ts, rhos))
    first = np.flatnonzero(stable)
    if first.size == 0 or first[0] == 0:
        what = "stable over the whole scan" if first.size else "unstable over the whole scan"
        raise SearchError("no threshold in range", f"no threshold in range: {what}",
                          {"scan": [[float(t), float(r)] for t, r in scan]})
    a, b = Ts[first[0] - 1], Ts[first[0]]
    while b - a > tol:
        m = 0.5 * (a + b)
        evals += 1
        if spectral_radius(_monodromy_from(lp, m)) < 1.0:
            b = m
        else:
            a = m
    return SearchResult(0.5 * (a + b), (a, b), evals, intervals, "spectral-scan-bisection", scan,
                        {"tol": tol, "scan_points": int(scan_points), "T_range": [lo, hi]})


def _flow_ms_stable(sys: ImpulsiveSystem) -> bool:
    return float(eig(lift(sys).gen).max_real_part) < 0.0


def _bisect_feasible(test, a, b, tol, feasible_above: bool):
    """Bisect a monotone feasibility predicate between an infeasible and a feasible end."""
    evals = 0
    while b - a > tol:
        m = 0.5 * (a + b)
        evals += 1
        ok = bool(test(m))
        if ok == feasible_above:
            b = m
        else:
            a = m
    return a, b, evals


def smallest_minimum_dt(sys: ImpulsiveSystem, T_range=(0.01, 20.0), tol: float = DEFAULT_TOL,
                        mode: str = "exact", N: int = clockcond.DEFAULT_N, eps=None, opts=None) -> SearchResult:
    """Smallest ``T`` for which the minimum dwell-time certificate is feasible."""
    ensure_valid(sys)
    lo, hi = _check_range(T_range, tol)
    if mode == "exact":
        test = lambda T: clockcond.exact_minimum_dt(sys, T, eps=eps, opts=opts)
        settings = {"mode": mode}
    elif mode == "pwl":
        test = lambda T: clockcond.pwl_minimum_dt(sys, T, N=N, eps=eps, opts=opts)
        settings = {"mode": mode, "N": int(N)}
    else:
        raise ValueError(f"unknown mode {mode!r}")
    settings.update(tol=tol, T_range=[lo, hi], eps=eps)
    if not _flow_ms_stable(sys):
        raise SearchError("flow not MS-stable",
                          "flow not MS-stable: the lifted generator has an eigenvalue with real part >= 0")
    if not test(hi):
        raise SearchError("no certificate in range", f"no certificate in range: infeasible at T = {hi}")
    if test(lo):
        return SearchResult(lo, (lo, lo), 2, [(lo, hi)], f"{mode}-bisection", [], settings)
    a, b, evals = _bisect_feasible(test, lo, hi, tol, feasible_above=True)
    return SearchResult(0.5 * (a + b), (a, b), evals + 2, [(b, hi)], f"{mode}-bisection", [], settings)


def largest_ranged_tmax(sys: ImpulsiveSystem, T_min: float, T_range=None, tol: float = DEFAULT_TOL,
                        mode: str = "lifted", N: int = clockcond.DEFAULT_N, grid_n: int = clockcond.DEFAULT_GRID,
                        eps=None, opts=None) -> SearchResult:
    """Largest ``T_max`` such that the ranged certificate on ``[T_min, T_max]`` is feasible.

    An infeasible start is reported as an empty interval (``threshold`` is
    None).  A certificate that still holds at the top of the range returns
    that end point with a degenerate bracket.
    """
    ensure_valid(sys)
    T_min = float(T_min)
    if T_range is None:
        T_range = (T_min, 10.0 * max(T_min, 0.1))
    lo, hi = _check_range(T_range, tol)
    if lo < T_min:
        raise ValueError("T_range must start at or above T_min")
    if mode == "lifted":
        test = lambda T: clockcond.lifted_quadratic_stability(sys, T_min, T, grid_n=grid_n, opts=opts)
        settings = {"mode": mode, "grid_n": int(grid_n)}
    elif mode == "exact":
        test = lambda T: clockcond.exact_ranged_dt(sys, T_min, T, grid_n=grid_n, eps=eps, opts=opts)
        settings = {"mode": mode, "grid_n": int(grid_n)}
    elif mode == "pwl":
        test = lambda T: clockcond.pwl_ranged_dt(sys, T_min, T, N=N, eps=eps, opts=opts)
        settings = {"mode": mode, "N": int(N)}
    else:
        raise ValueError(f"unknown mode {mode!r}")
    settings.update(tol=tol, T_min=T_min, T_range=[lo, hi], eps=eps)
    if not test(lo):
        return SearchResult(None, (lo, lo), 1, [], f"{mode}-bisection", [], settings)
    if test(hi):
        return SearchResult(hi, (hi, hi), 2, [(lo, hi)], f"{mode}-bisection", [], settings)
    a, b, evals = _bisect_feasible(test, lo, hi, tol, feasible_above=False)
    return SearchResult(0.5 * (a + b), (a, b), evals + 2, [(lo, a)], f"{mode}-bisection", [], settings)


def decay_rate(sys: ImpulsiveSystem, T: float) -> float:
    """Exponential mean-square decay rate ``-ln(rho(M(T))) / (2 T)``."""
    rho = spectral_radius(monodromy(sys, T))
    if rho > 1.0:
        raise SearchError("unstable", f"not mean-square stable at T = {T}: rho = {rho:.6g}")
    if rho == 0.0:
        return float("inf")
    return max(0.0, -np.log(rho) / (2.0 * T))


def smallest_pwl_constant_dt(sys: ImpulsiveSystem, N: int = clockcond.DEFAULT_N, tol: float = 1e-3,
                             lower: float | None = None, eps=None, opts=None) -> SearchResult:
    """Smallest constant dwell-time certified by the piecewise-linear test.

    A feasible certificate implies ``rho(M(T)) < 1``, so the spectral
    threshold is a valid lower end.  The upper end grows geometrically
    until the certificate holds.
    """
    ensure_valid(sys)
    if lower is None:
        lower = smallest_constant_dt(sys, tol=min(tol, DEFAULT_TOL)).bracket[0]
    test = lambda T: clockcond.pwl_constant_dt(sys, T, N=N, eps=eps, opts=opts)
    a, step, evals = float(lower), 0.02 * float(lower), 0
    b = a + step
    while True:
        evals += 1
        if test(b):
            break
        a, step = b, 2.0 * step
        b = a + step
        if step > 1e3 * max(lower, 1.0):
            raise SearchError("no certificate in range", f"no piecewise-linear certificate up to T = {b}")
    a, b, n = _bisect_feasible(test, a, b, tol, feasible_above=True)
    return SearchResult(0.5 * (a + b), (a, b), evals + n, [], "pwl-bisection", [],
                        {"N": int(N), "tol": tol, "lower": float(lower), "eps": eps})
