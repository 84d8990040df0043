"""State-feedback synthesis under ranged and minimum dwell-time.

The closed loop uses ``u_c(t_k + tau) = K_c(tau) x`` and ``u_d = K_d x``.
Programs are written in ``S~ = S^{-1}`` and ``U = K S~`` so that they stay
linear; gains are recovered as ``K_c(tau) = U_c(tau) S~(tau)^{-1}`` and every
result is re-checked on the exact closed-loop second-moment map.

Ranged dwell-time uses the backward clock form (``S~(0)`` is the post-jump
matrix, ``K_d = U_d S~(0)^{-1}``).  Minimum dwell-time uses the forward
form with ``S~`` frozen after ``T``; there the pre-jump matrix is ``S~(T)``
and ``K_d = U_d S~(T)^{-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matalg
from .clockcond import default_eps
from .matalg import LinAlgError
from .model import ImpulsiveSystem, SampledDataSystem, ensure_valid, sampled_data_to_impulsive
from .moments import closed_loop_monodromy
from .pwl import PwlMatrixFunction, aligned_knots, uniform_knots
from .sdp import BlockBuilder, LmiVar, SolveOptions, solve

__all__ = [
    "ControllerGains",
    "SynthesisResult",
    "eval_gain",
    "ranged_sf",
    "min_dt_sf",
    "sampled_data_sf",
]

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class ControllerGains:
    """Clock-dependent continuous gain stored as factors, plus a discrete gain."""

    U_c: PwlMatrixFunction | None
    S_tilde: PwlMatrixFunction
    K_d: np.ndarray
    m_c: int = 0

    @classmethod
    def constant(cls, K_c, K_d, horizon: float = 1.0) -> "ControllerGains":
        K_c = np.atleast_2d(np.asarray(K_c, dtype=float))
        K_d = np.atleast_2d(np.asarray(K_d, dtype=float))
        n = K_c.shape[1] if K_c.size else K_d.shape[1]
        U = PwlMatrixFunction.constant(K_c, horizon) if K_c.size else None
        return cls(U, PwlMatrixFunction.constant(np.eye(n), horizon), K_d, K_c.shape[0] if K_c.size else 0)

    @property
    def horizon(self) -> float:
        return self.S_tilde.horizon

    @property
    def n(self) -> int:
        return self.S_tilde.nodes.shape[1]

    def K_c(self, tau: float) -> np.ndarray:
        return eval_gain(self, tau)

    def to_dict(self) -> dict:
        knots = self.S_tilde.knots
        return {
            "knots": knots.tolist(),
            "S_tilde": self.S_tilde.nodes.tolist(),
            "U_c": None if self.U_c is None else self.U_c.nodes.tolist(),
            "K_d": np.asarray(self.K_d).tolist(),
            "K_c_at_knots": [eval_gain(self, t).tolist() for t in knots],
        }


def eval_gain(gains: ControllerGains, tau: float) -> np.ndarray:
    """``U_c(tau) S~(tau)^{-1}`` with ``tau`` clamped to ``[0, horizon]``."""
    if gains.U_c is None or gains.m_c == 0:
        return np.zeros((gains.m_c, gains.n))
    tau = min(max(float(tau), 0.0), gains.horizon)
    S = gains.S_tilde(tau)
    if np.linalg.cond(S) > COND_LIMIT:
        raise LinAlgError(f"S~({tau:.6g}) is numerically singular")
    U = gains.U_c(tau)
    return np.linalg.solve(S.T, U.T).T


@dataclass(eq=False)
class SynthesisResult:
    feasible: bool
    gains: ControllerGains | None
    program_margin: float
    closed_loop_rho: float
    rhos: list = field(default_factory=list)
    check_thetas: list = field(default_factory=list)
    verified: bool = False
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "verified": self.verified,
            "program_margin": self.program_margin,
            "closed_loop_rho": self.closed_loop_rho,
            "checks": [{"theta": float(t), "rho": float(r)} for t, r in zip(self.check_thetas, self.rhos)],
            "settings": self.settings,
            "gains": None if self.gains is None else self.gains.to_dict(),
        }


def _nonzero(M) -> bool:
    return M.size > 0 and np.any(M != 0)


def _flow_block(sys, bb_name, S_end, U_end, deriv, n):
    """Schur-complemented flow condition at one clock value.

    ``deriv`` is a list of ``(var, coef)`` pairs forming the derivative
    term, empty for a stationary condition.
    """
    chans = [E for E in sys.E_c if _nonzero(E)]
    has_u = U_end is not None
    noisy_u = has_u and _nonzero(sys.B_c2)
    dims = [n] * (1 + len(chans) + (1 if noisy_u else 0))
    bb = BlockBuilder(dims, name=bb_name)
    for var, coef in deriv:
        bb.add(var, 0, 0, coef * np.eye(n), np.eye(n))
    bb.add(S_end, 0, 0, sys.A, np.eye(n), he=True)
    if has_u:
        bb.add(U_end, 0, 0, sys.B_c1, np.eye(n), he=True)
    for c, E in enumerate(chans):
        bb.add(S_end, 1 + c, 0, E, np.eye(n))
        bb.add(S_end, 1 + c, 1 + c, -np.eye(n), np.eye(n))
    if noisy_u:
        k = len(dims) - 1
        bb.add(U_end, k, 0, sys.B_c2, np.eye(n))
        bb.add(S_end, k, k, -np.eye(n), np.eye(n))
    return bb.build()


def _jump_block(sys, name, S_pre, S_post, U_d, eps, n):
    """``[-S~pre + eps I, *; J S~pre + Bd1 U_d, -S~post; Ed S~pre, 0, -S~post; Bd2 U_d, 0, 0, -S~post]``."""
    has_ed = _nonzero(sys.E_d)
    noisy_u = U_d is not None and _nonzero(sys.B_d2)
    dims = [n, n] + ([n] if has_ed else []) + ([n] if noisy_u else [])
    bb = BlockBuilder(dims, name=name)
    bb.add(S_pre, 0, 0, -np.eye(n), np.eye(n))
    bb.const(0, 0, eps * np.eye(n))
    bb.add(S_pre, 1, 0, sys.J, np.eye(n))
    if U_d is not None:
        bb.add(U_d, 1, 0, sys.B_d1, np.eye(n))
    for k in range(1, len(dims)):
        bb.add(S_post, k, k, -np.eye(n), np.eye(n))
    k = 2
    if has_ed:
        bb.add(S_pre, k, 0, sys.E_d, np.eye(n))
        k += 1
    if noisy_u:
        bb.add(U_d, k, 0, sys.B_d2, np.eye(n))
    return bb.build()


def _variables(sys, count):
    n = sys.n
    vs = [LmiVar(f"S{k}", n) for k in range(count)]
    if sys.m_c > 0:
        vs += [LmiVar(f"U{k}", sys.m_c, n) for k in range(count)]
    if sys.m_d > 0:
        vs.append(LmiVar("Ud", sys.m_d, n))
    return vs


def _positive(var, n):
    return BlockBuilder([n], name=f"{var} > 0").add(var, 0, 0, -np.eye(n), np.eye(n)).build()


def _gains(sys, witness, knots, pre_jump: str) -> ControllerGains:
    n = sys.n
    S = PwlMatrixFunction(knots, np.stack([witness[f"S{k}"] for k in range(len(knots))]))
    U = None
    if sys.m_c > 0:
        U = PwlMatrixFunction(knots, np.stack([witness[f"U{k}"] for k in range(len(knots))]))
    if sys.m_d > 0:
        Spre = witness[pre_jump]
        K_d = np.linalg.solve(Spre.T, witness["Ud"].T).T
    else:
        K_d = np.zeros((0, n))
    return ControllerGains(U, S, K_d, sys.m_c)


def _verify(sys, gains, thetas, steps=None):
    rhos = []
    for th in thetas:
        M = closed_loop_monodromy(sys, gains, th, steps)
        rhos.append(matalg.spectral_radius(M))
    return rhos


def _finish(sys, v, gains, thetas, settings, steps=None):
    if not v.feasible:
        return SynthesisResult(False, None, v.margin, float("nan"), settings=settings)
    rhos = _verify(sys, gains, thetas, steps)
    rho = max(rhos)
    return SynthesisResult(True, gains, v.margin, rho, rhos, list(map(float, thetas)),
                           verified=bool(rho < 1.0 - 1e-6), settings=settings)


def ranged_sf(sys: ImpulsiveSystem, T_min: float, T_max: float, N: int = 20, eps=None,
              check_thetas=None, opts: SolveOptions | None = None) -> SynthesisResult:
    """Clock-dependent state feedback for every dwell-time in ``[T_min, T_max]``.

    The certificate is built in the backward clock form, so the gain schedule
    it proves stabilizing is indexed by the time remaining until the next
    impulse.  The returned ``K_c(tau)`` is applied with ``tau`` the time since
    the last impulse, which coincides only when ``K_c`` is constant (always
    the case when there is no continuous input).  ``verified`` reports the
    outcome of re-checking the causal closed loop and should be consulted
    before the gains are used.
    """
    ensure_valid(sys)
    if not (0 < T_min <= T_max):
        raise ValueError(f"need 0 < T_min <= T_max, got ({T_min}, {T_max})")
    n = sys.n
    e = default_eps(sys) if eps is None else float(eps)
    knots = aligned_knots(T_min, T_max, N)
    M = len(knots) - 1
    U = (lambda k: f"U{k}") if sys.m_c > 0 else (lambda k: None)
    U_d = "Ud" if sys.m_d > 0 else None
    blocks = []
    for i in range(M):
        h = knots[i + 1] - knots[i]
        deriv = [(f"S{i + 1}", 1.0 / h), (f"S{i}", -1.0 / h)]
        for end in (i, i + 1):
            blocks.append(_flow_block(sys, f"flow[{i}]@{end}", f"S{end}", U(end), deriv, n))
    lo = T_min * (1 - 1e-12)
    for k, th in enumerate(knots):
        if th >= lo:
            blocks.append(_jump_block(sys, f"jump@{th:.6g}", "S0", f"S{k}", U_d, e, n))
    blocks.append(_positive("S0", n))
    v = solve(blocks, _variables(sys, M + 1), anchor="S0", opts=opts)
    gains = _gains(sys, v.witness, knots, "S0") if v.feasible else None
    if check_thetas is None:
        check_thetas = [T_min, 0.5 * (T_min + T_max), T_max]
    settings = {"dwell": {"kind": "ranged", "T_min": T_min, "T_max": T_max}, "N": M, "eps": e}
    return _finish(sys, v, gains, check_thetas, settings)


def min_dt_sf(sys: ImpulsiveSystem, T: float, N: int = 10, eps=None, check_thetas=None,
              opts: SolveOptions | None = None) -> SynthesisResult:
    """Clock-dependent state feedback under minimum dwell-time ``T``.

    ``K_c`` is frozen at its value at ``T`` for longer dwell-times.
    """
    ensure_valid(sys)
    if not T > 0:
        raise ValueError("T must be positive")
    n = sys.n
    e = default_eps(sys) if eps is None else float(eps)
    knots = uniform_knots(T, N)
    U = (lambda k: f"U{k}") if sys.m_c > 0 else (lambda k: None)
    U_d = "Ud" if sys.m_d > 0 else None
    blocks = []
    for i in range(N):
        h = knots[i + 1] - knots[i]
        deriv = [(f"S{i + 1}", -1.0 / h), (f"S{i}", 1.0 / h)]
        for end in (i, i + 1):
            blocks.append(_flow_block(sys, f"flow[{i}]@{end}", f"S{end}", U(end), deriv, n))
    blocks.append(_flow_block(sys, "stationary", f"S{N}", U(N), [], n))
    blocks.append(_jump_block(sys, "jump", f"S{N}", "S0", U_d, e, n))
    blocks.append(_positive(f"S{N}", n))
    v = solve(blocks, _variables(sys, N + 1), anchor=f"S{N}", opts=opts)
    gains = _gains(sys, v.witness, knots, f"S{N}") if v.feasible else None
    if check_thetas is None:
        check_thetas = [T, 2 * T, 5 * T]
    settings = {"dwell": {"kind": "minimum", "T": T}, "N": N, "eps": e}
    return _finish(sys, v, gains, check_thetas, settings)


def sampled_data_sf(sd: SampledDataSystem, T_min: float, T_max: float, N: int = 20, eps=None,
                    check_n: int = 21, opts: SolveOptions | None = None) -> SynthesisResult:
    """Sampled-data gain ``K_d`` (on the state and held input) for aperiodic sampling."""
    ensure_valid(sd)
    sys = sampled_data_to_impulsive(sd)
    thetas = np.linspace(T_min, T_max, int(check_n))
    res = ranged_sf(sys, T_min, T_max, N=N, eps=eps, check_thetas=thetas, opts=opts)
    res.settings["embedding"] = "sampled-data"
    return res
