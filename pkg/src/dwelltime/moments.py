"""Exact second-moment dynamics of the impulsive system.

Conventions.  ``vec`` stacks columns.  The forward second moment
``X = E[x x^T]`` obeys ``vec(X)' = gen @ vec(X)`` along the flow and
``vec(X+) = jump @ vec(X)`` at impulses, with

    gen  = A (+) A + sum_i Ec_i (x) Ec_i
    jump = J (x) J + Ed (x) Ed.

The quadratic-form expectation ``E[Phi(t)^T Z Phi(t)]`` is the adjoint:
``vec(.) = expm(gen^T t) @ vec(Z)``.  The one-period map is
``monodromy(T) = expm(gen T) @ jump``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import matalg
from .matalg import LinAlgError, expm, kron_sum, symmetrize, unvec, vec
from .model import ImpulsiveSystem, ensure_valid

__all__ = [
    "LiftedPair",
    "MomentFlow",
    "ConstantDtVerdict",
    "lift",
    "lifted_generator",
    "lifted_jump",
    "monodromy",
    "constant_dt_stable",
    "propagate_xi",
    "closed_loop_generator",
    "closed_loop_jump",
    "closed_loop_flow",
    "closed_loop_monodromy",
    "default_steps",
    "forward_transition",
]


@dataclass(frozen=True, eq=False)
class LiftedPair:
    gen: np.ndarray
    jump: np.ndarray


@dataclass(frozen=True, eq=False)
class MomentFlow:
    """Linear map ``vec(P) -> vec(E[Phi(theta)^T P Phi(theta)])`` over one flow interval."""

    map: np.ndarray
    theta: float
    steps: int

    def apply(self, P) -> np.ndarray:
        n = int(round(math.sqrt(self.map.shape[0])))
        return symmetrize(unvec(self.map @ vec(P), n, n))


@dataclass(frozen=True)
class ConstantDtVerdict:
    stable: bool
    rho: float


def lifted_generator(A, E_list) -> np.ndarray:
    gen = kron_sum(A, A)
    for E in E_list:
        gen = gen + np.kron(E, E)
    return gen


def lifted_jump(J, E_list) -> np.ndarray:
    out = np.kron(J, J)
    for E in E_list:
        out = out + np.kron(E, E)
    return out


def lift(sys: ImpulsiveSystem) -> LiftedPair:
    ensure_valid(sys)
    return LiftedPair(lifted_generator(sys.A, sys.E_c), lifted_jump(sys.J, [sys.E_d]))


def monodromy(sys: ImpulsiveSystem, T: float) -> np.ndarray:
    if not T > 0:
        raise ValueError(f"dwell-time must be positive, got {T}")
    lp = lift(sys)
    return expm(lp.gen * T) @ lp.jump


def constant_dt_stable(sys: ImpulsiveSystem, T: float) -> ConstantDtVerdict:
    rho = matalg.spectral_radius(monodromy(sys, T))
    return ConstantDtVerdict(stable=bool(rho < 1.0), rho=rho)


def propagate_xi(sys: ImpulsiveSystem, Z, t: float) -> np.ndarray:
    """``E[Phi(t)^T Z Phi(t)]`` for the open-loop flow."""
    Z = matalg.as_matrix(Z, "Z")
    n = sys.n
    if Z.shape != (n, n):
        raise LinAlgError(f"Z must be {n}x{n}, got {Z.shape}")
    if np.max(np.abs(Z - Z.T)) > 1e-12 * max(1.0, np.linalg.norm(Z)):
        raise LinAlgError("Z must be symmetric")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return symmetrize(Z)
    gen = lift(sys).gen
    return symmetrize(unvec(expm(gen.T * t) @ vec(Z), n, n))


def closed_loop_generator(sys: ImpulsiveSystem, K_c) -> np.ndarray:
    """Lifted generator of the flow under ``u_c = K_c x``."""
    Acl = sys.A + sys.B_c1 @ K_c
    BK = sys.B_c2 @ K_c
    return lifted_generator(Acl, list(sys.E_c) + [BK])


def closed_loop_jump(sys: ImpulsiveSystem, K_d) -> np.ndarray:
    Jcl = sys.J + sys.B_d1 @ K_d
    return lifted_jump(Jcl, [sys.E_d, sys.B_d2 @ K_d])


def default_steps(theta: float) -> int:
    return max(200, int(math.ceil(theta / 0.005)))


def _zero_gain(sys):
    return np.zeros((sys.m_c, sys.n))


def _stiff_steps(sys, gains, tau0, tau1) -> int:
    """Steps keeping ``h * ||generator||`` at most 1 (RK4 is stable up to ~2.8)."""
    knots = np.asarray(getattr(gains, "S_tilde", None).knots) if hasattr(gains, "S_tilde") else np.array([])
    taus = np.concatenate([[tau0, tau1], knots[(knots > tau0) & (knots < tau1)]])
    scale = max(np.linalg.norm(closed_loop_generator(sys, gains.K_c(t)), 2) for t in taus)
    return int(math.ceil((tau1 - tau0) * scale))


def forward_transition(sys: ImpulsiveSystem, gains, tau0: float, tau1: float, steps: int | None = None) -> np.ndarray:
    """Transition of ``vec(E[x x^T])`` along the closed-loop flow for clock ``tau0 -> tau1``.

    Uses the matrix exponential when the gain is absent or clock-independent
    on the window (beyond the gain horizon), otherwise classical RK4.  The
    default step count also grows with the generator norm so that large
    gains do not make the explicit scheme unstable.
    """
    theta = tau1 - tau0
    if theta < 0:
        raise ValueError("tau1 must not precede tau0")
    if theta == 0:
        return np.eye(sys.n ** 2)
    if gains is None or sys.m_c == 0:
        return expm(closed_loop_generator(sys, _zero_gain(sys)) * theta)
    H = gains.horizon
    if tau0 >= H:
        return expm(closed_loop_generator(sys, gains.K_c(H)) * theta)
    tail = None
    if tau1 > H:
        tail = expm(closed_loop_generator(sys, gains.K_c(H)) * (tau1 - H))
        tau1 = H
    span = tau1 - tau0
    if steps is None:
        steps = max(default_steps(span), _stiff_steps(sys, gains, tau0, tau1))
    else:
        steps = max(1, int(math.ceil(int(steps) * span / theta)))
    n2 = sys.n ** 2
    h = span / steps
    Phi = np.eye(n2)

    def F(tau):
        return closed_loop_generator(sys, gains.K_c(tau))

    G1 = F(tau0)
    for k in range(steps):
        t = tau0 + k * h
        G0, Gm, G1 = G1, F(t + 0.5 * h), F(t + h)
        k1 = G0 @ Phi
        k2 = Gm @ (Phi + 0.5 * h * k1)
        k3 = Gm @ (Phi + 0.5 * h * k2)
        k4 = G1 @ (Phi + h * k3)
        Phi = Phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Phi if tail is None else tail @ Phi


def closed_loop_flow(sys: ImpulsiveSystem, gains, theta: float, steps: int | None = None) -> MomentFlow:
    """Expectation map of the clock-dependent closed-loop flow over ``[0, theta]``.

    ``gains`` needs a ``K_c(tau)`` method (clamped beyond its horizon) or may be
    ``None`` for the open loop.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    ensure_valid(sys)
    steps = default_steps(theta) if steps is None else int(steps)
    Phi = forward_transition(sys, gains, 0.0, theta, steps)
    return MomentFlow(map=Phi.T, theta=float(theta), steps=steps)


def closed_loop_monodromy(sys: ImpulsiveSystem, gains, theta: float, steps: int | None = None) -> np.ndarray:
    """Flow-then-jump second-moment map; reduces to :func:`monodromy` for zero gains."""
    flow = closed_loop_flow(sys, gains, theta, steps)
    K_d = np.zeros((sys.m_d, sys.n)) if gains is None or sys.m_d == 0 else gains.K_d
    return flow.map.T @ closed_loop_jump(sys, K_d)
