"""Finite LMI tests for mean-square stability under dwell-time constraints.

Two families:

* exact tests in a single matrix ``P``, where the expectation of the
  propagated quadratic form enters through the lifted flow map
  (``exact_*`` and :func:`lifted_quadratic_stability`), and
* clock-dependent tests in which ``S(tau)`` is piecewise linear on a grid
  (``pwl_*`` and :func:`switched_min_dt`).  Within a segment every flow
  condition is affine in ``tau``, so imposing it at both segment endpoints
  is exact for the piecewise-linear class.

Constant and ranged tests use the backward clock form (``-dS/dtau``, jump
``J^T S(theta) J - S(0)``); minimum dwell-time tests use the forward form
(``+dS/dtau``, jump ``J^T S(0) J - S(T)``) so that ``S`` can be frozen after
``T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .matalg import expm
from .model import (
    Constant,
    DwellTimeSpec,
    ImpulsiveSystem,
    Minimum,
    Ranged,
    SwitchedSystem,
    dwell_to_dict,
    ensure_valid,
)
from .moments import lift
from .pwl import PwlMatrixFunction, aligned_knots, uniform_knots
from .sdp import BlockBuilder, LmiBlock, LmiTerm, LmiVar, SolveOptions, solve

__all__ = [
    "StabilityCertificate",
    "default_eps",
    "exact_constant_dt",
    "pwl_constant_dt",
    "exact_ranged_dt",
    "pwl_ranged_dt",
    "exact_minimum_dt",
    "pwl_minimum_dt",
    "switched_min_dt",
    "lifted_quadratic_stability",
    "PwlMatrixFunction",
]

DEFAULT_N = 100
DEFAULT_GRID = 201


@dataclass(eq=False)
class StabilityCertificate:
    kind: str  # "exact" | "pwl" | "lifted-quadratic"
    dwell: DwellTimeSpec
    verdict: bool
    margin: float
    witness: Any
    residuals: list
    gridded: bool = False
    settings: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.verdict

    def to_dict(self) -> dict:
        w = self.witness
        if isinstance(w, PwlMatrixFunction):
            wd = w.to_dict()
        elif isinstance(w, dict):
            wd = {k: (v.to_dict() if isinstance(v, PwlMatrixFunction) else np.asarray(v).tolist()) for k, v in w.items()}
        else:
            wd = np.asarray(w).tolist()
        return {
            "kind": self.kind,
            "dwell": dwell_to_dict(self.dwell),
            "verdict": self.verdict,
            "margin": self.margin,
            "residuals": [float(r) for r in self.residuals],
            "caveats": ["gridded"] if self.gridded else [],
            "settings": self.settings,
            "witness": wd,
        }


def default_eps(sys: ImpulsiveSystem) -> float:
    scale = max(1.0, np.linalg.norm(sys.A), np.linalg.norm(sys.J))
    return 1e-6 * scale


def _eps(sys, eps):
    return default_eps(sys) if eps is None else float(eps)


def _positive(var: str, n: int) -> LmiBlock:
    return BlockBuilder([n], name=f"{var} > 0").add(var, 0, 0, -np.eye(n), np.eye(n)).build()


def _lyap_into(bb: BlockBuilder, var: str, A, E_list, i: int = 0, coef: float = 1.0):
    """Add ``coef * (A^T S + S A + sum E^T S E)`` at diagonal sub-block ``i``."""
    n = A.shape[0]
    bb.add(var, i, i, coef * np.eye(n), A, he=True)
    for E in E_list:
        bb.add(var, i, i, coef * E.T, E)
    return bb


def _jump_op(sys: ImpulsiveSystem, theta: float) -> np.ndarray:
    """Matrix of ``vec(P) -> vec(E[J^T Xi_P(theta) J + Ed^T Xi_P(theta) Ed])``."""
    lp = lift(sys)
    return lp.jump.T @ expm(lp.gen.T * theta)


def _exact_jump_block(sys, theta, eps, var="P") -> LmiBlock:
    n = sys.n
    blk = LmiBlock(n, eps * np.eye(n), [LmiTerm(var, op=_jump_op(sys, theta), out_dim=n),
                                        LmiTerm(var, -np.eye(n), np.eye(n))], name=f"jump@{theta:.6g}")
    return blk


def _certificate(kind, dwell, verdict, witness, gridded=False, **settings) -> StabilityCertificate:
    return StabilityCertificate(kind, dwell, verdict.feasible, verdict.margin, witness, verdict.residuals,
                                gridded, settings)


def exact_constant_dt(sys: ImpulsiveSystem, T: float, eps=None, opts: SolveOptions | None = None):
    """One-matrix LMI equivalent to mean-square stability at constant dwell-time ``T``."""
    ensure_valid(sys)
    dwell = Constant(T)
    e = _eps(sys, eps)
    blocks = [_exact_jump_block(sys, T, e), _positive("P", sys.n)]
    v = solve(blocks, [LmiVar("P", sys.n)], anchor="P", opts=opts)
    return _certificate("exact", dwell, v, v.witness["P"], eps=e)


def _node_vars(prefix, n, count):
    return [LmiVar(f"{prefix}{k}", n) for k in range(count)]


def _flow_blocks(sys, knots, prefix, forward: bool):
    """Endpoint flow conditions ``(+/-)dS + L(S) <= 0`` on every segment."""
    n = sys.n
    blocks = []
    sgn = 1.0 if forward else -1.0
    for i in range(len(knots) - 1):
        h = knots[i + 1] - knots[i]
        for end in (i, i + 1):
            bb = BlockBuilder([n], name=f"flow[{i}]@{end}")
            bb.add(f"{prefix}{i + 1}", 0, 0, sgn / h * np.eye(n), np.eye(n))
            bb.add(f"{prefix}{i}", 0, 0, -sgn / h * np.eye(n), np.eye(n))
            _lyap_into(bb, f"{prefix}{end}", sys.A, sys.E_c)
            blocks.append(bb.build())
    return blocks


def _pwl_jump_block(sys, pre: str, post: str, eps) -> LmiBlock:
    """``J^T S_pre J + Ed^T S_pre Ed - S_post + eps I <= 0``."""
    n = sys.n
    bb = BlockBuilder([n], name=f"jump {pre}->{post}")
    bb.add(pre, 0, 0, sys.J.T, sys.J)
    bb.add(pre, 0, 0, sys.E_d.T, sys.E_d)
    bb.add(post, 0, 0, -np.eye(n), np.eye(n))
    bb.const(0, 0, eps * np.eye(n))
    return bb.build()


def _pwl_witness(witness, prefix, knots):
    return PwlMatrixFunction(knots, np.stack([witness[f"{prefix}{k}"] for k in range(len(knots))]))


def pwl_constant_dt(sys: ImpulsiveSystem, T: float, N: int = DEFAULT_N, eps=None,
                    opts: SolveOptions | None = None):
    """Piecewise-linear clock-dependent test at constant dwell-time ``T``."""
    ensure_valid(sys)
    dwell = Constant(T)
    knots = uniform_knots(T, N)
    e = _eps(sys, eps)
    blocks = _flow_blocks(sys, knots, "S", forward=False)
    blocks.append(_pwl_jump_block(sys, f"S{N}", "S0", e))
    blocks.append(_positive("S0", sys.n))
    v = solve(blocks, _node_vars("S", sys.n, N + 1), anchor="S0", opts=opts)
    return _certificate("pwl", dwell, v, _pwl_witness(v.witness, "S", knots), N=N, eps=e)


def exact_ranged_dt(sys: ImpulsiveSystem, T_min: float, T_max: float, grid_n: int = DEFAULT_GRID, eps=None,
                    opts: SolveOptions | None = None):
    """Common ``P`` for the exact jump condition on a ``theta`` grid (grid-sufficient only)."""
    ensure_valid(sys)
    dwell = Ranged(T_min, T_max)
    e = _eps(sys, eps)
    thetas = [T_min] if T_min == T_max else np.linspace(T_min, T_max, int(grid_n))
    blocks = [_exact_jump_block(sys, th, e) for th in thetas]
    blocks.append(_positive("P", sys.n))
    v = solve(blocks, [LmiVar("P", sys.n)], anchor="P", opts=opts)
    return _certificate("exact", dwell, v, v.witness["P"], gridded=T_min != T_max, grid_n=int(grid_n), eps=e)


def pwl_ranged_dt(sys: ImpulsiveSystem, T_min: float, T_max: float, N: int = DEFAULT_N, eps=None,
                  opts: SolveOptions | None = None):
    """Piecewise-linear test for every dwell-time in ``[T_min, T_max]``."""
    ensure_valid(sys)
    dwell = Ranged(T_min, T_max)
    knots = aligned_knots(T_min, T_max, N)
    M = len(knots) - 1
    e = _eps(sys, eps)
    blocks = _flow_blocks(sys, knots, "S", forward=False)
    lo = T_min * (1 - 1e-12)
    for k, th in enumerate(knots):
        if th >= lo:
            blocks.append(_pwl_jump_block(sys, f"S{k}", "S0", e))
    blocks.append(_positive("S0", sys.n))
    v = solve(blocks, _node_vars("S", sys.n, M + 1), anchor="S0", opts=opts)
    return _certificate("pwl", dwell, v, _pwl_witness(v.witness, "S", knots), N=M, eps=e)


def _stationary_block(sys, var) -> LmiBlock:
    bb = BlockBuilder([sys.n], name=f"stationary {var}")
    return _lyap_into(bb, var, sys.A, sys.E_c).build()


def exact_minimum_dt(sys: ImpulsiveSystem, T: float, eps=None, opts: SolveOptions | None = None):
    """Exact jump condition at ``T`` plus a mean-square Lyapunov condition on the flow."""
    ensure_valid(sys)
    dwell = Minimum(T)
    e = _eps(sys, eps)
    blocks = [_exact_jump_block(sys, T, e), _stationary_block(sys, "P"), _positive("P", sys.n)]
    v = solve(blocks, [LmiVar("P", sys.n)], anchor="P", opts=opts)
    return _certificate("exact", dwell, v, v.witness["P"], eps=e)


def pwl_minimum_dt(sys: ImpulsiveSystem, T: float, N: int = DEFAULT_N, eps=None,
                   opts: SolveOptions | None = None):
    """Forward-clock piecewise-linear test under minimum dwell-time ``T``."""
    ensure_valid(sys)
    dwell = Minimum(T)
    knots = uniform_knots(T, N)
    e = _eps(sys, eps)
    blocks = _flow_blocks(sys, knots, "S", forward=True)
    blocks.append(_stationary_block(sys, f"S{N}"))
    blocks.append(_pwl_jump_block(sys, "S0", f"S{N}", e))
    blocks.append(_positive(f"S{N}", sys.n))
    v = solve(blocks, _node_vars("S", sys.n, N + 1), anchor=f"S{N}", opts=opts)
    return _certificate("pwl", dwell, v, _pwl_witness(v.witness, "S", knots), N=N, eps=e)


def switched_min_dt(sw: SwitchedSystem, T: float, N: int = 10, eps=None, opts: SolveOptions | None = None):
    """Per-mode clock-dependent conditions for a switched system under minimum dwell-time.

    Works with one piecewise-linear ``R_i`` per mode instead of the
    block-diagonal lifting of the whole switched system.
    """
    ensure_valid(sw)
    dwell = Minimum(T)
    n = sw.n
    knots = uniform_knots(T, N)
    scale = max([1.0] + [np.linalg.norm(G) for G, _ in sw.modes])
    e = 1e-6 * scale if eps is None else float(eps)
    blocks, variables = [], []
    for i, (G, H) in enumerate(sw.modes):
        prefix = f"R{i}_"
        variables += _node_vars(prefix, n, N + 1)
        mode = ImpulsiveSystem.build(G, np.eye(n), E_c=H)
        blocks += _flow_blocks(mode, knots, prefix, forward=True)
        blocks.append(_stationary_block(mode, f"{prefix}{N}"))
        blocks.append(_positive(f"{prefix}{N}", n))
    for i in range(len(sw.modes)):
        for j in range(len(sw.modes)):
            if i != j:
                bb = BlockBuilder([n], name=f"switch {j}->{i}")
                bb.add(f"R{i}_0", 0, 0, np.eye(n), np.eye(n))
                bb.add(f"R{j}_{N}", 0, 0, -np.eye(n), np.eye(n))
                bb.const(0, 0, e * np.eye(n))
                blocks.append(bb.build())
    v = solve(blocks, variables, anchor=f"R0_{N}", opts=opts)
    witness = {f"R{i}": _pwl_witness(v.witness, f"R{i}_", knots) for i in range(len(sw.modes))}
    return _certificate("pwl", dwell, v, witness, N=N, eps=e)


def lifted_quadratic_stability(sys: ImpulsiveSystem, T_min: float, T_max: float, grid_n: int = DEFAULT_GRID,
                               opts: SolveOptions | None = None):
    """Common quadratic Lyapunov matrix for the monodromy maps on a ``theta`` grid."""
    ensure_valid(sys)
    dwell = Ranged(T_min, T_max)
    lp = lift(sys)
    d = lp.gen.shape[0]
    thetas = [T_min] if T_min == T_max else np.linspace(T_min, T_max, int(grid_n))
    blocks = []
    for th in thetas:
        M = expm(lp.gen * th) @ lp.jump
        bb = BlockBuilder([d], name=f"stein@{th:.6g}")
        bb.add("P", 0, 0, M.T, M).add("P", 0, 0, -np.eye(d), np.eye(d))
        blocks.append(bb.build())
    blocks.append(_positive("P", d))
    v = solve(blocks, [LmiVar("P", d)], anchor="P", opts=opts)
    return _certificate("lifted-quadratic", dwell, v, v.witness["P"], gridded=T_min != T_max, grid_n=int(grid_n))
