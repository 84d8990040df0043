"""System descriptions and the embeddings into impulsive form.

An :class:`ImpulsiveSystem` is the stochastic linear impulsive system

    dx = (A x + Bc1 uc) dt + sum_i Ec_i x dW_i + Bc2 uc dW',     t != t_k
    x(t_k+) = J x + Bd1 ud + Ed x nu1 + Bd2 ud nu2

with independent scalar Wiener processes and i.i.d. zero-mean unit-variance
jump noises.  Several flow diffusion channels are allowed so that the
sampled-data embedding (two channels) uses the same type.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .matalg import LinAlgError

__all__ = [
    "ImpulsiveSystem",
    "MultiJumpImpulsiveSystem",
    "SwitchedSystem",
    "SampledDataSystem",
    "Constant",
    "Ranged",
    "Minimum",
    "DwellTimeSpec",
    "ValidationError",
    "validate",
    "switched_to_impulsive",
    "sampled_data_to_impulsive",
]


class ValidationError(ValueError):
    """Raised when a system fails validation; ``errors`` lists (field, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.errors))


def _channels(E_c) -> list:
    if isinstance(E_c, np.ndarray):
        return [E_c] if E_c.ndim <= 2 else list(E_c)
    if isinstance(E_c, (list, tuple)):
        if len(E_c) == 0:
            return []
        if np.ndim(E_c[0]) == 2:
            return list(E_c)
    return [E_c]


def _arr(x) -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    return a


@dataclass(frozen=True, eq=False)
class ImpulsiveSystem:
    A: np.ndarray
    E_c: tuple
    B_c1: np.ndarray
    B_c2: np.ndarray
    J: np.ndarray
    E_d: np.ndarray
    B_d1: np.ndarray
    B_d2: np.ndarray

    @classmethod
    def build(cls, A, J, E_c=None, E_d=None, B_c1=None, B_c2=None, B_d1=None, B_d2=None):
        """Convenience constructor; missing matrices default to zeros.

        ``E_c`` may be a single matrix or a list of matrices (one per channel).
        Input matrices default to ``n x 0`` (no input) unless a partner matrix
        fixes the input dimension.
        """
        A = _arr(A)
        n = A.shape[0]
        E_c = [np.zeros((n, n))] if E_c is None else _channels(E_c)
        E_d = np.zeros((n, n)) if E_d is None else E_d

        def inputs(b1, b2):
            if b1 is None and b2 is None:
                return np.zeros((n, 0)), np.zeros((n, 0))
            if b1 is None:
                b2 = _arr(b2)
                return np.zeros_like(b2), b2
            b1 = _arr(b1)
            return b1, (np.zeros_like(b1) if b2 is None else _arr(b2))

        B_c1, B_c2 = inputs(B_c1, B_c2)
        B_d1, B_d2 = inputs(B_d1, B_d2)
        return cls(A, tuple(_arr(e) for e in E_c), B_c1, B_c2, _arr(J), _arr(E_d), B_d1, B_d2)

    def __post_init__(self):
        for name in ("A", "B_c1", "B_c2", "J", "E_d", "B_d1", "B_d2"):
            object.__setattr__(self, name, _arr(getattr(self, name)))
        object.__setattr__(self, "E_c", tuple(_arr(e) for e in self.E_c))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m_c(self) -> int:
        return self.B_c1.shape[1]

    @property
    def m_d(self) -> int:
        return self.B_d1.shape[1]

    def with_flow_noise(self, *E_c) -> "ImpulsiveSystem":
        return ImpulsiveSystem(self.A, tuple(E_c), self.B_c1, self.B_c2, self.J, self.E_d, self.B_d1, self.B_d2)

    def open_loop(self) -> "ImpulsiveSystem":
        """Copy with every input matrix removed."""
        n = self.n
        z = np.zeros((n, 0))
        return ImpulsiveSystem(self.A, self.E_c, z, z, self.J, self.E_d, z, z)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "E_c": [e.tolist() for e in self.E_c],
            "B_c1": self.B_c1.tolist(),
            "B_c2": self.B_c2.tolist(),
            "J": self.J.tolist(),
            "E_d": self.E_d.tolist(),
            "B_d1": self.B_d1.tolist(),
            "B_d2": self.B_d2.tolist(),
        }


@dataclass(frozen=True, eq=False)
class MultiJumpImpulsiveSystem:
    """Impulsive system whose reset may be any of several jump maps."""

    A: np.ndarray
    E_c: tuple
    jumps: tuple  # of (J_k, E_d_k)

    def branch(self, k: int) -> ImpulsiveSystem:
        J, E_d = self.jumps[k]
        return ImpulsiveSystem.build(self.A, J, E_c=list(self.E_c), E_d=E_d)


@dataclass(frozen=True, eq=False)
class SwitchedSystem:
    """Modes ``(G_i, H_i)`` of ``dy = G_s y dt + H_s y dW``."""

    modes: tuple

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple((_arr(G), _arr(H)) for G, H in self.modes))

    @property
    def n(self) -> int:
        return self.modes[0][0].shape[0]


@dataclass(frozen=True, eq=False)
class SampledDataSystem:
    A_sd: np.ndarray
    B_sd: np.ndarray
    E_sd: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        for name in ("A_sd", "B_sd", "E_sd"):
            object.__setattr__(self, name, _arr(getattr(self, name)))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def n(self) -> int:
        return self.A_sd.shape[0]

    @property
    def m(self) -> int:
        return self.B_sd.shape[1]


@dataclass(frozen=True)
class Constant:
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"constant dwell-time must be positive, got {self.T}")


@dataclass(frozen=True)
class Ranged:
    T_min: float
    T_max: float

    def __post_init__(self):
        if not (0 < self.T_min <= self.T_max):
            raise ValueError(f"need 0 < T_min <= T_max, got ({self.T_min}, {self.T_max})")


@dataclass(frozen=True)
class Minimum:
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"minimum dwell-time must be positive, got {self.T}")


DwellTimeSpec = Union[Constant, Ranged, Minimum]


def dwell_to_dict(spec: DwellTimeSpec) -> dict:
    if isinstance(spec, Ranged):
        return {"kind": "ranged", "T_min": spec.T_min, "T_max": spec.T_max}
    return {"kind": type(spec).__name__.lower(), "T": spec.T}


def _check_shape(errors, name, m, shape):
    if m.ndim != 2 or m.shape != shape:
        errors.append((name, f"expected shape {shape}, got {m.shape}"))
    elif not np.all(np.isfinite(m)):
        errors.append((name, "non-finite entries"))


def validate(sys) -> list:
    """Check dimensional invariants.

    Returns a list of ``(field, message)`` pairs; an empty list means the
    system is valid.  Never raises for malformed data.
    """
    errors: list = []
    if isinstance(sys, ImpulsiveSystem):
        A = sys.A
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            return [("A", f"expected a square matrix, got shape {A.shape}")]
        n = A.shape[0]
        _check_shape(errors, "A", A, (n, n))
        if len(sys.E_c) == 0:
            errors.append(("E_c", "at least one diffusion matrix is required (use zeros for none)"))
        for i, e in enumerate(sys.E_c):
            _check_shape(errors, f"E_c[{i}]", e, (n, n))
        _check_shape(errors, "J", sys.J, (n, n))
        _check_shape(errors, "E_d", sys.E_d, (n, n))
        m_c = sys.B_c1.shape[1] if sys.B_c1.ndim == 2 else -1
        m_d = sys.B_d1.shape[1] if sys.B_d1.ndim == 2 else -1
        _check_shape(errors, "B_c1", sys.B_c1, (n, m_c))
        _check_shape(errors, "B_c2", sys.B_c2, (n, m_c))
        _check_shape(errors, "B_d1", sys.B_d1, (n, m_d))
        _check_shape(errors, "B_d2", sys.B_d2, (n, m_d))
    elif isinstance(sys, SwitchedSystem):
        if len(sys.modes) < 2:
            errors.append(("modes", "a switched system needs at least two modes"))
        if sys.modes:
            n = sys.modes[0][0].shape[0]
            for i, (G, H) in enumerate(sys.modes):
                _check_shape(errors, f"modes[{i}].G", G, (n, n))
                _check_shape(errors, f"modes[{i}].H", H, (n, n))
    elif isinstance(sys, SampledDataSystem):
        n = sys.A_sd.shape[0]
        _check_shape(errors, "A_sd", sys.A_sd, (n, n))
        _check_shape(errors, "B_sd", sys.B_sd, (n, sys.B_sd.shape[1] if sys.B_sd.ndim == 2 else -1))
        _check_shape(errors, "E_sd", sys.E_sd, (n, n))
        if not (np.isfinite(sys.alpha) and sys.alpha >= 0):
            errors.append(("alpha", "must be a finite nonnegative number"))
    elif isinstance(sys, MultiJumpImpulsiveSystem):
        n = sys.A.shape[0]
        _check_shape(errors, "A", sys.A, (n, n))
        if not sys.jumps:
            errors.append(("jumps", "at least one jump map is required"))
        for k, (J, E_d) in enumerate(sys.jumps):
            _check_shape(errors, f"jumps[{k}].J", J, (n, n))
            _check_shape(errors, f"jumps[{k}].E_d", E_d, (n, n))
    else:
        errors.append(("system", f"unsupported system type {type(sys).__name__}"))
    return errors


def ensure_valid(sys) -> None:
    errors = validate(sys)
    if errors:
        raise ValidationError(errors)


def _blockdiag(mats) -> np.ndarray:
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n))
    k = 0
    for m in mats:
        d = m.shape[0]
        out[k:k + d, k:k + d] = m
        k += d
    return out


def switched_to_impulsive(sw: SwitchedSystem) -> MultiJumpImpulsiveSystem:
    """Embed a switched system as an impulsive system with reset maps.

    The state is the stack of per-mode copies; ``J_ij = (e_i e_j^T) (x) I_n``
    moves the active copy from block ``j`` to block ``i``.  Jumps are ordered
    lexicographically in ``(i, j)``, ``i != j``.
    """
    ensure_valid(sw)
    N, n = len(sw.modes), sw.n
    A = _blockdiag([G for G, _ in sw.modes])
    E = _blockdiag([H for _, H in sw.modes])
    jumps = []
    for i in range(N):
        for j in range(N):
            if i != j:
                eij = np.zeros((N, N))
                eij[i, j] = 1.0
                jumps.append((np.kron(eij, np.eye(n)), np.zeros((N * n, N * n))))
    return MultiJumpImpulsiveSystem(A, (E,), tuple(jumps))


def sampled_data_to_impulsive(sd: SampledDataSystem, K_d=None) -> ImpulsiveSystem:
    """Zero-order-hold embedding on the augmented state ``(x, u)``."""
    ensure_valid(sd)
    n, m = sd.n, sd.m
    N = n + m
    A_bar = np.zeros((N, N))
    A_bar[:n, :n] = sd.A_sd
    A_bar[:n, n:] = sd.B_sd
    E1 = np.zeros((N, N))
    E1[:n, :n] = sd.E_sd
    E2 = np.zeros((N, N))
    E2[:n, n:] = sd.alpha * sd.B_sd
    J0 = np.zeros((N, N))
    J0[:n, :n] = np.eye(n)
    B_bar = np.zeros((N, m))
    B_bar[n:, :] = np.eye(m)
    J = J0
    if K_d is not None:
        K_d = _arr(K_d)
        if K_d.shape != (m, N):
            raise ValidationError([("K_d", f"expected shape {(m, N)}, got {K_d.shape}")])
        J = J0 + B_bar @ K_d
    z = np.zeros((N, 0))
    return ImpulsiveSystem(A_bar, (E1, E2), z, z, J, np.zeros((N, N)), B_bar, np.zeros((N, m)))
