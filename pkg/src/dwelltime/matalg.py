"""Dense real linear algebra used throughout the package.

Everything here works on plain ``numpy.ndarray`` objects.  Vectorization is
column-stacking (Fortran order), so that ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.

The matrix exponential delegates to :func:`scipy.linalg.expm`, which is the
Al-Mohy & Higham scaling-and-squaring algorithm with a degree-13 Padé
approximant (scaling threshold theta_13 ~= 5.37).  The wrapper adds the
finiteness checks that scipy leaves to the caller.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "LinAlgError",
    "SpectralReport",
    "as_matrix",
    "kron",
    "kron_sum",
    "expm",
    "eig",
    "min_eig_sym",
    "symmetrize",
    "vec",
    "unvec",
]

SYM_TOL = 1e-12


class LinAlgError(ArithmeticError):
    """Raised on dimension errors, overflow or solver failure."""


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    spectral_radius: float
    max_real_part: float


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float array (scalars become 1x1)."""
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise LinAlgError(f"{name}: expected a 2-D array, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise LinAlgError(f"{name}: non-finite entries")
    return m


def _square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise LinAlgError(f"{name} must be square, got shape {a.shape}")


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def kron_sum(a, b) -> np.ndarray:
    """Kronecker sum ``a (+) b = a (x) I + I (x) b``."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    _square(a, "a")
    _square(b, "b")
    return np.kron(a, np.eye(b.shape[0])) + np.kron(np.eye(a.shape[0]), b)


def expm(a) -> np.ndarray:
    a = as_matrix(a, "a")
    _square(a, "a")
    # exp(||a||) overflows double precision past ~709
    if np.linalg.norm(a, 1) > 700.0:
        raise LinAlgError(f"expm: 1-norm {np.linalg.norm(a, 1):.3g} is outside the representable range")
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = scipy.linalg.expm(a)
        except FloatingPointError as exc:
            raise LinAlgError(f"expm overflow: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise LinAlgError("expm overflow: result has non-finite entries")
    return out


def eig(a) -> SpectralReport:
    a = as_matrix(a, "a")
    _square(a, "a")
    try:
        w = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        # LAPACK dgeev reports the index of the first unconverged eigenvalue
        raise LinAlgError(f"eigenvalue iteration did not converge: {exc}") from exc
    return SpectralReport(
        eigenvalues=w,
        spectral_radius=float(np.max(np.abs(w))),
        max_real_part=float(np.max(w.real)),
    )


def spectral_radius(a) -> float:
    return eig(a).spectral_radius


def symmetrize(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def min_eig_sym(a, tol: float = SYM_TOL) -> float:
    """Smallest eigenvalue of a (numerically) symmetric matrix.

    The input is averaged with its transpose first; an asymmetry larger than
    ``tol * ||a||`` is treated as a caller error.
    """
    a = as_matrix(a, "a")
    _square(a, "a")
    scale = max(np.linalg.norm(a), 1.0)
    if np.max(np.abs(a - a.T), initial=0.0) > tol * scale:
        raise LinAlgError("min_eig_sym: matrix is not symmetric within tolerance")
    return float(np.linalg.eigvalsh(symmetrize(a))[0])


def vec(a) -> np.ndarray:
    """Column-stacking vectorization, returned as an ``(r*c, 1)`` column."""
    a = as_matrix(a, "a")
    return a.reshape(-1, 1, order="F")


def unvec(v, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    v = np.asarray(v, dtype=float).ravel()
    if v.size != rows * cols:
        raise LinAlgError(f"unvec: length {v.size} does not match {rows}x{cols}")
    return v.reshape(rows, cols, order="F")
