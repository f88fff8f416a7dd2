"""Dense complex-matrix helpers for small Hilbert spaces.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Every check is
numerical and driven by a single :class:`Tolerance`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DynTomoError(Exception):
    """Base class for all package errors."""


class DimensionError(DynTomoError, ValueError):
    pass


class NotHermitianError(DynTomoError, ValueError):
    pass


class SolvabilityError(DynTomoError):
    """Raised when a coefficient matrix cannot be inverted reliably.

    Carries the determinant (square case) and the 2-norm condition number
    so callers can report why the time-sampled system was rejected.
    """

    def __init__(self, message: str, det: float | None = None, condition: float = np.inf):
        super().__init__(message)
        self.det = det
        self.condition = condition


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Tolerance:
    eps_abs: float = 1e-9
    eps_rank: float = 1e-9
    cond_warn: float = 1e8
    cond_max: float = 1e12

    def __post_init__(self):
        for name in ("eps_abs", "eps_rank", "cond_warn", "cond_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


TOL = Tolerance()


def as_cmatrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite square complex matrix."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a))))


def is_hermitian(a, tol: Tolerance = TOL) -> bool:
    return hermiticity_defect(as_cmatrix(a)) <= tol.eps_abs


def is_unitary(u, tol: Tolerance = TOL) -> bool:
    u = as_cmatrix(u)
    return float(np.max(np.abs(dagger(u) @ u - np.eye(len(u))))) <= tol.eps_abs


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``Tr(a^dagger b)``."""
    a = as_cmatrix(a, "a")
    b = as_cmatrix(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return complex(np.vdot(a, b))


def min_eigenvalue(a, tol: Tolerance = TOL) -> float:
    """Smallest eigenvalue of a Hermitian matrix.

    The Hermitian part ``(a + a^dagger) / 2`` is diagonalised so round-off
    asymmetry below ``tol.eps_abs`` does not leak into the spectrum.
    """
    a = as_cmatrix(a)
    defect = hermiticity_defect(a)
    if defect > tol.eps_abs:
        raise NotHermitianError(f"matrix is not Hermitian (max |A - A^dagger| = {defect:.3e})")
    return float(np.linalg.eigvalsh((a + dagger(a)) / 2)[0])


def is_psd(a, tol: Tolerance = TOL) -> bool:
    return min_eigenvalue(a, tol) >= -tol.eps_abs


def vectorize(ops: Sequence) -> np.ndarray:
    """Stack row-major flattened operators as the columns of a matrix."""
    if len(ops) == 0:
        raise ValueError("operator list is empty")
    mats = [as_cmatrix(op) for op in ops]
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise DimensionError(f"mixed operator dimensions {sorted(dims)}")
    return np.stack([m.reshape(-1) for m in mats], axis=1)


def span_rank(ops: Sequence, tol: Tolerance = TOL) -> int:
    """Dimension of the complex linear span of ``ops``.

    Equals ``d**2`` exactly when the operators span the full operator space.
    Singular values below ``tol.eps_rank`` times the largest are dropped.
    """
    s = np.linalg.svd(vectorize(ops), compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol.eps_rank * s[0]))


def condition_number(g) -> float:
    g = np.asarray(g)
    s = np.linalg.svd(g, compute_uv=False)
    if s[-1] == 0:
        return float("inf")
    return float(s[0] / s[-1])


def solve_linear(g, y, tol: Tolerance = TOL) -> tuple[np.ndarray, float]:
    """Solve the square system ``g @ x = y``.

    Returns
    -------
    x : ndarray
    condition : float
        2-norm condition number of ``g``.

    Raises
    ------
    SolvabilityError
        If ``g`` is singular within tolerance (condition number above
        ``tol.cond_max``).
    """
    g = np.asarray(g)
    y = np.asarray(y)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"coefficient matrix must be square, got {g.shape}")
    if y.shape[0] != g.shape[0]:
        raise DimensionError(f"right-hand side has length {y.shape[0]}, expected {g.shape[0]}")
    cond = condition_number(g)
    det = complex(np.linalg.det(g))
    det_out = det.real if np.isrealobj(g) else det
    if not cond < tol.cond_max:
        raise SolvabilityError(
            f"coefficient matrix is numerically singular (det = {det_out:.6g}, cond = {cond:.3g})",
            det=det_out,
            condition=cond,
        )
    if cond > tol.cond_warn:
        warnings.warn(f"ill-conditioned coefficient matrix (cond = {cond:.3g})", IllConditionedWarning, stacklevel=2)
    return np.linalg.solve(g, y), cond


def matrix_to_json(m) -> dict:
    m = as_cmatrix(m)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        dim = int(obj["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    m = as_cmatrix(re + 1j * im)
    if m.shape[0] != dim:
        raise DimensionError(f"matrix JSON declares dim {dim} but holds {m.shape[0]}x{m.shape[0]}")
    return m
