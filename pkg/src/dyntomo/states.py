"""Density matrices: validation, random sampling, fidelity and projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    TOL,
    DimensionError,
    DynTomoError,
    Tolerance,
    as_cmatrix,
    dagger,
    hermiticity_defect,
    matrix_from_json,
    matrix_to_json,
)


class StateError(DynTomoError, ValueError):
    pass


class NotHermitian(StateError):
    pass


class NotPSD(StateError):
    pass


class TraceNotOne(StateError):
    pass


class DegenerateProjection(StateError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated quantum state. Build through :func:`make_density`."""

    mat: np.ndarray

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def to_json(self) -> dict:
        return {"kind": "density", **matrix_to_json(self.mat)}

    @classmethod
    def from_json(cls, obj: dict, tol: Tolerance = TOL) -> "DensityMatrix":
        if obj.get("kind", "density") != "density":
            raise ValueError(f"expected kind 'density', got {obj.get('kind')!r}")
        return make_density(matrix_from_json(obj), tol)


def make_density(m, tol: Tolerance = TOL) -> DensityMatrix:
    """Validate ``m`` as a density matrix.

    Raises
    ------
    NotHermitian, NotPSD, TraceNotOne
        Naming the violated invariant and its magnitude.
    """
    m = as_cmatrix(m, "density matrix")
    defect = hermiticity_defect(m)
    if defect > tol.eps_abs:
        raise NotHermitian(f"not Hermitian: max |rho - rho^dagger| = {defect:.3e}")
    m = (m + dagger(m)) / 2
    lam = float(np.linalg.eigvalsh(m)[0])
    if lam < -tol.eps_abs:
        raise NotPSD(f"not positive semi-definite: min eigenvalue = {lam:.3e}")
    tr = float(np.trace(m).real)
    if abs(tr - 1) > tol.eps_abs:
        raise TraceNotOne(f"trace is {tr:.12g}, off by {abs(tr - 1):.3e}")
    m.setflags(write=False)
    return DensityMatrix(m)


def random_density(d: int, seed: int, pure: bool = False) -> DensityMatrix:
    """Seeded random state of dimension ``d``.

    Mixed states come from a complex Ginibre draw ``G G^dagger / Tr``; with
    ``pure=True`` a normalised complex Gaussian vector is used instead.
    """
    if d < 2:
        raise ValueError(f"dimension must be at least 2, got {d}")
    rng = np.random.default_rng(seed)
    if pure:
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        v /= np.linalg.norm(v)
        return make_density(np.outer(v, v.conj()))
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    w = g @ dagger(g)
    return make_density(w / np.trace(w).real)


def pure_state(vec) -> DensityMatrix:
    v = np.asarray(vec, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    return make_density(np.outer(v, v.conj()))


def maximally_mixed(d: int) -> DensityMatrix:
    return make_density(np.eye(d) / d)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0, None))) @ dagger(v)


def fidelity(r: DensityMatrix, s: DensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(r) s sqrt(r)))**2``.

    Evaluated as the squared trace norm of ``sqrt(r) sqrt(s)``; the singular
    values avoid the square-root amplification of round-off near rank
    deficiency.
    """
    if r.dim != s.dim:
        raise DimensionError(f"dimension mismatch: {r.dim} vs {s.dim}")
    sv = np.linalg.svd(_psd_sqrt(r.mat) @ _psd_sqrt(s.mat), compute_uv=False)
    return float(min(1.0, np.sum(sv) ** 2))


def project_to_state_set(m, tol: Tolerance = TOL) -> DensityMatrix:
    """Nearest-spectrum repair of an estimate: clip negative eigenvalues, renormalise.

    Already-valid states come back unchanged up to round-off.
    """
    m = as_cmatrix(m)
    h = (m + dagger(m)) / 2
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0, None)
    total = w.sum()
    if total <= tol.eps_abs:
        raise DegenerateProjection("no positive spectral weight left after clipping")
    out = (v * (w / total)) @ dagger(v)
    return make_density((out + dagger(out)) / 2, tol)
