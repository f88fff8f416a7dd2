"""Effects, operator sets and POVMs, with the concrete operators used in the tomography schemes."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as Fr
from itertools import combinations
from typing import NamedTuple, Sequence

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
    span_rank,
)
from .states import DensityMatrix


class MeasurementError(DynTomoError, ValueError):
    pass


class NotAnEffect(MeasurementError):
    pass


class NotAPovm(MeasurementError):
    pass


class InvalidProbability(MeasurementError):
    pass


@dataclass(frozen=True, eq=False)
class Effect:
    """A positive semi-definite measurement operator."""

    mat: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = as_cmatrix(self.mat, "effect")
        defect = hermiticity_defect(m)
        if defect > TOL.eps_abs:
            raise NotAnEffect(f"effect {self.label!r} is not Hermitian (defect {defect:.3e})")
        m = (m + dagger(m)) / 2
        lam = float(np.linalg.eigvalsh(m)[0])
        if lam < -TOL.eps_abs:
            raise NotAnEffect(f"effect {self.label!r} is not positive semi-definite (min eigenvalue {lam:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Ordered, possibly incomplete, collection of effects of equal dimension."""

    effects: tuple[Effect, ...]

    def __post_init__(self):
        effects = tuple(e if isinstance(e, Effect) else Effect(e) for e in self.effects)
        if not effects:
            raise MeasurementError("operator set is empty")
        dims = {e.dim for e in effects}
        if len(dims) != 1:
            raise DimensionError(f"mixed effect dimensions {sorted(dims)}")
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_matrices(cls, mats: Sequence, labels: Sequence[str] | None = None) -> "OperatorSet":
        labels = list(labels) if labels is not None else [f"E{k}" for k in range(len(mats))]
        if len(labels) != len(mats):
            raise MeasurementError("labels and effects differ in length")
        return cls(tuple(Effect(m, lab) for m, lab in zip(mats, labels)))

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def mats(self) -> list[np.ndarray]:
        return [e.mat for e in self.effects]

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.effects]

    def __len__(self) -> int:
        return len(self.effects)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return OperatorSet(self.effects[k])
        return self.effects[k]

    def select(self, indices: Sequence[int]) -> "OperatorSet":
        return OperatorSet(tuple(self.effects[i] for i in indices))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "effects": [matrix_to_json(m) for m in self.mats],
            "labels": self.labels,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OperatorSet":
        try:
            raw = obj["effects"]
            dim = int(obj["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MeasurementError(f"malformed operator-set JSON: missing {exc}") from exc
        mats = [matrix_from_json(e) for e in raw]
        s = cls.from_matrices(mats, obj.get("labels"))
        if s.dim != dim:
            raise DimensionError(f"operator-set JSON declares dim {dim} but effects are {s.dim}-dimensional")
        return s


@dataclass(frozen=True, eq=False)
class Povm(OperatorSet):
    """An operator set whose effects resolve the identity."""

    residual: float = field(default=0.0, init=False)

    def __post_init__(self):
        super().__post_init__()
        check = is_povm(self)
        if not check.ok:
            raise NotAPovm(f"effects do not sum to identity (max residual {check.residual:.3e})")
        object.__setattr__(self, "residual", check.residual)


class PovmCheck(NamedTuple):
    ok: bool
    residual: float


def completeness_residual(s: OperatorSet) -> float:
    total = np.sum(s.mats, axis=0)
    return float(np.max(np.abs(total - np.eye(s.dim))))


def is_povm(s: OperatorSet, tol: Tolerance = TOL) -> PovmCheck:
    r = completeness_residual(s)
    return PovmCheck(r <= tol.eps_abs, r)


def is_ic(s: OperatorSet, tol: Tolerance = TOL) -> bool:
    """Informationally complete: a POVM whose effects span the operator space."""
    return span_rank(s.mats, tol) == s.dim**2 and is_povm(s, tol).ok


def sic_overlaps(s: OperatorSet) -> np.ndarray:
    """Pairwise squared overlaps ``d**2 Tr(P_j P_k)`` for ``j < k``."""
    d = s.dim
    return np.array([d * d * np.trace(a @ b).real for a, b in combinations(s.mats, 2)])


def is_sic(s: OperatorSet, tol: Tolerance = TOL) -> bool:
    d = s.dim
    if len(s) != d * d:
        return False
    for m in s.mats:
        p = d * m
        if abs(np.trace(p).real - 1) > tol.eps_abs or np.max(np.abs(p @ p - p)) > tol.eps_abs:
            return False
    return bool(np.all(np.abs(sic_overlaps(s) - 1 / (d + 1)) <= tol.eps_abs))


def born_probability(m: Effect, r: DensityMatrix, tol: Tolerance = TOL) -> float:
    """``Tr(M rho)``, clamped to [0, 1] once inside tolerance."""
    if m.dim != r.dim:
        raise DimensionError(f"dimension mismatch: effect {m.dim} vs state {r.dim}")
    p = np.trace(m.mat @ r.mat)
    if abs(p.imag) > tol.eps_abs or not -tol.eps_abs <= p.real <= 1 + tol.eps_abs:
        raise InvalidProbability(f"Tr(M rho) = {p:.6g} is not a probability")
    return float(min(1.0, max(0.0, p.real)))


def probabilities(s: OperatorSet, r: DensityMatrix, tol: Tolerance = TOL) -> np.ndarray:
    return np.array([born_probability(e, r, tol) for e in s.effects])


# --- concrete operators -------------------------------------------------------

def _q(re, im=0) -> complex:
    return complex(float(Fr(re)), float(Fr(im)))


def _mat(rows) -> np.ndarray:
    return np.array([[_q(*x) if isinstance(x, tuple) else _q(x) for x in row] for row in rows])


M1 = _mat([["1/5", "1/6"], ["1/6", "1/3"]])
M2 = _mat([["3/10", ("1/7", "1/10")], [("1/7", "-1/10"), "1/6"]])
M0 = _mat([["1/5", ("1/6", "1/10")], [("1/6", "-1/10"), "3/10"]])

# sigma_3-conjugates of M1, M2 as tabulated alongside them
M1_TILDE = _mat([["1/5", "-1/6"], ["-1/6", "1/3"]])
M2_TILDE = _mat([["3/10", ("-1/7", "-1/10")], [("-1/7", "1/10"), "1/6"]])

# sigma_1, sigma_2, sigma_3 conjugates of M0 as tabulated alongside it
M0_CONJUGATES = (
    _mat([["3/10", ("1/6", "-1/10")], [("1/6", "1/10"), "1/5"]]),
    _mat([["3/10", ("-1/6", "1/10")], [("-1/6", "-1/10"), "1/5"]]),
    _mat([["1/5", ("-1/6", "-1/10")], [("-1/6", "1/10"), "3/10"]]),
)

OMEGA = np.exp(2j * np.pi / 3)


def qubit_sic_vectors() -> list[np.ndarray]:
    a, b = 1 / np.sqrt(3), np.sqrt(2 / 3)
    return [
        np.array([1, 0], dtype=complex),
        np.array([a, b], dtype=complex),
        np.array([a, b * np.exp(2j * np.pi / 3)]),
        np.array([a, b * np.exp(4j * np.pi / 3)]),
    ]


# (i, j) -> (basis index p, basis index q, phase on |p>, phase on |q>); vector = (ph_p|p> + ph_q|q>)/sqrt(2)
_QUTRIT_SIC = {
    (0, 0): (0, 1, 1, 1),
    (1, 0): (0, 1, OMEGA.conjugate(), OMEGA),
    (2, 0): (0, 1, OMEGA, OMEGA.conjugate()),
    (0, 1): (1, 2, 1, 1),
    (1, 1): (1, 2, OMEGA.conjugate(), OMEGA),
    (2, 1): (1, 2, OMEGA, OMEGA.conjugate()),
    (0, 2): (0, 2, 1, 1),
    (1, 2): (0, 2, OMEGA, OMEGA.conjugate()),
    (2, 2): (0, 2, OMEGA.conjugate(), OMEGA),
}

QUTRIT_SIC_INDEX = list(_QUTRIT_SIC)


def qutrit_sic_vectors() -> dict[tuple[int, int], np.ndarray]:
    out = {}
    for key, (p, q, a, b) in _QUTRIT_SIC.items():
        v = np.zeros(3, dtype=complex)
        v[p], v[q] = a, b
        out[key] = v / np.sqrt(2)
    return out


def _projector(v: np.ndarray, weight: float) -> np.ndarray:
    return weight * np.outer(v, v.conj())


BUILTIN_NAMES = ("qubit_m1_m2", "qubit_m0", "sic_qubit", "sic_qutrit")


def builtin(name: str) -> OperatorSet:
    """Concrete operator sets by name.

    ``qubit_m1_m2`` and ``qubit_m0`` are incomplete seeds for dynamic
    generation; ``sic_qubit`` and ``sic_qutrit`` are full SIC-POVMs whose
    individual elements serve as single-operator seeds.
    """
    if name == "qubit_m1_m2":
        return OperatorSet.from_matrices([M1, M2], ["M1", "M2"])
    if name == "qubit_m0":
        return OperatorSet.from_matrices([M0], ["M0"])
    if name == "sic_qubit":
        vecs = qubit_sic_vectors()
        return Povm(tuple(Effect(_projector(v, 1 / 2), f"Pi{k + 1}") for k, v in enumerate(vecs)))
    if name == "sic_qutrit":
        vecs = qutrit_sic_vectors()
        return Povm(tuple(Effect(_projector(vecs[ij], 1 / 3), f"Pi_{ij[0]}^{ij[1]}") for ij in QUTRIT_SIC_INDEX))
    raise MeasurementError(f"unknown builtin operator set {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
