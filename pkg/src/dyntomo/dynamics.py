"""Random unitary dynamics: Lambda_t[X] = sum_a pi_a(t) U_a X U_a^dagger.

Three closed-form models are provided (qubit dephasing, the general Pauli
model with three distinct rates, and the qutrit Weyl model with eight
distinct rates), plus a tabulated escape hatch for custom probability
curves.  Time is dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import TOL, DimensionError, DynTomoError, Tolerance, as_cmatrix, dagger, is_unitary
from .measurement import Effect, OperatorSet
from .states import DensityMatrix, make_density


class DynamicsError(DynTomoError, ValueError):
    pass


class DegenerateRates(DynamicsError):
    pass


I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (I2, SIGMA_X, SIGMA_Y, SIGMA_Z)

_W = np.exp(2j * np.pi / 3)
_W2 = _W.conjugate()

# Qutrit Weyl matrices U_kl, flattened as alpha = 3k + l.  U_01 is the
# cyclic shift; a third row of (1, 0, 1) would not be unitary.
WEYL = (
    np.eye(3, dtype=complex),
    np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=complex),
    np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=complex),
    np.diag([1, _W, _W2]),
    np.array([[0, 1, 0], [0, 0, _W], [_W2, 0, 0]]),
    np.array([[0, 0, 1], [_W, 0, 0], [0, _W2, 0]]),
    np.diag([1, _W2, _W]),
    np.array([[0, 1, 0], [0, 0, _W2], [_W, 0, 0]]),
    np.array([[0, 0, 1], [_W2, 0, 0], [0, _W, 0]]),
)
WEYL_LABELS = tuple(f"U{k}{l}" for k in range(3) for l in range(3))

MODELS = ("dephasing", "pauli_rud", "weyl_rud")
_N_RATES = {"dephasing": 1, "pauli_rud": 3, "weyl_rud": 8}
DEFAULT_RATES = {
    "dephasing": (1.0,),
    "pauli_rud": (0.25, 1.0, 4.0),
    "weyl_rud": tuple(round(0.2 * a, 10) for a in range(1, 9)),
}


@dataclass(frozen=True)
class ModelId:
    model: str
    rates: tuple[float, ...] = ()

    def __post_init__(self):
        if self.model not in MODELS:
            raise DynamicsError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        rates = tuple(float(r) for r in self.rates) or DEFAULT_RATES[self.model]
        n = _N_RATES[self.model]
        if len(rates) != n:
            raise DynamicsError(f"model {self.model} takes {n} rate(s), got {len(rates)}")
        if not all(np.isfinite(r) and r > 0 for r in rates):
            raise DynamicsError(f"decoherence rates must be strictly positive, got {rates}")
        if len(set(rates)) != len(rates):
            raise DegenerateRates(
                f"rates {rates} are not pairwise distinct; the coefficient matrix would be singular for every time grid"
            )
        object.__setattr__(self, "rates", rates)

    def to_json(self) -> dict:
        return {"model": self.model, "rates": list(self.rates)}

    @classmethod
    def from_json(cls, obj: dict) -> "ModelId":
        if "model" not in obj:
            raise DynamicsError("model JSON is missing field 'model'")
        return cls(obj["model"], tuple(obj.get("rates", ())))


@dataclass(frozen=True, eq=False)
class RandomUnitaryDynamics:
    """Unitaries ``U_a`` plus the probability curves ``pi_a(t)`` that mix them."""

    unitaries: tuple[np.ndarray, ...]
    pi_fn: Callable[[float], np.ndarray] = field(repr=False)
    labels: tuple[str, ...] = ()
    model_id: ModelId | None = None

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]

    @property
    def kappa(self) -> int:
        return len(self.unitaries)

    def pi(self, t: float) -> np.ndarray:
        return pi_vector(self, t)


def _dephasing_pi(rates):
    (g,) = rates

    def pi(t):
        e = np.exp(-g * t)
        return np.array([(1 + e) / 2, (1 - e) / 2])

    return pi


def _mixing_pi(rates, d2):
    g = np.asarray(rates)

    def pi(t):
        e = np.exp(-g * t)
        return np.concatenate(([(1 + e.sum()) / d2], (1 - e) / d2))

    return pi


def make_model(mid: ModelId, tol: Tolerance = TOL) -> RandomUnitaryDynamics:
    if mid.model == "dephasing":
        m = RandomUnitaryDynamics((I2, SIGMA_Z), _dephasing_pi(mid.rates), ("I", "sigma3"), mid)
    elif mid.model == "pauli_rud":
        m = RandomUnitaryDynamics(PAULI, _mixing_pi(mid.rates, 4), ("I", "sigma1", "sigma2", "sigma3"), mid)
    else:
        m = RandomUnitaryDynamics(WEYL, _mixing_pi(mid.rates, 9), WEYL_LABELS, mid)
    validate_dynamics(m, tol)
    return m


def tabulated_model(unitaries: Sequence, times: Sequence[float], table, labels=None, tol: Tolerance = TOL):
    """Custom dynamics from a tabulated ``pi`` grid, linearly interpolated.

    ``table[j, a]`` is ``pi_a(times[j])``; beyond the last time the final row
    is held.
    """
    us = tuple(as_cmatrix(u, "unitary") for u in unitaries)
    ts = np.asarray(times, dtype=float)
    tab = np.asarray(table, dtype=float)
    if tab.shape != (len(ts), len(us)):
        raise DynamicsError(f"pi table must have shape ({len(ts)}, {len(us)}), got {tab.shape}")
    if np.any(np.diff(ts) <= 0) or ts[0] != 0:
        raise DynamicsError("tabulated times must start at 0 and increase strictly")

    def pi(t):
        return np.array([np.interp(t, ts, tab[:, a]) for a in range(len(us))])

    labels = tuple(labels) if labels else tuple(f"U{a}" for a in range(len(us)))
    m = RandomUnitaryDynamics(us, pi, labels)
    validate_dynamics(m, tol, sample_times=ts)
    return m


def validate_dynamics(m: RandomUnitaryDynamics, tol: Tolerance = TOL, sample_times=None) -> None:
    dims = {u.shape for u in m.unitaries}
    if len(dims) != 1:
        raise DimensionError(f"unitaries have mixed shapes {sorted(dims)}")
    for lab, u in zip(m.labels, m.unitaries):
        if not is_unitary(u, tol):
            raise DynamicsError(f"{lab} is not unitary")
    if np.max(np.abs(m.unitaries[0] - np.eye(m.dim))) > tol.eps_abs:
        raise DynamicsError("first unitary must be the identity")
    p0 = m.pi_fn(0.0)
    if np.max(np.abs(p0 - np.eye(m.kappa)[0])) > tol.eps_abs:
        raise DynamicsError(f"pi(0) must be (1, 0, ..., 0), got {p0}")
    ts = sample_times if sample_times is not None else np.concatenate(([0.0], np.logspace(-3, 3, 25)))
    for t in ts:
        p = m.pi_fn(float(t))
        if p.min() < -tol.eps_abs or abs(p.sum() - 1) > tol.eps_abs:
            raise DynamicsError(f"pi({t:g}) = {p} is not a probability vector")


def pi_vector(m: RandomUnitaryDynamics, t: float) -> np.ndarray:
    if t < 0:
        raise DynamicsError(f"time must be non-negative, got {t}")
    return m.pi_fn(float(t))


def evolve(m: RandomUnitaryDynamics, r: DensityMatrix, t: float, tol: Tolerance = TOL) -> DensityMatrix:
    """Schrodinger-picture state ``Lambda_t[rho]``."""
    if r.dim != m.dim:
        raise DimensionError(f"state dimension {r.dim} does not match dynamics dimension {m.dim}")
    p = pi_vector(m, t)
    out = sum(w * (u @ r.mat @ dagger(u)) for w, u in zip(p, m.unitaries))
    return make_density(out, tol)


def heisenberg_effects(m: RandomUnitaryDynamics, e: Effect) -> OperatorSet:
    """Conjugates ``U_a^dagger M U_a`` in unitary order."""
    if e.dim != m.dim:
        raise DimensionError(f"effect dimension {e.dim} does not match dynamics dimension {m.dim}")
    base = e.label or "M"
    return OperatorSet(
        tuple(
            Effect(dagger(u) @ e.mat @ u, base if a == 0 else f"{lab}^+ {base} {lab}")
            for a, (lab, u) in enumerate(zip(m.labels, m.unitaries))
        )
    )


@dataclass(frozen=True, eq=False)
class KrausMap:
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        ks = tuple(as_cmatrix(k, "Kraus operator") for k in self.kraus)
        object.__setattr__(self, "kraus", ks)
        r = self.completeness_residual()
        if r > TOL.eps_abs:
            raise DynamicsError(f"Kraus operators are not trace preserving (residual {r:.3e})")

    def completeness_residual(self) -> float:
        d = self.kraus[0].shape[0]
        s = sum(dagger(k) @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(d))))

    @property
    def nontrivial(self) -> tuple[np.ndarray, ...]:
        return tuple(k for k in self.kraus if np.max(np.abs(k)) > TOL.eps_abs)

    def apply(self, x) -> np.ndarray:
        x = as_cmatrix(x)
        return sum(k @ x @ dagger(k) for k in self.kraus)


def kraus_at(m: RandomUnitaryDynamics, t: float) -> KrausMap:
    p = np.clip(pi_vector(m, t), 0, None)
    return KrausMap(tuple(np.sqrt(w) * u for w, u in zip(p, m.unitaries)))
