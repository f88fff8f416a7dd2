"""Time-sampled tomography under random unitary dynamics.

Measuring one effect ``M`` at times ``t_1..t_n`` gives

    p(t_j) = sum_a pi_a(t_j) Tr(U_a^dagger M U_a rho(0)),

a linear system with coefficient matrix ``Gamma[j, a] = pi_a(t_j)``.  When
``Gamma`` has full column rank the Born probabilities of the conjugated
effects ``U_a^dagger M U_a`` are recovered, and if those conjugates form an
informationally complete POVM the initial state follows by linear
inversion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import (
    TOL,
    DimensionError,
    DynTomoError,
    IllConditionedWarning,
    SolvabilityError,
    Tolerance,
    condition_number,
    dagger,
    solve_linear,
    span_rank,
    vectorize,
)
from .dynamics import ModelId, RandomUnitaryDynamics, evolve, heisenberg_effects, make_model
from .measurement import (
    M0_CONJUGATES,
    M1_TILDE,
    M2_TILDE,
    QUTRIT_SIC_INDEX,
    OperatorSet,
    builtin,
    completeness_residual,
    is_povm,
    sic_overlaps,
)
from .states import DensityMatrix, fidelity, project_to_state_set, random_density

SOLVABILITY_CONDITION = "det[pi_a(t_j)] != 0, which requires pairwise distinct time instants"


class Underdetermined(SolvabilityError):
    pass


class NotInformationallyComplete(DynTomoError):
    pass


@dataclass(frozen=True)
class TimeSamplingPlan:
    times: tuple[float, ...]

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        if not ts:
            raise ValueError("time sampling plan is empty")
        if not all(math.isfinite(t) and t >= 0 for t in ts):
            raise ValueError(f"sampling times must be finite and non-negative, got {ts}")
        repeated = sorted({t for t in ts if ts.count(t) > 1})
        if repeated:
            raise SolvabilityError(
                f"repeated time instant(s) {repeated}: the solvability condition {SOLVABILITY_CONDITION} fails",
                det=0.0,
                condition=math.inf,
            )
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"sampling times must be strictly increasing, got {ts}")
        object.__setattr__(self, "times", ts)

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    gamma: np.ndarray
    times: tuple[float, ...]
    model: RandomUnitaryDynamics | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.gamma.shape


def gamma_matrix(m: RandomUnitaryDynamics, plan: TimeSamplingPlan | Sequence[float]) -> CoefficientMatrix:
    """Rows ``pi(t_j)`` for each sampled time.

    A raw sequence of times is accepted without the distinctness check so
    degenerate grids can be inspected through :func:`check_solvable`.
    """
    times = plan.times if isinstance(plan, TimeSamplingPlan) else tuple(float(t) for t in plan)
    if not times:
        raise ValueError("no sampling times given")
    g = np.array([m.pi(t) for t in times])
    g.setflags(write=False)
    return CoefficientMatrix(g, times, m)


@dataclass(frozen=True)
class SolvabilityVerdict:
    square: bool
    det: float | None
    condition: float
    rank: int
    solvable: bool
    ill_conditioned: bool

    def to_dict(self) -> dict:
        return {
            "square": self.square,
            "det": self.det,
            "condition": _jsonable(self.condition),
            "rank": self.rank,
            "solvable": self.solvable,
            "ill_conditioned": self.ill_conditioned,
        }


def check_solvable(g: CoefficientMatrix | np.ndarray, tol: Tolerance = TOL) -> SolvabilityVerdict:
    """Decide whether the probabilities of every conjugate can be recovered.

    Square systems need a non-singular ``Gamma``; taller systems are solved
    in the least-squares sense and need full column rank.  Both are judged
    by the condition number against ``tol.cond_max``; the determinant is
    reported but not thresholded, since it is tiny for well-posed
    high-order systems.
    """
    gamma = g.gamma if isinstance(g, CoefficientMatrix) else np.asarray(g)
    n, kappa = gamma.shape
    if n < kappa:
        raise Underdetermined(
            f"{n} sampling time(s) for {kappa} unitaries: at least {kappa} distinct measurements are needed"
        )
    s = np.linalg.svd(gamma, compute_uv=False)
    rank = int(np.sum(s > tol.eps_rank * s[0])) if s[0] > 0 else 0
    cond = condition_number(gamma)
    det = float(np.linalg.det(gamma)) if n == kappa else None
    solvable = rank == kappa and cond < tol.cond_max
    return SolvabilityVerdict(n == kappa, det, cond, rank, solvable, solvable and cond > tol.cond_warn)


def recover_effect_probabilities(g: CoefficientMatrix, p, tol: Tolerance = TOL) -> np.ndarray:
    """Solve ``Gamma x = p`` for ``x_a = Tr(U_a^dagger M U_a rho(0))``."""
    p = np.asarray(p, dtype=float)
    gamma = g.gamma
    if p.shape != (gamma.shape[0],):
        raise DimensionError(f"expected {gamma.shape[0]} measured probabilities, got shape {p.shape}")
    verdict = check_solvable(g, tol)
    if not verdict.solvable:
        raise SolvabilityError(
            f"coefficient matrix is singular (det = {verdict.det}, cond = {verdict.condition:.3g}); "
            f"the solvability condition {SOLVABILITY_CONDITION} fails",
            det=verdict.det,
            condition=verdict.condition,
        )
    if verdict.square:
        x, _ = solve_linear(gamma, p, tol)
        return x
    if verdict.ill_conditioned:
        warnings.warn(f"ill-conditioned coefficient matrix (cond = {verdict.condition:.3g})", IllConditionedWarning)
    x, *_ = np.linalg.lstsq(gamma, p, rcond=None)
    return x


@dataclass(frozen=True, eq=False)
class GeneratedPovm:
    """Conjugated effects ordered by (initial operator k, unitary a)."""

    effects: OperatorSet
    source: OperatorSet
    model: RandomUnitaryDynamics
    ic: bool
    completeness_residual: float
    span_rank: int

    @property
    def kappa(self) -> int:
        return self.model.kappa

    def summary(self) -> dict:
        return {
            "n_initial": len(self.source),
            "n_effects": len(self.effects),
            "span_rank": self.span_rank,
            "dim_squared": self.effects.dim**2,
            "completeness_residual": self.completeness_residual,
            "ic": self.ic,
        }


def assemble_generated_povm(m: RandomUnitaryDynamics, initial: OperatorSet, tol: Tolerance = TOL) -> GeneratedPovm:
    if initial.dim != m.dim:
        raise DimensionError(f"operator dimension {initial.dim} does not match dynamics dimension {m.dim}")
    effects = []
    for e in initial.effects:
        effects.extend(heisenberg_effects(m, e).effects)
    gen = OperatorSet(tuple(effects))
    rank = span_rank(gen.mats, tol)
    check = is_povm(gen, tol)
    return GeneratedPovm(gen, initial, m, rank == gen.dim**2 and check.ok, check.residual, rank)


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) basis of d x d Hermitian matrices."""
    basis = []
    for j in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[j, j] = 1
        basis.append(e)
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            a = np.zeros((d, d), dtype=complex)
            a[j, k], a[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis.extend([s, a])
    return basis


def linear_inversion(gp: GeneratedPovm, probs) -> tuple[np.ndarray, float]:
    """Least-squares Hermitian ``X`` with ``Tr(E_i X) = p_i``.

    Returns the raw (possibly unphysical) estimate and the residual norm,
    which is nonzero only for inconsistent overcomplete data.
    """
    if not gp.ic:
        raise NotInformationallyComplete(
            f"generated operators span rank {gp.span_rank} of {gp.effects.dim**2} "
            f"(completeness residual {gp.completeness_residual:.3e}); the state cannot be reconstructed"
        )
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (len(gp.effects),):
        raise DimensionError(f"expected {len(gp.effects)} probabilities, got shape {probs.shape}")
    basis = hermitian_basis(gp.effects.dim)
    a = np.array([[np.trace(e @ b).real for b in basis] for e in gp.effects.mats])
    c, *_ = np.linalg.lstsq(a, probs, rcond=None)
    x = sum(ci * b for ci, b in zip(c, basis))
    return x, float(np.linalg.norm(a @ c - probs))


def reconstruct(gp: GeneratedPovm, probs, tol: Tolerance = TOL) -> DensityMatrix:
    x, _ = linear_inversion(gp, probs)
    return project_to_state_set(x, tol)


# --- theorem certificates ---------------------------------------------------

def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else str(v)


@dataclass(frozen=True)
class Obligation:
    name: str
    value: float
    threshold: float
    relation: str
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": _jsonable(self.value),
            "threshold": _jsonable(self.threshold),
            "relation": self.relation,
            "pass": bool(self.passed),
        }


_RELATIONS = {
    "<=": lambda v, t: v <= t,
    "<": lambda v, t: v < t,
    ">": lambda v, t: v > t,
    ">=": lambda v, t: v >= t,
    "==": lambda v, t: v == t,
}


@dataclass
class Certificate:
    theorem: int
    description: str
    obligations: list[Obligation] = field(default_factory=list)

    def check(self, name: str, value, relation: str, threshold) -> bool:
        ok = bool(_RELATIONS[relation](value, threshold))
        self.obligations.append(Obligation(name, value, threshold, relation, ok))
        return ok

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.obligations)

    @property
    def failures(self) -> list[Obligation]:
        return [o for o in self.obligations if not o.passed]

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "description": self.description,
            "pass": self.passed,
            "obligations": [o.to_dict() for o in self.obligations],
        }

    def format_text(self) -> str:
        lines = [f"theorem {self.theorem}: {self.description}"]
        for o in self.obligations:
            v = f"{o.value:.12g}" if not isinstance(o.value, (bool, np.bool_)) else str(o.value)
            lines.append(f"  [{'PASS' if o.passed else 'FAIL'}] {o.name}: {v} {o.relation} {o.threshold:.12g}")
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _chebyshev_decay_times(rate: float, n: int) -> tuple[float, ...]:
    # Chebyshev nodes in z = exp(-rate * t) on (0, 1): near-optimal for the
    # Vandermonde-like Gamma of equally spaced rates.
    z = 0.5 * (1 + np.cos((2 * np.arange(1, n + 1) - 1) * np.pi / (2 * n)))
    return tuple(float(t) for t in -np.log(z) / rate)


def default_plan(theorem: int, mid: ModelId | None = None) -> TimeSamplingPlan:
    """Default sampling grid for each theorem configuration, scaled by its rates."""
    mid = mid or THEOREM_MODELS[theorem]
    if theorem == 2:
        return TimeSamplingPlan(tuple(t / mid.rates[0] for t in (0.2, 1.2)))
    if theorem == 3:
        mean = float(np.mean(mid.rates))
        return TimeSamplingPlan(tuple(t / mean for t in (0.3, 0.8, 1.5, 2.5)))
    if theorem == 4:
        return TimeSamplingPlan(_chebyshev_decay_times(min(mid.rates), 9))
    raise ValueError(f"no theorem {theorem}; choose 2, 3 or 4")


THEOREM_MODELS = {
    2: ModelId("dephasing"),
    3: ModelId("pauli_rud"),
    4: ModelId("weyl_rud"),
}


def theorem_operators(theorem: int) -> OperatorSet:
    if theorem == 2:
        return builtin("qubit_m1_m2")
    if theorem == 3:
        return builtin("qubit_m0")
    if theorem == 4:
        return builtin("sic_qutrit").select([0])
    raise ValueError(f"no theorem {theorem}; choose 2, 3 or 4")


def _forward(m: RandomUnitaryDynamics, ops: OperatorSet, plan: TimeSamplingPlan, rho: DensityMatrix) -> np.ndarray:
    states = [evolve(m, rho, t) for t in plan.times]
    return np.array([[np.trace(e @ s.mat).real for s in states] for e in ops.mats])


def round_trip_fidelity(m, ops, plan, rho, tol: Tolerance = TOL) -> float:
    """Simulate exact time-sampled data from ``rho`` and reconstruct it."""
    g = gamma_matrix(m, plan)
    p = _forward(m, ops, plan, rho)
    x = np.concatenate([recover_effect_probabilities(g, row, tol) for row in p])
    est = reconstruct(assemble_generated_povm(m, ops, tol), x, tol)
    return fidelity(est, rho)


def _max_dev(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _common_obligations(cert: Certificate, m, ops, plan, tol, seed: int) -> GeneratedPovm:
    gp = assemble_generated_povm(m, ops, tol)
    cert.check("generated completeness residual (sum = I)", gp.completeness_residual, "<=", 1e-12)
    cert.check("generated span rank", gp.span_rank, "==", ops.dim**2)
    for e in gp.effects.effects:
        cert.check(f"conjugate positivity [{e.label}]", e.min_eigenvalue, ">=", -tol.eps_abs)
    rho = random_density(ops.dim, seed)
    cert.check("round-trip fidelity deficit", 1 - round_trip_fidelity(m, ops, plan, rho, tol), "<=", 1e-10)
    return gp


def _verify_dephasing(tol: Tolerance) -> Certificate:
    cert = Certificate(2, "qubit dephasing: two positive operators at two distinct times generate an IC-POVM")
    mid = THEOREM_MODELS[2]
    m = make_model(mid, tol)
    ops = theorem_operators(2)
    for e in ops.effects:
        cert.check(f"positivity min eigenvalue [{e.label}]", e.min_eigenvalue, ">", 0)
    cert.check("initial pair alone is incomplete (residual)", completeness_residual(ops), ">", tol.eps_abs)

    plan = default_plan(2, mid)
    g = gamma_matrix(m, plan)
    verdict = check_solvable(g, tol)
    (gam,) = mid.rates
    t1, t2 = plan.times
    closed = (math.exp(-gam * t1) - math.exp(-gam * t2)) / 2
    cert.check("Gamma determinant on default grid", abs(verdict.det), ">", 0)
    cert.check("Gamma determinant vs closed form", abs(verdict.det - closed), "<=", 1e-12)

    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(10):
        gam_r = rng.uniform(0.1, 5.0)
        ta, tb = rng.uniform(0.0, 3.0, size=2)
        model_r = make_model(ModelId("dephasing", (gam_r,)), tol)
        det = np.linalg.det(gamma_matrix(model_r, (ta, tb)).gamma)
        worst = max(worst, abs(det - (math.exp(-gam_r * ta) - math.exp(-gam_r * tb)) / 2))
    cert.check("Gamma determinant vs closed form, 10 random (rate, t1, t2)", worst, "<=", 1e-12)

    gp = assemble_generated_povm(m, ops, tol)
    mats = gp.effects.mats
    cert.check("sigma3 M1 sigma3 matches tabulated conjugate", _max_dev(mats[1], M1_TILDE), "<=", 1e-12)
    cert.check("sigma3 M2 sigma3 matches tabulated conjugate", _max_dev(mats[3], M2_TILDE), "<=", 1e-12)
    _common_obligations(cert, m, ops, plan, tol, seed=2)
    return cert


def _verify_pauli(tol: Tolerance) -> Certificate:
    cert = Certificate(3, "general Pauli dynamics: one operator at four distinct times generates an IC-POVM")
    mid = THEOREM_MODELS[3]
    m = make_model(mid, tol)
    ops = theorem_operators(3)
    cert.check("positivity min eigenvalue [M0]", ops[0].min_eigenvalue, ">", 0)

    plan = default_plan(3, mid)
    verdict = check_solvable(gamma_matrix(m, plan), tol)
    cert.check("Gamma rank (4 distinct times)", verdict.rank, "==", 4)
    cert.check("Gamma condition number", verdict.condition, "<", 1e6)

    gp = assemble_generated_povm(m, ops, tol)
    for k, (got, ref) in enumerate(zip(gp.effects.mats[1:], M0_CONJUGATES), start=1):
        cert.check(f"sigma{k} M0 sigma{k} matches tabulated conjugate", _max_dev(got, ref), "<=", 1e-12)
    # homogeneous system a M0 + b M1~ + c M2~ + d M3~ = 0: columns are the vectorised operators
    homog = vectorize([ops[0].mat, *M0_CONJUGATES])
    cert.check("homogeneous system rank (only the zero solution)", int(np.linalg.matrix_rank(homog)), "==", 4)
    cert.check("homogeneous system |determinant|", abs(np.linalg.det(homog)), ">", tol.eps_abs)
    _common_obligations(cert, m, ops, plan, tol, seed=3)
    return cert


def match_sets(generated: Sequence[np.ndarray], reference: Sequence[np.ndarray]) -> tuple[float, bool]:
    """Greedy nearest matching of two operator lists.

    Returns the largest matched entrywise deviation and whether the matching
    is a bijection.
    """
    worst, used = 0.0, set()
    for g in generated:
        dev = [_max_dev(g, r) for r in reference]
        j = int(np.argmin(dev))
        used.add(j)
        worst = max(worst, dev[j])
    return worst, len(used) == len(reference) == len(generated)


def _verify_weyl(tol: Tolerance) -> Certificate:
    cert = Certificate(4, "qutrit Weyl dynamics: one SIC element at nine distinct times generates the full SIC-POVM")
    mid = THEOREM_MODELS[4]
    m = make_model(mid, tol)
    for lab, u in zip(m.labels, m.unitaries):
        cert.check(f"unitarity |U^+U - I| [{lab}]", _max_dev(dagger(u) @ u, np.eye(3)), "<=", 1e-12)
        cert.check(f"order three |U^3 - I| [{lab}]", _max_dev(np.linalg.matrix_power(u, 3), np.eye(3)), "<=", 1e-12)

    plan = default_plan(4, mid)
    verdict = check_solvable(gamma_matrix(m, plan), tol)
    cert.check("Gamma rank (9 distinct times)", verdict.rank, "==", 9)
    cert.check("Gamma condition number", verdict.condition, "<", tol.cond_max)

    sic = builtin("sic_qutrit")
    cert.check(
        "SIC overlaps |d^2 Tr(P_j P_k) - 1/4| max",
        float(np.max(np.abs(sic_overlaps(sic) - 0.25))),
        "<=",
        1e-10,
    )
    worst_sum = 0.0
    for start in range(len(QUTRIT_SIC_INDEX)):
        gp = assemble_generated_povm(m, sic.select([start]), tol)
        dev, bijective = match_sets(gp.effects.mats, sic.mats)
        cert.check(
            f"generated set equals SIC set [start {sic[start].label}]",
            dev if bijective else math.inf,
            "<=",
            1e-9,
        )
        worst_sum = max(worst_sum, gp.completeness_residual)
    cert.check("generated sets sum to I3 (max residual over starts)", worst_sum, "<=", 1e-12)
    _common_obligations(cert, m, theorem_operators(4), plan, tol, seed=4)
    return cert


def verify_theorem(n: int, tol: Tolerance = TOL) -> Certificate:
    """Numerically check every proof obligation of one theorem configuration.

    ``n`` is 2 (dephasing, two operators), 3 (general Pauli dynamics, one
    operator) or 4 (qutrit Weyl dynamics, one SIC element).
    """
    builders = {2: _verify_dephasing, 3: _verify_pauli, 4: _verify_weyl}
    if n not in builders:
        raise ValueError(f"no theorem {n}; choose 2, 3 or 4")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        return builders[n](tol)

