"""End-to-end simulated experiments: forward model, shot noise, reconstruction, statistics."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .algebra import TOL, DynTomoError, SolvabilityError, Tolerance, dagger, matrix_from_json
from .dynamics import DynamicsError, ModelId, RandomUnitaryDynamics, evolve, make_model
from .measurement import BUILTIN_NAMES, MeasurementError, OperatorSet, builtin
from .states import (
    DensityMatrix,
    StateError,
    fidelity,
    make_density,
    maximally_mixed,
    project_to_state_set,
    random_density,
)
from .tomography import (
    THEOREM_MODELS,
    NotInformationallyComplete,
    TimeSamplingPlan,
    assemble_generated_povm,
    check_solvable,
    default_plan,
    gamma_matrix,
    linear_inversion,
    recover_effect_probabilities,
    theorem_operators,
)


class ConfigError(DynTomoError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


_KNOWN_KEYS = {"preset", "model", "initial_ops", "times", "truth", "shots", "trials", "master_seed", "workers"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelId
    initial_ops: OperatorSet
    times: tuple[float, ...]
    truth: dict
    shots: int | None  # None means exact probabilities
    trials: int = 1
    master_seed: int = 0
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, obj: Any, master_seed: int | None = None) -> "ExperimentConfig":
        """Validate a JSON-decoded config before any computation.

        ``preset`` (2, 3 or 4) supplies model, operators and times for one of
        the theorem configurations; explicit keys override it.
        """
        if not isinstance(obj, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        unknown = sorted(set(obj) - _KNOWN_KEYS)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        preset = obj.get("preset")
        if preset is not None and preset not in (2, 3, 4):
            raise ConfigError("preset", f"must be 2, 3 or 4, got {preset!r}")

        if "model" in obj:
            if not isinstance(obj["model"], dict):
                raise ConfigError("model", 'expected {"model": name, "rates": [...]}')
            try:
                model = ModelId.from_json(obj["model"])
            except DynamicsError as exc:
                raise ConfigError("model", str(exc)) from exc
        elif preset is not None:
            model = THEOREM_MODELS[preset]
        else:
            raise ConfigError("model", "missing required field")

        if "initial_ops" in obj:
            ops = _parse_ops(obj["initial_ops"])
        elif preset is not None:
            ops = theorem_operators(preset)
        else:
            raise ConfigError("initial_ops", "missing required field")

        if "times" in obj:
            times = obj["times"]
            if not isinstance(times, list) or not times:
                raise ConfigError("times", "expected a non-empty list of numbers")
            if not all(isinstance(t, (int, float)) and not isinstance(t, bool) and math.isfinite(t) and t >= 0 for t in times):
                raise ConfigError("times", "every time must be a finite non-negative number")
            times = tuple(float(t) for t in times)
        elif preset is not None:
            times = default_plan(preset, model).times
        else:
            raise ConfigError("times", "missing required field")

        truth = obj.get("truth", {"kind": "random"})
        _check_truth(truth, ops.dim)

        shots = obj.get("shots", "exact")
        if shots == "exact":
            shots = None
        elif not (isinstance(shots, int) and not isinstance(shots, bool) and shots >= 1):
            raise ConfigError("shots", f'must be "exact" or a positive integer, got {shots!r}')

        trials = _positive_int(obj, "trials", 1)
        workers = _positive_int(obj, "workers", 1)
        seed = obj.get("master_seed", 0)
        if not (isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0):
            raise ConfigError("master_seed", f"must be a non-negative integer, got {seed!r}")
        if master_seed is not None:
            seed = master_seed
        return cls(model, ops, times, truth, shots, trials, seed, workers, raw=dict(obj))

    def with_shots(self, shots: int | None) -> "ExperimentConfig":
        return ExperimentConfig(
            self.model, self.initial_ops, self.times, self.truth, shots, self.trials, self.master_seed, self.workers, self.raw
        )

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_json(),
            "initial_ops": self.initial_ops.to_json(),
            "times": list(self.times),
            "truth": self.truth,
            "shots": "exact" if self.shots is None else self.shots,
            "trials": self.trials,
            "master_seed": self.master_seed,
        }


def _positive_int(obj, key, default):
    v = obj.get(key, default)
    if not (isinstance(v, int) and not isinstance(v, bool) and v >= 1):
        raise ConfigError(key, f"must be a positive integer, got {v!r}")
    return v


def _parse_ops(obj) -> OperatorSet:
    try:
        if isinstance(obj, str):
            return builtin(obj)
        if isinstance(obj, dict) and "builtin" in obj:
            s = builtin(obj["builtin"])
            sel = obj.get("select")
            if sel is None:
                return s
            if not isinstance(sel, list) or not sel or not all(isinstance(i, int) and 0 <= i < len(s) for i in sel):
                raise ConfigError("initial_ops", f"'select' must list indices in [0, {len(s)})")
            return s.select(sel)
        if isinstance(obj, dict) and "effects" in obj:
            return OperatorSet.from_json(obj)
    except (MeasurementError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("initial_ops", str(exc)) from exc
    raise ConfigError(
        "initial_ops",
        f"expected a builtin name ({', '.join(BUILTIN_NAMES)}), "
        '{"builtin": name, "select": [...]} or an operator-set object',
    )


def _check_truth(truth, dim: int) -> None:
    if not isinstance(truth, dict) or truth.get("kind") not in ("random", "explicit", "maximally_mixed"):
        raise ConfigError("truth", 'expected {"kind": "random" | "explicit" | "maximally_mixed", ...}')
    if truth["kind"] == "random":
        seed = truth.get("seed")
        if seed is not None and not (isinstance(seed, int) and seed >= 0):
            raise ConfigError("truth", "'seed' must be a non-negative integer")
    if truth["kind"] == "explicit":
        try:
            rho = make_density(matrix_from_json(truth["density"]))
        except (KeyError, TypeError, ValueError, StateError) as exc:
            raise ConfigError("truth", f"invalid explicit density: {exc}") from exc
        if rho.dim != dim:
            raise ConfigError("truth", f"density has dimension {rho.dim}, operators have {dim}")


def _seed(*parts: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(p) for p in parts])


def truth_state(cfg: ExperimentConfig, trial: int) -> DensityMatrix:
    d = cfg.initial_ops.dim
    kind = cfg.truth["kind"]
    if kind == "explicit":
        return make_density(matrix_from_json(cfg.truth["density"]))
    if kind == "maximally_mixed":
        return maximally_mixed(d)
    base = cfg.truth.get("seed", cfg.master_seed)
    seed = int(_seed(base, trial, 0x7275).generate_state(1)[0])
    return random_density(d, seed, pure=bool(cfg.truth.get("pure", False)))


def simulate_probabilities(
    truth: DensityMatrix,
    m: RandomUnitaryDynamics,
    ops: OperatorSet,
    plan: TimeSamplingPlan | Sequence[float],
    picture: str = "schrodinger",
) -> np.ndarray:
    """Exact ``p[k, j] = Tr(M_k Lambda_{t_j}[rho])``.

    ``picture="heisenberg"`` evaluates the same numbers as
    ``sum_a pi_a(t_j) Tr(U_a^dagger M_k U_a rho)``.
    """
    times = plan.times if isinstance(plan, TimeSamplingPlan) else tuple(plan)
    if picture == "schrodinger":
        states = [evolve(m, truth, t).mat for t in times]
        p = np.array([[np.trace(e @ s).real for s in states] for e in ops.mats])
    elif picture == "heisenberg":
        pis = np.array([m.pi(t) for t in times])
        conj = np.array([[np.trace(dagger(u) @ e @ u @ truth.mat).real for u in m.unitaries] for e in ops.mats])
        p = conj @ pis.T
    else:
        raise ValueError(f"unknown picture {picture!r}")
    return np.clip(p, 0.0, 1.0)


def sample_frequencies(p, shots: int, master_seed: int, trial: int = 0) -> np.ndarray:
    """Binomial relative frequencies, one independent stream per (k, j) cell."""
    p = np.asarray(p, dtype=float)
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    if np.any(p < -TOL.eps_abs) or np.any(p > 1 + TOL.eps_abs):
        raise ValueError("probabilities must lie in [0, 1]")
    p = np.clip(p, 0.0, 1.0)
    out = np.empty_like(p)
    for idx in np.ndindex(p.shape):
        rng = np.random.default_rng(_seed(master_seed, trial, *idx))
        out[idx] = rng.binomial(shots, p[idx]) / shots
    return out


@dataclass
class TrialReport:
    trial: int
    fidelity: float
    estimate: DensityMatrix
    truth: DensityMatrix
    recovered: np.ndarray
    inversion_residual: float
    raw_min_eigenvalue: float

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "fidelity": self.fidelity,
            "infidelity": 1 - self.fidelity,
            "inversion_residual": self.inversion_residual,
            "raw_min_eigenvalue": self.raw_min_eigenvalue,
            "estimate": self.estimate.to_json(),
            "truth": self.truth.to_json(),
        }


@dataclass
class RunReport:
    config: dict
    shots: int | None
    gamma: dict | None = None
    generated_povm: dict | None = None
    trials: list[TrialReport] = field(default_factory=list)
    error: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([t.fidelity for t in self.trials])

    def aggregate(self) -> dict:
        f = self.fidelities
        if f.size == 0:
            return {}
        return {
            "trials": int(f.size),
            "mean_fidelity": float(f.mean()),
            "std_fidelity": float(f.std()),
            "min_fidelity": float(f.min()),
            "mean_infidelity": float((1 - f).mean()),
            "condition": self.gamma["condition"] if self.gamma else None,
        }

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "ok": self.ok,
            "error": self.error,
            "gamma": self.gamma,
            "generated_povm": self.generated_povm,
            "aggregate": self.aggregate(),
            "trials": [t.to_dict() for t in self.trials],
        }


def _run_trial(cfg, m, g, gp, trial, tol) -> TrialReport:
    truth = truth_state(cfg, trial)
    p = simulate_probabilities(truth, m, cfg.initial_ops, g.times)
    if cfg.shots is not None:
        p = sample_frequencies(p, cfg.shots, cfg.master_seed, trial)
    x = np.concatenate([recover_effect_probabilities(g, row, tol) for row in p])
    raw, resid = linear_inversion(gp, x)
    est = project_to_state_set(raw, tol)
    return TrialReport(
        trial,
        fidelity(est, truth),
        est,
        truth,
        x,
        resid,
        float(np.linalg.eigvalsh((raw + dagger(raw)) / 2)[0]),
    )


def run_pipeline(cfg: ExperimentConfig, tol: Tolerance = TOL) -> RunReport:
    """Simulate, optionally sample, recover and reconstruct, for every trial.

    Solvability and informational-completeness failures are caught and
    recorded in ``report.error`` rather than raised.
    """
    report = RunReport(cfg.to_dict(), cfg.shots)
    try:
        m = make_model(cfg.model, tol)
        plan = TimeSamplingPlan(cfg.times)
        g = gamma_matrix(m, plan)
        verdict = check_solvable(g, tol)
        report.gamma = verdict.to_dict()
        if not verdict.solvable:
            raise SolvabilityError(
                f"coefficient matrix is singular (cond = {verdict.condition:.3g}); "
                "the solvability condition det[pi_a(t_j)] != 0 fails",
                det=verdict.det,
                condition=verdict.condition,
            )
        gp = assemble_generated_povm(m, cfg.initial_ops, tol)
        report.generated_povm = gp.summary()
        if not gp.ic:
            raise NotInformationallyComplete(
                f"generated operators are not an IC-POVM (span rank {gp.span_rank} of {gp.effects.dim**2}, "
                f"completeness residual {gp.completeness_residual:.3e})"
            )
        run = lambda trial: _run_trial(cfg, m, g, gp, trial, tol)  # noqa: E731
        if cfg.workers > 1:
            with ThreadPoolExecutor(cfg.workers) as pool:
                report.trials = list(pool.map(run, range(cfg.trials)))
        else:
            report.trials = [run(k) for k in range(cfg.trials)]
    except (SolvabilityError, NotInformationallyComplete) as exc:
        report.error = {"type": type(exc).__name__, "message": str(exc)}
    return report


@dataclass
class SweepResult:
    rows: list[tuple[int, float, float, float]]

    HEADER = ("shots", "mean_fidelity", "std_fidelity", "mean_cond")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for shots, mean, std, cond in self.rows:
            w.writerow([shots, f"{mean:.12g}", f"{std:.12g}", f"{cond:.12g}"])
        return buf.getvalue()


def run_sweep(cfg: ExperimentConfig, shots_list: Sequence[int], tol: Tolerance = TOL) -> tuple[SweepResult, list[RunReport]]:
    """One pipeline run per shot count, sharing seeds so truths coincide across rows."""
    if not shots_list or not all(isinstance(s, int) and s >= 1 for s in shots_list):
        raise ConfigError("shots", "sweep needs a non-empty list of positive integers")
    rows, reports = [], []
    for shots in shots_list:
        rep = run_pipeline(cfg.with_shots(shots), tol)
        reports.append(rep)
        if not rep.ok:
            break
        agg = rep.aggregate()
        rows.append((shots, agg["mean_fidelity"], agg["std_fidelity"], float(rep.gamma["condition"])))
    return SweepResult(rows), reports
