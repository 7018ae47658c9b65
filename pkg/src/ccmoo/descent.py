"""Multi-objective descent loop with pluggable weighting modes.

Per iteration: evaluate per-objective losses and gradients, pick combining
weights (fixed, min-norm, or preference-constrained min-norm), take one
momentum step along the combined direction, and record everything in a
trace. Runs stop at the stationarity certificate (min-norm value below
eps) or at the iteration budget.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericalError
from .minnorm import gram, min_norm_simplex
from .preference import (
    PreferenceSet,
    combined_weights,
    constraint_gradient_coefficients,
    constraint_values,
    in_subregion,
    projection_weights,
)


@dataclass(frozen=True)
class FixedLS:
    """Fixed linear-scalarization weights (must sum to one)."""

    weights: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) < 2 or any(x < 0.0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights must be non-negative and sum to 1, got {w}")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class GBO:
    """Adaptive min-norm weighting over the objective gradients."""


@dataclass(frozen=True)
class GBOPreference:
    """Min-norm weighting constrained to the chosen preference sub-region."""

    prefs: PreferenceSet

    def __post_init__(self):
        self.prefs.require_chosen()


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.02
    momentum: float = 0.9
    max_iters: int = 5000
    stationarity_eps: float = 1e-8
    loss_normalization: bool = False
    seed: int = 0
    lr_schedule: str = "constant"  # "constant" | "cosine"

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.stationarity_eps <= 0.0:
            raise ValueError("stationarity_eps must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")

    def lr_at(self, iteration):
        if self.lr_schedule == "constant":
            return self.learning_rate
        frac = iteration / max(self.max_iters, 1)
        return self.learning_rate * 0.5 * (1.0 + math.cos(math.pi * frac))


@dataclass
class IterationRecord:
    iteration: int
    phase: str  # "projection" | "descent"
    objectives: np.ndarray
    weights: np.ndarray
    stationarity_norm_sq: float
    constraint_values: Optional[np.ndarray] = None

    def to_json(self):
        doc = {
            "iter": self.iteration,
            "phase": self.phase,
            "objectives": [float(x) for x in self.objectives],
            "weights": [float(x) for x in self.weights],
            "stationarity_norm_sq": float(self.stationarity_norm_sq),
        }
        if self.constraint_values is not None:
            doc["constraint_values"] = [float(x) for x in self.constraint_values]
        return doc


@dataclass
class RunTrace:
    """All iteration records of one run plus the terminal summary."""

    records: list
    reason: str  # "stationary" | "max_iters"
    final_parameters: np.ndarray
    final_objectives: np.ndarray
    max_constraint: Optional[float] = None

    def terminal_json(self):
        doc = {
            "reason": self.reason,
            "iterations": len(self.records),
            "final_objectives": [float(x) for x in self.final_objectives],
            "final_parameters": [float(x) for x in self.final_parameters],
        }
        if self.max_constraint is not None:
            doc["max_constraint"] = float(self.max_constraint)
        return doc

    def to_jsonl(self):
        lines = [json.dumps(r.to_json()) for r in self.records]
        lines.append(json.dumps(self.terminal_json()))
        return "\n".join(lines) + "\n"

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty trace")
        terminal = json.loads(lines[-1])
        if "reason" not in terminal:
            raise ValueError("trace is missing its terminal record")
        records = []
        for ln in lines[:-1]:
            doc = json.loads(ln)
            cv = doc.get("constraint_values")
            records.append(
                IterationRecord(
                    iteration=doc["iter"],
                    phase=doc["phase"],
                    objectives=np.array(doc["objectives"]),
                    weights=np.array(doc["weights"]),
                    stationarity_norm_sq=doc["stationarity_norm_sq"],
                    constraint_values=None if cv is None else np.array(cv),
                )
            )
        return cls(
            records=records,
            reason=terminal["reason"],
            final_parameters=np.array(terminal["final_parameters"]),
            final_objectives=np.array(terminal["final_objectives"]),
            max_constraint=terminal.get("max_constraint"),
        )


def loss_normalize(losses, grads, baseline):
    """Divide each objective's loss and gradient row by its baseline value."""
    baseline = np.asarray(baseline, dtype=float)
    if np.any(baseline <= 0.0):
        raise ValueError("normalization baseline entries must be positive")
    losses = np.asarray(losses, dtype=float) / baseline
    grads = np.asarray(grads, dtype=float) / baseline[:, None]
    return losses, grads


def step_weights(grads, losses, mode):
    """Combining weights for one step under the given weighting mode."""
    grads = np.asarray(grads, dtype=float)
    m = grads.shape[0]
    if isinstance(mode, FixedLS):
        if len(mode.weights) != m:
            raise ValueError(
                f"FixedLS carries {len(mode.weights)} weights for {m} objectives"
            )
        return np.array(mode.weights)
    G = gram(grads)
    if isinstance(mode, GBO):
        return min_norm_simplex(G).alpha
    if isinstance(mode, GBOPreference):
        c = constraint_values(mode.prefs, losses)
        return combined_weights(G, mode.prefs, c).gamma
    raise ValueError(f"unknown weighting mode {mode!r}")


class _RunState:
    """Shared per-run bookkeeping across the projection and descent phases."""

    def __init__(self, problem, config):
        self.problem = problem
        self.config = config
        self.baseline = None

    def evaluate(self, theta, records):
        losses = np.asarray(self.problem.f(theta), dtype=float)
        if not np.isfinite(losses).all():
            raise NumericalError(
                f"non-finite objectives {losses} at iteration {len(records)}",
                partial_trace=_partial_trace(records, theta, losses),
            )
        grads = np.asarray(self.problem.jac(theta), dtype=float)
        if not np.isfinite(grads).all():
            raise NumericalError(
                f"non-finite gradients at iteration {len(records)}",
                partial_trace=_partial_trace(records, theta, losses),
            )
        if self.config.loss_normalization:
            if self.baseline is None:
                if np.any(losses <= 0.0):
                    raise ValueError(
                        "loss normalization needs positive initial losses"
                    )
                self.baseline = losses.copy()
            return losses, *loss_normalize(losses, grads, self.baseline)
        return losses, losses, grads


def _partial_trace(records, theta, losses):
    return RunTrace(
        records=list(records),
        reason="max_iters",
        final_parameters=np.asarray(theta, dtype=float),
        final_objectives=np.asarray(losses, dtype=float),
    )


def _projection_phase(state, prefs, theta, records, start_iter):
    """Descend violated sub-region constraints until membership holds."""
    config = state.config
    it = start_iter
    while True:
        raw, losses, grads = state.evaluate(theta, records)
        c = constraint_values(prefs, losses)
        if in_subregion(c, 0.0) or it >= config.max_iters:
            return theta, it
        G = gram(grads)
        beta, proj_norm_sq = projection_weights(G, prefs, c)
        records.append(
            IterationRecord(
                iteration=it,
                phase="projection",
                objectives=raw,
                weights=beta,
                stationarity_norm_sq=proj_norm_sq,
                constraint_values=c,
            )
        )
        coef = np.zeros(grads.shape[0])
        for j in np.flatnonzero(beta):
            coef += beta[j] * constraint_gradient_coefficients(
                prefs, int(j), grads.shape[0]
            )
        theta = theta - config.lr_at(it) * (coef @ grads)
        it += 1


def project_to_subregion(problem, prefs, config, theta0):
    """Run only the projection stage; returns (theta, trace fragment)."""
    prefs.require_chosen()
    state = _RunState(problem, config)
    records = []
    theta = np.array(theta0, dtype=float)
    theta, _ = _projection_phase(state, prefs, theta, records, 0)
    return theta, records


def train(problem, mode, config, theta0):
    """Optimize a problem under a weighting mode; returns the full trace.

    GBOPreference runs project into the chosen sub-region first, then
    descend with the joint constrained weights; the active set re-engages
    automatically if the trajectory drifts out mid-run. Stationarity is
    certified on the plain objective min-norm value, so a "stationary"
    terminal reason always re-verifies against the KKT check.
    """
    state = _RunState(problem, config)
    theta = np.array(theta0, dtype=float)
    records = []
    it = 0
    prefs = mode.prefs if isinstance(mode, GBOPreference) else None
    if prefs is not None:
        theta, it = _projection_phase(state, prefs, theta, records, 0)
    velocity = np.zeros_like(theta)
    reason = "max_iters"
    while it < config.max_iters:
        if problem.on_iteration is not None:
            problem.on_iteration(it)
        raw, losses, grads = state.evaluate(theta, records)
        G = gram(grads)
        cvals = None
        if isinstance(mode, FixedLS):
            w = np.array(mode.weights)
            if w.size != G.shape[0]:
                raise ValueError(
                    f"FixedLS carries {w.size} weights for {G.shape[0]} objectives"
                )
            stat = float(w @ G @ w)
        elif isinstance(mode, GBO):
            sol = min_norm_simplex(G)
            w = sol.alpha
            stat = sol.norm_sq
        elif isinstance(mode, GBOPreference):
            sol = min_norm_simplex(G)
            stat = sol.norm_sq
            cvals = constraint_values(prefs, losses)
            w = combined_weights(G, prefs, cvals).gamma
        else:
            raise ValueError(f"unknown weighting mode {mode!r}")
        records.append(
            IterationRecord(
                iteration=it,
                phase="descent",
                objectives=raw,
                weights=w,
                stationarity_norm_sq=stat,
                constraint_values=cvals,
            )
        )
        if stat <= config.stationarity_eps and (
            cvals is None or in_subregion(cvals, 0.0)
        ):
            reason = "stationary"
            break
        velocity = config.momentum * velocity + w @ grads
        theta = theta - config.lr_at(it) * velocity
        it += 1
    final_objectives = np.asarray(problem.f(theta), dtype=float)
    max_constraint = None
    if prefs is not None:
        final_losses = final_objectives
        if state.baseline is not None:
            final_losses = final_objectives / state.baseline
        max_constraint = float(np.max(constraint_values(prefs, final_losses)))
    return RunTrace(
        records=records,
        reason=reason,
        final_parameters=theta,
        final_objectives=final_objectives,
        max_constraint=max_constraint,
    )
