"""Approximate maximum-entropy fitting by L1-regularised dual descent.

The joint-mode dual being minimised is

    g(lambda) = -sum_k lambda_k t_k + log sum_x exp(sum_k lambda_k f_k(x))
                + sum_k eps_k |lambda_k| ,

whose subgradient component k is E_phat[f_k] - t_k + eps_k sign(lambda_k).
Conditional mode replaces the log-sum by its expectation over a fixed
cause marginal, one log-normaliser per cause assignment.  Conditional-mean
constraints are compiled to condition-gated features whose unconditional
targets are the conditional means times the condition probability under
the cause marginal; residuals and tolerances are reported in the original
conditional-mean units.

All log-normalisers go through log-sum-exp; raw exponentials of
multiplier sums never appear.  Moment sums are plain numpy reductions
(pairwise summation), so results do not depend on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import (
    Assignment,
    Constraint,
    ConstraintSet,
    DEFAULT_STATE_CAP,
    FeatureSpec,
    TabularDistribution,
    VariableSet,
    ZeroMassError,
    feature_matrix,
)

__all__ = [
    "OptimizerConfig",
    "MaxEntProblem",
    "MaxEntSolution",
    "NotConvergedError",
    "InfeasibleTargetError",
    "NonFiniteError",
    "dual_objective",
    "dual_gradient",
    "log_partition",
    "fit",
]


class NotConvergedError(RuntimeError):
    """Fit did not reach the tolerance; carries the diagnostic solution."""

    def __init__(self, message: str, solution: "MaxEntSolution"):
        super().__init__(message)
        self.solution = solution


class InfeasibleTargetError(ValueError):
    """A target lies outside the attainable range of its feature."""


class NonFiniteError(FloatingPointError):
    """Non-finite intermediate; inputs must be finite so the log-sum-exp
    path (the default) can do its job."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Step control for the proximal gradient descent in fit().

    tol is the convergence tolerance on the worst slack-adjusted moment
    residual (and, for nonzero multipliers, the stationarity residual),
    measured in the constraint's own units. 0.001 is the default; property
    tests use the strict 1e-8 mode.
    """

    tol: float = 1e-3
    max_iter: int = 50_000
    objective: Literal["dual", "squared-residual"] = "dual"
    init_step: float = 1.0
    backtrack: float = 0.5
    step_growth: float = 1.25
    accelerate: bool = True
    check_every: int = 1
    state_cap: int = DEFAULT_STATE_CAP

    def strict(self) -> "OptimizerConfig":
        return replace(self, tol=1e-8)


@dataclass(frozen=True, eq=False)
class MaxEntProblem:
    """A maximum-entropy fitting problem.

    target None means joint mode (maximise H(X) subject to the
    constraints).  With a target variable, the conditional entropy
    H(target | rest) is maximised with the cause marginal held fixed:
    either a provided TabularDistribution over the remaining variables, or
    the string "estimated", in which case a joint MAXENT marginal is first
    fitted from the constraints whose scopes exclude the target.
    """

    vars: VariableSet
    constraints: ConstraintSet
    target: str | None = None
    cause_marginal: TabularDistribution | str | None = None
    config: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        self.constraints.validate(self.vars)
        if self.target is None:
            if self.cause_marginal is not None:
                raise ValueError("cause_marginal only applies in conditional mode")
            for c in self.constraints:
                if c.condition is not None:
                    raise ValueError(
                        "conditional-mean constraints need conditional mode "
                        f"(constraint on {c.feature.id!r})"
                    )
            return
        if self.target not in self.vars:
            raise KeyError(f"target {self.target!r} is not a variable")
        if self.cause_marginal is None:
            raise ValueError("conditional mode needs cause_marginal (or 'estimated')")
        if isinstance(self.cause_marginal, str) and self.cause_marginal != "estimated":
            raise ValueError(f"unknown cause_marginal {self.cause_marginal!r}")
        estimated = isinstance(self.cause_marginal, str)
        for c in self.constraints:
            if c.condition is not None and self.target in c.condition.scope:
                raise ValueError("condition scope may not contain the target")
            if self.target not in c.feature.scope:
                if not estimated:
                    raise ValueError(
                        f"constraint on {c.feature.id!r} does not involve the target; "
                        "cause-side constraints are only used with cause_marginal='estimated'"
                    )
        if isinstance(self.cause_marginal, TabularDistribution):
            expected = self.vars.drop(self.target).names
            if self.cause_marginal.vars.names != expected:
                raise ValueError(
                    f"cause marginal is over {self.cause_marginal.vars.names}, "
                    f"expected {expected}"
                )

    @property
    def mode(self) -> str:
        return "joint" if self.target is None else "conditional"

    @classmethod
    def joint(cls, vars, constraints, config=None) -> "MaxEntProblem":
        return cls(vars, constraints, config=config or OptimizerConfig())

    @classmethod
    def conditional(
        cls, vars, constraints, target, cause_marginal, config=None
    ) -> "MaxEntProblem":
        return cls(
            vars,
            constraints,
            target=target,
            cause_marginal=cause_marginal,
            config=config or OptimizerConfig(),
        )

    def split_stage_constraints(self) -> tuple[ConstraintSet, ConstraintSet]:
        """(cause-side, target-side) constraints for two-stage estimated fits."""
        cause, tgt = [], []
        for c in self.constraints:
            (tgt if self.target in c.feature.scope else cause).append(c)
        return ConstraintSet.of(cause), ConstraintSet.of(tgt)


# ---------------------------------------------------------------------------
# compiled representation


@dataclass(eq=False)
class _Compiled:
    mode: str
    constraints: tuple[Constraint, ...]
    raw_targets: np.ndarray      # in the constraints' own units
    raw_slacks: np.ndarray
    weights: np.ndarray          # 1 for plain means, P(condition) for conditional means
    targets: np.ndarray          # compiled units: raw * weight
    slacks: np.ndarray
    F: np.ndarray | None = None          # joint: (n_states, K)
    G: np.ndarray | None = None          # conditional: (C, T, K), condition-gated
    gates: tuple | None = None           # per constraint: None or bool (C,)
    cause_weights: np.ndarray | None = None   # (C,)
    cause_vars: VariableSet | None = None
    target_var: str | None = None
    vars: VariableSet | None = None

    @property
    def k(self) -> int:
        return len(self.constraints)


def _conditional_grid(vars: VariableSet, target: str) -> tuple[VariableSet, np.ndarray]:
    """Full-state level matrix arranged cause-major, target fastest.

    Returns the cause variable set and a (C*T, n_vars) matrix whose rows
    are grouped by cause assignment, with the target level varying within
    each group.
    """
    cause_vars = vars.drop(target)
    t_i = vars.index(target)
    t_dim = len(vars.domain(target))
    cause_states = cause_vars.state_matrix()
    C = len(cause_states)
    full = np.empty((C * t_dim, len(vars)), dtype=np.int64)
    cause_cols = [i for i in range(len(vars)) if i != t_i]
    full[:, cause_cols] = np.repeat(cause_states, t_dim, axis=0)
    full[:, t_i] = np.tile(np.arange(t_dim), C)
    return cause_vars, full


def _compile(
    problem: MaxEntProblem,
    constraints: ConstraintSet,
    cause_marginal: TabularDistribution | None,
) -> _Compiled:
    vars = problem.vars
    vars.check_cap(problem.config.state_cap)
    raw_targets = constraints.targets
    raw_slacks = constraints.slacks
    if not (np.isfinite(raw_targets).all() and np.isfinite(raw_slacks).all()):
        raise NonFiniteError("constraint targets and slacks must be finite")
    if problem.mode == "joint":
        F = feature_matrix(vars, [c.feature for c in constraints])
        ones = np.ones(len(constraints))
        return _Compiled(
            mode="joint",
            constraints=constraints.constraints,
            raw_targets=raw_targets,
            raw_slacks=raw_slacks,
            weights=ones,
            targets=raw_targets.copy(),
            slacks=raw_slacks.copy(),
            F=F,
            vars=vars,
        )

    target = problem.target
    cause_vars, grid = _conditional_grid(vars, target)
    T = len(vars.domain(target))
    C = len(grid) // T
    if cause_marginal is None:
        raise ValueError("conditional compile needs a resolved cause marginal")
    w_c = cause_marginal.probs
    feats = feature_matrix(vars, [c.feature for c in constraints], grid)
    feats = feats.reshape(C, T, len(constraints))
    weights = np.ones(len(constraints))
    gates: list = [None] * len(constraints)
    cause_states = cause_vars.state_matrix()
    for k, c in enumerate(constraints):
        if c.condition is None:
            continue
        gate = np.ones(C, dtype=bool)
        for name, value in c.condition.items:
            j = cause_vars.index(name)
            gate &= cause_states[:, j] == cause_vars.variable(name).level(value)
        p_cond = float(w_c[gate].sum())
        if p_cond <= 0.0:
            raise ZeroMassError(
                f"condition {c.condition.key()} has zero probability under the "
                "cause marginal; its conditional mean is undefined"
            )
        feats[:, :, k] *= gate[:, None]
        weights[k] = p_cond
        gates[k] = gate
    return _Compiled(
        mode="conditional",
        constraints=constraints.constraints,
        raw_targets=raw_targets,
        raw_slacks=raw_slacks,
        weights=weights,
        targets=raw_targets * weights,
        slacks=raw_slacks * weights,
        G=feats,
        gates=tuple(gates),
        cause_weights=w_c,
        cause_vars=cause_vars,
        target_var=target,
        vars=vars,
    )


def _check_feasible(comp: _Compiled) -> None:
    """Necessary per-constraint range check: each target must be attainable
    within its slack by some distribution (strictly, when slack is zero).

    Joint mode: the attainable range of E[f] is the feature's range over
    the states.  Conditional mode: the cause marginal is fixed, so the
    attainable range of the compiled moment is the marginal-weighted sum
    of the per-cause-state min/max over the target values, divided by the
    constraint's weight to land in its own units.
    """
    for k, c in enumerate(comp.constraints):
        if comp.mode == "joint":
            vals = comp.F[:, k]
            lo, hi = float(vals.min()), float(vals.max())
        else:
            grid = comp.G[:, :, k]
            w = comp.weights[k]
            lo = float(comp.cause_weights @ grid.min(axis=1)) / w
            hi = float(comp.cause_weights @ grid.max(axis=1)) / w
        t, s = float(c.target), float(c.slack)
        if lo == hi:
            if abs(t - lo) > s + 1e-12:
                raise InfeasibleTargetError(
                    f"{c.feature.id!r}: feature is constant {lo} but target is {t}"
                )
            continue
        if s == 0.0:
            if not (lo < t < hi):
                raise InfeasibleTargetError(
                    f"{c.feature.id!r}: target {t} outside the open attainable "
                    f"range ({lo}, {hi}) with zero slack"
                )
        else:
            if t - s >= hi or t + s <= lo:
                raise InfeasibleTargetError(
                    f"{c.feature.id!r}: interval [{t - s}, {t + s}] does not meet "
                    f"the attainable range ({lo}, {hi})"
                )


def _smooth_value_grad(
    comp: _Compiled, lam: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and gradient of the smooth dual part, plus fitted moments."""
    if not np.isfinite(lam).all():
        raise NonFiniteError(
            "non-finite multipliers; all normalisations use log-sum-exp, so "
            "finite inputs stay finite"
        )
    if comp.mode == "joint":
        logits = comp.F @ lam
        alpha = float(logsumexp(logits))
        p = np.exp(logits - alpha)
        moments = p @ comp.F
        value = alpha - float(lam @ comp.targets)
        return value, moments - comp.targets, moments
    logits = comp.G @ lam                      # (C, T)
    beta = logsumexp(logits, axis=1)           # (C,)
    p_cond = np.exp(logits - beta[:, None])    # (C, T)
    moments = np.einsum("c,ct,ctk->k", comp.cause_weights, p_cond, comp.G)
    value = float(comp.cause_weights @ beta) - float(lam @ comp.targets)
    return value, moments - comp.targets, moments


def _residuals(comp: _Compiled, moments: np.ndarray) -> np.ndarray:
    """|E[f] - target| per constraint, in the constraint's own units."""
    return np.abs(moments - comp.targets) / comp.weights


def _kkt_residual(comp: _Compiled, lam: np.ndarray, moments: np.ndarray) -> float:
    """Worst-case optimality violation in target units.

    For a nonzero multiplier the stationarity condition is
    E[f] - target = -eps * sign(lambda); at zero it is |E[f] - target| <= eps.
    With zero slack both reduce to the plain moment residual, the
    convergence criterion used throughout.
    """
    diff = (moments - comp.targets) / comp.weights
    active = np.abs(diff + comp.raw_slacks * np.sign(lam))
    at_zero = np.maximum(np.abs(diff) - comp.raw_slacks, 0.0)
    per = np.where(lam != 0.0, active, at_zero)
    return float(per.max()) if len(per) else 0.0


LAMBDA_DIVERGENCE_CAP = 1e6


def _soft_threshold(x: np.ndarray, radius: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - radius, 0.0)


def _prox_descend(comp: _Compiled, config: OptimizerConfig) -> tuple[np.ndarray, bool, int]:
    """FISTA-style proximal gradient descent on the compiled dual."""
    k = comp.k
    lam = np.zeros(k)
    if k == 0:
        return lam, True, 0
    y = lam.copy()
    t_mom = 1.0
    eta = config.init_step
    val_l, _, moments_l = _smooth_value_grad(comp, lam)
    obj_l = val_l + float(comp.slacks @ np.abs(lam))
    iterations = 0
    converged = False
    for it in range(config.max_iter):
        iterations = it + 1
        if it % config.check_every == 0 and _kkt_residual(comp, lam, moments_l) < config.tol:
            converged = True
            break
        if float(np.abs(lam).max(initial=0.0)) > LAMBDA_DIVERGENCE_CAP:
            break   # unbounded dual (infeasible targets); diagnose, don't overflow
        val_y, grad_y, _ = _smooth_value_grad(comp, y)
        # backtracking line search on the smooth majoriser
        fudge = 1e-12 * max(1.0, abs(val_y))
        while True:
            cand = _soft_threshold(y - eta * grad_y, eta * comp.slacks)
            step = cand - y
            val_c, _, moments_c = _smooth_value_grad(comp, cand)
            bound = val_y + float(grad_y @ step) + float(step @ step) / (2 * eta)
            if val_c <= bound + fudge:
                break
            eta *= config.backtrack
            if eta < 1e-18:
                break
        obj_c = val_c + float(comp.slacks @ np.abs(cand))
        if config.accelerate and obj_c > obj_l + fudge:
            # adaptive restart: drop momentum, retry from the last iterate
            y = lam.copy()
            t_mom = 1.0
            continue
        if config.accelerate:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
            y = cand + ((t_mom - 1.0) / t_next) * (cand - lam)
            t_mom = t_next
        else:
            y = cand
        lam, val_l, moments_l, obj_l = cand, val_c, moments_c, obj_c
        eta = min(eta * config.step_growth, 1e8)
    if not converged:
        converged = _kkt_residual(comp, lam, moments_l) < config.tol
    return lam, converged, iterations


def _squared_residual_descend(
    comp: _Compiled, config: OptimizerConfig
) -> tuple[np.ndarray, bool, int]:
    """Alternative objective: slack-hinged squared moment residuals.

    Minimises sum_k max(0, |E[f_k] - t_k| - eps_k)^2 in target units with
    L-BFGS; with zero slack this is the plain sum of squared residuals.
    """
    from scipy.optimize import minimize

    k = comp.k
    if k == 0:
        return np.zeros(0), True, 0

    def val_grad(lam):
        if comp.mode == "joint":
            logits = comp.F @ lam
            alpha = logsumexp(logits)
            p = np.exp(logits - alpha)
            moments = p @ comp.F
            centred = comp.F - moments[None, :]
            cov = (centred * p[:, None]).T @ centred
        else:
            logits = comp.G @ lam
            beta = logsumexp(logits, axis=1)
            p_cond = np.exp(logits - beta[:, None])
            moments = np.einsum("c,ct,ctk->k", comp.cause_weights, p_cond, comp.G)
            mean_c = np.einsum("ct,ctk->ck", p_cond, comp.G)
            centred = comp.G - mean_c[:, None, :]
            cov = np.einsum(
                "c,ct,cti,ctj->ij", comp.cause_weights, p_cond, centred, centred
            )
        diff = (moments - comp.targets) / comp.weights
        hinged = np.sign(diff) * np.maximum(np.abs(diff) - comp.raw_slacks, 0.0)
        value = float(hinged @ hinged)
        grad = 2.0 * (cov @ (hinged / comp.weights))
        return value, grad

    res = minimize(
        val_grad,
        np.zeros(k),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iter, "ftol": 1e-18, "gtol": 1e-14},
    )
    lam = res.x
    _, _, moments = _smooth_value_grad(comp, lam)
    resid = np.maximum(_residuals(comp, moments) - comp.raw_slacks, 0.0)
    converged = bool(resid.max() < config.tol) if len(resid) else True
    return lam, converged, int(res.nit)


# ---------------------------------------------------------------------------
# public operations


def _resolve_cause_marginal(
    problem: MaxEntProblem,
) -> tuple[TabularDistribution | None, "MaxEntSolution | None"]:
    if problem.mode == "joint":
        return None, None
    if isinstance(problem.cause_marginal, TabularDistribution):
        return problem.cause_marginal, None
    cause_side, _ = problem.split_stage_constraints()
    cause_vars = problem.vars.drop(problem.target)
    sub = MaxEntProblem.joint(cause_vars, cause_side, config=problem.config)
    sub_solution = fit(sub)
    return sub_solution.joint(), sub_solution


def _target_side(problem: MaxEntProblem) -> ConstraintSet:
    if problem.mode == "joint":
        return problem.constraints
    _, tgt = problem.split_stage_constraints()
    return tgt


def dual_objective(problem: MaxEntProblem, lambdas: Sequence[float]) -> float:
    """Value of the L1-regularised dual at the given multipliers.

    Sign convention: this is the minimised form, so at an exact-constraint
    optimum the value equals the entropy of the fitted distribution.
    """
    marginal, _ = _resolve_cause_marginal(problem)
    comp = _compile(problem, _target_side(problem), marginal)
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (comp.k,):
        raise ValueError(f"expected {comp.k} multipliers, got {lam.shape}")
    value, _, _ = _smooth_value_grad(comp, lam)
    return value + float(comp.slacks @ np.abs(lam))


def dual_gradient(problem: MaxEntProblem, lambdas: Sequence[float]) -> np.ndarray:
    """Subgradient of the dual: E[f_k] - t_k + eps_k sign(lambda_k).

    Uses sign(0) = 0; the solver itself resolves the subgradient interval
    at zero with soft-thresholding.
    """
    marginal, _ = _resolve_cause_marginal(problem)
    comp = _compile(problem, _target_side(problem), marginal)
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (comp.k,):
        raise ValueError(f"expected {comp.k} multipliers, got {lam.shape}")
    _, smooth_grad, _ = _smooth_value_grad(comp, lam)
    return smooth_grad + comp.slacks * np.sign(lam)


def log_partition(problem: MaxEntProblem, lambdas: Sequence[float]):
    """Log-normaliser: a float in joint mode, per-cause-assignment array in
    conditional mode (indexed in cause state order)."""
    marginal, _ = _resolve_cause_marginal(problem)
    comp = _compile(problem, _target_side(problem), marginal)
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (comp.k,):
        raise ValueError(f"expected {comp.k} multipliers, got {lam.shape}")
    if not np.isfinite(lam).all():
        raise NonFiniteError("non-finite multipliers")
    if comp.mode == "joint":
        return float(logsumexp(comp.F @ lam))
    return logsumexp(comp.G @ lam, axis=1)


@dataclass(frozen=True, eq=False)
class MaxEntSolution:
    """Fitted multipliers plus everything needed to query the distribution."""

    problem: MaxEntProblem
    fitted_constraints: tuple[Constraint, ...]
    lambdas: np.ndarray
    log_partition: float | np.ndarray
    converged: bool
    residuals: np.ndarray
    kkt_residual: float
    iterations: int
    cause_marginal: TabularDistribution | None = None
    cause_solution: "MaxEntSolution | None" = None
    objective_value: float = float("nan")

    @property
    def mode(self) -> str:
        return self.problem.mode

    @property
    def keys(self) -> tuple[tuple[str, str], ...]:
        return tuple(c.key for c in self.fitted_constraints)

    def lambda_for(self, feature_id: str, condition: Assignment | None = None) -> float:
        key = (feature_id, condition.key() if condition else "")
        for c, lam in zip(self.fitted_constraints, self.lambdas):
            if c.key == key:
                return float(lam)
        raise KeyError(f"no multiplier for {key}")

    def _require_converged(self) -> None:
        if not self.converged:
            raise NotConvergedError(
                f"refusing to query an unconverged solution "
                f"(kkt residual {self.kkt_residual:.3g})",
                self,
            )

    def _compiled(self) -> _Compiled:
        comp = getattr(self, "_comp_cache", None)
        if comp is None:
            comp = _compile(
                self.problem,
                ConstraintSet.of(self.fitted_constraints),
                self.cause_marginal,
            )
            object.__setattr__(self, "_comp_cache", comp)
        return comp

    def joint(self) -> TabularDistribution:
        """The fitted joint distribution as an explicit table."""
        self._require_converged()
        comp = self._compiled()
        if comp.mode == "joint":
            logits = comp.F @ self.lambdas
            p = np.exp(logits - logsumexp(logits))
            return TabularDistribution.from_weights(self.problem.vars, p)
        logits = comp.G @ self.lambdas
        beta = logsumexp(logits, axis=1)
        p_cond = np.exp(logits - beta[:, None])
        joint_cm = p_cond * comp.cause_weights[:, None]   # (C, T)
        # scatter back into full row-major order over problem.vars
        vars = self.problem.vars
        t_i = vars.index(self.problem.target)
        cause_vars = comp.cause_vars
        C, T = joint_cm.shape
        full = np.empty(vars.n_states)
        grid_cause = cause_vars.state_matrix()
        levels = np.empty((C * T, len(vars)), dtype=np.int64)
        cause_cols = [i for i in range(len(vars)) if i != t_i]
        levels[:, cause_cols] = np.repeat(grid_cause, T, axis=0)
        levels[:, t_i] = np.tile(np.arange(T), C)
        idx = np.ravel_multi_index(tuple(levels.T), vars.dims)
        full[idx] = joint_cm.ravel()
        return TabularDistribution.from_weights(vars, full)

    def query_prob(self, x: Assignment) -> float:
        """Probability of a full assignment under the fitted joint."""
        self._require_converged()
        comp = self._compiled()
        if comp.mode == "joint":
            logits = comp.F @ self.lambdas
            alpha = logsumexp(logits)
            i = self.problem.vars.state_index(x)
            return float(np.exp(logits[i] - alpha))
        cause_x = Assignment({k: v for k, v in x.items if k != self.problem.target})
        cond = self.query_conditional(x[self.problem.target], cause_x)
        return cond * self.cause_marginal.prob(cause_x)

    def query_conditional(self, target_value, cause_assignment: Assignment) -> float:
        """p(target = value | causes) in conditional mode."""
        self._require_converged()
        if self.mode != "conditional":
            raise ValueError("query_conditional needs a conditional-mode solution")
        comp = self._compiled()
        c = comp.cause_vars.state_index(cause_assignment)
        t = self.problem.vars.variable(self.problem.target).level(target_value)
        logits = comp.G[c] @ self.lambdas      # (T,)
        beta = logsumexp(logits)
        return float(np.exp(logits[t] - beta))

    def query_moment(self, feature: FeatureSpec) -> float:
        """E[feature] under the fitted joint."""
        self._require_converged()
        return self.joint().moment(feature)

    def entropy(self) -> float:
        self._require_converged()
        if self.mode == "joint":
            return self.joint().entropy()
        comp = self._compiled()
        logits = comp.G @ self.lambdas
        beta = logsumexp(logits, axis=1)
        p_cond = np.exp(logits - beta[:, None])
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p_cond > 0, p_cond * np.log(p_cond), 0.0)
        return float(-(comp.cause_weights @ plogp.sum(axis=1)))


def fit(problem: MaxEntProblem) -> MaxEntSolution:
    """Fit the approximate MAXENT distribution for the problem.

    Raises InfeasibleTargetError when a target is outside its feature's
    attainable range, and NotConvergedError (carrying the diagnostic
    solution) when the optimizer exhausts max_iter above tolerance.
    In conditional mode with cause_marginal="estimated", a joint MAXENT
    marginal over the causes is fitted first from the cause-side
    constraints.
    """
    marginal, cause_solution = _resolve_cause_marginal(problem)
    constraints = _target_side(problem)
    comp = _compile(problem, constraints, marginal)
    _check_feasible(comp)
    if problem.config.objective == "squared-residual":
        lam, converged, iterations = _squared_residual_descend(comp, problem.config)
    else:
        lam, converged, iterations = _prox_descend(comp, problem.config)
    value, _, moments = _smooth_value_grad(comp, lam)
    solution = MaxEntSolution(
        problem=problem,
        fitted_constraints=comp.constraints,
        lambdas=lam,
        log_partition=_log_partition_of(comp, lam),
        converged=converged,
        residuals=_residuals(comp, moments),
        kkt_residual=_kkt_residual(comp, lam, moments),
        iterations=iterations,
        cause_marginal=marginal,
        cause_solution=cause_solution,
        objective_value=value + float(comp.slacks @ np.abs(lam)),
    )
    if not converged:
        raise NotConvergedError(
            f"no convergence after {iterations} iterations; worst residual "
            f"{solution.kkt_residual:.3g} (tol {problem.config.tol})",
            solution,
        )
    return solution


def _log_partition_of(comp: _Compiled, lam: np.ndarray):
    if comp.mode == "joint":
        return float(logsumexp(comp.F @ lam))
    return logsumexp(comp.G @ lam, axis=1)
