"""Discrete domain model: variables, assignments, features, constraints.

Everything downstream (solver, causal readout, effect estimation, the
simulation harness) works on exact enumerations of small discrete state
spaces, so the types here are immutable and cheap to share.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

DEFAULT_STATE_CAP = 2**22

RANK_TOL = 1e-9


class StateSpaceError(ValueError):
    """Raised when a state space exceeds the enumeration cap."""


class MissingCellError(ValueError):
    """Raised when a conditioning cell contains no observations."""


class ZeroMassError(ValueError):
    """Raised when conditioning on an event of probability zero."""


class LinearDependenceError(ValueError):
    """Raised when a feature set fails the linear-independence rank test."""


@dataclass(frozen=True)
class Variable:
    name: str
    domain: tuple

    def __post_init__(self):
        if not self.domain:
            raise ValueError(f"variable {self.name!r} has an empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise ValueError(f"variable {self.name!r} has duplicate domain values")

    def level(self, value) -> int:
        """Index of a value in the declared domain order."""
        try:
            return self.domain.index(value)
        except ValueError:
            raise ValueError(
                f"value {value!r} not in domain of {self.name!r}: {self.domain}"
            ) from None


@dataclass(frozen=True)
class VariableSet:
    """Ordered collection of named discrete variables.

    Enumeration of the joint state space is row-major over the declared
    order: the first variable varies slowest. Numeric coding for product
    features is the domain index in declaration order, so a binary domain
    declared as (0, 1) codes to {0, 1}.
    """

    variables: tuple[Variable, ...]

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names: {names}")

    @classmethod
    def of(cls, items: Mapping[str, Sequence] | Iterable[tuple[str, Sequence]]) -> "VariableSet":
        pairs = items.items() if isinstance(items, Mapping) else items
        return cls(tuple(Variable(name, tuple(dom)) for name, dom in pairs))

    @classmethod
    def binary(cls, *names: str) -> "VariableSet":
        return cls(tuple(Variable(n, (0, 1)) for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def __len__(self) -> int:
        return len(self.variables)

    def __contains__(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    def index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise KeyError(f"unknown variable {name!r}")

    def variable(self, name: str) -> Variable:
        return self.variables[self.index(name)]

    def domain(self, name: str) -> tuple:
        return self.variable(name).domain

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(v.domain) for v in self.variables)

    @property
    def n_states(self) -> int:
        return math.prod(self.dims)

    def check_cap(self, cap: int = DEFAULT_STATE_CAP) -> None:
        if self.n_states > cap:
            raise StateSpaceError(
                f"state space has {self.n_states} states, exceeding the cap of {cap}"
            )

    def state_matrix(self, cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
        """(n_states, n_vars) matrix of level indices, row-major order."""
        self.check_cap(cap)
        idx = np.unravel_index(np.arange(self.n_states), self.dims)
        return np.stack(idx, axis=1)

    def assignment_at(self, row: Sequence[int]) -> "Assignment":
        """Assignment for a row of level indices (declaration order)."""
        return Assignment(
            {v.name: v.domain[int(level)] for v, level in zip(self.variables, row)}
        )

    def state_index(self, assignment: "Assignment") -> int:
        """Row-major index of a full assignment."""
        levels = [
            v.level(assignment[v.name]) for v in self.variables
        ]
        return int(np.ravel_multi_index(tuple(levels), self.dims))

    def subset(self, names: Sequence[str]) -> "VariableSet":
        """Variable set over ``names`` in the given order."""
        return VariableSet(tuple(self.variable(n) for n in names))

    def drop(self, name: str) -> "VariableSet":
        return VariableSet(tuple(v for v in self.variables if v.name != name))


def enumerate_states(
    vars: VariableSet, cap: int = DEFAULT_STATE_CAP
) -> Iterator["Assignment"]:
    """Yield every full assignment in deterministic row-major order."""
    vars.check_cap(cap)
    domains = [v.domain for v in vars.variables]
    names = vars.names
    for combo in itertools.product(*domains):
        yield Assignment(dict(zip(names, combo)))


class Assignment:
    """Values for the variables in a (full or partial) scope.

    Stored sorted by variable name, so equality and the canonical string
    key do not depend on construction order.
    """

    __slots__ = ("items",)

    def __init__(self, values: Mapping[str, Any] | Iterable[tuple[str, Any]]):
        pairs = values.items() if isinstance(values, Mapping) else values
        object.__setattr__(self, "items", tuple(sorted(pairs, key=lambda kv: kv[0])))

    def __setattr__(self, *_):
        raise AttributeError("Assignment is immutable")

    @classmethod
    def of(cls, **values) -> "Assignment":
        return cls(values)

    @property
    def scope(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.items)

    def __getitem__(self, name: str):
        for k, v in self.items:
            if k == name:
                return v
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(k == name for k, _ in self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.scope)

    def as_dict(self) -> dict:
        return dict(self.items)

    def __eq__(self, other) -> bool:
        return isinstance(other, Assignment) and self.items == other.items

    def __hash__(self) -> int:
        return hash(self.items)

    def __repr__(self) -> str:
        return f"Assignment({dict(self.items)!r})"

    def key(self) -> str:
        """Canonical ``var=value;var=value`` rendering (sorted by name)."""
        return ";".join(f"{k}={v}" for k, v in self.items)

    def validate(self, vars: VariableSet) -> None:
        for name, value in self.items:
            vars.variable(name).level(value)

    def covers(self, scope: Sequence[str]) -> bool:
        return all(name in self for name in scope)

    def matches(self, other: "Assignment") -> bool:
        """True if this assignment agrees with ``other`` on other's scope."""
        return all(name in self and self[name] == value for name, value in other.items)


@dataclass(frozen=True)
class FeatureSpec:
    """A real-valued function of a subset of the variables.

    kind is one of:
      * ``indicator``: 1.0 when the anchor assignment holds, else 0.0;
      * ``product``: product of the scope variables' numeric codes
        (= domain index in declaration order);
      * ``table``: explicit scope-assignment -> value map, 0.0 for
        combinations not listed.
    """

    id: str
    scope: tuple[str, ...]
    kind: str
    anchor: Assignment | None = None
    table: tuple[tuple[tuple, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("indicator", "product", "table"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if len(set(self.scope)) != len(self.scope):
            raise ValueError(f"feature {self.id!r} has duplicate scope variables")
        if self.kind == "indicator":
            if self.anchor is None or set(self.anchor.scope) != set(self.scope):
                raise ValueError(
                    f"indicator feature {self.id!r} needs an anchor on exactly its scope"
                )
        if self.kind == "table" and self.table is None:
            raise ValueError(f"table feature {self.id!r} needs a table")

    @classmethod
    def indicator(cls, id: str, anchor: Assignment | Mapping[str, Any]) -> "FeatureSpec":
        if not isinstance(anchor, Assignment):
            anchor = Assignment(anchor)
        return cls(id=id, scope=anchor.scope, kind="indicator", anchor=anchor)

    @classmethod
    def product(cls, id: str, scope: Sequence[str]) -> "FeatureSpec":
        return cls(id=id, scope=tuple(scope), kind="product")

    @classmethod
    def value_table(
        cls, id: str, scope: Sequence[str], mapping: Mapping[tuple, float]
    ) -> "FeatureSpec":
        scope = tuple(scope)
        rows = tuple(sorted(((tuple(k), float(v)) for k, v in mapping.items()), key=repr))
        return cls(id=id, scope=scope, kind="table", table=rows)

    def table_lookup(self, values: tuple) -> float:
        for key, val in self.table:
            if key == values:
                return val
        return 0.0


def evaluate_feature(vars: VariableSet, feature: FeatureSpec, x: Assignment) -> float:
    """Evaluate a feature on an assignment covering its scope."""
    for name in feature.scope:
        if name not in x:
            raise KeyError(f"assignment is missing scope variable {name!r}")
    if feature.kind == "indicator":
        return 1.0 if x.matches(feature.anchor) else 0.0
    if feature.kind == "product":
        out = 1.0
        for name in feature.scope:
            out *= vars.variable(name).level(x[name])
        return out
    return feature.table_lookup(tuple(x[name] for name in feature.scope))


def feature_values(
    vars: VariableSet, feature: FeatureSpec, states: np.ndarray | None = None
) -> np.ndarray:
    """Feature value for every enumerated state (vectorised)."""
    if states is None:
        states = vars.state_matrix()
    cols = [vars.index(name) for name in feature.scope]
    if feature.kind == "product":
        out = np.ones(len(states))
        for c in cols:
            out *= states[:, c]
        return out
    if feature.kind == "indicator":
        out = np.ones(len(states), dtype=bool)
        for name in feature.scope:
            level = vars.variable(name).level(feature.anchor[name])
            out &= states[:, vars.index(name)] == level
        return out.astype(float)
    # table
    out = np.zeros(len(states))
    domains = [vars.variable(name).domain for name in feature.scope]
    for key, val in feature.table:
        mask = np.ones(len(states), dtype=bool)
        for name, c, dom, v in zip(feature.scope, cols, domains, key):
            mask &= states[:, c] == dom.index(v)
        out[mask] = val
    return out


def feature_matrix(
    vars: VariableSet, features: Sequence[FeatureSpec], states: np.ndarray | None = None
) -> np.ndarray:
    """(n_states, n_features) matrix of feature values."""
    if states is None:
        states = vars.state_matrix()
    if not features:
        return np.zeros((len(states), 0))
    return np.stack([feature_values(vars, f, states) for f in features], axis=1)


def check_linear_independence(
    vars: VariableSet, features: Sequence[FeatureSpec], tol: float = RANK_TOL
) -> None:
    """Numerical rank test of the features as vectors over the state space."""
    F = feature_matrix(vars, features)
    if F.shape[1] == 0:
        return
    rank = np.linalg.matrix_rank(F, tol=tol * max(1.0, float(np.abs(F).max())))
    if rank < F.shape[1]:
        raise LinearDependenceError(
            f"feature set is linearly dependent: rank {rank} < {F.shape[1]} features"
        )


def univariate_basis(vars: VariableSet, names: Sequence[str] | None = None) -> list[FeatureSpec]:
    """Indicator features for every non-reference level of each variable.

    The first domain value is the reference level, so together with the
    implicit constant these span all univariate functions.
    """
    out = []
    for name in names if names is not None else vars.names:
        dom = vars.domain(name)
        for value in dom[1:]:
            out.append(FeatureSpec.indicator(f"u:{name}={value}", {name: value}))
    return out


def pairwise_basis(
    vars: VariableSet, pairs: Sequence[tuple[str, str]] | None = None
) -> list[FeatureSpec]:
    """Pure-interaction indicator features for variable pairs.

    One feature per pair of non-reference levels; linearly independent of
    the univariate span, so a zero multiplier means no pairwise
    interaction term.
    """
    if pairs is None:
        pairs = list(itertools.combinations(vars.names, 2))
    out = []
    for a, b in pairs:
        for va in vars.domain(a)[1:]:
            for vb in vars.domain(b)[1:]:
                out.append(
                    FeatureSpec.indicator(f"b:{a}={va}*{b}={vb}", {a: va, b: vb})
                )
    return out


def bivariate_basis(vars: VariableSet) -> list[FeatureSpec]:
    """Basis for all univariate and bivariate functions (minus the constant)."""
    return univariate_basis(vars) + pairwise_basis(vars)


def bivariate_span_dim(vars: VariableSet) -> int:
    """Dimension of the space of univariate + bivariate functions."""
    dims = vars.dims
    d = 1 + sum(k - 1 for k in dims)
    for i, j in itertools.combinations(range(len(dims)), 2):
        d += (dims[i] - 1) * (dims[j] - 1)
    return d


def check_bivariate_basis(vars: VariableSet, features: Sequence[FeatureSpec]) -> None:
    """Verify features + constant span exactly the uni/bivariate function space."""
    for f in features:
        if len(f.scope) > 2:
            raise LinearDependenceError(
                f"feature {f.id!r} has scope {f.scope}, larger than bivariate"
            )
    F = feature_matrix(vars, features)
    stacked = np.concatenate([np.ones((F.shape[0], 1)), F], axis=1)
    rank = np.linalg.matrix_rank(stacked, tol=RANK_TOL * max(1.0, float(np.abs(stacked).max())))
    want = bivariate_span_dim(vars)
    if rank < want:
        raise LinearDependenceError(
            f"features span rank {rank} < {want}: not a bivariate basis"
        )


@dataclass(frozen=True)
class Constraint:
    """A moment target for one feature.

    Unconditional (condition None): E[f] should hit ``target`` within
    ``slack``. Conditional: E[f | condition] should, one constraint per
    condition value. ``n_obs`` records the sample size behind the target
    when it came from data.
    """

    feature: FeatureSpec
    target: float
    slack: float = 0.0
    condition: Assignment | None = None
    n_obs: int | None = None

    def __post_init__(self):
        if self.slack < 0:
            raise ValueError(f"negative slack {self.slack} on {self.feature.id!r}")
        if self.condition is not None:
            if len(self.condition) == 0:
                raise ValueError("conditional constraint with empty condition scope")
            overlap = set(self.condition.scope) & set(self.feature.scope)
            if overlap:
                raise ValueError(
                    f"condition scope overlaps feature scope on {sorted(overlap)}"
                )

    @property
    def kind(self) -> str:
        return "mean" if self.condition is None else "cond_mean"

    @property
    def key(self) -> tuple[str, str]:
        return (self.feature.id, self.condition.key() if self.condition else "")

    @property
    def effective_scope(self) -> tuple[str, ...]:
        extra = self.condition.scope if self.condition else ()
        return tuple(sorted(set(self.feature.scope) | set(extra)))


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        keys = [c.key for c in self.constraints]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate constraints for {dupes}")

    @classmethod
    def of(cls, constraints: Iterable[Constraint]) -> "ConstraintSet":
        return cls(tuple(constraints))

    @classmethod
    def merged(cls, sets: Iterable["ConstraintSet"]) -> "ConstraintSet":
        return cls(tuple(c for s in sets for c in s))

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def __getitem__(self, i: int) -> Constraint:
        return self.constraints[i]

    def validate(self, vars: VariableSet) -> None:
        for c in self.constraints:
            for name in c.effective_scope:
                if name not in vars:
                    raise ValueError(
                        f"constraint on {c.feature.id!r} references unknown variable {name!r}"
                    )
            if c.condition is not None:
                c.condition.validate(vars)
            if c.feature.kind == "indicator":
                c.feature.anchor.validate(vars)

    @property
    def targets(self) -> np.ndarray:
        return np.array([c.target for c in self.constraints])

    @property
    def slacks(self) -> np.ndarray:
        return np.array([c.slack for c in self.constraints])


@dataclass(frozen=True, eq=False)
class SampleTable:
    """Observations for a subset of the variables, one row per draw."""

    columns: tuple[str, ...]
    rows: np.ndarray
    provenance: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.columns):
            raise ValueError("rows must be (n, len(columns))")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def validate(self, vars: VariableSet) -> None:
        for name in self.columns:
            dom = set(vars.domain(name))
            seen = set(np.unique(self.column(name)).tolist())
            if not seen <= dom:
                raise ValueError(
                    f"column {name!r} contains values {sorted(seen - dom)} outside its domain"
                )


def _row_levels(vars: VariableSet, data: SampleTable) -> np.ndarray:
    """(n, n_columns) matrix of domain-level indices for the sample rows."""
    lev = np.empty((data.n, len(data.columns)), dtype=np.int64)
    for j, name in enumerate(data.columns):
        dom = vars.domain(name)
        col = data.rows[:, j]
        if dom == (0, 1) and np.issubdtype(np.asarray(col).dtype, np.integer):
            lev[:, j] = col
            continue
        lut = {v: i for i, v in enumerate(dom)}
        try:
            lev[:, j] = [lut[v] for v in col.tolist()]
        except KeyError as err:
            raise ValueError(f"column {name!r} has value outside its domain: {err}")
    return lev


def empirical_moments(
    vars: VariableSet,
    data: SampleTable,
    features: Sequence[FeatureSpec],
    condition_on: Sequence[str] | None = None,
    epsilon_scale: float = 0.0,
) -> ConstraintSet:
    """Constraint targets estimated from a sample.

    Unconditional targets are sample means of the feature values.  With
    ``condition_on``, one conditional-mean constraint is emitted per joint
    value of the conditioning variables; an empty cell raises
    MissingCellError.  Slack follows the 1/sqrt(sample size) rule,
    ``epsilon_scale / sqrt(len(data))``, with the conditioning-cell size
    recorded separately in n_obs.
    """
    for f in features:
        missing = [s for s in f.scope if s not in data.columns]
        if missing:
            raise ValueError(f"feature {f.id!r} needs unobserved columns {missing}")
    sub = vars.subset(data.columns)
    states = sub.state_matrix()
    levels = _row_levels(vars, data)
    row_idx = np.ravel_multi_index(tuple(levels.T), sub.dims)
    vals = {f.id: feature_values(sub, f, states)[row_idx] for f in features}

    slack = float(epsilon_scale) / math.sqrt(data.n) if epsilon_scale else 0.0

    out = []
    if condition_on is None:
        for f in features:
            out.append(
                Constraint(
                    feature=f,
                    target=float(vals[f.id].mean()),
                    slack=slack,
                    n_obs=data.n,
                )
            )
        return ConstraintSet.of(out)

    cond_cols = [data.columns.index(name) for name in condition_on]
    domains = [vars.domain(name) for name in condition_on]
    for combo in itertools.product(*domains):
        mask = np.ones(data.n, dtype=bool)
        for c, value in zip(cond_cols, combo):
            mask &= data.rows[:, c] == value
        cell_n = int(mask.sum())
        cond = Assignment(dict(zip(condition_on, combo)))
        if cell_n == 0:
            raise MissingCellError(f"no observations in conditioning cell {cond.key()}")
        for f in features:
            out.append(
                Constraint(
                    feature=f,
                    target=float(vals[f.id][mask].mean()),
                    slack=slack,
                    condition=cond,
                    n_obs=cell_n,
                )
            )
    return ConstraintSet.of(out)


@dataclass(frozen=True, eq=False)
class TabularDistribution:
    """Exact probability table over the full state space."""

    vars: VariableSet
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.vars.n_states,):
            raise ValueError(
                f"probs has shape {p.shape}, expected ({self.vars.n_states},)"
            )
        if p.min() < -1e-12:
            raise ValueError(f"negative probability {p.min()}")
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        p = np.clip(p, 0.0, None) / p.sum()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_weights(cls, vars: VariableSet, weights: np.ndarray) -> "TabularDistribution":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        return cls(vars, w / total)

    @classmethod
    def uniform(cls, vars: VariableSet) -> "TabularDistribution":
        n = vars.n_states
        return cls(vars, np.full(n, 1.0 / n))

    def prob(self, x: Assignment) -> float:
        return float(self.probs[self.vars.state_index(x)])

    def marginal(self, scope: Sequence[str]) -> "TabularDistribution":
        """Sum out everything not in ``scope``; result ordered as given."""
        scope = tuple(scope)
        for name in scope:
            if name not in self.vars:
                raise KeyError(f"unknown variable {name!r}")
        keep = [self.vars.index(n) for n in scope]
        grid = self.probs.reshape(self.vars.dims)
        drop = tuple(i for i in range(len(self.vars)) if i not in keep)
        reduced = grid.sum(axis=drop) if drop else grid
        # reduced axes are in original order; permute to requested order
        kept_sorted = sorted(keep)
        perm = [kept_sorted.index(i) for i in keep]
        reduced = np.transpose(reduced, perm)
        return TabularDistribution(self.vars.subset(scope), reduced.ravel())

    def condition(self, given: Assignment) -> "TabularDistribution":
        """Distribution of the remaining variables given a partial assignment."""
        given.validate(self.vars)
        grid = self.probs.reshape(self.vars.dims)
        index = [slice(None)] * len(self.vars)
        for name, value in given.items:
            i = self.vars.index(name)
            index[i] = self.vars.variable(name).level(value)
        sub = grid[tuple(index)]
        mass = sub.sum()
        if mass <= 0:
            raise ZeroMassError(f"conditioning event {given.key()} has zero probability")
        rest = [v.name for v in self.vars.variables if v.name not in given]
        return TabularDistribution(self.vars.subset(rest), sub.ravel() / mass)

    def moment(self, feature: FeatureSpec) -> float:
        return float(self.probs @ feature_values(self.vars, feature))

    def conditional_moment(self, feature: FeatureSpec, condition: Assignment) -> float:
        return self.condition(condition).moment(feature)

    def expectation(self, values: np.ndarray) -> float:
        return float(self.probs @ values)

    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-(p * np.log(p)).sum())

    def total_variation(self, other: "TabularDistribution") -> float:
        if self.vars.names != other.vars.names:
            raise ValueError("distributions are over different variables")
        return float(0.5 * np.abs(self.probs - other.probs).sum())

    def sample(self, n: int, rng: np.random.Generator) -> SampleTable:
        states = self.vars.state_matrix()
        picks = rng.choice(len(states), size=n, p=self.probs)
        rows = np.empty((n, len(self.vars)), dtype=object)
        for j, v in enumerate(self.vars.variables):
            dom = np.array(v.domain, dtype=object)
            rows[:, j] = dom[states[picks, j]]
        try:
            rows = rows.astype(int)
        except (TypeError, ValueError):
            pass
        return SampleTable(columns=self.vars.names, rows=rows)

    def constraint_set(
        self,
        features: Sequence[FeatureSpec],
        condition_on: Sequence[str] | None = None,
        slack: float = 0.0,
    ) -> ConstraintSet:
        """Exact population targets, the zero-noise analogue of empirical_moments."""
        out = []
        if condition_on is None:
            for f in features:
                out.append(Constraint(feature=f, target=self.moment(f), slack=slack))
            return ConstraintSet.of(out)
        domains = [self.vars.domain(name) for name in condition_on]
        for combo in itertools.product(*domains):
            cond = Assignment(dict(zip(condition_on, combo)))
            restricted = self.condition(cond)
            for f in features:
                out.append(
                    Constraint(
                        feature=f,
                        target=restricted.moment(f),
                        slack=slack,
                        condition=cond,
                    )
                )
        return ConstraintSet.of(out)


def marginalize(p: TabularDistribution, scope: Sequence[str]) -> TabularDistribution:
    """Marginal of ``p`` on ``scope`` (order as given)."""
    return p.marginal(scope)
