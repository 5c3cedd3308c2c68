"""Causal readout of fitted multipliers.

Edge decisions under a known causal order, the bounded relative-difference
statistic used to call condition multipliers "constant", the bivariate
candidate graph, and a diagnostic check that adjacent pairs actually show
up as non-zero multipliers on exact moments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import (
    FeatureSpec,
    TabularDistribution,
    check_bivariate_basis,
)
from .solver import MaxEntProblem, MaxEntSolution, OptimizerConfig, fit

EXACT_ZERO_THRESHOLD = 1e-4


def relative_difference(lambda_1: float, lambda_2: float) -> float:
    """Bounded relative difference of two multipliers, in [0, 1].

    |l1 - l2| / max(|l1|, |l2|, |l1 - l2|, 1).  Zero iff the multipliers
    are equal; total (defined for all inputs, including both zero).
    """
    diff = abs(lambda_1 - lambda_2)
    return diff / max(abs(lambda_1), abs(lambda_2), diff, 1.0)


def max_relative_difference(lambdas: Sequence[float]) -> float:
    """Largest pairwise relative difference; the >2-condition aggregate."""
    if len(lambdas) < 2:
        raise ValueError("need at least two condition multipliers")
    return max(
        relative_difference(a, b) for a, b in itertools.combinations(lambdas, 2)
    )


@dataclass(frozen=True)
class EdgeDecision:
    """Verdict on one potential cause -> target edge."""

    cause: str
    target: str
    statistic: str              # "theta" or "max_abs_lambda"
    value: float
    threshold: float
    edge: bool
    multipliers: tuple[float, ...]
    multiplier_keys: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "cause": self.cause,
            "target": self.target,
            "statistic": self.statistic,
            "value": self.value,
            "threshold": self.threshold,
            "edge": self.edge,
            "multipliers": list(self.multipliers),
            "multiplier_keys": list(self.multiplier_keys),
        }


def _condition_multipliers(
    solution: MaxEntSolution, cause: str
) -> tuple[list[float], list[str]]:
    """Multipliers of conditional-mean constraints conditioned on ``cause``,
    ordered by the cause's domain."""
    entries = []
    for c, lam in zip(solution.fitted_constraints, solution.lambdas):
        if c.condition is not None and c.condition.scope == (cause,):
            level = solution.problem.vars.variable(cause).level(c.condition[cause])
            entries.append((level, c.key, float(lam)))
    entries.sort()
    return [lam for _, _, lam in entries], [f"{k[0]}|{k[1]}" for _, k, _ in entries]


def _bivariate_multipliers(
    solution: MaxEntSolution, pair: set[str]
) -> tuple[list[float], list[str]]:
    lams, keys = [], []
    for c, lam in zip(solution.fitted_constraints, solution.lambdas):
        if c.condition is None and set(c.feature.scope) == pair:
            lams.append(float(lam))
            keys.append(c.feature.id)
    return lams, keys


def decide_edge_known_order(
    solution: MaxEntSolution, cause: str, t: float = 0.15
) -> EdgeDecision:
    """Edge verdict for cause -> target from a causal-order fit.

    Requires a conditional-mode solution (the API's way of making the
    "target cannot influence the causes" assumption explicit).  With
    conditional-mean constraints the statistic is the max pairwise
    relative difference of the cause's condition multipliers; with plain
    bivariate constraints it is max |lambda| over the pair's features,
    scaled by the largest bivariate multiplier magnitude (floor 1).
    Ties at the threshold are called edges: no-edge iff statistic < t.
    """
    if solution.mode != "conditional":
        raise ValueError("edge decisions need a solution fitted in causal order")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold {t} outside [0, 1]")
    target = solution.problem.target
    if cause == target or cause not in solution.problem.vars:
        raise KeyError(f"{cause!r} is not a cause variable of this fit")

    lams, keys = _condition_multipliers(solution, cause)
    if lams:
        if len(lams) < 2:
            raise ValueError(
                f"cause {cause!r} has a single condition multiplier; "
                "constancy across conditions is undefined"
            )
        value = max_relative_difference(lams)
        return EdgeDecision(
            cause=cause,
            target=target,
            statistic="theta",
            value=value,
            threshold=t,
            edge=value >= t,
            multipliers=tuple(lams),
            multiplier_keys=tuple(keys),
        )

    lams, keys = _bivariate_multipliers(solution, {cause, target})
    if not lams:
        raise ValueError(f"no constraints tie {cause!r} to the target {target!r}")
    all_biv = []
    for other in solution.problem.vars.names:
        if other in (target,):
            continue
        vals, _ = _bivariate_multipliers(solution, {other, target})
        all_biv.extend(vals)
    scale = max(max((abs(v) for v in all_biv), default=0.0), 1.0)
    value = max(abs(v) for v in lams)
    return EdgeDecision(
        cause=cause,
        target=target,
        statistic="max_abs_lambda",
        value=value,
        threshold=t,
        edge=value >= t * scale,
        multipliers=tuple(lams),
        multiplier_keys=tuple(keys),
    )


def edge_report(
    solution: MaxEntSolution, t: float = 0.15, causes: Sequence[str] | None = None
) -> list[EdgeDecision]:
    """Edge decisions for every cause (or the ones given), in order."""
    if solution.mode != "conditional":
        raise ValueError("edge decisions need a solution fitted in causal order")
    target = solution.problem.target
    if causes is None:
        causes = [n for n in solution.problem.vars.names if n != target]
    return [decide_edge_known_order(solution, c, t) for c in causes]


def render_edge_table(decisions: Sequence[EdgeDecision]) -> str:
    """Human-readable table: variable, statistic value, edge verdict."""
    if not decisions:
        return "(no causes)"
    stat_names = {d.statistic for d in decisions}
    stat_col = "theta" if stat_names == {"theta"} else "statistic"
    rows = [("variable", stat_col, "edge")]
    for d in decisions:
        rows.append((d.cause, f"{d.value:.4f}", "yes" if d.edge else "no"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for i, r in enumerate(rows):
        lines.append("  ".join(s.ljust(w) for s, w in zip(r, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


@dataclass(frozen=True)
class CandidateGraph:
    """Undirected candidate edges from non-zero bivariate multipliers."""

    nodes: tuple[str, ...]
    edges: frozenset
    provenance: tuple[tuple[tuple[str, str], tuple[tuple[str, float], ...]], ...]
    zero_threshold: float

    def has_edge(self, a: str, b: str) -> bool:
        return tuple(sorted((a, b))) in self.edges

    @property
    def edge_list(self) -> list[tuple[str, str]]:
        return sorted(self.edges)


def build_candidate_graph(
    solution: MaxEntSolution, zero_threshold: float = EXACT_ZERO_THRESHOLD
) -> CandidateGraph:
    """Undirected graph with an edge wherever some pure bivariate-scope
    multiplier exceeds the zero threshold.

    Requires the fitted features (with the implicit constant) to span all
    univariate and bivariate functions; the default threshold suits exact
    moments fitted in strict mode, and is a swept parameter for noisy ones.
    """
    if solution.mode != "joint":
        raise ValueError("the candidate graph is read from a joint-mode fit")
    vars = solution.problem.vars
    check_bivariate_basis(vars, [c.feature for c in solution.fitted_constraints])
    edges = set()
    provenance = []
    for a, b in itertools.combinations(vars.names, 2):
        lams, keys = _bivariate_multipliers(solution, {a, b})
        hits = [
            (key, lam) for key, lam in zip(keys, lams) if abs(lam) > zero_threshold
        ]
        if hits:
            edges.add((a, b) if a < b else (b, a))
            provenance.append((tuple(sorted((a, b))), tuple(hits)))
    return CandidateGraph(
        nodes=vars.names,
        edges=frozenset(edges),
        provenance=tuple(provenance),
        zero_threshold=zero_threshold,
    )


def moral_graph(parents: Mapping[str, Sequence[str]]) -> set[tuple[str, str]]:
    """Undirected edges of the moral graph: DAG adjacencies plus married
    co-parents of a common child."""
    edges = set()
    for child, pas in parents.items():
        for p in pas:
            edges.add(tuple(sorted((child, p))))
        for a, b in itertools.combinations(pas, 2):
            edges.add(tuple(sorted((a, b))))
    return edges


@dataclass(frozen=True)
class FaithfulnessEntry:
    feature_id: str
    pair: tuple[str, str]
    adjacent: bool
    multiplier: float
    nonzero: bool


@dataclass(frozen=True)
class FaithfulnessReport:
    entries: tuple[FaithfulnessEntry, ...]
    zero_threshold: float

    @property
    def violations(self) -> list[FaithfulnessEntry]:
        """Adjacent pairs whose bivariate multiplier came out zero."""
        return [e for e in self.entries if e.adjacent and not e.nonzero]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_faithful_expectations(
    p: TabularDistribution,
    parents: Mapping[str, Sequence[str]],
    features: Sequence[FeatureSpec],
    zero_threshold: float = EXACT_ZERO_THRESHOLD,
    config: OptimizerConfig | None = None,
) -> FaithfulnessReport:
    """Diagnostic: fit exact moments of ``p`` and report, for each pure
    bivariate feature whose variables are adjacent in the DAG, whether its
    multiplier is non-zero.  Reports violations, never raises on them.
    """
    config = config or OptimizerConfig(tol=1e-8)
    constraints = p.constraint_set(features)
    solution = fit(MaxEntProblem.joint(p.vars, constraints, config=config))
    adj = {tuple(sorted((c, pa))) for c, pas in parents.items() for pa in pas}
    entries = []
    for c, lam in zip(solution.fitted_constraints, solution.lambdas):
        if len(c.feature.scope) != 2:
            continue
        pair = tuple(sorted(c.feature.scope))
        entries.append(
            FaithfulnessEntry(
                feature_id=c.feature.id,
                pair=pair,
                adjacent=pair in adj,
                multiplier=float(lam),
                nonzero=abs(lam) > zero_threshold,
            )
        )
    return FaithfulnessReport(entries=tuple(entries), zero_threshold=zero_threshold)
