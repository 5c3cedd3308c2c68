"""Interventional queries on explicit joint distributions.

Backdoor adjustment, the average causal effect for binary treatment and
target, and the bounds on both that need only the treatment-target and
treatment-confounder marginals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Assignment, TabularDistribution, ZeroMassError
from .solver import MaxEntSolution

MARGINAL_AGREEMENT_TOL = 1e-6


class PositivityError(ValueError):
    """The treatment value has zero probability in some confounder cell."""


class MarginalMismatchError(ValueError):
    """The two supplied marginals disagree on the treatment distribution."""


@dataclass(frozen=True)
class InterventionalQuery:
    """p(target | do(treatment = value)) with a declared adjustment set."""

    target: str
    treatment: str
    treatment_value: object
    adjustment: tuple[str, ...]

    def __post_init__(self):
        if self.target == self.treatment:
            raise ValueError("treatment and target must be distinct")
        bad = {self.target, self.treatment} & set(self.adjustment)
        if bad:
            raise ValueError(f"adjustment set contains {sorted(bad)}")


@dataclass(frozen=True)
class AceBounds:
    lower: float
    upper: float
    point_estimate: float | None = None
    point_within: bool | None = None
    degenerate: tuple[str, ...] = ()

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError(f"lower bound {self.lower} exceeds upper {self.upper}")


def _as_table(p) -> TabularDistribution:
    if isinstance(p, MaxEntSolution):
        return p.joint()
    return p


def do_distribution(p, query: InterventionalQuery) -> TabularDistribution:
    """Backdoor adjustment: sum_z p(target | treatment=value, z) p(z).

    Requires positivity: p(treatment=value | z) > 0 whenever p(z) > 0.
    """
    table = _as_table(p)
    for name in (query.target, query.treatment, *query.adjustment):
        if name not in table.vars:
            raise KeyError(f"unknown variable {name!r}")
    t_dom = table.vars.domain(query.target)
    out = np.zeros(len(t_dom))
    if not query.adjustment:
        try:
            return table.condition(
                Assignment({query.treatment: query.treatment_value})
            ).marginal([query.target])
        except ZeroMassError:
            raise PositivityError(
                f"p({query.treatment}={query.treatment_value!r}) = 0"
            ) from None
    z_domains = [table.vars.domain(z) for z in query.adjustment]
    for combo in itertools.product(*z_domains):
        z = Assignment(dict(zip(query.adjustment, combo)))
        p_z = table.marginal(query.adjustment).prob(z)
        if p_z <= 0.0:
            continue
        given = Assignment({**z.as_dict(), query.treatment: query.treatment_value})
        try:
            cond = table.condition(given).marginal([query.target])
        except ZeroMassError:
            raise PositivityError(
                f"p({query.treatment}={query.treatment_value!r} | {z.key()}) = 0 "
                f"while p({z.key()}) > 0"
            ) from None
        out += p_z * cond.probs
    return TabularDistribution.from_weights(table.vars.subset([query.target]), out)


def _require_binary(table: TabularDistribution, name: str) -> None:
    if table.vars.domain(name) != (0, 1):
        raise ValueError(f"{name!r} must be binary with domain (0, 1)")


def ace(p, treatment: str, target: str, adjustment: Sequence[str] | None = None) -> float:
    """Average causal effect p(target=1|do(1)) - p(target=1|do(0)).

    Adjustment defaults to every other variable in the joint.
    """
    table = _as_table(p)
    _require_binary(table, treatment)
    _require_binary(table, target)
    if adjustment is None:
        adjustment = [
            n for n in table.vars.names if n not in (treatment, target)
        ]
    vals = []
    for v in (1, 0):
        q = InterventionalQuery(
            target=target, treatment=treatment, treatment_value=v,
            adjustment=tuple(adjustment),
        )
        vals.append(float(do_distribution(table, q).probs[1]))
    return vals[0] - vals[1]


def _treatment_given_z(
    p_xiz: TabularDistribution, treatment: str, x_value
) -> tuple[float, float, bool]:
    """(min_z, max_z) of p(treatment=value | z) over cells with p(z) > 0,
    plus a flag for min == 0."""
    z_names = [n for n in p_xiz.vars.names if n != treatment]
    if not z_names:
        raise ValueError("the treatment-confounder marginal has no confounders")
    lo, hi = np.inf, -np.inf
    z_marg = p_xiz.marginal(z_names)
    z_domains = [p_xiz.vars.domain(z) for z in z_names]
    for combo in itertools.product(*z_domains):
        z = Assignment(dict(zip(z_names, combo)))
        pz = z_marg.prob(z)
        if pz <= 0.0:
            continue
        cond = p_xiz.condition(z).prob(Assignment({treatment: x_value}))
        lo, hi = min(lo, cond), max(hi, cond)
    if not np.isfinite(lo):
        raise ValueError("the confounder marginal has no positive-probability cells")
    return float(lo), float(hi), lo <= 0.0


def _check_consistent(
    p_xixj: TabularDistribution, p_xiz: TabularDistribution, treatment: str
) -> None:
    m1 = p_xixj.marginal([treatment]).probs
    m2 = p_xiz.marginal([treatment]).probs
    gap = float(np.abs(m1 - m2).max())
    if gap > MARGINAL_AGREEMENT_TOL:
        raise MarginalMismatchError(
            f"marginals disagree on p({treatment}) by {gap:.3g} "
            f"(> {MARGINAL_AGREEMENT_TOL})"
        )


def interventional_bounds(
    p_xixj: TabularDistribution,
    p_xiz: TabularDistribution,
    treatment: str,
    target: str,
    treatment_value,
    target_value,
) -> tuple[float, float, tuple[str, ...]]:
    """Bounds on p(target=value | do(treatment=value)) from two marginals.

    lower = p(target, treatment) / max_z p(treatment | z),
    upper = p(target, treatment) / min_z p(treatment | z).
    When some p(treatment|z) is zero the upper bound is capped at 1 and
    flagged degenerate.
    """
    _check_consistent(p_xixj, p_xiz, treatment)
    joint = p_xixj.prob(
        Assignment({treatment: treatment_value, target: target_value})
    ) if set(p_xixj.vars.names) == {treatment, target} else None
    if joint is None:
        raise ValueError("p_xixj must be the (treatment, target) marginal")
    lo_z, hi_z, hit_zero = _treatment_given_z(p_xiz, treatment, treatment_value)
    flags = []
    lower = joint / hi_z if hi_z > 0 else 0.0
    if hi_z <= 0:
        flags.append(f"p({treatment}={treatment_value!r}|z) = 0 for all z")
    if hit_zero:
        upper = 1.0 if joint > 0 else 0.0
        flags.append(
            f"min_z p({treatment}={treatment_value!r}|z) = 0: upper bound capped at 1"
        )
    else:
        upper = joint / lo_z
    return float(lower), float(upper), tuple(flags)


def ace_bounds(
    p_xixj: TabularDistribution,
    p_xiz: TabularDistribution,
    treatment: str,
    target: str,
    point_estimate: float | None = None,
) -> AceBounds:
    """Bounds on the ACE of a binary treatment on a binary target from the
    (treatment, target) and (treatment, confounders) marginals.

    lower = p(1,1)/max_z p(t=1|z) - p(1,0)/min_z p(t=0|z) and the upper
    bound swaps min and max.  Degenerate cells cap the affected ratio at 1
    (a probability) and flag it; bounds are then clamped to [-1, 1].
    """
    _require_binary(p_xixj, treatment)
    _require_binary(p_xixj, target)
    _check_consistent(p_xixj, p_xiz, treatment)
    p11 = p_xixj.prob(Assignment({treatment: 1, target: 1}))
    p10 = p_xixj.prob(Assignment({treatment: 0, target: 1}))
    lo1, hi1, zero1 = _treatment_given_z(p_xiz, treatment, 1)
    lo0, hi0, zero0 = _treatment_given_z(p_xiz, treatment, 0)
    flags = []

    def ratio(num: float, den: float, side: str) -> float:
        if num == 0.0:
            return 0.0
        if den <= 0.0:
            flags.append(f"division by zero in {side}: ratio capped at 1")
            return 1.0
        return num / den

    lower = ratio(p11, hi1, "lower/treated") - ratio(p10, lo0, "lower/control")
    upper = ratio(p11, lo1, "upper/treated") - ratio(p10, hi0, "upper/control")
    if zero1:
        flags.append("min_z p(treatment=1|z) = 0")
    if zero0:
        flags.append("min_z p(treatment=0|z) = 0")
    if flags:
        lower = max(lower, -1.0)
        upper = min(upper, 1.0)
    within = None
    if point_estimate is not None:
        # tolerate fit noise; matters when the bounds collapse to a point
        within = bool(lower - 1e-9 <= point_estimate <= upper + 1e-9)
    return AceBounds(
        lower=float(lower),
        upper=float(upper),
        point_estimate=point_estimate,
        point_within=within,
        degenerate=tuple(flags),
    )
