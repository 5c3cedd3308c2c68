"""Ground-truth structural causal models for the synthetic experiments.

Three families over six binary variables: X1..X5 are potential causes of
X0, always confounded among themselves by latent Gaussians (family a: two
disjoint confounders; family b: five overlapping ones; family c: one
global confounder plus cause-to-cause edges).  The dashed cause->effect
mechanisms are masked at random, and X0 responds to the present causes
through a thresholded random quadratic form combined with an independent
Bernoulli by a random logical operation.

Each cause is a Bernoulli draw XOR-flipped by threshold events of the
latents, so the exact joint factorises over latent interval cells and can
be enumerated in closed form (Gaussian CDF only, no quadrature or Monte
Carlo).  ``exact_moments`` supports do-interventions on the causes, which
is the oracle used for true interventional effects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import ndtr

from .core import (
    Constraint,
    ConstraintSet,
    FeatureSpec,
    SampleTable,
    TabularDistribution,
    VariableSet,
    empirical_moments,
)

FAMILIES = ("a", "b", "c")
LOGIC_OPS = ("and", "or", "xor")

CAUSES = ("X1", "X2", "X3", "X4", "X5")
TARGET = "X0"

scm_variables = VariableSet.binary(TARGET, *CAUSES)
cause_variables = VariableSet.binary(*CAUSES)

TARGET_MEAN_FEATURE = FeatureSpec.product("x0", (TARGET,))

# Interval events on the latent Gaussians, per family.  Each entry is
# (latent index, lo, hi, cause index): the event lo < u < hi feeds the
# XOR-flip indicator of that cause.  ORs across entries with the same
# cause index.
_INF = math.inf
_EVENTS = {
    "a": (
        (0, 0.0, _INF, 0),      # X1: u1 > 0
        (0, -_INF, 0.25, 1),    # X2: u1 < 0.25
        (1, 0.0, _INF, 2),      # X3: u2 > 0
        (1, 0.25, _INF, 3),     # X4: u2 > 0.25
    ),
    "b": (
        (0, 0.0, _INF, 0), (1, 0.25, _INF, 0), (2, 0.5, _INF, 0),
        (1, -_INF, 0.5, 1), (2, -_INF, 0.25, 1), (3, -_INF, 0.0, 1),
        (2, 0.0, _INF, 2), (3, -_INF, 0.25, 2), (4, 0.5, _INF, 2),
        (3, -_INF, 0.5, 3), (4, 0.25, _INF, 3), (0, -_INF, 0.0, 3),
        (4, 0.0, _INF, 4), (0, -_INF, 0.25, 4), (1, 0.5, _INF, 4),
    ),
    "c": (
        (0, 0.0, _INF, 0),       # X1: u1 > 0
        (0, -_INF, 0.0, 1),      # X2 flip: u1 < 0
        (0, 0.25, _INF, 2),      # X3 flip: u1 > 0.25
        (0, -_INF, -0.25, 3),    # X4 flip: u1 < -0.25
        (0, -0.25, 0.25, 4),     # X5: -0.25 < u1 < 0.25
    ),
}
_N_LATENTS = {"a": 2, "b": 5, "c": 1}


@dataclass(frozen=True)
class ScmInstance:
    """One sampled parameterisation of a family.

    Coefficients are drawn first and then zeroed for masked edges (an
    interaction coefficient survives only if both endpoints' edges are
    present), so instances with different masks but the same seed share
    the surviving parameters.
    """

    family: str
    edge_mask: tuple[bool, ...]      # X1..X5 -> X0 present?
    p: tuple[float, ...]             # p_0..p_5
    a: tuple[float, ...]             # linear coefficients, masked
    b: tuple[tuple[float, ...], ...]  # interaction coefficients (upper triangle), masked
    logic_op: str
    seed: int
    ace_variant: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.logic_op not in LOGIC_OPS:
            raise ValueError(f"unknown logic op {self.logic_op!r}")
        if self.ace_variant and self.family != "c":
            raise ValueError("the positivity variant only applies to family c")

    @property
    def variables(self) -> VariableSet:
        return scm_variables

    @property
    def causes(self) -> tuple[str, ...]:
        return CAUSES

    def present_edges(self) -> tuple[str, ...]:
        return tuple(c for c, m in zip(CAUSES, self.edge_mask) if m)


def draw_instance(
    family: str,
    seed: int,
    forced_edges: Mapping[str, bool] | None = None,
    ace_variant: bool = False,
) -> ScmInstance:
    """Draw the parameters of one SCM instance.

    Edge existence is Bernoulli(1/2) per dashed edge unless forced; the
    logic op is uniform over and/or/xor, fixed per instance.  All draws
    happen in a fixed order, so the same seed always yields the same
    pre-mask parameters regardless of forcing.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}, expected one of {FAMILIES}")
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.1, 0.9, size=6)
    a = rng.standard_normal(5)
    b = rng.standard_normal((5, 5))
    mask = rng.random(5) < 0.5
    op = LOGIC_OPS[rng.integers(len(LOGIC_OPS))]
    if forced_edges:
        for name, present in forced_edges.items():
            if name not in CAUSES:
                raise KeyError(f"unknown cause {name!r}")
            mask[CAUSES.index(name)] = present
    # the quadratic form sums over all (i, j): diagonal terms fold into the
    # linear coefficient (X_i^2 = X_i for binary) and the two triangles add
    a = np.where(mask, a + np.diag(b), 0.0)
    b_masked = np.zeros((5, 5))
    for i in range(5):
        for j in range(i + 1, 5):
            if mask[i] and mask[j]:
                b_masked[i, j] = b[i, j] + b[j, i]
    return ScmInstance(
        family=family,
        edge_mask=tuple(bool(m) for m in mask),
        p=tuple(float(x) for x in p),
        a=tuple(float(x) for x in a),
        b=tuple(tuple(float(x) for x in row) for row in b_masked),
        logic_op=op,
        seed=int(seed),
        ace_variant=ace_variant,
    )


def _indicator_matrix(instance: ScmInstance, u: np.ndarray) -> np.ndarray:
    """(n, 5) boolean flip indicators from latent draws (n, n_latents)."""
    flags = np.zeros((u.shape[0], 5), dtype=bool)
    for latent, lo, hi, cause in _EVENTS[instance.family]:
        flags[:, cause] |= (u[:, latent] > lo) & (u[:, latent] < hi)
    return flags


def _compose(
    instance: ScmInstance,
    flips: np.ndarray,
    draws: np.ndarray,
    do: Mapping[str, int] | None = None,
) -> np.ndarray:
    """Cause values from flip indicators and raw Bernoulli draws.

    |Ber(p) - indicator| is Ber(p) XOR indicator.  Family c adds the
    cause-to-cause compositions; a do() override replaces a cause after
    its mechanism and before its descendants read it.
    """
    do = do or {}
    x = np.empty_like(flips, dtype=np.int64)
    base = draws ^ flips

    def setx(i: int, values) -> None:
        name = CAUSES[i]
        x[:, i] = do[name] if name in do else values

    if instance.family in ("a", "b"):
        for i in range(5):
            setx(i, base[:, i])
        return x
    # family c: X1 and X5 first, then the composed ones
    setx(0, base[:, 0])
    setx(4, base[:, 4])
    setx(1, base[:, 1] | x[:, 0])
    setx(3, base[:, 3] | x[:, 4])
    if instance.ace_variant:
        setx(2, draws[:, 2] ^ (flips[:, 2] | (x[:, 0] ^ x[:, 4])))
    else:
        setx(2, base[:, 2] | (x[:, 0] ^ x[:, 4]))
    return x


def _effect_probability(instance: ScmInstance) -> np.ndarray:
    """P(X0 = 1 | causes) for every cause state, in cause state order."""
    states = cause_variables.state_matrix()
    a = np.array(instance.a)
    b = np.array(instance.b)
    form = states @ a
    for i in range(5):
        for j in range(i + 1, 5):
            if b[i, j] != 0.0:
                form = form + b[i, j] * states[:, i] * states[:, j]
    s = (form > 0).astype(float)
    p0 = instance.p[0]
    if instance.logic_op == "and":
        return s * p0
    if instance.logic_op == "or":
        return p0 + s * (1.0 - p0)
    return s * (1.0 - p0) + (1.0 - s) * p0       # xor


def sample(instance: ScmInstance, n: int, seed: int | None = None) -> SampleTable:
    """Draw n observations of (X0, X1..X5) from the instance."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    actual_seed = instance.seed + 1 if seed is None else seed
    rng = np.random.default_rng(actual_seed)
    u = rng.standard_normal((n, _N_LATENTS[instance.family]))
    draws = (rng.random((n, 5)) < np.array(instance.p[1:])).astype(np.int64)
    ber0 = (rng.random(n) < instance.p[0]).astype(np.int64)
    flips = _indicator_matrix(instance, u).astype(np.int64)
    x = _compose(instance, flips, draws)
    a = np.array(instance.a)
    b = np.array(instance.b)
    form = x @ a
    for i in range(5):
        for j in range(i + 1, 5):
            if b[i, j] != 0.0:
                form = form + b[i, j] * x[:, i] * x[:, j]
    s = (form > 0).astype(np.int64)
    if instance.logic_op == "and":
        x0 = s & ber0
    elif instance.logic_op == "or":
        x0 = s | ber0
    else:
        x0 = s ^ ber0
    rows = np.column_stack([x0, x])
    return SampleTable(
        columns=(TARGET, *CAUSES),
        rows=rows,
        provenance=(("instance_seed", instance.seed), ("sample_seed", actual_seed), ("n", n)),
    )


def _latent_cells(instance: ScmInstance) -> list[tuple[float, np.ndarray]]:
    """(probability, flip bits) per latent interval cell.

    Each latent's threshold events cut it into intervals; cells are the
    cross product across latents, with flip indicators OR-ed per cause.
    """
    n_lat = _N_LATENTS[instance.family]
    events = _EVENTS[instance.family]
    per_latent: list[list[tuple[float, np.ndarray]]] = []
    for latent in range(n_lat):
        own = [(lo, hi, cause) for (l, lo, hi, cause) in events if l == latent]
        cuts = sorted(
            {t for lo, hi, _ in own for t in (lo, hi) if math.isfinite(t)}
        )
        bounds = [-_INF, *cuts, _INF]
        cells = []
        for lo_b, hi_b in zip(bounds[:-1], bounds[1:]):
            prob = float(ndtr(hi_b) - ndtr(lo_b))
            rep = _representative(lo_b, hi_b)
            bits = np.zeros(5, dtype=bool)
            for lo, hi, cause in own:
                if lo < rep < hi:
                    bits[cause] = True
            cells.append((prob, bits))
        per_latent.append(cells)
    out = []
    for combo in itertools.product(*per_latent):
        prob = 1.0
        bits = np.zeros(5, dtype=bool)
        for cell_prob, cell_bits in combo:
            prob *= cell_prob
            bits |= cell_bits
        if prob > 0.0:
            out.append((prob, bits))
    return out


def _representative(lo: float, hi: float) -> float:
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - 1.0
    if math.isinf(hi):
        return lo + 1.0
    return 0.5 * (lo + hi)


def exact_moments(
    instance: ScmInstance, do: Mapping[str, int] | None = None
) -> TabularDistribution:
    """Exact joint distribution over (X0, X1..X5).

    With ``do`` mapping cause names to forced values, returns the
    interventional joint of the mutilated model instead: the oracle for
    true causal effects.
    """
    if do:
        for name in do:
            if name not in CAUSES:
                raise KeyError(f"can only intervene on causes, not {name!r}")
    cells = _latent_cells(instance)
    p_flip = np.array(instance.p[1:])
    base_states = cause_variables.state_matrix()          # (32, 5) all draw combos
    draw_w = np.ones(32)
    for i in range(5):
        draw_w *= np.where(base_states[:, i] == 1, p_flip[i], 1.0 - p_flip[i])
    acc = np.zeros(32)
    radix = np.array([16, 8, 4, 2, 1])
    for prob, bits in cells:
        flips = np.tile(bits.astype(np.int64), (32, 1))
        x = _compose(instance, flips, base_states, do=do)
        idx = x @ radix
        np.add.at(acc, idx, prob * draw_w)
    q = _effect_probability(instance)
    full = np.concatenate([acc * (1.0 - q), acc * q])     # X0 slowest: 0-block then 1-block
    return TabularDistribution.from_weights(scm_variables, full)


def true_ace(instance: ScmInstance, treatment: str) -> float:
    """Interventional truth by mutilation: E[X0|do(t=1)] - E[X0|do(t=0)]."""
    vals = []
    for v in (1, 0):
        joint = exact_moments(instance, do={treatment: v})
        vals.append(float(joint.marginal([TARGET]).probs[1]))
    return vals[0] - vals[1]


def split_pairwise(
    table: SampleTable, target: str = TARGET, epsilon_scale: float = 1.0
) -> list[ConstraintSet]:
    """Split a joint sample into per-cause conditional-mean constraint sets.

    One set per cause, holding E[target | cause = v] for each of the
    cause's values, with the cell size recorded and slack
    epsilon_scale / sqrt(cell size).  Mirrors merging datasets that each
    observed the target with a single cause.
    """
    if target not in table.columns:
        raise ValueError(f"target column {target!r} missing from the table")
    causes = [c for c in table.columns if c != target]
    feature = FeatureSpec.product("x0", (target,))
    out = []
    for cause in causes:
        pair = SampleTable(
            columns=(target, cause),
            rows=np.column_stack([table.column(target), table.column(cause)]),
        )
        out.append(
            empirical_moments(
                scm_variables,
                pair,
                [feature],
                condition_on=(cause,),
                epsilon_scale=epsilon_scale,
            )
        )
    return out


def cause_mean_constraints(
    table: SampleTable, epsilon_scale: float = 1.0
) -> ConstraintSet:
    """Univariate mean constraints for the causes, the cause-side moments
    identifiable from the split datasets alone."""
    out = []
    for cause in CAUSES:
        feature = FeatureSpec.product(f"{cause.lower()}", (cause,))
        col = SampleTable(columns=(cause,), rows=table.column(cause).reshape(-1, 1))
        got = empirical_moments(
            scm_variables, col, [feature], epsilon_scale=epsilon_scale
        )
        out.extend(got)
    return ConstraintSet.of(out)


def cause_pairwise_constraints(
    table: SampleTable, epsilon_scale: float = 1.0
) -> ConstraintSet:
    """Univariate plus pairwise product moments of the causes.

    The richer cause-side statistics let the estimated cause marginal
    carry the confounder-induced correlations that explain away mediated
    target dependence.
    """
    features = [
        FeatureSpec.product(f"{cause.lower()}", (cause,)) for cause in CAUSES
    ]
    features += [
        FeatureSpec.product(f"{a.lower()}{b.lower()}", (a, b))
        for a, b in itertools.combinations(CAUSES, 2)
    ]
    sub = SampleTable(
        columns=CAUSES,
        rows=np.column_stack([table.column(c) for c in CAUSES]),
    )
    return empirical_moments(
        scm_variables, sub, features, epsilon_scale=epsilon_scale
    )


def exact_cause_pairwise(
    joint: TabularDistribution, slack: float = 0.0
) -> ConstraintSet:
    """Population version of cause_pairwise_constraints."""
    out = [
        Constraint(
            feature=FeatureSpec.product(f"{c.lower()}", (c,)),
            target=joint.moment(FeatureSpec.product(f"{c.lower()}", (c,))),
            slack=slack,
        )
        for c in CAUSES
    ]
    for a, b in itertools.combinations(CAUSES, 2):
        f = FeatureSpec.product(f"{a.lower()}{b.lower()}", (a, b))
        out.append(Constraint(feature=f, target=joint.moment(f), slack=slack))
    return ConstraintSet.of(out)


def exact_split_pairwise(
    joint: TabularDistribution, target: str = TARGET, slack: float = 0.0
) -> list[ConstraintSet]:
    """Population version of split_pairwise.

    A small slack keeps boundary targets fittable when the effect is
    degenerate (a cell where the target is constant).
    """
    feature = FeatureSpec.product("x0", (target,))
    out = []
    for cause in CAUSES:
        out.append(
            joint.constraint_set([feature], condition_on=(cause,), slack=slack)
        )
    return out


def exact_cause_means(joint: TabularDistribution, slack: float = 0.0) -> ConstraintSet:
    out = []
    for cause in CAUSES:
        feature = FeatureSpec.product(f"{cause.lower()}", (cause,))
        out.append(Constraint(feature=feature, target=joint.moment(feature), slack=slack))
    return ConstraintSet.of(out)


def dag_parents(instance: ScmInstance) -> dict[str, tuple[str, ...]]:
    """Observed-variable parent map of the instance's DAG (latents omitted)."""
    parents: dict[str, tuple[str, ...]] = {c: () for c in CAUSES}
    if instance.family == "c":
        parents["X2"] = ("X1",)
        parents["X4"] = ("X5",)
        parents["X3"] = ("X1", "X5")
    parents[TARGET] = instance.present_edges()
    return parents
