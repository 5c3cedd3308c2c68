"""Experiment harness: threshold sweeps, ROC curves, detection-vs-effect
curves, and the effect-bounds table.

Each repetition draws an SCM instance, samples it, splits the sample into
per-cause conditional-mean constraint sets, fits the conditional MAXENT
distribution of the effect given the causes (cause marginal either the
exact instance marginal, "known", or itself MAXENT-estimated from
univariate cause means, "estimated"), and reads one relative-difference
statistic per cause off the fitted multipliers.  Repetitions whose fit
does not converge (or whose sample leaves a conditioning cell empty or a
target on the boundary) are dropped and counted.

Repetitions can run in parallel; results are reduced in repetition order,
so outputs are independent of scheduling.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from .causal import max_relative_difference
from .core import (
    Assignment,
    ConstraintSet,
    MissingCellError,
    ZeroMassError,
)
from .effects import PositivityError, ace, ace_bounds
from .simulate import (
    CAUSES,
    TARGET,
    ScmInstance,
    cause_mean_constraints,
    cause_pairwise_constraints,
    draw_instance,
    exact_cause_means,
    exact_cause_pairwise,
    exact_moments,
    exact_split_pairwise,
    sample,
    split_pairwise,
    true_ace,
)
from .solver import (
    InfeasibleTargetError,
    MaxEntProblem,
    NonFiniteError,
    NotConvergedError,
    OptimizerConfig,
    fit,
)

Mode = Literal["known_px", "estimated_px"]

DEFAULT_THRESHOLDS = tuple(float(t) for t in np.linspace(0.0, 1.0, 101))


@dataclass(frozen=True)
class HarnessConfig:
    """Knobs shared by the experiment runners.

    epsilon_scale is the c in the slack rule eps = c / sqrt(cell size)
    applied to sample-estimated targets; exact-moment runs use zero slack.
    cause_moments picks the cause-side constraint set for estimated-px
    fits: "pairwise" (univariate plus pairwise cause moments, needed to
    carry the confounder correlations), "means" (univariate only, which
    yields an independent-cause marginal), or "none" (uniform marginal).
    """

    n: int = 1000
    epsilon_scale: float = 1.0
    cause_epsilon_scale: float = 0.0
    tol: float = 1e-3
    max_iter: int = 50_000
    objective: str = "dual"
    cause_moments: str = "pairwise"
    exact: bool = False
    exact_slack: float = 1e-6   # keeps degenerate boundary targets fittable

    def solver_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            tol=self.tol, max_iter=self.max_iter, objective=self.objective
        )


def _rep_seeds(seed: int, reps: int) -> list[tuple[int, int]]:
    """Per-repetition (instance, sample) seeds by seed-sequence splitting."""
    children = np.random.SeedSequence(seed).spawn(reps)
    out = []
    for child in children:
        state = child.generate_state(2)
        out.append((int(state[0]), int(state[1])))
    return out


@dataclass(frozen=True)
class RepOutcome:
    index: int
    mask: tuple[bool, ...] | None
    thetas: tuple[float, ...] | None
    dropped: str | None = None
    effect: float | None = None

    @property
    def ok(self) -> bool:
        return self.dropped is None


def _fit_thetas(
    instance: ScmInstance,
    constraint_sets: Sequence[ConstraintSet],
    cause_marginal,
    extra_constraints: ConstraintSet | None,
    config: OptimizerConfig,
) -> tuple[float, ...]:
    merged = ConstraintSet.merged(
        [*constraint_sets, extra_constraints] if extra_constraints else constraint_sets
    )
    problem = MaxEntProblem.conditional(
        instance.variables,
        merged,
        target=TARGET,
        cause_marginal=cause_marginal,
        config=config,
    )
    solution = fit(problem)
    thetas = []
    for cause in CAUSES:
        lams = [
            solution.lambda_for("x0", Assignment({cause: v})) for v in (0, 1)
        ]
        thetas.append(max_relative_difference(lams))
    return tuple(thetas)


def _run_rep(args: tuple) -> RepOutcome:
    (
        index,
        family,
        mode,
        cfg,
        inst_seed,
        samp_seed,
        forced,
        want_effect,
    ) = args
    instance = draw_instance(family, inst_seed, forced_edges=forced)
    try:
        if cfg.exact:
            joint = exact_moments(instance)
            sets = exact_split_pairwise(joint, slack=cfg.exact_slack)
            if cfg.cause_moments == "pairwise":
                cause_side = exact_cause_pairwise(joint, slack=cfg.exact_slack)
            elif cfg.cause_moments == "means":
                cause_side = exact_cause_means(joint, slack=cfg.exact_slack)
            else:
                cause_side = None
        else:
            table = sample(instance, cfg.n, seed=samp_seed)
            sets = split_pairwise(table, epsilon_scale=cfg.epsilon_scale)
            if cfg.cause_moments == "pairwise":
                cause_side = cause_pairwise_constraints(
                    table, epsilon_scale=cfg.cause_epsilon_scale
                )
            elif cfg.cause_moments == "means":
                cause_side = cause_mean_constraints(
                    table, epsilon_scale=cfg.cause_epsilon_scale
                )
            else:
                cause_side = None
        if mode == "known_px":
            marginal = exact_moments(instance).marginal(list(CAUSES))
            extra = None
        elif mode == "estimated_px":
            marginal = "estimated"
            extra = cause_side
        else:
            raise ValueError(f"unknown mode {mode!r}")
        thetas = _fit_thetas(instance, sets, marginal, extra, cfg.solver_config())
    except NotConvergedError:
        return RepOutcome(index, None, None, dropped="non-convergence")
    except InfeasibleTargetError:
        return RepOutcome(index, None, None, dropped="infeasible-target")
    except MissingCellError:
        return RepOutcome(index, None, None, dropped="empty-cell")
    except ZeroMassError:
        return RepOutcome(index, None, None, dropped="zero-mass-condition")
    except NonFiniteError:
        return RepOutcome(index, None, None, dropped="numerical-failure")
    effect = true_ace(instance, "X1") if want_effect else None
    return RepOutcome(
        index, instance.edge_mask, thetas, effect=effect
    )


def _run_reps(
    family: str,
    reps: int,
    mode: str,
    cfg: HarnessConfig,
    seed: int,
    forced: Mapping[str, bool] | None,
    want_effect: bool,
    jobs: int = 1,
) -> list[RepOutcome]:
    if reps < 1:
        raise ValueError(f"need reps >= 1, got {reps}")
    seeds = _rep_seeds(seed, reps)
    args = [
        (i, family, mode, cfg, s_inst, s_samp, dict(forced) if forced else None, want_effect)
        for i, (s_inst, s_samp) in enumerate(seeds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_rep, args, chunksize=8))
    else:
        outcomes = [_run_rep(a) for a in args]
    return sorted(outcomes, key=lambda o: o.index)


class EmptyExperimentError(RuntimeError):
    """Every repetition was dropped; nothing to aggregate."""


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class RocCurve:
    family: str
    mode: str
    points: tuple[RocPoint, ...]
    auc: float
    retained: int
    dropped: int
    drop_reasons: tuple[tuple[str, int], ...]
    true_edges: int
    true_non_edges: int

    def to_rows(self) -> list[dict]:
        return [
            {
                "threshold": p.threshold,
                "tpr": p.tpr,
                "fpr": p.fpr,
                "tp": p.tp,
                "fp": p.fp,
                "tn": p.tn,
                "fn": p.fn,
            }
            for p in self.points
        ]

    def summary(self) -> dict:
        return {
            "family": self.family,
            "mode": self.mode,
            "auc": self.auc,
            "retained": self.retained,
            "dropped": self.dropped,
            "drop_reasons": dict(self.drop_reasons),
            "true_edges": self.true_edges,
            "true_non_edges": self.true_non_edges,
        }


def _auc(points: Sequence[RocPoint]) -> float:
    pts = sorted({(p.fpr, p.tpr) for p in points})
    pts = [(0.0, 0.0), *pts, (1.0, 1.0)]
    fpr = np.array([p[0] for p in pts])
    tpr = np.array([p[1] for p in pts])
    order = np.lexsort((tpr, fpr))
    return float(np.trapezoid(tpr[order], fpr[order]))


def _count_reasons(outcomes: Sequence[RepOutcome]) -> tuple[tuple[str, int], ...]:
    reasons: dict[str, int] = {}
    for o in outcomes:
        if o.dropped:
            reasons[o.dropped] = reasons.get(o.dropped, 0) + 1
    return tuple(sorted(reasons.items()))


def run_roc(
    family: str,
    reps: int = 100,
    mode: Mode = "known_px",
    config: HarnessConfig | None = None,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    seed: int = 0,
    forced_edges: Mapping[str, bool] | None = None,
    jobs: int = 1,
) -> RocCurve:
    """ROC of edge detection over a linear threshold grid on [0, 1].

    Per repetition and cause, the detection statistic is the relative
    difference of the cause's two condition multipliers; the truth is the
    instance's edge mask.  theta >= t is called an edge, theta < t no
    edge.
    """
    cfg = config or HarnessConfig()
    outcomes = _run_reps(family, reps, mode, cfg, seed, forced_edges, False, jobs)
    kept = [o for o in outcomes if o.ok]
    if not kept:
        raise EmptyExperimentError(
            f"all {reps} repetitions dropped: {dict(_count_reasons(outcomes))}"
        )
    labels = np.array([m for o in kept for m in o.mask], dtype=bool)
    stats = np.array([t for o in kept for t in o.thetas])
    pos = int(labels.sum())
    neg = int((~labels).sum())
    points = []
    for t in thresholds:
        pred = stats >= t
        tp = int((pred & labels).sum())
        fp = int((pred & ~labels).sum())
        fn = pos - tp
        tn = neg - fp
        points.append(
            RocPoint(
                threshold=float(t),
                tpr=tp / max(pos, 1),
                fpr=fp / max(neg, 1),
                tp=tp,
                fp=fp,
                tn=tn,
                fn=fn,
            )
        )
    return RocCurve(
        family=family,
        mode=mode,
        points=tuple(points),
        auc=_auc(points),
        retained=len(kept),
        dropped=len(outcomes) - len(kept),
        drop_reasons=_count_reasons(outcomes),
        true_edges=pos,
        true_non_edges=neg,
    )


@dataclass(frozen=True)
class TprAceBin:
    lo: float
    hi: float
    count: int
    detected: int

    @property
    def tpr(self) -> float:
        return self.detected / max(self.count, 1)


@dataclass(frozen=True)
class TprAceCurve:
    family: str
    mode: str
    threshold: float
    bins: tuple[TprAceBin, ...]
    pairs: tuple[tuple[float, bool], ...]   # (|ACE|, detected) per retained rep
    retained: int
    dropped: int
    drop_reasons: tuple[tuple[str, int], ...]

    def to_rows(self) -> list[dict]:
        return [
            {
                "ace_lo": b.lo,
                "ace_hi": b.hi,
                "count": b.count,
                "detected": b.detected,
                "tpr": b.tpr,
            }
            for b in self.bins
        ]

    def summary(self) -> dict:
        return {
            "family": self.family,
            "mode": self.mode,
            "threshold": self.threshold,
            "retained": self.retained,
            "dropped": self.dropped,
            "drop_reasons": dict(self.drop_reasons),
            "bin_tprs": [b.tpr for b in self.bins],
        }


def run_tpr_vs_ace(
    family: str,
    reps: int = 500,
    t: float = 0.15,
    mode: Mode = "known_px",
    config: HarnessConfig | None = None,
    n_bins: int = 5,
    seed: int = 0,
    jobs: int = 1,
) -> TprAceCurve:
    """Detection rate of the forced X1 -> X0 edge as a function of the true
    effect strength, at a fixed decision threshold.

    The edge is always present; only its strength varies across random
    instances.  The true ACE comes from the mutilated exact joint, and
    repetitions are binned by |ACE| with equal-width bins.
    """
    cfg = config or HarnessConfig()
    outcomes = _run_reps(
        family, reps, mode, cfg, seed, {"X1": True}, True, jobs
    )
    kept = [o for o in outcomes if o.ok]
    if not kept:
        raise EmptyExperimentError(
            f"all {reps} repetitions dropped: {dict(_count_reasons(outcomes))}"
        )
    pairs = [(abs(o.effect), o.thetas[0] >= t) for o in kept]
    hi = max(a for a, _ in pairs)
    edges = np.linspace(0.0, max(hi, 1e-9), n_bins + 1)
    bins = []
    for lo, up in zip(edges[:-1], edges[1:]):
        sel = [
            d for a, d in pairs if (lo <= a < up) or (up == edges[-1] and a == up)
        ]
        bins.append(
            TprAceBin(lo=float(lo), hi=float(up), count=len(sel), detected=sum(sel))
        )
    return TprAceCurve(
        family=family,
        mode=mode,
        threshold=t,
        bins=tuple(bins),
        pairs=tuple((float(a), bool(d)) for a, d in pairs),
        retained=len(kept),
        dropped=len(outcomes) - len(kept),
        drop_reasons=_count_reasons(outcomes),
    )


@dataclass(frozen=True)
class AceFigRow:
    variant: int
    true_ace: float
    point_known: float | None
    point_estimated: float | None
    lower: float
    upper: float
    true_within: bool
    known_within: bool | None
    estimated_within: bool | None
    flags: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "true_ace": self.true_ace,
            "point_known": self.point_known,
            "point_estimated": self.point_estimated,
            "lower": self.lower,
            "upper": self.upper,
            "true_within": self.true_within,
            "known_within": self.known_within,
            "estimated_within": self.estimated_within,
            "flags": list(self.flags),
        }


def _ace_fig_variant(args: tuple) -> AceFigRow:
    index, cfg, inst_seed = args
    instance = draw_instance(
        "c", inst_seed, forced_edges={"X3": True}, ace_variant=True
    )
    joint = exact_moments(instance)
    truth = true_ace(instance, "X3")
    p_tx = joint.marginal(["X3", TARGET])
    others = [c for c in CAUSES if c != "X3"]
    p_tz = joint.marginal(["X3", *others])
    sets = exact_split_pairwise(joint, slack=cfg.exact_slack)
    flags: list[str] = []
    solver_cfg = cfg.solver_config()

    def point(marginal, extra) -> float | None:
        try:
            merged = ConstraintSet.merged([*sets, extra] if extra else sets)
            problem = MaxEntProblem.conditional(
                instance.variables,
                merged,
                target=TARGET,
                cause_marginal=marginal,
                config=solver_cfg,
            )
            solution = fit(problem)
            return float(ace(solution.joint(), "X3", TARGET))
        except (NotConvergedError, InfeasibleTargetError) as err:
            flags.append(f"fit failed: {type(err).__name__}")
            return None
        except PositivityError as err:
            flags.append(f"positivity: {err}")
            return None

    point_known = point(joint.marginal(list(CAUSES)), None)
    point_estimated = point("estimated", exact_cause_pairwise(joint, slack=cfg.exact_slack))
    bounds = ace_bounds(p_tx, p_tz, "X3", TARGET)
    flags.extend(bounds.degenerate)
    # a point estimate carries solver noise at the tolerance + slack scale,
    # which matters when the bounds collapse to a single value
    fuzz = 10.0 * (cfg.tol + cfg.exact_slack)

    def within(x: float | None) -> bool | None:
        if x is None:
            return None
        return bool(bounds.lower - fuzz <= x <= bounds.upper + fuzz)

    return AceFigRow(
        variant=index,
        true_ace=truth,
        point_known=point_known,
        point_estimated=point_estimated,
        lower=bounds.lower,
        upper=bounds.upper,
        true_within=bool(within(truth)),
        known_within=within(point_known),
        estimated_within=within(point_estimated),
        flags=tuple(flags),
    )


def run_ace_fig(
    variants: int = 10,
    config: HarnessConfig | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> list[AceFigRow]:
    """Effect-strength table: true ACE of X3 on X0, MAXENT point estimates
    in both cause-marginal modes, and the marginal-only bounds, for random
    positivity-respecting variants of family c with the X3 edge present.

    Targets are exact population moments, so the no-confounding collapse
    (bounds equal point equal truth) is exact rather than approximate.
    """
    if variants < 1:
        raise ValueError(f"need variants >= 1, got {variants}")
    cfg = config or HarnessConfig()
    seeds = _rep_seeds(seed, variants)
    args = [(i, cfg, s_inst) for i, (s_inst, _) in enumerate(seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_ace_fig_variant, args))
    else:
        rows = [_ace_fig_variant(a) for a in args]
    return sorted(rows, key=lambda r: r.variant)
