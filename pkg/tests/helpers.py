"""Shared test oracles, independent of the code paths they check."""

from __future__ import annotations

import itertools

import numpy as np

from maxent_merge.core import (
    Assignment,
    ConstraintSet,
    TabularDistribution,
    VariableSet,
    feature_matrix,
)


def simplex_maxent_oracle(vars: VariableSet, constraints: ConstraintSet) -> np.ndarray:
    """Maximise entropy directly over the probability simplex with cvxpy.

    Independent of the dual solver: the optimisation variable is the
    probability vector itself, constrained to match the targets exactly
    (slack ignored; call with zero-slack constraints).
    """
    import cvxpy as cp

    n = vars.n_states
    F = feature_matrix(vars, [c.feature for c in constraints])
    targets = constraints.targets
    p = cp.Variable(n, nonneg=True)
    cons = [cp.sum(p) == 1]
    if len(constraints):
        cons.append(F.T @ p == targets)
    problem = cp.Problem(cp.Maximize(cp.sum(cp.entr(p))), cons)
    problem.solve(solver=cp.CLARABEL)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"oracle failed: {problem.status}")
    return np.clip(np.asarray(p.value), 0.0, None) / np.sum(p.value)


def random_tabular(
    rng: np.random.Generator, vars: VariableSet, alpha: float = 1.0
) -> TabularDistribution:
    return TabularDistribution.from_weights(
        vars, rng.dirichlet(np.full(vars.n_states, alpha))
    )


def chain_joint(rng: np.random.Generator, lo: float = 0.1, hi: float = 0.9):
    """Random binary chain A -> Z -> B as an explicit joint over (A, Z, B)."""
    vars = VariableSet.binary("A", "Z", "B")
    p_a = rng.uniform(lo, hi)
    p_z = rng.uniform(lo, hi, size=2)       # p(z=1 | a)
    p_b = rng.uniform(lo, hi, size=2)       # p(b=1 | z)
    probs = np.zeros(8)
    for a, z, b in itertools.product((0, 1), repeat=3):
        pa = p_a if a else 1 - p_a
        pz = p_z[a] if z else 1 - p_z[a]
        pb = p_b[z] if b else 1 - p_b[z]
        probs[vars.state_index(Assignment.of(A=a, Z=z, B=b))] = pa * pz * pb
    return vars, TabularDistribution(vars, probs)


def fork_joint(rng: np.random.Generator, lo: float = 0.1, hi: float = 0.9):
    """Random binary fork A <- Z -> B as an explicit joint over (A, Z, B)."""
    vars = VariableSet.binary("A", "Z", "B")
    p_z = rng.uniform(lo, hi)
    p_a = rng.uniform(lo, hi, size=2)
    p_b = rng.uniform(lo, hi, size=2)
    probs = np.zeros(8)
    for a, z, b in itertools.product((0, 1), repeat=3):
        pz = p_z if z else 1 - p_z
        pa = p_a[z] if a else 1 - p_a[z]
        pb = p_b[z] if b else 1 - p_b[z]
        probs[vars.state_index(Assignment.of(A=a, Z=z, B=b))] = pz * pa * pb
    return vars, TabularDistribution(vars, probs)


def random_dag_joint(rng: np.random.Generator, names: tuple[str, ...],
                     edge_prob: float = 0.5, lo: float = 0.1, hi: float = 0.9):
    """Random DAG over binary variables (edges low index -> high index) with
    uniform-random conditional probability tables, as an explicit joint."""
    n = len(names)
    parents = {names[i]: tuple(names[j] for j in range(i) if rng.random() < edge_prob)
               for i in range(n)}
    cpts = {}
    for name in names:
        k = len(parents[name])
        cpts[name] = rng.uniform(lo, hi, size=2 ** k)
    vars = VariableSet.binary(*names)
    probs = np.zeros(vars.n_states)
    for combo in itertools.product((0, 1), repeat=n):
        x = dict(zip(names, combo))
        p = 1.0
        for name in names:
            idx = 0
            for pa in parents[name]:
                idx = 2 * idx + x[pa]
            p1 = cpts[name][idx]
            p *= p1 if x[name] else 1 - p1
        probs[vars.state_index(Assignment(x))] = p
    return vars, parents, TabularDistribution(vars, probs)


def confounded_scm(rng: np.random.Generator, z_dims: int = 1,
                   lo: float = 0.05, hi: float = 0.95):
    """Random binary SCM Z -> T, Z -> Y, T -> Y with explicit CPTs.

    Returns the joint over (T, Y, Z...) plus the ground-truth backdoor
    quantities computed directly from the CPTs (the enumeration oracle).
    """
    z_names = tuple(f"Z{i}" for i in range(z_dims))
    vars = VariableSet.binary("T", "Y", *z_names)
    pz = rng.uniform(lo, hi, size=z_dims)
    z_states = list(itertools.product((0, 1), repeat=z_dims))
    pt_given_z = {z: rng.uniform(lo, hi) for z in z_states}
    py_given_tz = {(t, z): rng.uniform(lo, hi) for t in (0, 1) for z in z_states}
    probs = np.zeros(vars.n_states)
    for t in (0, 1):
        for y in (0, 1):
            for z in z_states:
                p = 1.0
                for zi, zv in enumerate(z):
                    p *= pz[zi] if zv else 1 - pz[zi]
                p *= pt_given_z[z] if t else 1 - pt_given_z[z]
                p *= py_given_tz[(t, z)] if y else 1 - py_given_tz[(t, z)]
                x = {"T": t, "Y": y, **{f"Z{i}": v for i, v in enumerate(z)}}
                probs[vars.state_index(Assignment(x))] = p
    joint = TabularDistribution(vars, probs)

    def p_z(z):
        p = 1.0
        for zi, zv in enumerate(z):
            p *= pz[zi] if zv else 1 - pz[zi]
        return p

    def do_y1(t):
        # truncated factorisation straight from the CPTs
        return sum(py_given_tz[(t, z)] * p_z(z) for z in z_states)

    truth = {
        "p_do1": do_y1(1),
        "p_do0": do_y1(0),
        "ace": do_y1(1) - do_y1(0),
        "min_pt1_z": min(pt_given_z.values()),
        "max_pt1_z": max(pt_given_z.values()),
    }
    return vars, joint, truth


def finite_difference(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    for i in range(len(x)):
        e = np.zeros_like(x, dtype=float)
        e[i] = h
        out[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return out
