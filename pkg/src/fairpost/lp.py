"""Fairness linear programs: builders, a generic container, and the solve path.

The empirical primal program over a weighted score bundle is

    min  sum_i w_i sum_y r[i,y] pi[i,y]
    s.t. sum_y pi[i,y] = 1                                  for every sample i
         | sum_i w_i g[i,k]/m_k pi[i,y_c]  -  q_c | <= a/2  for every c, k in I_c
         pi >= 0,  q free

with m_k the weighted group mass; each absolute-value row is encoded as two
<= rows.  Its dual, the production path for fitting (the post-processing
needs the dual values psi), is

    max  sum_i w_i phi_i - a/2 sum_{c,k} (psi+ + psi-)
    s.t. phi_i + sum_{c: y_c=y} sum_{k in I_c} g[i,k] (psi+ - psi-)_{c,k} / m_k <= r[i,y]
         sum_{k in I_c} (psi+ - psi-)_{c,k} = 0
         psi+, psi- >= 0,  phi free.

Tolerances used throughout the package are set here once: feasibility 1e-8,
duality gap 1e-7, zero pivot 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import FairnessSpec, ScoreBundle
from .errors import InvalidArgumentError, InvalidStateError
from . import simplex
from .simplex import INFEASIBLE, ITER_LIMIT, OPTIMAL, UNBOUNDED  # noqa: F401  (re-export)

FEASIBILITY_TOL = 1e-8
DUALITY_GAP_TOL = 1e-7
ZERO_PIVOT_TOL = 1e-10

LE, EQ, GE = "<=", "==", ">="


class ZeroGroupMassError(InvalidArgumentError):
    """A referenced group has zero weighted mass; carries the offending indices."""

    def __init__(self, groups):
        self.groups = tuple(int(k) for k in groups)
        super().__init__(f"groups with zero weighted mass: {self.groups}")


@dataclass
class LinearProgram:
    """Generic LP: sense in {min, max}, rows A x (<=|==|>=) b, bounds 0/free."""

    sense: str
    c: np.ndarray
    A: sp.csr_matrix
    row_senses: list
    b: np.ndarray
    free: np.ndarray  # bool per variable; non-free means x >= 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.A = sp.csr_matrix(self.A)
        self.free = np.asarray(self.free, dtype=bool)
        m, nv = self.A.shape
        if self.sense not in ("min", "max"):
            raise InvalidArgumentError("sense must be 'min' or 'max'")
        if self.c.shape != (nv,) or self.b.shape != (m,) or self.free.shape != (nv,):
            raise InvalidArgumentError("LP dimensions are inconsistent")
        if len(self.row_senses) != m or any(s not in (LE, EQ, GE) for s in self.row_senses):
            raise InvalidArgumentError("row_senses must be one of <=, ==, >= per row")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.A.data))):
            raise InvalidArgumentError("LP coefficients must be finite")

    @property
    def num_vars(self):
        return self.c.shape[0]

    @property
    def num_rows(self):
        return self.b.shape[0]


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    duals: np.ndarray
    objective: float
    iterations: int
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    cs_residual: float = np.nan
    meta: dict = field(default_factory=dict)


def group_masses(scores: ScoreBundle) -> np.ndarray:
    """Weighted column means of the group-score matrix, P(Z_k = 1) estimates."""
    return scores.weights @ scores.groups


def _checked_masses(scores: ScoreBundle, spec: FairnessSpec) -> np.ndarray:
    if scores.num_classes != spec.num_classes or scores.num_groups != spec.num_groups:
        raise InvalidArgumentError(
            f"bundle dims ({scores.num_classes} classes, {scores.num_groups} groups) "
            f"disagree with spec ({spec.num_classes}, {spec.num_groups})"
        )
    masses = group_masses(scores)
    dead = [k for k in spec.referenced_groups if not masses[k] > 0]
    if dead:
        raise ZeroGroupMassError(dead)
    return masses


def _fair_pairs(spec: FairnessSpec):
    return [(c, k) for c, (_, groups) in enumerate(spec.constraints) for k in groups]


def build_primal(scores: ScoreBundle, spec: FairnessSpec) -> LinearProgram:
    """Empirical primal LP; variables pi(i, y) then q_c, see module docstring."""
    masses = _checked_masses(scores, spec)
    n, ny = scores.n, scores.num_classes
    ncons = len(spec.constraints)
    pairs = _fair_pairs(spec)
    nv = n * ny + ncons
    w = scores.weights

    rows, cols, data = [], [], []
    # stochasticity rows: sum_y pi(i, y) = 1
    rows.append(np.repeat(np.arange(n), ny))
    cols.append(np.arange(n * ny))
    data.append(np.ones(n * ny))
    senses = [EQ] * n
    b = [np.ones(n)]
    # two <= rows per (c, k): +/- (E[g_k/m_k pi_yc] - q_c) <= alpha/2
    for t, (c, k) in enumerate(pairs):
        target = spec.constraints[c][0]
        coeff = w * scores.groups[:, k] / masses[k]
        pi_cols = np.arange(n) * ny + target
        up, lo = n + 2 * t, n + 2 * t + 1
        rows.append(np.full(n, up))
        cols.append(pi_cols)
        data.append(coeff)
        rows.append([up])
        cols.append([n * ny + c])
        data.append([-1.0])
        rows.append(np.full(n, lo))
        cols.append(pi_cols)
        data.append(-coeff)
        rows.append([lo])
        cols.append([n * ny + c])
        data.append([1.0])
        senses += [LE, LE]
    b.append(np.full(2 * len(pairs), spec.alpha / 2.0))

    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n + 2 * len(pairs), nv),
    ).tocsr()
    c_obj = np.concatenate([(w[:, None] * scores.risks).ravel(), np.zeros(ncons)])
    free = np.zeros(nv, dtype=bool)
    free[n * ny:] = True  # centroids q_c are unrestricted
    meta = {
        "kind": "primal", "n": n, "num_classes": ny, "pairs": pairs,
        "masses": masses, "alpha": spec.alpha,
    }
    return LinearProgram("min", c_obj, A, senses, np.concatenate(b), free, meta)


def build_dual(scores: ScoreBundle, spec: FairnessSpec) -> LinearProgram:
    """Empirical dual LP; variables phi_i then (psi+, psi-) per (c, k) pair."""
    masses = _checked_masses(scores, spec)
    n, ny = scores.n, scores.num_classes
    pairs = _fair_pairs(spec)
    nv = n + 2 * len(pairs)
    w = scores.weights

    rows, cols, data = [], [], []
    # pointwise rows (i, y): phi_i + sum g psi / m <= r[i, y]
    rows.append(np.arange(n * ny))
    cols.append(np.repeat(np.arange(n), ny))
    data.append(np.ones(n * ny))
    for t, (c, k) in enumerate(pairs):
        target = spec.constraints[c][0]
        coeff = scores.groups[:, k] / masses[k]
        rr = np.arange(n) * ny + target
        rows.append(rr)
        cols.append(np.full(n, n + 2 * t))
        data.append(coeff)
        rows.append(rr)
        cols.append(np.full(n, n + 2 * t + 1))
        data.append(-coeff)
    senses = [LE] * (n * ny)
    # zero-sum rows per constraint: sum_k (psi+ - psi-) = 0
    for c in range(len(spec.constraints)):
        for t, (c2, _) in enumerate(pairs):
            if c2 == c:
                rows.append([n * ny + c, n * ny + c])
                cols.append([n + 2 * t, n + 2 * t + 1])
                data.append([1.0, -1.0])
        senses.append(EQ)

    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * ny + len(spec.constraints), nv),
    ).tocsr()
    b = np.concatenate([scores.risks.ravel(), np.zeros(len(spec.constraints))])
    c_obj = np.concatenate([w, np.full(2 * len(pairs), -spec.alpha / 2.0)])
    free = np.zeros(nv, dtype=bool)
    free[:n] = True  # phi_i unrestricted
    meta = {
        "kind": "dual", "n": n, "num_classes": ny, "pairs": pairs,
        "masses": masses, "alpha": spec.alpha,
    }
    return LinearProgram("max", c_obj, A, senses, b, free, meta)


def solve(lp: LinearProgram, max_iters=None, tol=1e-9, bland=False) -> LpSolution:
    """Solve to optimality, or return a definitive INFEASIBLE/UNBOUNDED/ITER_LIMIT.

    An ITER_LIMIT result signals the caller to retry with ``bland=True`` from
    the start (anti-cycling for the degenerate small-alpha programs).
    """
    m, nv = lp.num_rows, lp.num_vars
    minimize = lp.sense == "min"
    if m == 0:
        unbounded = np.any((lp.c < -tol) if minimize else (lp.c > tol)) or np.any(
            lp.free & (np.abs(lp.c) > tol)
        )
        status = UNBOUNDED if unbounded else OPTIMAL
        return LpSolution(status, np.zeros(nv), np.zeros(0), 0.0 if status == OPTIMAL else
                          (-np.inf if minimize else np.inf), 0,
                          0.0, 0.0, 0.0, dict(lp.meta))

    A_std, b_std, c_std, slack_basis, col_var, col_sign, flip = _standardize(lp)
    c_int = c_std if minimize else -c_std
    if max_iters is None:
        max_iters = 50 * (m + 20) + 10 * nv
    res = simplex.revised_simplex(A_std, b_std, c_int, slack_basis, max_iters, tol, bland)

    x = np.zeros(nv)
    np.add.at(x, col_var, col_sign * res.x[: col_var.size])
    duals = flip * res.duals
    if not minimize:
        duals = -duals
    objective = float(lp.c @ x)
    if res.status == UNBOUNDED:
        objective = -np.inf if minimize else np.inf

    sol = LpSolution(res.status, x, duals, objective, res.iterations, meta=dict(lp.meta))
    if res.status == OPTIMAL:
        sol.primal_residual = _primal_residual(lp, x)
        nstruct = col_var.size
        x_int = res.x
        red = res.reduced_costs
        sol.dual_residual = float(max(0.0, -red.min())) if red.size else 0.0
        sol.cs_residual = float(np.abs(x_int * red).max()) if red.size else 0.0
        _ = nstruct
    return sol


def _standardize(lp: LinearProgram):
    """Equality standard form with b >= 0; returns the column/row back-maps."""
    A = lp.A.tocsc()
    nv = lp.num_vars
    m = lp.num_rows
    col_var = []
    col_sign = []
    for j in range(nv):
        col_var.append(j)
        col_sign.append(1.0)
        if lp.free[j]:
            col_var.append(j)
            col_sign.append(-1.0)
    col_var = np.array(col_var, dtype=int)
    col_sign = np.array(col_sign)
    A_struct = A[:, col_var] @ sp.diags(col_sign)

    senses = np.array([{LE: 0, EQ: 1, GE: 2}[s] for s in lp.row_senses])
    ineq = np.flatnonzero(senses != 1)
    slack_sign = np.where(senses[ineq] == 0, 1.0, -1.0)
    S = sp.coo_matrix((slack_sign, (ineq, np.arange(ineq.size))), shape=(m, ineq.size))
    A_all = sp.hstack([A_struct, S], format="csc")

    flip = np.where(lp.b < 0, -1.0, 1.0)
    A_all = sp.diags(flip) @ A_all
    b_std = flip * lp.b

    slack_basis = np.full(m, -1, dtype=int)
    nstruct = col_var.size
    for pos, i in enumerate(ineq):
        if slack_sign[pos] * flip[i] > 0:  # slack enters with +1 after the flip
            slack_basis[i] = nstruct + pos

    c_std = np.concatenate([lp.c[col_var] * col_sign, np.zeros(ineq.size)])
    return A_all.tocsc(), b_std, c_std, slack_basis, col_var, col_sign, flip


def _primal_residual(lp: LinearProgram, x) -> float:
    ax = lp.A @ x
    worst = 0.0
    for i, s in enumerate(lp.row_senses):
        gap = ax[i] - lp.b[i]
        if s == LE:
            worst = max(worst, gap)
        elif s == GE:
            worst = max(worst, -gap)
        else:
            worst = max(worst, abs(gap))
    bound = float(np.maximum(-x[~lp.free], 0.0).max()) if np.any(~lp.free) else 0.0
    return float(max(worst, bound, 0.0))


def extract_psi(dual_solution: LpSolution, spec: FairnessSpec):
    """Dual values psi = psi+ - psi- plus a zero-sum verification report."""
    if dual_solution.status != OPTIMAL:
        raise InvalidStateError(f"need an OPTIMAL dual solution, got {dual_solution.status}")
    meta = dual_solution.meta
    if meta.get("kind") != "dual":
        raise InvalidStateError("solution does not carry a dual-LP layout")
    n = meta["n"]
    psi = {}
    for t, (c, k) in enumerate(meta["pairs"]):
        psi[(c, k)] = float(dual_solution.x[n + 2 * t] - dual_solution.x[n + 2 * t + 1])
    sums = []
    for c, (_, groups) in enumerate(spec.constraints):
        sums.append(sum(psi[(c, k)] for k in groups))
    report = {
        "per_constraint_sum": sums,
        "max_abs_sum": max((abs(s) for s in sums), default=0.0),
    }
    return psi, report


def psi_from_primal(primal_sol: LpSolution, spec: FairnessSpec):
    """Read the dual values psi off the fairness-row duals of a primal solve.

    With the reported min-sense convention (duals of <= rows are <= 0), the
    value for pair (c, k) is y_upper - y_lower of its two encoded rows.
    """
    if primal_sol.status != OPTIMAL:
        raise InvalidStateError(f"need an OPTIMAL primal solution, got {primal_sol.status}")
    meta = primal_sol.meta
    if meta.get("kind") != "primal":
        raise InvalidStateError("solution does not carry a primal-LP layout")
    n = meta["n"]
    psi = {}
    for t, (c, k) in enumerate(meta["pairs"]):
        psi[(c, k)] = float(primal_sol.duals[n + 2 * t] - primal_sol.duals[n + 2 * t + 1])
    sums = []
    for c, (_, groups) in enumerate(spec.constraints):
        sums.append(sum(psi[(c, k)] for k in groups))
    report = {
        "per_constraint_sum": sums,
        "max_abs_sum": max((abs(s) for s in sums), default=0.0),
    }
    return psi, report


@dataclass
class DualityReport:
    gap: float
    max_slack_at_support: float
    offenders: list
    ok: bool


def verify_duality(primal_sol: LpSolution, dual_sol: LpSolution,
                   lp_primal: LinearProgram, lp_dual: LinearProgram,
                   tol: float = DUALITY_GAP_TOL) -> DualityReport:
    """Strong duality plus complementary slackness across two independent solves.

    Any optimal primal/dual pair must satisfy both, so the two programs may
    have been solved separately.  Every pi(i, y) with mass above tol must sit
    on a tight dual row r[i,y] - (phi_i + sum g psi / m) <= tol.
    """
    if primal_sol.status != OPTIMAL or dual_sol.status != OPTIMAL:
        raise InvalidStateError("verify_duality needs two OPTIMAL solutions")
    gap = abs(primal_sol.objective - dual_sol.objective)
    n, ny = lp_primal.meta["n"], lp_primal.meta["num_classes"]
    slack = lp_dual.b - lp_dual.A @ dual_sol.x  # >= 0 rowwise for <= rows
    offenders = []
    worst = 0.0
    for i in range(n):
        for y in range(ny):
            pi_iy = primal_sol.x[i * ny + y]
            if pi_iy > tol:
                s = float(slack[i * ny + y])
                worst = max(worst, s)
                if s > tol:
                    offenders.append((i, y, s))
    return DualityReport(float(gap), worst, offenders, gap <= tol and not offenders)


def primal_from_dual(dual_sol: LpSolution, scores: ScoreBundle, spec: FairnessSpec):
    """Recover the randomized tabular solution (pi, q) from a dual solve.

    The row duals of the pointwise rows equal w_i * pi(i, y); samples with
    zero weight get the one-hot argmin row.  q_c is reconstructed as the
    midpoint of the feasible centroid band of pi, which is an optimal choice.
    """
    if dual_sol.status != OPTIMAL:
        raise InvalidStateError("need an OPTIMAL dual solution")
    n, ny = dual_sol.meta["n"], dual_sol.meta["num_classes"]
    masses = dual_sol.meta["masses"]
    w = scores.weights
    pi = dual_sol.duals[: n * ny].reshape(n, ny).copy()
    pos = w > 0
    pi[pos] /= w[pos, None]
    if np.any(~pos):
        idx = np.flatnonzero(~pos)
        pi[idx] = 0.0
        pi[idx, np.argmin(scores.risks[idx], axis=1)] = 1.0
    np.clip(pi, 0.0, None, out=pi)
    q = np.zeros(len(spec.constraints))
    for c, (target, groups) in enumerate(spec.constraints):
        rates = [
            float((w * scores.groups[:, k] / masses[k]) @ pi[:, target]) for k in groups
        ]
        q[c] = 0.5 * (max(rates) + min(rates))
    return pi, q


def dump(lp: LinearProgram) -> str:
    """Fixed-layout text dump for diffing against external solvers.

    First the objective line (sense then nonzero index:value pairs), then one
    line per row: index:value pairs, sense, rhs.  Variables are nonnegative
    unless listed on a trailing ``free`` line.
    """
    def pairs(idx, val):
        return " ".join(f"{i}:{v:.17g}" for i, v in zip(idx, val))

    lines = [f"{lp.sense} " + pairs(np.flatnonzero(lp.c), lp.c[np.flatnonzero(lp.c)])]
    csr = lp.A
    for i in range(lp.num_rows):
        lo, hi = csr.indptr[i], csr.indptr[i + 1]
        lines.append(
            f"{pairs(csr.indices[lo:hi], csr.data[lo:hi])} {lp.row_senses[i]} {lp.b[i]:.17g}"
        )
    if np.any(lp.free):
        lines.append("free " + " ".join(str(j) for j in np.flatnonzero(lp.free)))
    return "\n".join(lines) + "\n"
