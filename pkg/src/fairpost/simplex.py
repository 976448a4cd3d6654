"""Two-phase revised simplex on equality standard form.

Operates on min c.x s.t. A x = b, x >= 0, b >= 0, with an explicit dense
basis inverse updated by elementary row operations.  Pricing is Dantzig
(most negative reduced cost) and switches permanently to Bland's rule once
the objective has made no progress for 2 * (#rows) consecutive iterations,
which is the regime the heavily degenerate small-alpha fairness programs
land in.  Artificial columns are added internally for rows that lack a unit
slack; they are barred from re-entering and pinned at zero by an extended
ratio test, so redundant rows are tolerated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SolverError

PIVOT_TOL = 1e-10  # entries smaller than this never pivot
FEAS_TOL = 1e-8

OPTIMAL = "OPTIMAL"
INFEASIBLE = "INFEASIBLE"
UNBOUNDED = "UNBOUNDED"
ITER_LIMIT = "ITER_LIMIT"


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray  # values of the standard-form columns (no artificials)
    duals: np.ndarray  # y = c_B B^-1, one entry per row
    objective: float
    iterations: int
    reduced_costs: np.ndarray


def revised_simplex(A, b, c, slack_basis, max_iters, tol=1e-9, bland=False):
    """Solve min c.x, A x = b, x >= 0 with b >= 0.

    ``slack_basis[i]`` names a column forming e_i usable as initial basic
    variable for row i, or -1 to request an artificial there.
    """
    A = sp.csc_matrix(A)
    m, n = A.shape
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(b < 0):
        raise SolverError("standard form requires b >= 0")

    need_art = np.flatnonzero(np.asarray(slack_basis) < 0)
    n_art = need_art.size
    if n_art:
        art = sp.csc_matrix(
            (np.ones(n_art), (need_art, np.arange(n_art))), shape=(m, n_art)
        )
        A_full = sp.hstack([A, art], format="csc")
    else:
        A_full = A
    AT = A_full.T.tocsr()  # for fast reduced-cost matvecs
    n_full = n + n_art
    is_art = np.zeros(n_full, dtype=bool)
    is_art[n:] = True

    basis = np.asarray(slack_basis, dtype=int).copy()
    basis[need_art] = n + np.arange(n_art)
    in_basis = np.zeros(n_full, dtype=bool)
    in_basis[basis] = True

    binv = np.eye(m)  # initial basis is a permutation of unit columns
    x_b = b.copy()

    iters = 0
    state = {"bland": bland, "stall": 0, "best": np.inf}

    def refactor():
        nonlocal binv, x_b
        dense_b = np.zeros((m, m))
        for r, j in enumerate(basis):
            col = A_full.getcol(j)
            dense_b[col.indices, r] = col.data
        try:
            binv = np.linalg.inv(dense_b)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise SolverError("basis matrix became singular") from exc
        x_b = binv @ b

    def run_phase(cost, barred):
        nonlocal iters, x_b, binv
        stall_limit = 2 * m
        state["stall"], state["best"] = 0, np.inf
        while True:
            if iters >= max_iters:
                return ITER_LIMIT
            c_b = cost[basis]
            y = c_b @ binv
            reduced = cost - AT @ y
            eligible = ~in_basis & ~barred
            cand = np.flatnonzero(eligible & (reduced < -tol))
            if cand.size == 0:
                return OPTIMAL
            if state["bland"]:
                j = cand[0]
            else:
                j = cand[np.argmin(reduced[cand])]

            col = A_full.getcol(j)
            d = binv[:, col.indices] @ col.data

            # Ratio test.  Basic artificials sitting at zero must not grow,
            # so they are forced out at ratio zero whatever the sign of d.
            pos = d > PIVOT_TOL
            art_rows = is_art[basis] & (np.abs(d) > PIVOT_TOL) & (x_b <= FEAS_TOL)
            candidates = np.flatnonzero(pos | art_rows)
            if candidates.size == 0:
                return UNBOUNDED
            ratios = np.where(
                pos[candidates],
                np.maximum(x_b[candidates], 0.0) / np.where(pos[candidates], d[candidates], 1.0),
                0.0,
            )
            theta = ratios.min()
            ties = candidates[ratios <= theta + 1e-12 * (1 + theta)]
            if state["bland"]:
                r = ties[np.argmin(basis[ties])]
            else:
                r = ties[np.argmax(np.abs(d[ties]))]

            leave = basis[r]
            x_b -= theta * d
            x_b[r] = theta
            np.maximum(x_b, 0.0, out=x_b)
            br = binv[r] / d[r]
            binv -= np.outer(d, br)
            binv[r] = br
            basis[r] = j
            in_basis[leave] = False
            in_basis[j] = True
            iters += 1

            obj = cost[basis] @ x_b
            if obj < state["best"] - 1e-12 * (1 + abs(state["best"])):
                state["best"], state["stall"] = obj, 0
            else:
                state["stall"] += 1
                if state["stall"] >= stall_limit:
                    state["bland"] = True

            if iters % 200 == 0:
                resid = np.abs(A_full[:, basis] @ x_b - b).max()
                if resid > 1e-9 * (1 + np.abs(b).max()):
                    refactor()

    # Phase 1: drive artificials to zero (skipped when none were needed).
    if n_art and x_b[is_art[basis]].sum() > 0:
        cost1 = np.zeros(n_full)
        cost1[n:] = 1.0
        status = run_phase(cost1, barred=is_art)
        if status == ITER_LIMIT:
            return SimplexResult(ITER_LIMIT, _expand(x_b, basis, n), np.zeros(m), np.nan, iters, np.zeros(n))
        if status == UNBOUNDED:  # pragma: no cover - phase 1 is bounded below
            raise SolverError("phase 1 reported unbounded; numerical breakdown")
        if cost1[basis] @ x_b > FEAS_TOL * (1 + np.abs(b).max()):
            return SimplexResult(INFEASIBLE, _expand(x_b, basis, n), np.zeros(m), np.nan, iters, np.zeros(n))
        _drive_out_artificials(A_full, AT, basis, in_basis, binv, is_art, n)

    cost2 = np.concatenate([c, np.zeros(n_art)]) if n_art else c
    status = run_phase(cost2, barred=is_art)
    if status == UNBOUNDED:
        return SimplexResult(UNBOUNDED, _expand(x_b, basis, n), np.zeros(m), -np.inf, iters, np.zeros(n))

    # Clean up before reporting: re-derive x_b and duals from a fresh factor
    # only if drift is detectable.
    resid = np.abs(A_full[:, basis] @ x_b - b).max()
    if resid > 0.5e-9 * (1 + np.abs(b).max()):
        refactor()
    y = cost2[basis] @ binv
    reduced = cost2 - AT @ y
    x = _expand(x_b, basis, n)
    obj = float(c @ x)
    return SimplexResult(status, x, y, obj, iters, reduced[:n])


def _expand(x_b, basis, n):
    x = np.zeros(n)
    keep = basis < n
    x[basis[keep]] = np.maximum(x_b[keep], 0.0)
    return x


def _drive_out_artificials(A_full, AT, basis, in_basis, binv, is_art, n):
    """Degenerate-pivot basic artificials out where a structural column can replace them."""
    for r in np.flatnonzero(is_art[basis]):
        row = AT @ binv[r]
        row[in_basis] = 0.0
        row[is_art] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) <= 100 * PIVOT_TOL:
            continue  # redundant row; artificial stays basic at zero
        col = A_full.getcol(j)
        d = binv[:, col.indices] @ col.data
        leave = basis[r]
        br = binv[r] / d[r]
        binv -= np.outer(d, br)
        binv[r] = br
        basis[r] = j
        in_basis[leave] = False
        in_basis[j] = True
