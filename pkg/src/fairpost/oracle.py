"""Brute-force LP verification for the test suite.

``enumerate_lp_optimum`` solves tiny programs by enumerating every basis of
the equality standard form and keeping the best feasible basic solution; a
basis that is feasible on both sides certifies optimality, and a feasible
program with no such basis is unbounded.  The routine deliberately shares no
code with the revised-simplex production path, down to its own
standard-form conversion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import FairnessSpec, NoiseSpec, ScoreBundle, perturb, weights_from_psi
from .errors import SizeCapError
from .lp import EQ, GE, LE, INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, LpSolution, build_primal

# The spec sheet nominally caps enumeration at 12 post-conversion columns, but
# the smallest interesting SP primal (n=2, binary) already needs 14, so the
# default cap is 16; see the decisions log.
DEFAULT_MAX_COLUMNS = 16

_FEAS_TOL = 1e-9
_DUAL_TOL = 1e-7


def _own_standard_form(lp: LinearProgram):
    """Independent equality-form conversion (dense, sign-flipped rows)."""
    A = lp.A.toarray().astype(float)
    m, nv = A.shape
    cols = [A]
    c = [lp.c.copy()]
    col_var, col_sign = list(range(nv)), [1.0] * nv
    for j in np.flatnonzero(lp.free):
        cols.append(-A[:, [j]])
        c.append([-lp.c[j]])
        col_var.append(j)
        col_sign.append(-1.0)
    for i, s in enumerate(lp.row_senses):
        if s == EQ:
            continue
        e = np.zeros((m, 1))
        e[i, 0] = 1.0 if s == LE else -1.0
        cols.append(e)
        c.append([0.0])
        col_var.append(-1)
        col_sign.append(0.0)
    A_std = np.hstack(cols)
    c_std = np.concatenate([np.atleast_1d(np.asarray(v, dtype=float)) for v in c])
    b = lp.b.copy()
    flip = np.where(b < 0, -1.0, 1.0)
    A_std *= flip[:, None]
    b = b * flip
    sense = 1.0 if lp.sense == "min" else -1.0
    return A_std, b, sense * c_std, np.array(col_var), np.array(col_sign), flip, sense


def enumerate_lp_optimum(lp: LinearProgram, max_columns: int = DEFAULT_MAX_COLUMNS) -> LpSolution:
    """Exact optimum of a tiny LP by exhaustive basis enumeration."""
    if lp.num_rows == 0:
        grow = (lp.c < 0) if lp.sense == "min" else (lp.c > 0)
        unbounded = bool(np.any(grow) or np.any(lp.free & (lp.c != 0)))
        obj = (-np.inf if lp.sense == "min" else np.inf) if unbounded else 0.0
        return LpSolution(UNBOUNDED if unbounded else OPTIMAL, np.zeros(lp.num_vars),
                          np.zeros(0), obj, 0, 0.0, 0.0, 0.0, dict(lp.meta))

    A, b, c, col_var, col_sign, flip, sense = _own_standard_form(lp)
    m, n_cols = A.shape
    if n_cols > max_columns:
        raise SizeCapError(f"{n_cols} columns exceeds enumeration cap {max_columns}")

    r = min(m, n_cols)
    combos = np.array(list(itertools.combinations(range(n_cols), r)), dtype=int)
    best = None  # (objective, x_basic, combo)
    scale = 1.0 + np.abs(b).max()

    if r == m:
        bases = A[:, combos].transpose(1, 0, 2)  # (ncombo, m, m)
        dets = np.linalg.det(bases)
        solvable = np.abs(dets) > 1e-14
        idx = np.flatnonzero(solvable)
        if idx.size:
            rhs = np.broadcast_to(b[:, None], (idx.size, m, 1)).copy()
            xs = np.linalg.solve(bases[idx], rhs)[:, :, 0]
            resid = np.abs(np.einsum("nij,nj->ni", bases[idx], xs) - b).max(axis=1)
            feas = (xs.min(axis=1) >= -_FEAS_TOL) & (resid <= _FEAS_TOL * scale)
            for t in np.flatnonzero(feas):
                combo = combos[idx[t]]
                obj = float(c[combo] @ xs[t])
                if best is None or obj < best[0] - 1e-12:
                    best = (obj, xs[t], combo)
    else:
        # more rows than columns: fall back to least-squares basic solutions
        for combo in combos:
            B = A[:, combo]
            x, res, rank, _ = np.linalg.lstsq(B, b, rcond=None)
            if np.abs(B @ x - b).max() <= _FEAS_TOL * scale and x.min() >= -_FEAS_TOL:
                obj = float(c[combo] @ x)
                if best is None or obj < best[0] - 1e-12:
                    best = (obj, x, combo)

    n_examined = combos.shape[0]
    if best is None:
        return LpSolution(INFEASIBLE, np.zeros(lp.num_vars), np.zeros(m), np.nan,
                          n_examined, meta=dict(lp.meta))

    # Optimality certificate: some basis attaining the best value must also be
    # dual feasible; if none is, the program is unbounded below (in min form).
    certified = None
    if r == m:
        for t in np.flatnonzero(solvable):
            combo = combos[t]
            B = A[:, combo]
            x = np.linalg.solve(B, b)
            if x.min() < -_FEAS_TOL or np.abs(B @ x - b).max() > _FEAS_TOL * scale:
                continue
            if c[combo] @ x > best[0] + 1e-9 * (1 + abs(best[0])):
                continue
            y = np.linalg.solve(B.T, c[combo])
            if (c - y @ A).min() >= -_DUAL_TOL:
                certified = (x, combo, y)
                break
        if certified is None:
            return LpSolution(UNBOUNDED, np.zeros(lp.num_vars), np.zeros(m),
                              -np.inf if lp.sense == "min" else np.inf,
                              n_examined, meta=dict(lp.meta))
    else:
        x, combo = best[1], best[2]
        y, *_ = np.linalg.lstsq(A[:, combo].T, c[combo], rcond=None)
        certified = (x, combo, y)

    x_std, combo, y = certified
    x = np.zeros(lp.num_vars)
    for pos, j in enumerate(combo):
        if col_var[j] >= 0:
            x[col_var[j]] += col_sign[j] * max(x_std[pos], 0.0)
    duals = flip * y if lp.sense == "min" else -flip * y
    objective = float(lp.c @ x)
    return LpSolution(OPTIMAL, x, duals, objective, n_examined,
                      0.0, 0.0, 0.0, dict(lp.meta))


@dataclass
class RepresentationReport:
    ok: bool
    sigma_entries: list  # one dict per sigma with diagnostics
    failures: list


def check_representation(scores: ScoreBundle, spec: FairnessSpec,
                         sigma_grid=(0.0, 1e-4, 1e-2), seed: int = 0,
                         tol: float = 1e-7,
                         max_columns: int = DEFAULT_MAX_COLUMNS) -> RepresentationReport:
    """Verify the complementary-slackness form of the optimal classifier.

    For each noise width: (a) every sample/class pair carrying primal mass
    must attain the minimum fairness-adjusted risk within tol; (b) for
    perturbed risks (sigma > 0), the deterministic argmin classifier built
    from the dual values disagrees with the randomized optimum on at most
    num_classes - 1 samples per class.
    """
    from .postprocess import shift_nonnegative

    failures, entries = [], []
    for si, sigma in enumerate(sigma_grid):
        rng = np.random.default_rng(seed + 7919 * si)
        risks = shift_nonnegative(
            perturb(scores.risks, NoiseSpec(sigma=float(sigma), seed=seed), rng)
        )
        bundle = ScoreBundle(risks=risks, groups=scores.groups, weights=scores.weights)
        lp_p = build_primal(bundle, spec)
        sol = enumerate_lp_optimum(lp_p, max_columns=max_columns)
        if sol.status != OPTIMAL:
            failures.append((sigma, f"oracle status {sol.status}"))
            continue
        n, ny = bundle.n, bundle.num_classes
        pi = sol.x[: n * ny].reshape(n, ny)
        psi = {}
        for t, (c, k) in enumerate(lp_p.meta["pairs"]):
            psi[(c, k)] = float(sol.duals[n + 2 * t] - sol.duals[n + 2 * t + 1])
        w = weights_from_psi(psi, lp_p.meta["masses"], spec)
        adjusted = risks + bundle.groups @ w.T

        argmin_gap = adjusted - adjusted.min(axis=1, keepdims=True)
        support_bad = [
            (i, y, float(argmin_gap[i, y]))
            for i in range(n) for y in range(ny)
            if pi[i, y] > tol and argmin_gap[i, y] > tol
        ]
        if support_bad:
            failures.append((sigma, f"support off argmin: {support_bad[:5]}"))

        det = np.argmin(adjusted, axis=1)
        disagreements = [
            int(np.sum(np.abs((det == y).astype(float) - pi[:, y]) > tol))
            for y in range(ny)
        ]
        if sigma > 0 and max(disagreements) > ny - 1:
            failures.append((sigma, f"deterministic gap {disagreements} exceeds {ny - 1}"))
        entries.append({
            "sigma": float(sigma),
            "objective": sol.objective,
            "disagreements_per_class": disagreements,
            "max_support_gap": max((g for *_, g in support_bad), default=0.0),
        })
    return RepresentationReport(ok=not failures, sigma_entries=entries, failures=failures)
