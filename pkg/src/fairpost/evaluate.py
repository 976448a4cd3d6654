"""Risk and disparity measurement, deviation metrics, and tolerance sweeps.

Two kinds of object get evaluated here.  A *policy* is the randomized
classifier in tabular form: an n x num_classes row-stochastic matrix pi over
the atoms of a bundle, e.g. the LP solution attached to fitted params.
Policy metrics are exact (no sampling).  A RandomizedClassifier is evaluated
by realizing it into a policy: exactly when sigma == 0, by Monte-Carlo
averaging over fresh noise draws otherwise (the argmin cells of uniform
noise are polytopes, so no closed form is attempted).

Disparities are measured in the weighted Bayes form

    rate(c, k) = sum_i w_i g[i, k] pi[i, target_c] / mass_k

which equals the group-conditional rate Pr(h = y_c | Z_k = 1) whenever the
g columns are the true membership scores or indicators; pass the bundle
that carries the *true* group information.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import FairnessSpec, NoiseSpec, RandomizedClassifier, ScoreBundle
from .errors import InvalidArgumentError
from .postprocess import linear_post

log = logging.getLogger("fairpost")

SWEEP_COLUMNS = ("alpha", "risk", "violation_max", "violation_rms", "wall_time")

ANALYTIC = "analytic"
MONTE_CARLO = "monte_carlo"


def policy_from_classifier(classifier: RandomizedClassifier, scores: ScoreBundle,
                           draws: int = 10_000, seed=None) -> np.ndarray:
    """Realize a classifier into a tabular policy over the bundle's atoms."""
    adjusted = classifier.adjusted(scores.risks, scores.groups)
    n, ny = adjusted.shape
    sigma = classifier.sigma
    if sigma == 0:
        pi = np.zeros((n, ny))
        pi[np.arange(n), np.argmin(adjusted, axis=1)] = 1.0
        return pi
    if draws <= 0:
        raise InvalidArgumentError("draws must be positive when sigma > 0")
    rng = np.random.default_rng(classifier.params.noise.seed if seed is None else seed)
    pi = np.zeros((n, ny))
    chunk = max(1, min(draws, int(2e6 // max(n * ny, 1)) or 1))
    done = 0
    while done < draws:
        d = min(chunk, draws - done)
        noisy = adjusted[None, :, :] + rng.uniform(-sigma, sigma, size=(d, n, ny))
        labels = np.argmin(noisy, axis=2)
        for y in range(ny):
            pi[:, y] += (labels == y).sum(axis=0)
        done += d
    return pi / draws


def policy_risk(pi: np.ndarray, scores: ScoreBundle) -> float:
    """Exact weighted risk of a tabular policy: sum_i w_i sum_y r[i,y] pi[i,y]."""
    pi = np.asarray(pi, dtype=float)
    if pi.shape != scores.risks.shape:
        raise InvalidArgumentError("policy and bundle dimensions disagree")
    return float(np.einsum("i,iy,iy->", scores.weights, scores.risks, pi))


def risk(classifier: RandomizedClassifier, scores: ScoreBundle,
         mode: str = ANALYTIC, draws: int = 10_000, with_stderr: bool = False):
    """Weighted expected risk of the classifier on the bundle.

    ANALYTIC is exact for sigma == 0 and falls back to draw averaging
    otherwise; MONTE_CARLO forces draw averaging.  ``with_stderr`` also
    returns the standard error of the Monte-Carlo mean (0.0 when exact).
    """
    if mode not in (ANALYTIC, MONTE_CARLO):
        raise InvalidArgumentError(f"unknown risk mode {mode!r}")
    sigma = classifier.sigma
    if sigma > 0 and draws <= 0:
        raise InvalidArgumentError("draws must be positive when sigma > 0")
    if sigma == 0 and mode == ANALYTIC:
        pi = policy_from_classifier(classifier, scores)
        value = policy_risk(pi, scores)
        return (value, 0.0) if with_stderr else value
    adjusted = classifier.adjusted(scores.risks, scores.groups)
    n, ny = adjusted.shape
    rng = np.random.default_rng(classifier.params.noise.seed)
    totals = np.empty(draws)
    chunk = max(1, min(draws, int(2e6 // max(n * ny, 1)) or 1))
    done = 0
    while done < draws:
        d = min(chunk, draws - done)
        if sigma > 0:
            noisy = adjusted[None, :, :] + rng.uniform(-sigma, sigma, size=(d, n, ny))
        else:
            noisy = np.broadcast_to(adjusted, (d, n, ny))
        labels = np.argmin(noisy, axis=2)
        picked = np.take_along_axis(
            np.broadcast_to(scores.risks, (d, n, ny)), labels[:, :, None], axis=2
        )[:, :, 0]
        totals[done:done + d] = picked @ scores.weights
        done += d
    value = float(totals.mean())
    se = float(totals.std(ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
    return (value, se) if with_stderr else value


@dataclass
class ViolationReport:
    per_constraint: np.ndarray  # max pairwise disparity per constraint
    overall: float
    pair_disparities: list  # flat list over (c, k<k') pairs, order of constraints
    rates: list  # per constraint: {group: rate}


def _as_policy(classifier_or_policy, scores, draws):
    if isinstance(classifier_or_policy, RandomizedClassifier):
        return policy_from_classifier(classifier_or_policy, scores, draws=draws)
    pi = np.asarray(classifier_or_policy, dtype=float)
    if pi.shape != (scores.n, scores.num_classes):
        raise InvalidArgumentError("policy shape disagrees with bundle")
    return pi


def violation_report(classifier_or_policy, scores: ScoreBundle, spec: FairnessSpec,
                     draws: int = 10_000) -> ViolationReport:
    """Per-constraint max pairwise disparity; groups come from ``scores.groups``."""
    pi = _as_policy(classifier_or_policy, scores, draws)
    masses = scores.weights @ scores.groups
    per_c, pair_ds, rates = [], [], []
    for target, groups in spec.constraints:
        live = [k for k in groups if masses[k] > 0]
        for k in groups:
            if masses[k] <= 0:
                log.warning("violation: skipping zero-mass group %d", k)
        rate = {
            k: float((scores.weights * scores.groups[:, k] / masses[k]) @ pi[:, target])
            for k in live
        }
        rates.append(rate)
        ds = [abs(rate[a] - rate[b]) for i, a in enumerate(live) for b in live[i + 1:]]
        pair_ds.extend(ds)
        per_c.append(max(ds, default=0.0))
    return ViolationReport(
        per_constraint=np.array(per_c),
        overall=float(max(per_c, default=0.0)),
        pair_disparities=pair_ds,
        rates=rates,
    )


def violation_max(classifier_or_policy, scores, spec, draws: int = 10_000) -> float:
    return violation_report(classifier_or_policy, scores, spec, draws).overall


def violation_rms(classifier_or_policy, scores, spec, draws: int = 10_000) -> float:
    """Root mean square over all per-constraint pairwise disparities."""
    ds = violation_report(classifier_or_policy, scores, spec, draws).pair_disparities
    if not ds:
        return 0.0
    return float(np.sqrt(np.mean(np.square(ds))))


def epsilon_g(g_hat, g_true, weights) -> float:
    """max_k E | ghat_k / E[ghat_k] - g_k / E[g_k] | under the sample weights."""
    g_hat, g_true = np.asarray(g_hat, float), np.asarray(g_true, float)
    w = np.asarray(weights, float)
    if g_hat.shape != g_true.shape or g_hat.shape[0] != w.shape[0]:
        raise InvalidArgumentError("shape mismatch in epsilon_g")
    m_hat, m_true = w @ g_hat, w @ g_true
    if np.any(m_hat <= 0) or np.any(m_true <= 0):
        raise InvalidArgumentError("epsilon_g needs strictly positive group masses")
    dev = np.abs(g_hat / m_hat - g_true / m_true)
    return float((w @ dev).max())


def epsilon_r(r_hat, r_true, weights) -> float:
    """E sum_y | rhat(X, y) - r(X, y) | under the sample weights."""
    r_hat, r_true = np.asarray(r_hat, float), np.asarray(r_true, float)
    w = np.asarray(weights, float)
    if r_hat.shape != r_true.shape or r_hat.shape[0] != w.shape[0]:
        raise InvalidArgumentError("shape mismatch in epsilon_r")
    return float(w @ np.abs(r_hat - r_true).sum(axis=1))


def sweep(scores: ScoreBundle, spec_template: FairnessSpec, alphas, noise: NoiseSpec = None,
          seed: int = 0, solver_path: str = "dual", max_workers: int = 1) -> list:
    """One full fit + evaluation per tolerance; rows ordered by alpha descending.

    Each row reports the exact metrics of the fitted randomized solution on
    the fit bundle (risk against the unperturbed risks, disparities against
    the bundle's own g columns), so on exact bundles with sigma = 0 the risk
    column matches the program value to solver precision.
    """
    alphas = sorted({float(a) for a in alphas}, reverse=True)
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise InvalidArgumentError(f"alpha {a} outside [0, 1]")

    def run(item):
        idx, alpha = item
        spec = replace(spec_template, alpha=alpha)
        t0 = time.perf_counter()
        sub_seed = int(np.random.SeedSequence((seed, idx)).generate_state(1)[0])
        params, _ = linear_post(scores, spec, noise=noise, seed=sub_seed,
                                solver_path=solver_path)
        pi = params.fit.pi
        rep = violation_report(pi, scores, spec)
        return {
            "alpha": alpha,
            "risk": policy_risk(pi, scores),
            "violation_max": rep.overall,
            "violation_rms": violation_rms(pi, scores, spec),
            "wall_time": time.perf_counter() - t0,
        }

    items = list(enumerate(alphas))
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(run, items))
    else:
        rows = [run(it) for it in items]
    return rows


def write_report_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(SWEEP_COLUMNS))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SWEEP_COLUMNS})


def write_report_json(rows, path):
    with open(path, "w") as fh:
        json.dump([{k: row[k] for k in SWEEP_COLUMNS} for row in rows], fh, indent=2)
        fh.write("\n")
