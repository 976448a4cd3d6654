"""Score calibration (Platt scaling, isotonic regression) and the
multicalibration-error metric.

Fairness of the post-processed classifier survives a wrong group predictor
as long as the predictor is right *on average over level sets* of the
feature pair (pointwise risk, group scores).  ``multical_error`` measures
exactly that deviation; exact level sets are replaced in practice by
quantile bins over each coordinate (``joint_level_keys``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


def _check_binary(labels):
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if not np.all(np.isin(uniq, (0, 1))) or uniq.size < 2:
        raise InvalidArgumentError("calibration needs binary labels with both values present")
    return labels.astype(float)


def _logit(s):
    s = np.clip(np.asarray(s, dtype=float), 1e-12, 1 - 1e-12)
    return np.log(s / (1 - s))


def platt(scores, binary_labels, max_iter: int = 100, tol: float = 1e-10):
    """Fit sigmoid(a * logit(s) + b) by logistic loss (damped Newton); returns (a, b).

    Scores here are probabilities, so the sigmoid acts on their log-odds:
    the identity map is representable as (a, b) = (1, 0), and already
    calibrated scores come back essentially unchanged.
    """
    s = _logit(scores)
    y = _check_binary(binary_labels)
    a, b = 1.0, 0.0
    loss = _platt_loss(s, y, a, b)
    for _ in range(max_iter):
        z = np.clip(a * s + b, -35, 35)
        p = 1.0 / (1.0 + np.exp(-z))
        r = p - y
        w = np.maximum(p * (1 - p), 1e-12)
        g = np.array([r @ s, r.sum()])
        h = np.array([[w @ (s * s), w @ s], [w @ s, w.sum()]])
        h[0, 0] += 1e-12
        h[1, 1] += 1e-12
        step = np.linalg.solve(h, g)
        t = 1.0
        while t > 1e-8:
            na, nb = a - t * step[0], b - t * step[1]
            new_loss = _platt_loss(s, y, na, nb)
            if new_loss <= loss + 1e-15:
                break
            t /= 2
        a, b, prev = na, nb, loss
        loss = _platt_loss(s, y, a, b)
        if abs(prev - loss) < tol:
            break
    return float(a), float(b)


def _platt_loss(s, y, a, b):
    z = np.clip(a * s + b, -35, 35)
    return float(np.mean(np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0) - z * y))


def apply_platt(scores, a, b):
    z = np.clip(a * _logit(scores) + b, -35, 35)
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class IsotonicMap:
    """Piecewise-constant nondecreasing map: training scores -> fitted values."""

    xs: np.ndarray  # unique training scores, ascending
    values: np.ndarray  # fitted value per unique score, nondecreasing

    def __call__(self, scores):
        s = np.asarray(scores, dtype=float)
        idx = np.clip(np.searchsorted(self.xs, s, side="right") - 1, 0, self.xs.size - 1)
        return self.values[idx]


def isotonic(scores, binary_labels) -> IsotonicMap:
    """Pool-adjacent-violators fit; minimizes in-sample squared error among
    all nondecreasing maps of the score."""
    s = np.asarray(scores, dtype=float)
    y = _check_binary(binary_labels)
    order = np.argsort(s, kind="stable")
    s, y = s[order], y[order]
    # pre-pool exactly tied scores so the fitted map is a function of s
    xs, start = np.unique(s, return_index=True)
    counts = np.diff(np.append(start, s.size)).astype(float)
    sums = np.add.reduceat(y, start)

    vals = list(sums / counts)
    wts = list(counts)
    spans = [1] * len(vals)  # how many unique scores each block covers
    pos = 0
    while pos < len(vals) - 1:
        if vals[pos] <= vals[pos + 1] + 1e-15:
            pos += 1
            continue
        total = wts[pos] + wts[pos + 1]
        vals[pos] = (vals[pos] * wts[pos] + vals[pos + 1] * wts[pos + 1]) / total
        wts[pos] = total
        spans[pos] += spans[pos + 1]
        del vals[pos + 1], wts[pos + 1], spans[pos + 1]
        if pos > 0:
            pos -= 1
    return IsotonicMap(xs=xs, values=np.repeat(vals, spans))


def calibrate_joint(f_AY, labels_AY, method: str = "platt") -> np.ndarray:
    """Per-cell one-vs-rest calibration of a joint predictor, then row renormalization."""
    f = np.asarray(f_AY, dtype=float)
    labels = np.asarray(labels_AY, dtype=int)
    if f.ndim != 2 or f.shape[0] != labels.shape[0]:
        raise InvalidArgumentError("f_AY rows must align with labels_AY")
    if method not in ("platt", "isotonic"):
        raise InvalidArgumentError("method must be 'platt' or 'isotonic'")
    out = np.empty_like(f)
    for j in range(f.shape[1]):
        y = (labels == j).astype(int)
        if method == "platt":
            a, b = platt(f[:, j], y)
            out[:, j] = apply_platt(f[:, j], a, b)
        else:
            out[:, j] = isotonic(f[:, j], y)(f[:, j])
    np.clip(out, 0.0, 1.0, out=out)
    sums = out.sum(axis=1, keepdims=True)
    bad = (sums <= 0).ravel()
    if np.any(bad):
        out[bad] = 1.0 / f.shape[1]
        sums = out.sum(axis=1, keepdims=True)
    return out / sums


def multical_error(g_hat, z_true, level_keys, weights=None) -> np.ndarray:
    """Per-group binned calibration error.

    For each group k:  (2 / m_k) * sum_bins | E[(ghat_k - z_k) 1[bin]] |
    with m_k = E[z_k]; expectations use the sample weights.
    """
    g = np.asarray(g_hat, dtype=float)
    z = np.asarray(z_true, dtype=float)
    keys = np.asarray(level_keys)
    if g.shape != z.shape or keys.shape[0] != g.shape[0]:
        raise InvalidArgumentError("g_hat, z_true, level_keys must align")
    n, k_groups = g.shape
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    m_true = w @ z
    for k in range(k_groups):
        if m_true[k] <= 0:
            raise InvalidArgumentError(f"group {k}: true membership column is empty")
    _, inv = np.unique(keys, return_inverse=True)
    err = np.zeros(k_groups)
    dev = w[:, None] * (g - z)
    for k in range(k_groups):
        per_bin = np.bincount(inv, weights=dev[:, k])
        err[k] = 2.0 * np.abs(per_bin).sum() / m_true[k]
    return err


def joint_level_keys(r_hat, g_hat, bins_per_coord: int = 10, max_bins: int = 1000) -> np.ndarray:
    """Quantile-bin ids over the coordinates of (r_hat, g_hat).

    Exact level sets are uncountable; this is the standard finite surrogate.
    The per-coordinate resolution backs off until at most ``max_bins``
    distinct joint bins are realized.
    """
    feats = np.hstack([np.asarray(r_hat, dtype=float), np.asarray(g_hat, dtype=float)])
    n = feats.shape[0]
    bins = max(1, int(bins_per_coord))
    while True:
        digits = np.empty(feats.shape, dtype=int)
        for j in range(feats.shape[1]):
            edges = np.quantile(feats[:, j], np.linspace(0, 1, bins + 1)[1:-1])
            digits[:, j] = np.searchsorted(edges, feats[:, j], side="left")
        _, keys = np.unique(digits, axis=0, return_inverse=True)
        if keys.max(initial=0) + 1 <= max_bins or bins == 1:
            return keys.reshape(n)
        bins = max(1, bins - 2)
