"""Domain types and the linear fairness-risk prediction rule.

The central decision rule, shared by everything downstream, scores class y on
an input with pointwise risks r and group-membership scores g as

    r[y] + xi_y + sum_k g[k] * w[y, k]

and predicts the argmin over y, breaking ties to the smallest class index.
The additive offset sum_k g[k] * w[y, k] is the fairness risk; w = 0 recovers
the plain risk-minimizing classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

# Class labels and group indices are plain ints throughout; range checks
# happen where they enter (FairnessSpec, data loading).

_WEIGHT_SUM_TOL = 1e-12
_PSI_SUM_TOL = 1e-7


def _readonly(a, dtype=float, ndim=None, name="array"):
    out = np.array(a, dtype=dtype)
    if ndim is not None and out.ndim != ndim:
        raise InvalidArgumentError(f"{name} must be {ndim}-dimensional, got shape {out.shape}")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FairnessSpec:
    """A constraint collection: parity of class ``target`` across each group set.

    ``constraints`` is an ordered list of ``(target_class, group_set)`` pairs;
    each group set is an ordered tuple of group indices whose rates of
    receiving ``target_class`` must agree within ``alpha``.
    """

    num_classes: int
    num_groups: int
    constraints: tuple
    alpha: float

    def __post_init__(self):
        if self.num_classes < 1:
            raise InvalidArgumentError("num_classes must be >= 1")
        if self.num_groups < 1:
            raise InvalidArgumentError("num_groups must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha must be in [0, 1], got {self.alpha}")
        normalized = []
        for c, (target, groups) in enumerate(self.constraints):
            target = int(target)
            groups = tuple(int(k) for k in groups)
            if not 0 <= target < self.num_classes:
                raise InvalidArgumentError(f"constraint {c}: class {target} out of range")
            if len(groups) < 2:
                raise InvalidArgumentError(f"constraint {c}: group set needs >= 2 groups")
            if len(set(groups)) != len(groups):
                raise InvalidArgumentError(f"constraint {c}: duplicate group index")
            for k in groups:
                if not 0 <= k < self.num_groups:
                    raise InvalidArgumentError(f"constraint {c}: group {k} out of range")
            normalized.append((target, groups))
        object.__setattr__(self, "constraints", tuple(normalized))

    @property
    def referenced_groups(self):
        """Sorted indices of groups appearing in at least one constraint."""
        seen = set()
        for _, groups in self.constraints:
            seen.update(groups)
        return tuple(sorted(seen))


@dataclass(frozen=True)
class ScoreBundle:
    """Per-sample risks, group scores, and sample weights.

    ``risks`` is n x num_classes with entries >= 0, ``groups`` is n x K with
    entries in [0, 1] (rows may be multi-hot for overlapping groups), and
    ``weights`` is a nonnegative n-vector summing to 1.  Weights generalize
    the uniform empirical measure so exact finite distributions can be
    evaluated without sampling.
    """

    risks: np.ndarray
    groups: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        risks = _readonly(self.risks, ndim=2, name="risks")
        groups = _readonly(self.groups, ndim=2, name="groups")
        n = risks.shape[0]
        if groups.shape[0] != n:
            raise InvalidArgumentError(
                f"risks has {n} rows but groups has {groups.shape[0]}"
            )
        if self.weights is None:
            weights = np.full(n, 1.0 / n)
            weights.flags.writeable = False
        else:
            weights = _readonly(self.weights, ndim=1, name="weights")
        if weights.shape[0] != n:
            raise InvalidArgumentError("weights length does not match sample count")
        if not np.all(np.isfinite(risks)) or np.any(risks < 0):
            raise InvalidArgumentError("risks must be finite and >= 0")
        if not np.all(np.isfinite(groups)) or np.any(groups < 0) or np.any(groups > 1):
            raise InvalidArgumentError("group scores must lie in [0, 1]")
        if np.any(weights < 0):
            raise InvalidArgumentError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise InvalidArgumentError(
                f"weights must sum to 1 within {_WEIGHT_SUM_TOL}, got {weights.sum()!r}"
            )
        object.__setattr__(self, "risks", risks)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self):
        return self.risks.shape[0]

    @property
    def num_classes(self):
        return self.risks.shape[1]

    @property
    def num_groups(self):
        return self.groups.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform U(-sigma, sigma) perturbation per class, drawn fresh per call.

    ``sigma=None`` means the data-driven default 1e-4 * E[max_y risks] is
    resolved at fit time; ``sigma=0`` disables randomization entirely.
    """

    sigma: float = None
    seed: int = 0

    def __post_init__(self):
        if self.sigma is not None and self.sigma < 0:
            raise InvalidArgumentError(f"sigma must be >= 0, got {self.sigma}")

    def resolved(self, scores: ScoreBundle) -> "NoiseSpec":
        if self.sigma is not None:
            return self
        return NoiseSpec(sigma=default_sigma(scores), seed=self.seed)


def default_sigma(scores: ScoreBundle) -> float:
    """Noise half-width 1e-4 * weighted mean of the per-sample sup-norm of risks."""
    return 1e-4 * float(scores.weights @ np.abs(scores.risks).max(axis=1))


@dataclass(frozen=True)
class PostprocessParams:
    """Fitted post-processing: dual values psi, group masses, and weights w.

    ``psi`` maps (constraint index, group index) -> dual value, with
    sum_{k in I_c} psi[c, k] = 0 per constraint; the weight matrix satisfies
    w[y, k] = -sum_{c: target_c = y, k in I_c} psi[c, k] / group_mass[k].
    ``fit`` optionally carries solver diagnostics from the fitting run.
    """

    psi: dict
    group_mass: np.ndarray
    weights_w: np.ndarray
    noise: NoiseSpec
    spec: FairnessSpec
    fit: "object" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        mass = _readonly(self.group_mass, ndim=1, name="group_mass")
        w = _readonly(self.weights_w, ndim=2, name="weights_w")
        spec = self.spec
        if mass.shape[0] != spec.num_groups or w.shape != (spec.num_classes, spec.num_groups):
            raise InvalidArgumentError("group_mass/weights_w shapes disagree with spec")
        psi = dict(self.psi)
        for c, (_, groups) in enumerate(spec.constraints):
            total = sum(psi.get((c, k), 0.0) for k in groups)
            if abs(total) > _PSI_SUM_TOL:
                raise InvalidArgumentError(
                    f"constraint {c}: sum_k psi = {total:.3e} violates the zero-sum dual row"
                )
        for k in spec.referenced_groups:
            if not mass[k] > 0:
                raise InvalidArgumentError(f"group {k} is referenced but has mass {mass[k]}")
        expected = weights_from_psi(psi, mass, spec)
        if not np.allclose(w, expected, rtol=0, atol=1e-12 * (1 + np.abs(expected).max())):
            raise InvalidArgumentError("weights_w does not match -sum(psi)/mass")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "group_mass", mass)
        object.__setattr__(self, "weights_w", w)


def weights_from_psi(psi: dict, group_mass: np.ndarray, spec: FairnessSpec) -> np.ndarray:
    """w[y, k] = -sum over constraints c with target y and k in I_c of psi[c,k]/mass[k]."""
    w = np.zeros((spec.num_classes, spec.num_groups))
    for c, (target, groups) in enumerate(spec.constraints):
        for k in groups:
            value = psi.get((c, k), 0.0)
            if value != 0.0:
                w[target, k] -= value / group_mass[k]
    return w


def fairness_risk(r_row, g_row, weights_w) -> np.ndarray:
    """Per-class adjusted risk r[y] + sum_k g[k] * w[y, k]."""
    r_row = np.asarray(r_row, dtype=float)
    g_row = np.asarray(g_row, dtype=float)
    weights_w = np.asarray(weights_w, dtype=float)
    if weights_w.ndim != 2 or r_row.shape != (weights_w.shape[0],) or g_row.shape != (weights_w.shape[1],):
        raise InvalidArgumentError(
            f"dimension mismatch: r {r_row.shape}, g {g_row.shape}, w {weights_w.shape}"
        )
    return r_row + weights_w @ g_row


def perturb(risks, noise: NoiseSpec, rng=None) -> np.ndarray:
    """Add an independent U(-sigma, sigma) draw to every entry.

    With sigma == 0 the input is returned unchanged.  The continuous,
    coordinate-independent perturbation makes argmin ties a null event,
    at an expected risk cost of num_classes * sigma / 2.
    """
    risks = np.asarray(risks, dtype=float)
    if noise.sigma is None:
        raise InvalidArgumentError("noise.sigma unresolved; call NoiseSpec.resolved first")
    if noise.sigma == 0:
        return risks
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    return risks + rng.uniform(-noise.sigma, noise.sigma, size=risks.shape)


class RandomizedClassifier:
    """Prediction rule of the fitted post-processing.

    Given a fixed noise draw the prediction is a deterministic function of
    (r_row, g_row); fresh noise is drawn per call from this instance's stream.
    ``predict_batch`` forks one stream per sample index so parallel batch
    prediction is reproducible given (seed, sample index) alone.
    """

    def __init__(self, params: PostprocessParams):
        self.params = params
        self._rng = np.random.default_rng(params.noise.seed)

    @property
    def sigma(self):
        return self.params.noise.sigma

    def adjusted(self, risks, groups) -> np.ndarray:
        """Noise-free adjusted risk matrix risks + groups @ w.T."""
        risks = np.atleast_2d(np.asarray(risks, dtype=float))
        groups = np.atleast_2d(np.asarray(groups, dtype=float))
        w = self.params.weights_w
        if risks.shape[1] != w.shape[0] or groups.shape[1] != w.shape[1]:
            raise InvalidArgumentError("row dimensions disagree with fitted params")
        return risks + groups @ w.T

    def predict(self, r_row, g_row) -> int:
        scores = fairness_risk(r_row, g_row, self.params.weights_w)
        if self.sigma > 0:
            scores = scores + self._rng.uniform(-self.sigma, self.sigma, size=scores.shape)
        return int(np.argmin(scores))  # argmin takes the smallest index on ties

    def predict_batch(self, risks, groups) -> np.ndarray:
        """Labels for each row, one independent noise stream per sample index."""
        scores = self.adjusted(risks, groups)
        if self.sigma > 0:
            seed = self.params.noise.seed
            noise = np.empty_like(scores)
            for i in range(scores.shape[0]):
                noise[i] = self.fork(i).uniform(-self.sigma, self.sigma, size=scores.shape[1])
            scores = scores + noise
        return np.argmin(scores, axis=1)

    def fork(self, sample_index: int):
        """Independent generator for one sample, deterministic in (seed, index)."""
        key = np.array([self.params.noise.seed % (2**64), sample_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))
