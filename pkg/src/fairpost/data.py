"""Dataset ingestion, splits, and exact synthetic generators.

CSV loading is schema driven: a JSON document assigns column roles

    {"label": "y", "attribute": "a", "features": [...],
     "risks": [...], "groups": [...], "weight": "w"}

where every key is optional.  Files carrying precomputed ``risks`` and
``groups`` columns turn straight into a ScoreBundle, bypassing model
training.  Categorical feature columns are one-hot encoded.

``synth_tightness`` builds the exact two-atom statistical-parity instance
whose optimal and plugin values are known in closed form; it is the
workhorse of the analytic test suite.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import FairnessSpec, ScoreBundle
from .errors import DataError, InvalidArgumentError

log = logging.getLogger("fairpost")


@dataclass(frozen=True)
class Schema:
    label: str = None
    attribute: str = None
    features: tuple = ()
    risks: tuple = ()
    groups: tuple = ()
    weight: str = None

    @classmethod
    def from_json(cls, path) -> "Schema":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise DataError(f"schema file not found: {path}")
        except json.JSONDecodeError as exc:
            raise DataError(f"schema file {path} is not valid JSON: {exc}")
        known = {"label", "attribute", "features", "risks", "groups", "weight"}
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"schema has unknown keys: {sorted(unknown)}")
        return cls(
            label=raw.get("label"),
            attribute=raw.get("attribute"),
            features=tuple(raw.get("features", ())),
            risks=tuple(raw.get("risks", ())),
            groups=tuple(raw.get("groups", ())),
            weight=raw.get("weight"),
        )


@dataclass(frozen=True)
class Dataset:
    n: int
    features: np.ndarray = None
    feature_names: tuple = ()
    labels: np.ndarray = None
    attrs: np.ndarray = None
    risks: np.ndarray = None
    groups: np.ndarray = None
    weights: np.ndarray = None

    def bundle(self) -> ScoreBundle:
        if self.risks is None or self.groups is None:
            raise DataError("dataset lacks risk/group score columns; fit a model first")
        return ScoreBundle(risks=self.risks, groups=self.groups, weights=self.weights)

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)

        def sub(a):
            return None if a is None else a[idx]

        w = sub(self.weights)
        if w is not None:
            w = w / w.sum()
        return Dataset(
            n=idx.size, features=sub(self.features), feature_names=self.feature_names,
            labels=sub(self.labels), attrs=sub(self.attrs), risks=sub(self.risks),
            groups=sub(self.groups), weights=w,
        )


def load_csv(path, schema: Schema) -> Dataset:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataError(f"{path}: empty file")
            header = list(reader.fieldnames)
            rows = list(reader)
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}")
    if not rows:
        raise DataError(f"{path}: no data rows")

    declared = [schema.label, schema.attribute, schema.weight,
                *schema.features, *schema.risks, *schema.groups]
    missing = [c for c in declared if c is not None and c not in header]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")

    def column(name):
        return [r[name] for r in rows]

    def numeric(name, what):
        out = np.empty(len(rows))
        for i, v in enumerate(column(name)):
            try:
                out[i] = float(v)
            except (TypeError, ValueError):
                raise DataError(f"{path}: non-numeric cell {v!r} in column {name} (row {i})")
        if not np.all(np.isfinite(out)):
            raise DataError(f"{path}: non-finite value in {what} column {name}")
        return out

    def integral(name, what):
        vals = numeric(name, what)
        if np.any(vals != np.round(vals)) or np.any(vals < 0):
            raise DataError(f"{path}: {what} column {name} must hold nonnegative integers")
        return vals.astype(int)

    labels = integral(schema.label, "label") if schema.label else None
    attrs = integral(schema.attribute, "attribute") if schema.attribute else None

    features, names = None, ()
    if schema.features:
        blocks, names_out = [], []
        for name in schema.features:
            raw = column(name)
            try:
                blocks.append(np.array([float(v) for v in raw])[:, None])
                names_out.append(name)
            except ValueError:
                cats = sorted(set(raw))
                onehot = np.zeros((len(raw), len(cats)))
                lut = {c: j for j, c in enumerate(cats)}
                for i, v in enumerate(raw):
                    onehot[i, lut[v]] = 1.0
                blocks.append(onehot)
                names_out.extend(f"{name}={c}" for c in cats)
        features = np.hstack(blocks)
        if not np.all(np.isfinite(features)):
            raise DataError(f"{path}: non-finite feature value")
        names = tuple(names_out)

    risks = None
    if schema.risks:
        risks = np.column_stack([numeric(c, "risk") for c in schema.risks])
        if np.any(risks < 0):
            raise DataError(f"{path}: risk columns must be >= 0")
    groups = None
    if schema.groups:
        groups = np.column_stack([numeric(c, "group") for c in schema.groups])
        if np.any(groups < 0) or np.any(groups > 1):
            raise DataError(f"{path}: group columns must lie in [0, 1]")

    weights = None
    if schema.weight:
        weights = numeric(schema.weight, "weight")
        if np.any(weights < 0):
            raise DataError(f"{path}: negative weight")
        total = weights.sum()
        if total <= 0:
            raise DataError(f"{path}: weights sum to {total}, cannot normalize")
        if abs(total - 1.0) > 1e-9:
            log.warning("%s: weights sum to %.9g, renormalizing", path, total)
        weights = weights / total

    return Dataset(n=len(rows), features=features, feature_names=names, labels=labels,
                   attrs=attrs, risks=risks, groups=groups, weights=weights)


def split(dataset: Dataset, fractions, seed: int = 0):
    """Disjoint, exhaustive split by largest-remainder rounding of a seeded shuffle."""
    fractions = [float(f) for f in fractions]
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"fractions must be positive and sum to 1, got {fractions}")
    n = dataset.n
    raw = [f * n for f in fractions]
    sizes = [int(np.floor(r)) for r in raw]
    remainders = [r - s for r, s in zip(raw, sizes)]
    for idx in sorted(range(len(fractions)), key=lambda i: -remainders[i]):
        if sum(sizes) == n:
            break
        sizes[idx] += 1
    perm = np.random.default_rng(seed).permutation(n)
    out, start = [], 0
    for s in sizes:
        out.append(dataset.take(perm[start:start + s]))
        start += s
    return tuple(out)


@dataclass(frozen=True)
class TightnessInstance:
    """Two-atom SP construction with closed-form optimal values.

    Atoms x in {0, 1} with equal weight, label Y = X, binary attribute with
    Pr(X=0 | A=0) = p in [0, 1/2] and the mirror for A=1, so the Bayes
    classifier has zero risk and SP disparity delta = 1 - 2p.  The plugin
    group predictor uses p_hat = p - epsilon/2, inflating the perceived
    disparity to delta + epsilon.
    """

    p: float
    epsilon: float
    delta: float
    bundle_true: ScoreBundle
    bundle_plugin: ScoreBundle
    metadata: dict = field(default_factory=dict)

    def sp_spec(self, alpha: float) -> FairnessSpec:
        return FairnessSpec(num_classes=2, num_groups=2,
                            constraints=((0, (0, 1)), (1, (0, 1))), alpha=alpha)

    def opt_risk(self, alpha: float) -> float:
        return self._value(alpha, self.delta)

    def plugin_risk(self, alpha: float) -> float:
        return self._value(alpha, self.delta + self.epsilon)

    def plugin_excess(self, alpha: float) -> float:
        return self.plugin_risk(alpha) - self.opt_risk(alpha)

    @staticmethod
    def _value(alpha: float, disparity: float) -> float:
        if disparity <= 0:
            return 0.0
        return 0.5 * max(1.0 - alpha / disparity, 0.0) if alpha > 0 else 0.5

    @property
    def epsilon_g(self) -> float:
        return self.epsilon


def synth_tightness(p: float, epsilon: float = 0.0,
                    alphas=(0.02, 0.05, 0.1, 0.2, 0.5)) -> TightnessInstance:
    """Exact tightness instance; epsilon is the plugin deviation in [0, 1 - delta]."""
    if not 0.0 <= p <= 0.5:
        raise InvalidArgumentError(f"p must lie in [0, 1/2], got {p}")
    delta = 1.0 - 2.0 * p
    if not 0.0 <= epsilon <= 1.0 - delta + 1e-12:
        raise InvalidArgumentError(
            f"epsilon must lie in [0, 1 - delta] = [0, {1.0 - delta}], got {epsilon}"
        )
    risks = np.array([[0.0, 1.0], [1.0, 0.0]])
    weights = np.array([0.5, 0.5])

    def attr_posteriors(p0):
        # Pr(A = a | X = x) for the two atoms; uniform marginals make this p0 itself
        return np.array([[p0, 1.0 - p0], [1.0 - p0, p0]])

    p_hat = p - epsilon / 2.0
    inst = TightnessInstance(
        p=p, epsilon=epsilon, delta=delta,
        bundle_true=ScoreBundle(risks=risks, groups=attr_posteriors(p), weights=weights),
        bundle_plugin=ScoreBundle(risks=risks, groups=attr_posteriors(p_hat), weights=weights),
    )
    meta = {
        "p": p, "p_hat": p_hat, "delta": delta, "epsilon_g": epsilon,
        "bayes_risk": 0.0, "bayes_sp_disparity": delta,
        "table": [
            {
                "alpha": a,
                "opt_risk": inst.opt_risk(a),
                "plugin_risk": inst.plugin_risk(a),
                "excess": inst.plugin_excess(a),
            }
            for a in alphas
        ],
    }
    object.__setattr__(inst, "metadata", meta)
    return inst


def synth_random(seed: int, n: int = 4, num_classes: int = 2, num_groups: int = 2,
                 one_hot: bool = False, random_weights: bool = False):
    """Tiny random exact bundle plus candidate specs, for the enumeration oracle.

    Sizes are capped (n <= 6, classes <= 3, groups <= 3) to keep downstream
    basis enumeration immediate.
    """
    if n > 6 or num_classes > 3 or num_groups > 3:
        raise InvalidArgumentError("oracle-sized instances only: n<=6, classes<=3, groups<=3")
    if n < 2 or num_classes < 2 or num_groups < 2:
        raise InvalidArgumentError("need at least 2 samples, classes, and groups")
    rng = np.random.default_rng(seed)
    risks = rng.uniform(0.0, 1.0, size=(n, num_classes))
    if one_hot:
        assign = np.concatenate([np.arange(num_groups), rng.integers(0, num_groups, n - num_groups)])
        rng.shuffle(assign)  # every group occupied, so masses stay positive
        groups = np.zeros((n, num_groups))
        groups[np.arange(n), assign] = 1.0
    else:
        groups = rng.dirichlet(np.ones(num_groups), size=n)
    weights = rng.dirichlet(np.ones(n)) if random_weights else np.full(n, 1.0 / n)
    bundle = ScoreBundle(risks=risks, groups=groups, weights=weights)

    all_groups = tuple(range(num_groups))
    candidates = [
        FairnessSpec(num_classes, num_groups, ((1, all_groups),), alpha=1.0),
        FairnessSpec(num_classes, num_groups,
                     tuple((y, all_groups) for y in range(num_classes)), alpha=1.0),
    ]
    return bundle, candidates
