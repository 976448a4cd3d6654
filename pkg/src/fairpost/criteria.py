"""Encodings of the standard parity criteria and group-score construction.

Each criterion is a choice of group indexing plus a list of
(target class, group set) constraints:

    SP        groups Z_a = 1[A=a],        constraints {(y, all a) : y}
    EOpp      groups Z_{a,y} = 1[A=a,Y=y], single constraint (1, {(a,1) : a})
    MC EOpp   same groups,                 constraints {(y, {(a,y) : a}) : y}
    EO        same groups,                 constraints {(y, {(a,y') : a}) : y, y'}

The (a, y) pairs flatten row-major by a then y; this ordering is load-bearing
because fitted psi/w indices must survive save/load.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .core import FairnessSpec
from .errors import InvalidArgumentError

SIMPLEX_TOL = 1e-9


class CriterionKind(enum.Enum):
    SP = "sp"
    EOPP_BINARY = "eopp"
    EOPP_MULTICLASS = "eopp_mc"
    EO = "eo"
    CUSTOM = "custom"


class GroupScheme(enum.Enum):
    ATTR = "attr"  # K = |A|, Z_a = 1[A=a]
    ATTR_LABEL = "attr_label"  # K = |A|*|Y|, Z_{a,y} = 1[A=a, Y=y]


@dataclass(frozen=True)
class Criterion:
    """A named parity criterion plus its problem dimensions.

    For CUSTOM, ``attr_arity`` is reinterpreted as the raw number of groups K
    and ``custom_constraints`` supplies the (class, group set) list verbatim;
    overlapping and combined criteria enter this way.
    """

    kind: CriterionKind
    attr_arity: int
    num_classes: int
    aware: bool = False
    custom_constraints: tuple = None  # only for CUSTOM: ((class, (k, ...)), ...)

    def __post_init__(self):
        if self.attr_arity < 2:
            raise InvalidArgumentError("attr_arity must be >= 2")
        if self.num_classes < 2:
            raise InvalidArgumentError("num_classes must be >= 2")


@dataclass(frozen=True)
class GroupIndexing:
    """Bijection between group labels and flat column indices of the g matrix."""

    scheme: GroupScheme
    attr_arity: int
    num_classes: int

    @property
    def num_groups(self):
        if self.scheme is GroupScheme.ATTR:
            return self.attr_arity
        return self.attr_arity * self.num_classes

    def flat(self, a: int, y: int = None) -> int:
        if self.scheme is GroupScheme.ATTR:
            if y is not None:
                raise InvalidArgumentError("ATTR scheme indexes by attribute only")
            return a
        if y is None:
            raise InvalidArgumentError("ATTR_LABEL scheme needs both (a, y)")
        return a * self.num_classes + y

    def unflat(self, k: int):
        if self.scheme is GroupScheme.ATTR:
            return (k,)
        return divmod(k, self.num_classes)


def build_spec(criterion: Criterion, alpha: float):
    """FairnessSpec + GroupIndexing realizing the criterion at tolerance alpha."""
    kind, n_attr, n_cls = criterion.kind, criterion.attr_arity, criterion.num_classes
    if kind is CriterionKind.SP:
        indexing = GroupIndexing(GroupScheme.ATTR, n_attr, n_cls)
        constraints = [(y, tuple(range(n_attr))) for y in range(n_cls)]
    elif kind is CriterionKind.EOPP_BINARY:
        if n_cls != 2:
            raise InvalidArgumentError("binary equal opportunity requires num_classes == 2")
        indexing = GroupIndexing(GroupScheme.ATTR_LABEL, n_attr, n_cls)
        constraints = [(1, tuple(indexing.flat(a, 1) for a in range(n_attr)))]
    elif kind is CriterionKind.EOPP_MULTICLASS:
        indexing = GroupIndexing(GroupScheme.ATTR_LABEL, n_attr, n_cls)
        constraints = [
            (y, tuple(indexing.flat(a, y) for a in range(n_attr))) for y in range(n_cls)
        ]
    elif kind is CriterionKind.EO:
        indexing = GroupIndexing(GroupScheme.ATTR_LABEL, n_attr, n_cls)
        constraints = [
            (y, tuple(indexing.flat(a, y2) for a in range(n_attr)))
            for y, y2 in itertools.product(range(n_cls), repeat=2)
        ]
    elif kind is CriterionKind.CUSTOM:
        if not criterion.custom_constraints:
            raise InvalidArgumentError("CUSTOM criterion needs custom_constraints")
        indexing = GroupIndexing(GroupScheme.ATTR, n_attr, n_cls)
        constraints = list(criterion.custom_constraints)
    else:  # pragma: no cover
        raise InvalidArgumentError(f"unknown criterion kind {kind}")
    spec = FairnessSpec(
        num_classes=n_cls,
        num_groups=indexing.num_groups,
        constraints=tuple(constraints),
        alpha=alpha,
    )
    return spec, indexing


def build_group_scores(
    indexing: GroupIndexing,
    aware: bool,
    attr_labels=None,
    f_A=None,
    f_Y_given_AX=None,
    f_AY=None,
) -> np.ndarray:
    """Assemble the n x K group-membership score matrix from plugin predictors.

    Exactly one consistent input combination is accepted:

      aware + ATTR        attr_labels                    g one-hot in A
      blind + ATTR        f_A                            g[i, a] = f_A[i, a]
      aware + ATTR_LABEL  attr_labels + f_Y_given_AX     g[i, (a,y)] = 1[A=a] f_Y(y | a, x)
      blind + ATTR_LABEL  f_AY, or f_A + f_Y_given_AX    g[i, (a,y)] = joint estimate
    """
    if indexing.scheme is GroupScheme.ATTR:
        if aware:
            if attr_labels is None or f_A is not None or f_AY is not None:
                raise InvalidArgumentError("aware ATTR takes attr_labels only")
            a = np.asarray(attr_labels, dtype=int)
            _check_attr_range(a, indexing.attr_arity)
            g = np.zeros((a.shape[0], indexing.attr_arity))
            g[np.arange(a.shape[0]), a] = 1.0
            return g
        if f_A is None or attr_labels is not None or f_AY is not None:
            raise InvalidArgumentError("blind ATTR takes f_A only")
        f_A = np.asarray(f_A, dtype=float)
        _check_rows_simplex(f_A, indexing.attr_arity, "f_A")
        return f_A.copy()

    n_attr, n_cls = indexing.attr_arity, indexing.num_classes
    if aware:
        if attr_labels is None or f_Y_given_AX is None or f_AY is not None:
            raise InvalidArgumentError("aware ATTR_LABEL takes attr_labels + f_Y_given_AX")
        a = np.asarray(attr_labels, dtype=int)
        _check_attr_range(a, n_attr)
        f_cond = np.asarray(f_Y_given_AX, dtype=float)
        if f_cond.shape != (a.shape[0], n_attr, n_cls):
            raise InvalidArgumentError(
                f"f_Y_given_AX must be n x {n_attr} x {n_cls}, got {f_cond.shape}"
            )
        g = np.zeros((a.shape[0], indexing.num_groups))
        idx = np.arange(a.shape[0])
        for y in range(n_cls):
            g[idx, a * n_cls + y] = f_cond[idx, a, y]
        return g
    if f_AY is not None:
        if f_A is not None or f_Y_given_AX is not None or attr_labels is not None:
            raise InvalidArgumentError("blind ATTR_LABEL takes f_AY alone, or f_A + f_Y_given_AX")
        f_AY = np.asarray(f_AY, dtype=float)
        _check_rows_simplex(f_AY, indexing.num_groups, "f_AY")
        return f_AY.copy()
    if f_A is None or f_Y_given_AX is None or attr_labels is not None:
        raise InvalidArgumentError("blind ATTR_LABEL takes f_AY alone, or f_A + f_Y_given_AX")
    f_A = np.asarray(f_A, dtype=float)
    f_cond = np.asarray(f_Y_given_AX, dtype=float)
    _check_rows_simplex(f_A, n_attr, "f_A")
    if f_cond.shape != (f_A.shape[0], n_attr, n_cls):
        raise InvalidArgumentError(
            f"f_Y_given_AX must be n x {n_attr} x {n_cls}, got {f_cond.shape}"
        )
    # joint[i, (a, y)] = Pr(A=a | x_i) * Pr(Y=y | A=a, x_i), flattened a-major
    return (f_A[:, :, None] * f_cond).reshape(f_A.shape[0], n_attr * n_cls)


def derive_risks(f_Y) -> np.ndarray:
    """0-1-loss pointwise risks 1 - f_Y from class-probability rows."""
    f_Y = np.asarray(f_Y, dtype=float)
    _check_rows_simplex(f_Y, f_Y.shape[1] if f_Y.ndim == 2 else -1, "f_Y")
    return 1.0 - f_Y


def _check_attr_range(a, n_attr):
    if a.ndim != 1:
        raise InvalidArgumentError("attr_labels must be a 1-D integer vector")
    if a.size and (a.min() < 0 or a.max() >= n_attr):
        raise InvalidArgumentError(f"attribute label out of range [0, {n_attr})")


def _check_rows_simplex(m, width, name):
    if m.ndim != 2 or (width >= 0 and m.shape[1] != width):
        raise InvalidArgumentError(f"{name} must be a 2-D matrix with {width} columns")
    if np.any(m < -SIMPLEX_TOL) or np.any(np.abs(m.sum(axis=1) - 1.0) > SIMPLEX_TOL):
        raise InvalidArgumentError(f"{name} rows must lie in the probability simplex")
