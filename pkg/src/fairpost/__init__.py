"""fairpost: group-fair classification by linear post-processing of scores.

Fit flow: build a ScoreBundle (pointwise risks, group scores, weights),
pick a FairnessSpec (or derive one from a Criterion), call ``linear_post``,
and predict with the returned RandomizedClassifier.
"""

from .core import (FairnessSpec, NoiseSpec, PostprocessParams, RandomizedClassifier,
                   ScoreBundle, default_sigma, fairness_risk, perturb, weights_from_psi)
from .criteria import (Criterion, CriterionKind, GroupIndexing, GroupScheme,
                       build_group_scores, build_spec, derive_risks)
from .errors import (DataError, FairpostError, InvalidArgumentError, InvalidStateError,
                     SizeCapError, SolverError)
from .lp import (LinearProgram, LpSolution, ZeroGroupMassError, build_dual, build_primal,
                 extract_psi, solve, verify_duality)
from .postprocess import group_mass, linear_post, load_params, save_params
from .data import Dataset, Schema, load_csv, split, synth_random, synth_tightness
from .evaluate import (epsilon_g, epsilon_r, policy_risk, risk, sweep, violation_max,
                       violation_report, violation_rms)

__version__ = "0.1.0"

__all__ = [
    "FairnessSpec", "NoiseSpec", "PostprocessParams", "RandomizedClassifier",
    "ScoreBundle", "default_sigma", "fairness_risk", "perturb", "weights_from_psi",
    "Criterion", "CriterionKind", "GroupIndexing", "GroupScheme",
    "build_group_scores", "build_spec", "derive_risks",
    "DataError", "FairpostError", "InvalidArgumentError", "InvalidStateError",
    "SizeCapError", "SolverError",
    "LinearProgram", "LpSolution", "ZeroGroupMassError", "build_dual", "build_primal",
    "extract_psi", "solve", "verify_duality",
    "group_mass", "linear_post", "load_params", "save_params",
    "Dataset", "Schema", "load_csv", "split", "synth_random", "synth_tightness",
    "epsilon_g", "epsilon_r", "policy_risk", "risk", "sweep", "violation_max",
    "violation_report", "violation_rms",
    "__version__",
]
