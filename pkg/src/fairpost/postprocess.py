"""End-to-end fitting: perturb risks, solve the dual, form w, assemble the rule.

The fit perturbs each sample's risk row once with fresh uniform noise, solves
the empirical dual program on the perturbed bundle, extracts the dual values
psi, and forms

    w(y, k) = - sum_{c: target_c = y, k in I_c} psi[c, k] / mass[k].

The returned classifier draws fresh noise again on every prediction; the two
draws are independent by design (the fit-time draw realizes the uniqueness
perturbation inside the program, the predict-time draw randomizes outputs).
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
from dataclasses import dataclass, replace

import numpy as np

from .core import (FairnessSpec, NoiseSpec, PostprocessParams, RandomizedClassifier,
                   ScoreBundle, perturb, weights_from_psi)
from .errors import InvalidArgumentError, SolverError
from . import lp as lp_mod
from .lp import OPTIMAL, ITER_LIMIT, ZeroGroupMassError

log = logging.getLogger("fairpost")

PARAMS_MAGIC = b"FPST"
PARAMS_VERSION = 1


def group_mass(scores: ScoreBundle) -> np.ndarray:
    """Empirical group masses: weighted column means of the g matrix."""
    return lp_mod.group_masses(scores)


def shift_nonnegative(risks: np.ndarray) -> np.ndarray:
    """Raise each row by a constant so every entry is >= 0.

    Adding a constant to one sample's whole risk row moves any feasible
    objective by weight * constant and the dual phi by the same constant,
    so the optimizers (pi, psi) of the fairness programs are untouched;
    this keeps noise-perturbed risks inside the bundle contract exactly.
    """
    shift = np.minimum(risks.min(axis=1, keepdims=True), 0.0)
    return risks - shift


@dataclass
class FitInfo:
    """Solver diagnostics attached to fitted params (not serialized)."""

    objective: float
    iterations: int
    sigma: float
    solver_path: str
    pi: np.ndarray  # randomized tabular solution on the fit bundle
    q: np.ndarray  # optimal centroids per constraint
    psi_zero_sum: float
    dropped_groups: tuple = ()
    dropped_constraints: tuple = ()


def linear_post(scores: ScoreBundle, spec: FairnessSpec, noise: NoiseSpec = None,
                seed: int = 0, drop_empty: bool = False,
                solver_path: str = "dual", max_iters=None):
    """Fit the linear post-processing; returns (params, classifier).

    ``solver_path`` picks which side of the program the simplex runs on;
    both yield identical psi (the other side is read off the row duals).
    The dual side is the default, the primal side has fewer rows and is
    faster when the sample count dominates.
    """
    if solver_path not in ("dual", "primal"):
        raise InvalidArgumentError("solver_path must be 'dual' or 'primal'")
    noise = (noise or NoiseSpec()).resolved(scores)
    spec, dropped_groups, dropped_constraints = _apply_drop_empty(scores, spec, drop_empty)

    rng = np.random.default_rng(seed)
    perturbed = ScoreBundle(
        risks=shift_nonnegative(perturb(scores.risks, noise, rng)),
        groups=scores.groups,
        weights=scores.weights,
    )

    if solver_path == "dual":
        program = lp_mod.build_dual(perturbed, spec)
    else:
        program = lp_mod.build_primal(perturbed, spec)
    sol = lp_mod.solve(program, max_iters=max_iters)
    if sol.status == ITER_LIMIT:
        log.warning("simplex hit the iteration limit; retrying with Bland's rule")
        sol = lp_mod.solve(program, max_iters=max_iters, bland=True)
    if sol.status != OPTIMAL:
        raise SolverError(
            f"{solver_path} LP ended {sol.status}; fairness programs are always "
            "feasible and bounded, so this indicates a solver failure",
            dump=lp_mod.dump(program),
        )

    if solver_path == "dual":
        psi, report = lp_mod.extract_psi(sol, spec)
        pi, q = lp_mod.primal_from_dual(sol, perturbed, spec)
        objective = sol.objective
    else:
        psi, report = lp_mod.psi_from_primal(sol, spec)
        n, ny = scores.n, scores.num_classes
        pi = sol.x[: n * ny].reshape(n, ny)
        q = sol.x[n * ny:].copy()
        objective = sol.objective

    masses = lp_mod.group_masses(scores)
    w = weights_from_psi(psi, masses, spec)
    info = FitInfo(
        objective=float(objective), iterations=sol.iterations,
        sigma=noise.sigma, solver_path=solver_path, pi=pi, q=q,
        psi_zero_sum=report["max_abs_sum"],
        dropped_groups=dropped_groups, dropped_constraints=dropped_constraints,
    )
    params = PostprocessParams(psi=psi, group_mass=masses, weights_w=w,
                               noise=noise, spec=spec, fit=info)
    return params, RandomizedClassifier(params)


def _apply_drop_empty(scores: ScoreBundle, spec: FairnessSpec, drop_empty: bool):
    masses = lp_mod.group_masses(scores)
    dead = tuple(k for k in spec.referenced_groups if not masses[k] > 0)
    if not dead:
        return spec, (), ()
    if not drop_empty:
        raise ZeroGroupMassError(dead)
    kept, dropped_cons = [], []
    for c, (target, groups) in enumerate(spec.constraints):
        alive = tuple(k for k in groups if masses[k] > 0)
        if len(alive) >= 2:
            kept.append((target, alive))
        else:
            dropped_cons.append(c)
    log.warning("dropping zero-mass groups %s (constraints removed: %s)", dead, dropped_cons)
    new_spec = replace(spec, constraints=tuple(kept))
    return new_spec, dead, tuple(dropped_cons)


def save_params(params: PostprocessParams) -> bytes:
    """Versioned, self-describing, checksummed binary image of fitted params."""
    spec = params.spec
    psi_keys = sorted(params.psi.keys())
    header = {
        "num_classes": spec.num_classes,
        "num_groups": spec.num_groups,
        "alpha": spec.alpha,
        "constraints": [[t, list(g)] for t, g in spec.constraints],
        "sigma": params.noise.sigma,
        "noise_seed": params.noise.seed,
        "psi_keys": [list(k) for k in psi_keys],
    }
    buf = io.BytesIO()
    buf.write(PARAMS_MAGIC)
    buf.write(PARAMS_VERSION.to_bytes(4, "little"))
    hdr = json.dumps(header, sort_keys=True).encode()
    buf.write(len(hdr).to_bytes(8, "little"))
    buf.write(hdr)
    for arr in (
        np.array([params.psi[k] for k in psi_keys], dtype="<f8"),
        np.asarray(params.group_mass, dtype="<f8"),
        np.ascontiguousarray(params.weights_w, dtype="<f8"),
    ):
        buf.write(arr.tobytes())
    payload = buf.getvalue()
    return payload + hashlib.sha256(payload).digest()


def load_params(blob: bytes) -> PostprocessParams:
    if len(blob) < 44 or blob[:4] != PARAMS_MAGIC:
        raise InvalidArgumentError("not a fairpost params payload")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise InvalidArgumentError("params payload failed its checksum (truncated or corrupt)")
    version = int.from_bytes(payload[4:8], "little")
    if version != PARAMS_VERSION:
        raise InvalidArgumentError(f"unsupported params version {version}")
    hlen = int.from_bytes(payload[8:16], "little")
    header = json.loads(payload[16:16 + hlen].decode())
    off = 16 + hlen
    spec = FairnessSpec(
        num_classes=header["num_classes"], num_groups=header["num_groups"],
        constraints=tuple((t, tuple(g)) for t, g in header["constraints"]),
        alpha=header["alpha"],
    )
    npsi = len(header["psi_keys"])
    k_groups, n_cls = spec.num_groups, spec.num_classes

    def take(count):
        nonlocal off
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
        return arr

    psi_vals = take(npsi)
    mass = take(k_groups)
    w = take(n_cls * k_groups).reshape(n_cls, k_groups)
    psi = {tuple(k): float(v) for k, v in zip(header["psi_keys"], psi_vals)}
    noise = NoiseSpec(sigma=header["sigma"], seed=header["noise_seed"])
    return PostprocessParams(psi=psi, group_mass=mass, weights_w=w, noise=noise, spec=spec)


def params_to_json(params: PostprocessParams) -> dict:
    """Loss-tolerant JSON view of w and psi for human inspection."""
    return {
        "alpha": params.spec.alpha,
        "num_classes": params.spec.num_classes,
        "num_groups": params.spec.num_groups,
        "sigma": params.noise.sigma,
        "psi": [{"constraint": c, "group": k, "value": v} for (c, k), v in sorted(params.psi.items())],
        "group_mass": np.asarray(params.group_mass).tolist(),
        "weights_w": np.asarray(params.weights_w).tolist(),
    }
