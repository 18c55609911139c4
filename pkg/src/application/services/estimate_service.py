"""
Single-shot estimates behind the `estimate` command: widths, restricted rates
and model errors on freshly generated seeded instances.
"""
import logging
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from src.domain.entities.measurement_model import EnsembleKind
from src.domain.entities.signal_instance import SignalInstance
from src.domain.ports.image_source_port import ImageSourcePort
from src.domain.value_objects.constraint_set import ConstraintSet
from src.domain.value_objects.estimates import ConeDescriptor, ConeKind
from src.domain.value_objects.inexact_operator import InexactOperator
from src.domain.value_objects.solver_config import StepPolicy
from src.domain.value_objects.transform import Transform
from src.shared.exceptions import ParameterException
from src.shared.trial_runner import TrialRunner, derive_seed

from .geometry_service import mean_width_monte_carlo, rho_alternating, rho_brute_force, statistical_dimension_l1
from .inexact_projection_service import (
    mask_epsilon_upper_bound,
    measure_epsilon,
    measure_epsilon_nonconvex,
    oracle_energy_subset,
)
from .signal_service import make_measurements, make_patch_signal, make_sparse_codes, make_tree_signal
from .solver_service import default_step_size

logger = logging.getLogger(__name__)

CONE_ALIASES = {
    "sparse-diff": ConeKind.SPARSE_DIFFERENCE,
    "tree-diff": ConeKind.TREE_DIFFERENCE,
    "subspace": ConeKind.SUBSPACE,
    "l1-descent": ConeKind.L1_DESCENT_CONE,
}


class EpsilonSetup(str, Enum):
    SIDE_INFO = "side-info"
    TREE = "tree"


def cone_for(name: str, d: int, k: int, reference: Optional[np.ndarray] = None) -> ConeDescriptor:
    """ConeDescriptor from its command-line name; subspaces span the first k coordinates."""
    kind = CONE_ALIASES.get(name)
    if kind is None:
        raise ParameterException(f"Unknown set '{name}'", parameter="set", value=name)
    if kind == ConeKind.SPARSE_DIFFERENCE:
        return ConeDescriptor.sparse_difference(d, k)
    if kind == ConeKind.TREE_DIFFERENCE:
        return ConeDescriptor.tree_difference(d, k)
    if kind == ConeKind.SUBSPACE:
        return ConeDescriptor.subspace(d, range(k))
    if reference is None:
        reference = np.zeros(d)
        reference[:k] = 1.0
    return ConeDescriptor.l1_descent_cone(reference)


def estimate_width(name: str, d: int, k: int, samples: int, seed: int,
                   runner: Optional[TrialRunner] = None) -> Dict[str, Any]:
    cone = cone_for(name, d, k)
    if cone.kind == ConeKind.L1_DESCENT_CONE:
        estimate = statistical_dimension_l1(np.asarray(cone.reference))
    else:
        estimate = mean_width_monte_carlo(cone, samples, seed, runner=runner)
    return {"kind": "width", "set": name, "d": d, "k": k, "seed": seed, **estimate.to_dict()}


def estimate_rho(
    name: str,
    d: int,
    k: int,
    m: int,
    seed: int,
    brute_force: bool = True,
    step_size: Optional[float] = None,
    step_policy: StepPolicy = StepPolicy.AGGRESSIVE,
    restarts: int = 20,
    truncation_levels: Optional[int] = None,
) -> Dict[str, Any]:
    """Restricted rate of I - mu M'M for a Gaussian M drawn from `seed`.

    With `truncation_levels` the rate is taken through level truncation (rho_p).
    The l1 descent cone is anchored at a random k-sparse signal.
    """
    x = make_sparse_codes(1, d, k, derive_seed(seed, 0))[0]
    model = make_measurements(SignalInstance.custom(x), EnsembleKind.IID_GAUSSIAN, derive_seed(seed, 1), m=m)
    mu = step_size if step_size is not None else default_step_size(model, step_policy)
    cone = cone_for(name, d, k, reference=x)
    inexact = InexactOperator.level_truncation(truncation_levels) if truncation_levels else None
    if brute_force:
        estimate = rho_brute_force(model, cone, mu, inexact=inexact)
    else:
        estimate = rho_alternating(model, cone, mu, restarts, derive_seed(seed, 2), inexact=inexact)
        logger.warning("Alternating maximisation gives a lower bound on the rate")
    return {"kind": "rho", "set": name, "d": d, "k": k, "m": m, "mu": mu, "seed": seed, **estimate.to_dict()}


def estimate_epsilon(
    setup: EpsilonSetup,
    seed: int,
    image_source: Optional[ImageSourcePort] = None,
    patch_size: int = 32,
    energy_fraction: float = 0.95,
    levels: int = 7,
    k: int = 13,
    truncation_levels: int = 3,
    probes: int = 200,
) -> Dict[str, Any]:
    """Model error of the inexact operator of a named setup.

    side-info: oracle Haar subset of a DCT-domain patch, l1 ball of radius ||x||_1.
    tree: level truncation of a tree signal with K the k-sparse set, reported
    with the sampled lower bound and the mask upper bound of the nonconvex error.
    """
    setup = EpsilonSetup(setup)
    if setup == EpsilonSetup.SIDE_INFO:
        if image_source is None:
            raise ParameterException("side-info needs an image source", parameter="image")
        basis = Transform.dct(patch_size, patch_size)
        transform = Transform.composed(outer=Transform.haar(patch_size, patch_size), inner=basis)
        x = make_patch_signal(image_source, patch_size, derive_seed(seed, 0), basis=basis).x
        subset = oracle_energy_subset(transform, x, energy_fraction)
        p = InexactOperator.coefficient_subset(transform, subset)
        report = measure_epsilon(p, ConstraintSet.l1_ball(x.shape[0], float(np.abs(x).sum())), x)
        return {"kind": "epsilon", "setup": setup.value, "seed": seed, "kept": len(subset),
                "energy_fraction": energy_fraction, **_without_output(report.to_dict())}

    signal = make_tree_signal(levels, k, 2, 1.0, 0.2, derive_seed(seed, 0))
    p = InexactOperator.level_truncation(truncation_levels)
    sparse = ConstraintSet.k_sparse(signal.d, k)
    report = measure_epsilon(p, sparse, signal.x)
    return {
        "kind": "epsilon",
        "setup": setup.value,
        "seed": seed,
        "levels": truncation_levels,
        **_without_output(report.to_dict()),
        "epsilon_nonconvex_lower": measure_epsilon_nonconvex(p, sparse, signal.x, probes, derive_seed(seed, 1)),
        "epsilon_nonconvex_upper": mask_epsilon_upper_bound(p, signal.x),
        "eliminated_bound": 2.0 * report.epsilon_sufficient,
    }


def _without_output(document: Dict[str, Any]) -> Dict[str, Any]:
    return {key: value for key, value in document.items() if key != "output"}

