"""
Problem construction: seeded signal generators and measurement ensembles.
Every constructor is a pure function of its arguments and seed.
"""
import logging
from typing import Optional, Sequence

import numpy as np

from src.domain.entities.measurement_model import Ensemble, EnsembleKind, MeasurementModel
from src.domain.entities.signal_instance import GeneratorKind, SignalGenerator, SignalInstance
from src.domain.ports.image_source_port import ImageSourcePort
from src.domain.value_objects.transform import Transform, redundant_dct_dictionary
from src.domain.value_objects.tree_topology import TreeTopology
from src.shared.exceptions import DimensionMismatchException, ParameterException, ValidationException

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 1000


def make_tree_signal(
    levels: int,
    k: int,
    top_levels: int,
    sigma_top: float,
    sigma_rest: float,
    seed: int,
) -> SignalInstance:
    """Tree-sparse signal on a random rooted subtree of exactly k nodes.

    The support grows from the root by picking a uniformly random node among
    the children of the nodes already chosen.
    """
    tree = TreeTopology(levels=levels)
    if not 1 <= k <= tree.size:
        raise ParameterException(
            f"No rooted subtree of {k} nodes in a tree of depth {levels}", parameter="k", value=k
        )
    if sigma_top < 0 or sigma_rest < 0:
        raise ParameterException("Standard deviations must be non-negative", parameter="sigma")
    rng = np.random.default_rng(seed)
    support = [0]
    frontier = list(tree.children(0))
    while len(support) < k:
        chosen = frontier.pop(int(rng.integers(len(frontier))))
        support.append(chosen)
        frontier.extend(tree.children(chosen))

    support = np.array(sorted(support), dtype=int)
    depths = tree.depths()[support]
    scales = np.where(depths <= top_levels, sigma_top, sigma_rest)
    x = np.zeros(tree.size)
    x[support] = rng.standard_normal(support.size) * scales
    return SignalInstance(
        x=x,
        generator=SignalGenerator(
            kind=GeneratorKind.TREE_SPARSE,
            params={"levels": levels, "k": k, "top_levels": top_levels,
                    "sigma_top": sigma_top, "sigma_rest": sigma_rest},
            seed=seed,
        ),
    )


def make_clustered_sparse_signal(
    d: int,
    k: int,
    min_spacing: int,
    neighbor_offsets: Sequence[int],
    sigma_neighbor: float,
    seed: int,
) -> SignalInstance:
    """k dominant N(0,1) entries more than `min_spacing` apart, plus N(0, sigma^2)
    perturbations at the given offsets from each of them."""
    if k < 1 or min_spacing < 0 or k * min_spacing > d:
        raise ParameterException(
            f"Cannot place {k} entries {min_spacing} apart in {d} positions", parameter="min_spacing",
            value=min_spacing,
        )
    rng = np.random.default_rng(seed)
    positions = _spaced_positions(d, k, min_spacing, rng)
    x = np.zeros(d)
    x[positions] = rng.standard_normal(k)
    if sigma_neighbor > 0:
        for position in positions:
            for offset in neighbor_offsets:
                neighbor = position + int(offset)
                if 0 <= neighbor < d:
                    x[neighbor] += sigma_neighbor * rng.standard_normal()
    return SignalInstance(
        x=x,
        generator=SignalGenerator(
            kind=GeneratorKind.CLUSTERED_SPARSE,
            params={"d": d, "k": k, "min_spacing": min_spacing,
                    "neighbor_offsets": [int(o) for o in neighbor_offsets], "sigma_neighbor": sigma_neighbor,
                    "positions": [int(p) for p in positions]},
            seed=seed,
        ),
    )


def _spaced_positions(d: int, k: int, min_spacing: int, rng: np.random.Generator) -> np.ndarray:
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        available = np.ones(d, dtype=bool)
        chosen = []
        for _ in range(k):
            candidates = np.flatnonzero(available)
            if candidates.size == 0:
                break
            position = int(candidates[rng.integers(candidates.size)])
            chosen.append(position)
            available[max(0, position - min_spacing):position + min_spacing + 1] = False
        if len(chosen) == k:
            return np.array(sorted(chosen), dtype=int)
    raise ParameterException(
        f"Failed to place {k} entries {min_spacing} apart in {d} positions", parameter="min_spacing",
        value=min_spacing,
    )


def make_patch_signal(
    image_source: ImageSourcePort,
    patch_size: int,
    seed: int,
    basis: Optional[Transform] = None,
) -> SignalInstance:
    """Coefficients in `basis` (default 2D DCT) of a random DC-removed unit-norm patch."""
    image = image_source.load()
    rows, cols = image.shape
    if rows < patch_size or cols < patch_size:
        raise ParameterException("Image smaller than the patch", parameter="patch_size", value=patch_size)
    basis = basis or Transform.dct(patch_size, patch_size)
    if basis.input_size != patch_size * patch_size:
        raise DimensionMismatchException("Basis does not match the patch", expected=patch_size ** 2,
                                         actual=basis.input_size)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        top = int(rng.integers(rows - patch_size + 1))
        left = int(rng.integers(cols - patch_size + 1))
        patch = image[top:top + patch_size, left:left + patch_size].astype(float).ravel()
        patch = patch - patch.mean()
        norm = float(np.linalg.norm(patch))
        if norm > 1e-8:
            break
    else:
        raise ValidationException("Image has no textured patch", field="image")
    return SignalInstance(
        x=basis.analysis(patch / norm),
        generator=SignalGenerator(
            kind=GeneratorKind.COEFFICIENT_DECAY,
            params={"source": image_source.name, "top": top, "left": left, "patch_size": patch_size,
                    "basis": basis.kind.value},
            seed=seed,
        ),
    )


def make_sparse_codes(n_samples: int, d: int, k: int, seed: int, sigma: float = 1.0) -> np.ndarray:
    """n_samples x d matrix of k-sparse codes with uniformly random supports."""
    if not 1 <= k <= d:
        raise ParameterException("Sparsity must satisfy 1 <= k <= d", parameter="k", value=k)
    rng = np.random.default_rng(seed)
    codes = np.zeros((n_samples, d))
    for row in range(n_samples):
        support = rng.choice(d, size=k, replace=False)
        codes[row, support] = sigma * rng.standard_normal(k)
    return codes


def make_measurements(
    signal: SignalInstance,
    ensemble: EnsembleKind,
    seed: int,
    noise_sigma: float = 0.0,
    m: Optional[int] = None,
    redundancy: Optional[int] = None,
    basis: Optional[Transform] = None,
    normalize: bool = False,
) -> MeasurementModel:
    """Build M for the ensemble and return y = M x + e.

    iid-gaussian: m x d with N(0,1) entries (scaled by 1/sqrt(m) when `normalize`).
    redundant-dct: the (d/r) x d dictionary for redundancy r.
    composed: A @ basis.synthesis_matrix() with A an m x n Gaussian matrix.
    """
    d = signal.d
    rng = np.random.default_rng(seed)
    params: dict = {"noise_sigma": noise_sigma}
    if ensemble == EnsembleKind.IID_GAUSSIAN:
        if m is None or m < 1:
            raise ParameterException("Gaussian ensemble needs m >= 1", parameter="m", value=m)
        M = rng.standard_normal((m, d))
        if normalize:
            M /= np.sqrt(m)
        params.update({"m": m, "normalize": normalize})
    elif ensemble == EnsembleKind.REDUNDANT_DCT:
        if redundancy is None or redundancy < 1 or d % redundancy:
            raise DimensionMismatchException("d must be a multiple of the redundancy", expected="r | d",
                                             actual=(d, redundancy))
        M = np.array(redundant_dct_dictionary(d // redundancy, d))
        params.update({"redundancy": redundancy, "n": d // redundancy})
    elif ensemble == EnsembleKind.COMPOSED:
        if basis is None or basis.coefficient_size != d or m is None or m < 1:
            raise DimensionMismatchException("Composed ensemble needs m and a basis with d coefficients",
                                             expected=d, actual=None if basis is None else basis.coefficient_size)
        A = rng.standard_normal((m, basis.input_size))
        if normalize:
            A /= np.sqrt(m)
        M = A @ basis.synthesis_matrix()
        params.update({"m": m, "basis": basis.kind.value, "normalize": normalize})
    else:
        raise ValidationException("Unknown ensemble", field="ensemble", value=ensemble)

    noise = rng.standard_normal(M.shape[0]) * noise_sigma if noise_sigma > 0 else np.zeros(M.shape[0])
    y = M @ signal.x + noise
    logger.debug(f"Built {ensemble.value} measurements {M.shape} (seed {seed})")
    return MeasurementModel(
        matrix=M,
        noise=noise,
        y=y,
        ensemble=Ensemble(kind=ensemble, params=params, seed=seed),
        signal=signal,
    )


def measurements_from_matrix(signal: SignalInstance, matrix: np.ndarray,
                             noise: Optional[np.ndarray] = None) -> MeasurementModel:
    """Measurement model for a caller-supplied matrix."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != signal.d:
        raise DimensionMismatchException("Matrix does not match the signal", expected=signal.d, actual=matrix.shape)
    noise = np.zeros(matrix.shape[0]) if noise is None else np.asarray(noise, dtype=float)
    return MeasurementModel(
        matrix=matrix,
        noise=noise,
        y=matrix @ signal.x + noise,
        ensemble=Ensemble(kind=EnsembleKind.CUSTOM),
        signal=signal,
    )
