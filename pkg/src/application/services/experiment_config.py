"""
Experiment configuration documents. Every experiment is fully determined by
its ExperimentConfig and seed; CLI overrides address fields by dotted path.
"""
import hashlib
import json
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.domain.value_objects.solver_config import StepPolicy
from src.domain.value_objects.training_config import TrainingConfig, TrainingObjective


class ExperimentName(str, Enum):
    SPECTRAL_CS = "spectral-cs"
    TREE = "tree"
    SIDE_INFO = "side-info"
    BOUND_CHECK = "bound-check"
    WIDTH_TABLE = "width-table"
    LISTA_MM = "lista-mm"


DEFAULT_TRIALS = {
    ExperimentName.SPECTRAL_CS: 50,
    ExperimentName.TREE: 20,
    ExperimentName.SIDE_INFO: 100,
    ExperimentName.BOUND_CHECK: 50,
    ExperimentName.WIDTH_TABLE: 1,
    ExperimentName.LISTA_MM: 1,
}


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class TreeParams(StrictModel):
    """Tree-sparse recovery with level-truncated and scheduled inexact projections."""
    levels: int = Field(7, ge=2, description="Tree depth L, d = 2^L - 1")
    k: int = Field(13, ge=1, description="Tree sparsity")
    top_levels: int = Field(2, ge=1, description="Levels drawn with sigma_top")
    sigma_top: float = Field(1.0, ge=0)
    sigma_rest: float = Field(0.2, ge=0)
    m: int = Field(100, ge=1, description="Number of Gaussian measurements")
    iterations: int = Field(100, ge=1)
    step_policy: StepPolicy = StepPolicy.CONSERVATIVE
    truncation_levels: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    schedule_start: int = Field(2, ge=1, description="Levels kept by the first scheduled stage")
    schedule_every: int = Field(4, ge=1, description="Iterations between added levels")
    noise_sigma: float = Field(0.0, ge=0)
    convergence_tolerance: Optional[float] = Field(
        1e-3, gt=0, description="Aggregate only trials where model-based IHT ends below this relative error"
    )


class SpectralCsParams(StrictModel):
    """Clustered sparse recovery in a redundant DCT dictionary."""
    n: int = Field(64, ge=2, description="Signal length, d = r * n")
    fixed_dimension: Optional[int] = Field(
        None, description="When set, d is fixed and n = d / r instead"
    )
    redundancies: List[int] = Field(default_factory=lambda: [2, 4])
    sparsities: List[int] = Field(default_factory=lambda: [2, 4], description="k for each redundancy")
    offsets: List[int] = Field(default_factory=lambda: [1, 4], description="Neighbor distances")
    min_spacing: int = Field(5, ge=0)
    sigma_neighbor: float = Field(0.05 ** 0.5, ge=0)
    window: int = Field(5, ge=1, description="Neighborhood-dominant window")
    iterations: int = Field(200, ge=1)
    step_policy: StepPolicy = StepPolicy.LIPSCHITZ

    @model_validator(mode="after")
    def _paired(self) -> 'SpectralCsParams':
        if len(self.redundancies) != len(self.sparsities):
            raise ValueError("redundancies and sparsities must have the same length")
        return self


class SideInfoParams(StrictModel):
    """Patch recovery where p keeps a subset of Haar coefficients of the DCT-domain signal."""
    patch_size: int = Field(32, ge=2)
    m: int = Field(700, ge=1)
    iterations: int = Field(100, ge=1)
    step_policy: StepPolicy = StepPolicy.CONSERVATIVE
    energy_fraction: float = Field(0.95, gt=0, le=1)
    growing_start_fraction: float = Field(0.5, gt=0, le=1)
    growing_step: int = Field(50, ge=1)
    growing_every: int = Field(5, ge=1)
    fixed_count: int = Field(512, ge=1)
    growing_fixed_start: int = Field(256, ge=1)
    growing_fixed_step: int = Field(128, ge=1)
    image_path: Optional[str] = Field(None, description="8-bit PGM; a synthetic image is used when absent")
    image_size: int = Field(256, ge=8)
    image_seed: int = 0


class BoundCheckParams(StrictModel):
    """Small noiseless instances with exact rates and measured model errors."""
    d: int = Field(8, ge=2, le=12)
    k: int = Field(2, ge=1)
    m: int = Field(6, ge=1)
    iterations: int = Field(30, ge=1)
    dropped: List[int] = Field(default_factory=lambda: [0, 1],
                               description="Support entries of x removed by p, smallest first")


class WidthTableParams(StrictModel):
    """Monte Carlo widths of difference sets over a (d, k) grid."""
    tree_levels: List[int] = Field(default_factory=lambda: [5, 7, 9])
    ks: List[int] = Field(default_factory=lambda: [2, 4, 8, 13])
    samples: int = Field(10000, ge=2)


class TrainingParams(StrictModel):
    objective: TrainingObjective = TrainingObjective.DIRECT_OBJECTIVE
    batch_size: int = Field(1000, ge=1)
    learning_rate: float = Field(0.001, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    epochs: int = Field(20, ge=0)
    validation_fraction: float = Field(0.1, ge=0, lt=1)
    patience: int = Field(3, ge=1)

    def to_training_config(self, seed: int) -> TrainingConfig:
        return TrainingConfig(seed=seed, **self.model_dump())


class ListaParams(StrictModel):
    """Single unrolled network versus a mixture of networks on synthetic sparse codes."""
    d: int = Field(64, ge=2)
    m: int = Field(32, ge=1)
    k: int = Field(4, ge=1)
    train_samples: int = Field(2000, ge=2)
    test_samples: int = Field(500, ge=1)
    layers: int = Field(10, ge=1)
    lam: float = Field(0.1, ge=0)
    mixture_size: int = Field(6, ge=1)
    refinement_rounds: int = Field(5, ge=0)
    reference_iterations: int = Field(1000, ge=1)
    training: TrainingParams = Field(default_factory=TrainingParams)


class ExperimentConfig(StrictModel):
    name: ExperimentName
    seed: int = 0
    trials: Optional[int] = Field(None, ge=1, description="Defaults per experiment")
    tree: TreeParams = Field(default_factory=TreeParams)
    spectral_cs: SpectralCsParams = Field(default_factory=SpectralCsParams)
    side_info: SideInfoParams = Field(default_factory=SideInfoParams)
    bound_check: BoundCheckParams = Field(default_factory=BoundCheckParams)
    width_table: WidthTableParams = Field(default_factory=WidthTableParams)
    lista_mm: ListaParams = Field(default_factory=ListaParams)

    @property
    def resolved_trials(self) -> int:
        return self.trials or DEFAULT_TRIALS[self.name]

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()
