"""
CLI schemas for the JSON documents read and written by the toolkit.
These are DTOs for the command layer, separate from domain entities.
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.application.services.experiment_config import TrainingParams
from src.domain.entities.unrolled_network import Nonlinearity


class SignalDocument(BaseModel):
    """Signal and measurements of one problem instance, for golden tests."""
    d: int = Field(..., ge=1, description="Signal dimension")
    m: Optional[int] = Field(None, ge=1, description="Number of measurements")
    seed: Optional[int] = Field(None, description="Seed of the signal generator")
    generator: Dict[str, Any] = Field(default_factory=dict, description="Generator kind and parameters")
    ensemble: Dict[str, Any] = Field(default_factory=dict, description="Ensemble kind, parameters and seed")
    x: List[float] = Field(..., description="Ground-truth signal")
    y: Optional[List[float]] = Field(None, description="Measurements y = M x + e")


class EstimateDocument(BaseModel):
    """Width, rate or model-error estimate printed by `estimate`."""
    model_config = ConfigDict(extra="allow")

    kind: str = Field(..., description="width, rho or epsilon")
    value: Optional[float] = Field(None, ge=0, description="Estimate (width and rho)")
    stderr: Optional[float] = Field(None, ge=0)
    samples: Optional[int] = Field(None, ge=0)
    method: Optional[str] = None
    is_lower_bound: bool = False


class NetworkCheckpoint(BaseModel):
    """Trained unrolled network."""
    model_config = ConfigDict(populate_by_name=True)

    A: List[List[float]]
    U: List[List[float]]
    lam: float = Field(0.0, ge=0, alias="lambda")
    T: int = Field(..., ge=1, description="Number of layers")
    nonlinearity: Nonlinearity
    k: Optional[int] = None
    radius: Optional[float] = None


class TrainConfig(BaseModel):
    """Document read by `train --config`: synthetic sparse codes and one unrolled network."""
    model_config = ConfigDict(extra="forbid")

    d: int = Field(64, ge=2)
    m: int = Field(32, ge=1)
    k: int = Field(4, ge=1)
    train_samples: int = Field(2000, ge=2)
    layers: int = Field(10, ge=1)
    lam: float = Field(0.1, ge=0)
    reference_iterations: int = Field(1000, ge=1)
    training: TrainingParams = Field(default_factory=TrainingParams)
