from dataclasses import dataclass
from enum import Enum

from src.shared.exceptions import ParameterException


class TrainingObjective(str, Enum):
    SUPERVISED_L2 = "supervised-l2"
    DIRECT_OBJECTIVE = "direct-objective"


@dataclass(frozen=True)
class TrainingConfig:
    """Minibatch SGD with heavy-ball momentum and learning-rate halving on plateau."""
    objective: TrainingObjective = TrainingObjective.DIRECT_OBJECTIVE
    batch_size: int = 1000
    learning_rate: float = 0.001
    momentum: float = 0.9
    epochs: int = 50
    validation_fraction: float = 0.1
    patience: int = 3
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ParameterException("Learning rate must be positive", parameter="learning_rate",
                                     value=self.learning_rate)
        if not 0 <= self.momentum < 1:
            raise ParameterException("Momentum must lie in [0, 1)", parameter="momentum", value=self.momentum)
        if self.batch_size < 1:
            raise ParameterException("Batch size must be positive", parameter="batch_size", value=self.batch_size)
        if self.epochs < 0:
            raise ParameterException("Epoch count must be non-negative", parameter="epochs", value=self.epochs)
        if not 0 <= self.validation_fraction < 1:
            raise ParameterException("Validation fraction must lie in [0, 1)", parameter="validation_fraction",
                                     value=self.validation_fraction)
        if self.patience < 1:
            raise ParameterException("Patience must be positive", parameter="patience", value=self.patience)
