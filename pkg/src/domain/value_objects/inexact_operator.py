from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from src.shared.exceptions import ParameterException, ValidationException

from .transform import Transform, TransformKind


class InexactKind(str, Enum):
    IDENTITY = "identity"
    LEVEL_TRUNCATION = "level-truncation"
    NEIGHBORHOOD_DOMINANT = "neighborhood-dominant"
    COEFFICIENT_SUBSET = "coefficient-subset"
    SCHEDULED = "scheduled"


@dataclass(frozen=True)
class InexactOperator:
    """The cheap operator p applied before the projection onto K.

    A scheduled operator holds `stages` with the iteration at which each one
    becomes active in `breakpoints` (first breakpoint is always 0).
    """
    kind: InexactKind
    levels: Optional[int] = None
    window: Optional[int] = None
    transform: Optional[Transform] = None
    indices: tuple[int, ...] = ()
    stages: tuple['InexactOperator', ...] = ()
    breakpoints: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind == InexactKind.LEVEL_TRUNCATION and (self.levels is None or self.levels < 1):
            raise ParameterException("Level truncation keeps at least one level", parameter="levels", value=self.levels)
        if self.kind == InexactKind.NEIGHBORHOOD_DOMINANT and (self.window is None or self.window < 1):
            raise ParameterException("Neighborhood window must be positive", parameter="window", value=self.window)
        if self.kind == InexactKind.COEFFICIENT_SUBSET:
            if self.transform is None:
                raise ValidationException("Coefficient subset needs a basis", field="transform")
            if any(not 0 <= i < self.transform.coefficient_size for i in self.indices):
                raise ValidationException("Coefficient index out of range", field="indices")
        if self.kind == InexactKind.SCHEDULED:
            if not self.stages or len(self.stages) != len(self.breakpoints):
                raise ValidationException("Schedule needs one breakpoint per stage", field="breakpoints")
            if self.breakpoints[0] != 0 or any(
                b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])
            ):
                raise ValidationException(
                    "Breakpoints must start at 0 and increase", field="breakpoints", value=self.breakpoints
                )
            if any(stage.kind == InexactKind.SCHEDULED for stage in self.stages):
                raise ValidationException("Schedules cannot be nested", field="stages")

    @classmethod
    def identity(cls) -> 'InexactOperator':
        return cls(kind=InexactKind.IDENTITY)

    @classmethod
    def level_truncation(cls, levels: int) -> 'InexactOperator':
        return cls(kind=InexactKind.LEVEL_TRUNCATION, levels=int(levels))

    @classmethod
    def neighborhood_dominant(cls, window: int) -> 'InexactOperator':
        return cls(kind=InexactKind.NEIGHBORHOOD_DOMINANT, window=int(window))

    @classmethod
    def coefficient_subset(cls, transform: Transform, indices) -> 'InexactOperator':
        return cls(
            kind=InexactKind.COEFFICIENT_SUBSET,
            transform=transform,
            indices=tuple(sorted(int(i) for i in indices)),
        )

    @classmethod
    def scheduled(cls, stages: Sequence['InexactOperator'], breakpoints: Sequence[int]) -> 'InexactOperator':
        return cls(kind=InexactKind.SCHEDULED, stages=tuple(stages), breakpoints=tuple(int(b) for b in breakpoints))

    @classmethod
    def growing_levels(cls, start_levels: int, total_levels: int, every: int) -> 'InexactOperator':
        """Start with `start_levels` levels and add one every `every` iterations.

        The last stage keeps every level, i.e. the identity.
        """
        if every < 1:
            raise ParameterException("Schedule period must be positive", parameter="every", value=every)
        stages: list[InexactOperator] = []
        breakpoints: list[int] = []
        for offset, levels in enumerate(range(start_levels, total_levels + 1)):
            stages.append(cls.identity() if levels >= total_levels else cls.level_truncation(levels))
            breakpoints.append(offset * every)
        return cls.scheduled(stages, breakpoints)

    @classmethod
    def growing_subset(
        cls,
        transform: Transform,
        ranked_indices: Sequence[int],
        start_count: int,
        final_count: int,
        step: int,
        every: int,
    ) -> 'InexactOperator':
        """Project onto the first `start_count` ranked coefficients, adding `step` more every
        `every` iterations until `final_count` are kept."""
        if step < 1 or every < 1 or not 1 <= start_count <= final_count <= len(ranked_indices):
            raise ParameterException(
                "Invalid growing schedule",
                parameter="start_count/final_count/step",
                value=(start_count, final_count, step),
            )
        counts = list(range(start_count, final_count, step)) + [final_count]
        stages = []
        for count in counts:
            if count == transform.coefficient_size and transform.is_orthonormal:
                stages.append(cls.identity())
            else:
                stages.append(cls.coefficient_subset(transform, ranked_indices[:count]))
        return cls.scheduled(stages, [i * every for i in range(len(counts))])

    @property
    def linear(self) -> bool:
        if self.kind == InexactKind.SCHEDULED:
            return all(stage.linear for stage in self.stages)
        return self.kind != InexactKind.NEIGHBORHOOD_DOMINANT

    @property
    def is_coordinate_mask(self) -> bool:
        """True when p zeros a fixed set of coordinates and keeps the rest."""
        if self.kind == InexactKind.LEVEL_TRUNCATION:
            return True
        if self.kind == InexactKind.COEFFICIENT_SUBSET:
            return self.transform.kind == TransformKind.IDENTITY
        return self.kind == InexactKind.IDENTITY

    def active(self, t: int) -> 'InexactOperator':
        """Operator in effect at iteration t."""
        if self.kind != InexactKind.SCHEDULED:
            return self
        if t < 0:
            raise ParameterException("Iteration index must be non-negative", parameter="t", value=t)
        stage = 0
        for i, breakpoint in enumerate(self.breakpoints):
            if t >= breakpoint:
                stage = i
        return self.stages[stage]

    def describe(self) -> str:
        if self.kind == InexactKind.LEVEL_TRUNCATION:
            return f"level-truncation(l={self.levels})"
        if self.kind == InexactKind.NEIGHBORHOOD_DOMINANT:
            return f"neighborhood-dominant(w={self.window})"
        if self.kind == InexactKind.COEFFICIENT_SUBSET:
            return f"coefficient-subset({self.transform.kind.value}, |S|={len(self.indices)})"
        if self.kind == InexactKind.SCHEDULED:
            return f"scheduled({len(self.stages)} stages)"
        return "identity"
