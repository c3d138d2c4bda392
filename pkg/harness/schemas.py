"""Metrics and evaluation report models."""
from typing import ClassVar, Optional

from pydantic import BaseModel, Field


class MetricsRow(BaseModel):
    """Summary of one training update."""
    update: int = Field(ge=1)
    mean_reward: float
    mean_extrinsic: float
    mean_intrinsic: float
    policy_loss: float
    value_loss: float
    prediction_loss: float
    total_loss: float
    mean_length: float
    accuracy_at_t: list[float] = []
    nll_at_t: list[float] = []
    wall_clock: float = 0.0

    # wall_clock varies between runs, so it is not written to disk
    CSV_FIELDS: ClassVar[tuple[str, ...]] = (
        "update", "mean_reward", "mean_extrinsic", "mean_intrinsic", "policy_loss",
        "value_loss", "prediction_loss", "total_loss", "mean_length", "accuracy_at_t", "nll_at_t",
    )

    def csv_cells(self) -> list[str]:
        cells = []
        for name in self.CSV_FIELDS:
            value = getattr(self, name)
            if isinstance(value, list):
                cells.append(";".join(repr(float(v)) for v in value))
            elif isinstance(value, float):
                cells.append(repr(value))
            else:
                cells.append(str(value))
        return cells


class EvaluationReport(BaseModel):
    task: str
    mode: str
    policy: str = "model"
    episodes: int = Field(ge=1)
    mean_reward: float
    reward_ci95: float
    mean_length: float
    accuracy_at_t: list[float] = []
    nll_at_t: list[float] = []
    final_accuracy: Optional[float] = None
    completion_cdf: list[float] = []
    completion_rate: Optional[float] = None
