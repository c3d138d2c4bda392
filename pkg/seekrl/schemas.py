"""Validated hyperparameter and reward settings."""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class HyperParams(BaseModel):
    """Discounting, GAE/TD(λ) weighting and loss mixing."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(default=1.0, gt=0.0, le=1.0)
    lam: float = Field(default=0.95, gt=0.0, lt=1.0)
    horizon: int = Field(default=20, ge=1)
    intrinsic_weight: float = Field(default=1.0, ge=0.0)
    entropy_coef: float = Field(default=0.0, ge=0.0)
    value_coef: float = Field(default=0.5, ge=0.0)
    prediction_coef: float = Field(default=1.0, ge=0.0)
    gae_adjustment: Literal["tail", "renormalize"] = "tail"


class RewardSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    extrinsic: Literal["label", "native", "none"] = "label"
    intrinsic: Literal["cross_entropy", "none"] = "cross_entropy"
    floor: float = Field(default=1e-6, gt=0.0, le=1e-3)

    @model_validator(mode="after")
    def check_active(self):
        if self.extrinsic == "none" and self.intrinsic == "none":
            raise ValueError("at least one reward kind must be active")
        return self
