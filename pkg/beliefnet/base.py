"""Common interface of the belief architectures."""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Optional, Sequence

import numpy as np

from beliefnet.history import TrialHistory
from beliefnet.outputs import BeliefOutputs, Conditioning
from beliefnet.params import ParameterSet
from numerics.tensor import Tensor


class BeliefModel(ABC):
    """A belief model maps trial histories to ``BeliefOutputs``.

    Parameters are read-only during forward/backward, and any recurrent
    state is owned by the caller. Distinct episodes can therefore be
    evaluated concurrently against one instance.
    """

    architecture: str = "base"

    def __init__(self):
        self.parameters = ParameterSet()

    def p(self, name: str) -> Tensor:
        return self.parameters[name]

    def initial_state(self, batch: int) -> Any:
        return None

    @abstractmethod
    def step(
        self,
        histories: Sequence[TrialHistory],
        state: Any,
        conditionings: Optional[Sequence[Optional[Conditioning]]] = None,
        observed: Optional[Sequence[TrialHistory]] = None,
        allow_exhausted: bool = False,
    ) -> tuple[BeliefOutputs, Any]:
        """Belief after each history.

        ``observed`` replaces the histories in the input encoding only; the
        policy mask always follows ``histories`` (full-observation mode).
        """

    @staticmethod
    def asked_mask(histories: Sequence[TrialHistory]) -> np.ndarray:
        return np.stack([h.asked for h in histories])

    @staticmethod
    def allowed_mask(asked, allow_exhausted: bool = False) -> np.ndarray:
        """Unasked questions per row. With ``allow_exhausted`` a row with every
        question asked gets an all-true mask so beliefs after the last answer
        can still be computed; its policy is never sampled."""
        allowed = ~np.asarray(asked, dtype=bool)
        if allow_exhausted:
            allowed[~allowed.any(axis=1)] = True
        return allowed
