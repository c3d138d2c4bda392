"""Trial history: the question/answer pairs observed so far."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from numerics.errors import ShapeError
from worlds.errors import QuestionError


@dataclass
class TrialHistory:
    """Ordered (question, answer) pairs plus the asked mask.

    Answers have a fixed arity for every question id. Re-asking a question is
    rejected, so the mask bit for q is set iff q appears in ``questions``.
    """

    question_count: int
    arity: int
    questions: list[int] = field(default_factory=list)
    answers: list[np.ndarray] = field(default_factory=list)
    asked: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.asked is None:
            self.asked = np.zeros(self.question_count, dtype=bool)

    def __len__(self) -> int:
        return len(self.questions)

    def ask(self, question: int, answer) -> None:
        question = int(question)
        if not 0 <= question < self.question_count:
            raise QuestionError(f"question {question} outside [0, {self.question_count})")
        if self.asked[question]:
            raise QuestionError(f"question {question} was already asked")
        answer = np.asarray(answer, dtype=np.float64).reshape(-1)
        if answer.size != self.arity:
            raise ShapeError(f"answer for question {question} has {answer.size} values, expected {self.arity}")
        self.questions.append(question)
        self.answers.append(answer)
        self.asked[question] = True

    def table(self) -> np.ndarray:
        """(Q, arity) answer table with zeros in unasked rows."""
        out = np.zeros((self.question_count, self.arity))
        for q, a in zip(self.questions, self.answers):
            out[q] = a
        return out

    def prefix(self, steps: int) -> "TrialHistory":
        """History truncated to its first ``steps`` pairs."""
        h = TrialHistory(self.question_count, self.arity)
        for q, a in zip(self.questions[:steps], self.answers[:steps]):
            h.ask(q, a)
        return h

    @classmethod
    def complete(cls, table: np.ndarray) -> "TrialHistory":
        """History in which every question has been answered, in id order."""
        table = np.asarray(table, dtype=np.float64)
        h = cls(table.shape[0], table.shape[1])
        for q in range(table.shape[0]):
            h.ask(q, table[q])
        return h
