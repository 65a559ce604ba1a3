"""Derivative-free coordinate pattern search."""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from qmask.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one pattern-search run."""

    x: np.ndarray
    value: float
    evaluations: int
    budget_exhausted: bool


class PatternSearch:
    """Compass search with geometric step decay.

    Each sweep polls +step and -step along every coordinate and moves to the
    first strict improvement. A sweep without improvement multiplies the step
    by ``decay``; the search stops once the step falls below ``floor`` or the
    evaluation budget is spent.
    """

    def __init__(
        self,
        step: float = 0.25,
        decay: float = 0.5,
        floor: float = 1e-4,
        max_evals: int = 5000,
    ):
        if not 0 < decay < 1:
            raise ConfigurationError(f"decay must lie in (0, 1), got {decay}")
        self.step = step
        self.decay = decay
        self.floor = floor
        self.max_evals = max_evals

    def maximize(self, f: Callable[[np.ndarray], float], x0) -> SearchResult:
        x = np.array(x0, dtype=float)
        fx = f(x)
        evaluations = 1
        step = self.step
        while step >= self.floor and x.size:
            improved = False
            for i in range(x.size):
                for sign in (1.0, -1.0):
                    if evaluations >= self.max_evals:
                        logger.debug("Pattern search budget spent at step %.2e", step)
                        return SearchResult(x, fx, evaluations, True)
                    trial = x.copy()
                    trial[i] += sign * step
                    ft = f(trial)
                    evaluations += 1
                    if ft > fx:
                        x, fx = trial, ft
                        improved = True
                        break
            if not improved:
                step *= self.decay
        return SearchResult(x, fx, evaluations, False)

    def minimize(self, f: Callable[[np.ndarray], float], x0) -> SearchResult:
        result = self.maximize(lambda x: -f(x), x0)
        return SearchResult(
            result.x, -result.value, result.evaluations, result.budget_exhausted
        )
