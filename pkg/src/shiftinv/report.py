"""Per-run bookkeeping shared by the learners."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


@dataclass
class FitReport:
    """Objective history of an alternating fit.

    ``dict_before[i]`` / ``dict_after[i]`` bracket the i-th dictionary update
    (sparse code held fixed); ``objective[i]`` is ``||Y - DX||_F^2`` after the
    i-th sparse coding step, with ``objective[0]`` the initial coding.
    """

    data_energy: float
    dict_before: list = field(default_factory=list)
    dict_after: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    events: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    stopped_early: bool = False

    @property
    def n_iter(self):
        return len(self.dict_after)

    @property
    def epsilon(self):
        """Relative representation error in percent after each coding step."""
        return [100.0 * v / self.data_energy for v in self.objective]

    def dictionary_steps_monotone(self, rtol=1e-12):
        slack = rtol * self.data_energy
        return all(a <= b + slack for b, a in zip(self.dict_before, self.dict_after))

    @contextmanager
    def timed(self, phase):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[phase] = self.timings.get(phase, 0.0) + time.perf_counter() - t0


def should_stop(objective, data_energy, tol=1e-10, patience=3):
    """True when the objective moved less than ``tol`` (relative) over the last
    ``patience`` iterations.

    An increase (coding steps are not monotone) is not treated as convergence.
    """
    if len(objective) <= patience:
        return False
    return abs(objective[-1 - patience] - objective[-1]) < tol * data_energy


def frobenius2(R):
    return float(np.vdot(R, R).real)
