"""Slack compensation for cable-length commands.

Link elasticity leaves residual slack in the cables; the total slack
measured at full wrap is spread evenly over the tightening steps and
added back cumulatively, so step i of a schedule is lengthened by C*i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SlackModel:
    """Measured residual slack per cable (mm at full wrap) and step count."""

    slack_mm: dict = field(default_factory=dict)
    n_steps: int = 26

    def __post_init__(self):
        if self.n_steps < 1:
            raise DomainError("n_steps must be at least 1")
        for cable, s in self.slack_mm.items():
            if s < 0:
                raise DomainError(f"slack for {cable!r} must be non-negative")


def compensation_factor(model: SlackModel, cable: str) -> float:
    """Per-step compensation C = L_slack / N_steps, mm per step."""
    try:
        slack = model.slack_mm[cable]
    except KeyError:
        raise DomainError(f"no slack measurement for cable {cable!r}") from None
    return slack / model.n_steps


def adjusted_schedule(deltas, factor: float) -> np.ndarray:
    """Apply cumulative compensation: step i (1-based) gains factor * i."""
    d = np.asarray(deltas, dtype=float)
    if d.ndim != 1 or len(d) == 0:
        raise DomainError("schedule must be a non-empty 1-D sequence")
    steps = np.arange(1, len(d) + 1)
    return d + factor * steps
