"""Threshold classifier with hysteresis and debounce: mu-band ERD at the
central electrodes drives the motor state (contralateral rule), occipital
alpha power ratio drives the eyes state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Montage


class Motor(str, Enum):
    REST = "rest"
    LEFT_HAND = "left_hand"
    RIGHT_HAND = "right_hand"
    FEET = "feet"


#: motor state -> the electrode whose ERD drives it (contralateral rule)
MOTOR_FOCAL = {Motor.LEFT_HAND: "C4", Motor.RIGHT_HAND: "C3", Motor.FEET: "Cz"}

#: tie-break precedence when two electrodes are equally most-negative
_ENTER_ORDER = (Motor.LEFT_HAND, Motor.RIGHT_HAND, Motor.FEET)


@dataclass(frozen=True)
class MentalState:
    motor: Motor = Motor.REST
    eyes_closed: bool = False
    t: float = 0.0


@dataclass(frozen=True)
class ClassifierConfig:
    erd_enter: float = -30.0
    erd_exit: float = -15.0
    alpha_enter: float = 2.0
    alpha_exit: float = 1.5
    debounce_frames: int = 5

    def __post_init__(self):
        if self.erd_enter >= self.erd_exit:
            raise ValueError("erd_enter must be stricter (more negative) than erd_exit")
        if self.alpha_enter <= self.alpha_exit:
            raise ValueError("alpha_enter must be stricter (larger) than alpha_exit")
        if self.debounce_frames < 1:
            raise ValueError("debounce_frames must be >= 1")


class _Debounce:
    """Commit a candidate only after N consecutive identical sightings."""

    def __init__(self, initial, frames):
        self.committed = initial
        self.frames = frames
        self.pending = None
        self.count = 0

    def reset(self):
        self.pending = None
        self.count = 0

    def update(self, candidate):
        if candidate == self.committed:
            self.reset()
            return self.committed
        if candidate == self.pending:
            self.count += 1
        else:
            self.pending = candidate
            self.count = 1
        if self.count >= self.frames:
            self.committed = candidate
            self.reset()
        return self.committed


class StateClassifier:
    def __init__(self, cfg: ClassifierConfig, montage: Montage):
        montage.require(("C3", "C4", "Cz"))
        self.cfg = cfg
        self._idx = {lab: montage.index(lab) for lab in ("C3", "C4", "Cz")}
        self._motor = _Debounce(Motor.REST, cfg.debounce_frames)
        self._eyes = _Debounce(False, cfg.debounce_frames)
        self._last = MentalState()

    @property
    def state(self) -> MentalState:
        return self._last

    def _motor_candidate(self, values):
        cfg = self.cfg
        cur = self._motor.committed
        if cur != Motor.REST and values[self._idx[MOTOR_FOCAL[cur]]] <= cfg.erd_exit:
            return cur
        best, best_v = Motor.REST, None
        for m in _ENTER_ORDER:
            v = values[self._idx[MOTOR_FOCAL[m]]]
            if v <= cfg.erd_enter and (best_v is None or v < best_v):
                best, best_v = m, v
        return best

    def _eyes_candidate(self, alpha_ratio):
        if alpha_ratio >= self.cfg.alpha_enter:
            return True
        if alpha_ratio < self.cfg.alpha_exit:
            return False
        return self._eyes.committed

    def update(self, erd_values, valid, alpha_ratio: float, t: float) -> MentalState:
        """Advance one frame; invalid frames repeat the previous state and
        reset the debounce counters."""
        if not np.all(valid):
            self._motor.reset()
            self._eyes.reset()
            self._last = MentalState(self._last.motor, self._last.eyes_closed, t)
            return self._last
        motor = self._motor.update(self._motor_candidate(np.asarray(erd_values)))
        eyes = self._eyes.update(self._eyes_candidate(alpha_ratio))
        self._last = MentalState(motor, eyes, t)
        return self._last
