"""The avatar state machine: avatar vs puppet mode, slew-limited limb
servos, eye matrices, and the puppet forward model that paints canonical
brain activation patterns for attendee-triggered actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .classifier import MentalState, Motor
from .geometry import Montage, geodesic_matrix
from .topomap import Topomapper


class Mode(str, Enum):
    AVATAR = "avatar"
    PUPPET = "puppet"


class PuppetAction(str, Enum):
    MOVE_LEFT_HAND = "move_left_hand"
    MOVE_RIGHT_HAND = "move_right_hand"
    MOVE_FEET = "move_feet"
    CLOSE_EYES = "close_eyes"
    OPEN_EYES = "open_eyes"
    RELEASE = "release"


class InvalidStateError(RuntimeError):
    """Raised when an operation is not legal in the current mode."""


SERVO_MIN_DEG = 0.0
SERVO_MAX_DEG = 300.0

#: servo slot order on the wire: left hand, right hand, left foot, right foot
SERVO_NAMES = ("left_hand", "right_hand", "left_foot", "right_foot")

# 8x8 eye bitmaps: open = ring with pupil, closed = one horizontal line
_O = [
    "00111100",
    "01000010",
    "10000001",
    "10011001",
    "10011001",
    "10000001",
    "01000010",
    "00111100",
]
_C = [
    "00000000",
    "00000000",
    "00000000",
    "00000000",
    "11111111",
    "00000000",
    "00000000",
    "00000000",
]
EYE_OPEN = np.array([[c == "1" for c in row] for row in _O], dtype=bool)
EYE_CLOSED = np.array([[c == "1" for c in row] for row in _C], dtype=bool)


def eye_bitmaps(closed: bool) -> tuple:
    bm = EYE_CLOSED if closed else EYE_OPEN
    return bm.copy(), bm.copy()


@dataclass(frozen=True)
class AvatarConfig:
    rest_deg: float = 0.0
    raised_deg: float = 60.0
    slew_deg_per_s: float = 200.0
    pattern_magnitude: float = 80.0  # percent, puppet forward model
    pattern_decay_rad: float = 0.3


@dataclass(frozen=True)
class AvatarSnapshot:
    """Immutable per-tick output handed to the protocol, log and UI."""

    tick: int
    t: float
    mode: Mode
    mental: MentalState
    eyes_closed: bool
    servo_angles: np.ndarray  # (4,) degrees
    erd_values: np.ndarray  # per-electrode display input
    led_values: np.ndarray  # (n_leds,)
    led_colors: np.ndarray  # (n_leds, 3) uint8


#: motor state -> servo targets (slots raised)
_MOTOR_SERVOS = {
    Motor.REST: (),
    Motor.LEFT_HAND: (0,),
    Motor.RIGHT_HAND: (1,),
    Motor.FEET: (2, 3),
}

_ACTION_SERVOS = {
    PuppetAction.MOVE_LEFT_HAND: (0,),
    PuppetAction.MOVE_RIGHT_HAND: (1,),
    PuppetAction.MOVE_FEET: (2, 3),
}

_ACTION_FOCAL = {
    PuppetAction.MOVE_LEFT_HAND: "C4",
    PuppetAction.MOVE_RIGHT_HAND: "C3",
    PuppetAction.MOVE_FEET: "Cz",
}


def puppet_pattern(action: PuppetAction, montage: Montage,
                   cfg: AvatarConfig = AvatarConfig()) -> np.ndarray:
    """Canonical per-electrode activation pattern for a puppet action.

    Movements paint a negative (desynchronization-like) focal pattern at the
    contralateral central electrode; closing the eyes paints a positive
    occipital pattern; release and open-eyes map to the zero pattern.
    """
    n = len(montage)
    if action in (PuppetAction.RELEASE, PuppetAction.OPEN_EYES):
        return np.zeros(n)
    if action == PuppetAction.CLOSE_EYES:
        d = geodesic_matrix(montage.positions,
                            np.array([montage.position("O1"),
                                      montage.position("O2")]))
        return cfg.pattern_magnitude * np.exp(-d.min(axis=1) / cfg.pattern_decay_rad)
    focal = montage.position(_ACTION_FOCAL[action])
    d = geodesic_matrix(montage.positions, focal[None, :])[:, 0]
    return -cfg.pattern_magnitude * np.exp(-d / cfg.pattern_decay_rad)


class Avatar:
    """Single-owner state machine advanced by the orchestrator tick loop."""

    def __init__(self, montage: Montage, mapper: Topomapper,
                 cfg: AvatarConfig = AvatarConfig(), mode: Mode = Mode.AVATAR):
        self.montage = montage
        self.mapper = mapper
        self.cfg = cfg
        self.mode = mode
        self.tick = 0
        self.t = 0.0
        self.mental = MentalState()
        self.eyes_closed = False
        self.servo_angles = np.zeros(4)
        self.servo_targets = np.zeros(4)
        self._limb_pattern = np.zeros(len(montage))
        self._eye_pattern = np.zeros(len(montage))

    def set_mode(self, mode: Mode):
        """Switch mode; display and servo targets return to neutral."""
        mode = Mode(mode)
        if mode == self.mode:
            return
        self.mode = mode
        self.servo_targets[:] = self.cfg.rest_deg
        self.eyes_closed = False
        self.mental = MentalState(t=self.t)
        self._limb_pattern[:] = 0.0
        self._eye_pattern[:] = 0.0

    def apply_puppet_action(self, action: PuppetAction) -> np.ndarray:
        """Register an attendee action (puppet mode only); returns the
        activation pattern now driving the display."""
        if self.mode != Mode.PUPPET:
            raise InvalidStateError("puppet actions require puppet mode")
        action = PuppetAction(action)
        pattern = puppet_pattern(action, self.montage, self.cfg)
        if action in _ACTION_SERVOS:
            self.servo_targets[:] = self.cfg.rest_deg
            self.servo_targets[list(_ACTION_SERVOS[action])] = self.cfg.raised_deg
            self._limb_pattern = pattern
        elif action == PuppetAction.RELEASE:
            self.servo_targets[:] = self.cfg.rest_deg
            self._limb_pattern = pattern
        elif action == PuppetAction.CLOSE_EYES:
            self.eyes_closed = True
            self._eye_pattern = pattern
        elif action == PuppetAction.OPEN_EYES:
            self.eyes_closed = False
            self._eye_pattern = pattern
        return pattern

    def _slew(self, dt: float):
        limit = self.cfg.slew_deg_per_s * dt
        delta = np.clip(self.servo_targets - self.servo_angles, -limit, limit)
        self.servo_angles = np.clip(self.servo_angles + delta,
                                    SERVO_MIN_DEG, SERVO_MAX_DEG)

    def step(self, dt: float, mental: MentalState | None = None,
             erd_values=None) -> AvatarSnapshot:
        """Advance one tick. In avatar mode the mental state and ERD frame
        drive servos and display; in puppet mode EEG input is ignored and
        the forward-model pattern is rendered instead."""
        self.tick += 1
        self.t += dt
        if self.mode == Mode.AVATAR:
            if mental is not None:
                self.mental = mental
                self.eyes_closed = mental.eyes_closed
                self.servo_targets[:] = self.cfg.rest_deg
                raised = _MOTOR_SERVOS[mental.motor]
                if raised:
                    self.servo_targets[list(raised)] = self.cfg.raised_deg
            display = (np.zeros(len(self.montage))
                       if erd_values is None else np.asarray(erd_values, dtype=float))
        else:
            display = self._limb_pattern + self._eye_pattern
        self._slew(dt)
        led_values, led_colors = self.mapper.colors(display)
        return AvatarSnapshot(
            tick=self.tick, t=self.t, mode=self.mode, mental=self.mental,
            eyes_closed=self.eyes_closed, servo_angles=self.servo_angles.copy(),
            erd_values=np.array(display, dtype=float),
            led_values=led_values, led_colors=led_colors)
