"""Regulation targets and smooth reference trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TASK = "task"
JOINT = "joint"


@dataclass
class Regulation:
    """Constant task-space position."""

    x_d: np.ndarray
    space: str = TASK

    def __post_init__(self):
        self.x_d = np.asarray(self.x_d, dtype=float)
        if self.space != TASK:
            raise ValueError("regulation targets live in task space")

    def __call__(self, t: float):
        z = np.zeros_like(self.x_d)
        return self.x_d, z, z


@dataclass
class Sinusoid:
    """``offset + sin_amp * sin(omega t) + cos_amp * cos(omega t)`` per component.

    ``space`` is ``"task"`` (metres) or ``"joint"`` (radians). Calling the
    object returns position, velocity and acceleration at time ``t``.
    """

    offset: np.ndarray
    sin_amp: np.ndarray
    cos_amp: np.ndarray
    omega: float
    space: str = JOINT

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float)
        self.sin_amp = np.asarray(self.sin_amp, dtype=float)
        self.cos_amp = np.asarray(self.cos_amp, dtype=float)
        if self.space not in (TASK, JOINT):
            raise ValueError(f"unknown target space {self.space!r}")
        if not (self.offset.shape == self.sin_amp.shape == self.cos_amp.shape):
            raise ValueError("offset, sin_amp and cos_amp must have equal shapes")

    def __call__(self, t: float):
        w = self.omega
        s, c = np.sin(w * t), np.cos(w * t)
        pos = self.offset + self.sin_amp * s + self.cos_amp * c
        vel = w * (self.sin_amp * c - self.cos_amp * s)
        acc = -w * w * (self.sin_amp * s + self.cos_amp * c)
        return pos, vel, acc

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega
