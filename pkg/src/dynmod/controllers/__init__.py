"""Adaptive outer-loop command generators."""

from .base import (ControllerError, EstimateState, GainBoundViolated, GainConditionViolated,
                   Measurement, NonFiniteState, OuterConfig, OuterController,
                   SingularJacobianEstimate, project, project_rate)
from .joint import Composite, FlexibleJoint, JointDirect
from .pid import KinematicController, PIDOuter, kc_bound
from .task import FilterRegulator, ObserverRegulator, ObserverTracker

CONTROLLERS = {
    cls.kind: cls
    for cls in (FilterRegulator, ObserverRegulator, ObserverTracker, JointDirect,
                Composite, FlexibleJoint, PIDOuter, KinematicController)
}


def make_controller(kind: str, config: OuterConfig, initial: EstimateState | None = None, arm=None):
    try:
        cls = CONTROLLERS[kind]
    except KeyError:
        raise ValueError(f"unknown controller kind {kind!r}; expected one of {sorted(CONTROLLERS)}") from None
    return cls(config, initial, arm)


__all__ = [
    "CONTROLLERS", "Composite", "ControllerError", "EstimateState", "FilterRegulator",
    "FlexibleJoint", "GainBoundViolated", "GainConditionViolated", "JointDirect",
    "KinematicController", "Measurement", "NonFiniteState", "ObserverRegulator",
    "ObserverTracker", "OuterConfig", "OuterController", "PIDOuter",
    "SingularJacobianEstimate", "kc_bound", "make_controller", "project", "project_rate",
]
