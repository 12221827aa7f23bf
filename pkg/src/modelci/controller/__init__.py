from modelci.controller.controller import (
    Controller,
    ControllerConfig,
    PlacementRequest,
    SchedulingAction,
)

__all__ = ["Controller", "ControllerConfig", "PlacementRequest", "SchedulingAction"]
