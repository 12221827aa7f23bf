from modelci.mockserve.server import FaultScript, LatencyModel, MockServer

__all__ = ["FaultScript", "LatencyModel", "MockServer"]
