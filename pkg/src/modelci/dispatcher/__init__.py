from modelci.dispatcher.backends import (
    ContainerBackend,
    ExecutionBackend,
    ProcessBackend,
    ServingBackendTemplate,
)
from modelci.dispatcher.dispatcher import Dispatcher, ServiceInstance

__all__ = [
    "ContainerBackend",
    "Dispatcher",
    "ExecutionBackend",
    "ProcessBackend",
    "ServiceInstance",
    "ServingBackendTemplate",
]
