from .node import AomdvNode, RoutingConfig
from .policy import AOMDV, POLICIES, SD_AOMDV, SSD_AOMDV, MetricPolicy, MetricTriple, get_policy
from .table import PathRecord, RouteEntry, accept_advertisement, select_forward_path

__all__ = [
    "AOMDV", "POLICIES", "SD_AOMDV", "SSD_AOMDV", "AomdvNode", "MetricPolicy", "MetricTriple", "PathRecord",
    "RouteEntry", "RoutingConfig", "accept_advertisement", "get_policy", "select_forward_path",
]
