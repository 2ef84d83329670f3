"""Deadlock-free dynamic routing reconfiguration on channel dependency graphs."""

from .topology import (
    ChannelId,
    Network,
    NodeId,
    build_mesh,
    DELIVERY,
    INJECTION,
    NETWORK,
    PROCESSING,
    ROUTER,
)
from .routing import (
    ALGORITHMS,
    LocalRoutingFunction,
    RoutingFunction,
    is_connected,
    make_negative_first,
    make_odd_even,
    make_routing,
    make_xy,
    make_yx,
)
from .tcdg import (
    Dependency,
    Tcdg,
    build_tcdg,
    compose_next,
    is_predecessor,
    is_target_conforming,
    projection_acyclic,
    reverse_topological_ready,
    to_dot,
    to_edge_list,
)
from .engine import (
    LysneViolationError,
    ProtocolError,
    Reconfiguration,
    ReconfigOptions,
    Violation,
    run_reconfiguration,
    verify_lysne_conditions,
)
from .metrics import (
    ScenarioResult,
    drained_channel_ratio,
    halted_flow_ratio,
    summarize,
)

__all__ = [
    "ALGORITHMS",
    "ChannelId",
    "Dependency",
    "DELIVERY",
    "INJECTION",
    "LocalRoutingFunction",
    "LysneViolationError",
    "NETWORK",
    "Network",
    "NodeId",
    "PROCESSING",
    "ProtocolError",
    "ROUTER",
    "ReconfigOptions",
    "Reconfiguration",
    "RoutingFunction",
    "ScenarioResult",
    "Tcdg",
    "Violation",
    "build_mesh",
    "build_tcdg",
    "compose_next",
    "drained_channel_ratio",
    "halted_flow_ratio",
    "is_connected",
    "is_predecessor",
    "is_target_conforming",
    "make_negative_first",
    "make_odd_even",
    "make_routing",
    "make_xy",
    "make_yx",
    "projection_acyclic",
    "reverse_topological_ready",
    "run_reconfiguration",
    "summarize",
    "to_dot",
    "to_edge_list",
    "verify_lysne_conditions",
]
